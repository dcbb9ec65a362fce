#include <logaction/checkpoint.hpp>
#include <logaction/encoder.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace logaction {

std::vector<const log_sequence*> pointers(const std::vector<log_sequence>& windows)
{
    std::vector<const log_sequence*> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(&w);
    return out;
}

std::vector<log_vector> export_vectors(const std::vector<log_sequence>& windows, const lstm_encoder<double>& enc,
                                       bool with_labels)
{
    std::vector<log_vector> rows;
    if (windows.empty()) return rows;
    const auto ptrs = pointers(windows);
    const matrix_type v = encode_windows<double>(enc, ptrs);
    rows.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        log_vector r;
        r.window_index = windows[i].window_index;
        r.origin = windows[i].origin;
        if (with_labels) r.label = windows[i].label;
        r.values = v.col(static_cast<Eigen::Index>(i));
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_vectors(const std::filesystem::path& path, const std::vector<log_vector>& rows, const std::string& digest)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vector table: " + path.string());
    out << "logaction-vectors v1 digest=" << digest << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.window_index << '\t' << to_string(r.origin) << '\t';
        if (r.label) {
            out << *r.label;
        } else {
            out << '-';
        }
        out << '\t';
        for (Eigen::Index i = 0; i < r.values.size(); ++i) out << (i ? " " : "") << r.values[i];
        out << '\n';
    }
}

std::vector<log_vector> read_vectors(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw load_error("cannot read vector table: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("logaction-vectors v1", 0) != 0) {
        throw load_error("not a vector table: " + path.string());
    }
    std::vector<log_vector> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        log_vector r;
        std::string origin, label;
        if (!(ss >> r.window_index >> origin >> label)) throw load_error("malformed vector row");
        r.origin = origin_from_string(origin);
        if (label != "-") r.label = std::stoi(label);
        std::vector<double> vals;
        double x;
        while (ss >> x) vals.push_back(x);
        r.values = const_map_vector_t<double>(vals.data(), static_cast<Eigen::Index>(vals.size()));
        rows.push_back(std::move(r));
    }
    return rows;
}

void save_encoder(const std::filesystem::path& path, const lstm_encoder<double>& enc, const discriminator<double>& disc,
                  int epoch, const std::string& digest)
{
    checkpoint c;
    c.meta = {{"kind", "encoder"},
              {"d_w", enc.input_dim()},
              {"hidden", enc.hidden()},
              {"layers", enc.layers()},
              {"r", enc.output_dim()},
              {"seed", enc.seed()},
              {"epoch", epoch},
              {"digest", digest}};
    c.arrays = {{"theta", enc.parameters()}, {"phi", disc.parameters()}};
    c.save(path);
}

std::pair<lstm_encoder<double>, discriminator<double>> load_encoder(const std::filesystem::path& path)
{
    const auto c = checkpoint::load(path);
    try {
        if (c.meta.at("kind") != "encoder") throw load_error("checkpoint is not an encoder: " + path.string());
        lstm_encoder<double> enc(c.meta.at("d_w"), c.meta.at("hidden"), c.meta.at("layers"), c.meta.at("seed"));
        const auto& theta = c.array("theta");
        const auto& phi = c.array("phi");
        if (theta.size() != enc.parameters().size() || phi.size() != enc.output_dim() + 1) {
            throw load_error("encoder checkpoint arrays do not match its dimensions");
        }
        enc.parameters() = theta;
        discriminator<double> disc(enc.output_dim());
        disc.parameters() = phi;
        return {std::move(enc), std::move(disc)};
    } catch (const nlohmann::json::exception& e) {
        throw load_error(std::string("bad encoder checkpoint metadata: ") + e.what());
    }
}

} // namespace logaction
