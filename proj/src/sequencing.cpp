#include <logaction/sequencing.hpp>

#include <fstream>
#include <sstream>

namespace logaction {

matrix_type log_sequence::matrix() const
{
    matrix_type m(static_cast<Eigen::Index>(events.size()), embeddings->cols());
    for (std::size_t i = 0; i < events.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = row(i);
    return m;
}

std::vector<log_sequence> build_windows(const std::vector<raw_log_record>& records,
                                        const std::vector<std::size_t>& template_ids,
                                        std::shared_ptr<const matrix_type> embeddings,
                                        std::size_t window_size,
                                        std::size_t stride,
                                        origin_type origin)
{
    if (window_size < 1 || stride < 1) throw contract_error("window size and stride must be >= 1");
    if (records.size() != template_ids.size()) throw contract_error("one template id per record required");
    for (auto id : template_ids) {
        if (!embeddings || static_cast<Eigen::Index>(id) >= embeddings->rows()) {
            throw contract_error("template id " + std::to_string(id) + " has no embedding");
        }
    }

    std::vector<log_sequence> out;
    if (records.size() < window_size) return out;
    const std::size_t count = (records.size() - window_size) / stride + 1;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t begin = k * stride;
        log_sequence w;
        w.embeddings = embeddings;
        w.origin = origin;
        w.window_index = k;
        w.first_record = begin;
        w.first_timestamp = records[begin].timestamp;
        w.last_timestamp = records[begin + window_size - 1].timestamp;
        w.events.assign(template_ids.begin() + static_cast<std::ptrdiff_t>(begin),
                        template_ids.begin() + static_cast<std::ptrdiff_t>(begin + window_size));
        for (std::size_t i = begin; i < begin + window_size; ++i) {
            if (records[i].is_anomalous) {
                w.label = 1;
                break;
            }
        }
        out.push_back(std::move(w));
    }
    return out;
}

std::map<origin_type, pool_counts> pool_stats(const std::vector<log_sequence>& windows)
{
    std::map<origin_type, pool_counts> out;
    for (const auto& w : windows) {
        auto& c = out[w.origin];
        (w.label ? c.anomalous : c.normal) += 1;
    }
    return out;
}

window_record to_record(const log_sequence& w, const std::string& split)
{
    return window_record{w.window_index, w.origin, split, w.label, w.events};
}

void write_windows(const std::filesystem::path& path, const std::vector<window_record>& rows, const std::string& digest)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write window table: " + path.string());
    out << "logaction-windows v1 digest=" << digest << '\n';
    for (const auto& r : rows) {
        out << r.window_index << '\t' << to_string(r.origin) << '\t' << r.split << '\t' << r.label << '\t';
        for (std::size_t i = 0; i < r.events.size(); ++i) out << (i ? " " : "") << r.events[i];
        out << '\n';
    }
}

std::vector<window_record> read_windows(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw load_error("cannot read window table: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("logaction-windows v1", 0) != 0) {
        throw load_error("not a window table: " + path.string());
    }
    std::vector<window_record> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        window_record r;
        std::string origin, ids;
        if (!(ss >> r.window_index >> origin >> r.split >> r.label)) throw load_error("malformed window row: " + line);
        r.origin = origin_from_string(origin);
        std::size_t id;
        while (ss >> id) r.events.push_back(id);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace logaction
