#include <logaction/checkpoint.hpp>

#include <fstream>

namespace logaction {

namespace {
constexpr const char* checkpoint_tag = "logaction-checkpoint v1";
}

const vector_type& checkpoint::array(const std::string& name) const
{
    for (const auto& [n, v] : arrays) {
        if (n == name) return v;
    }
    throw load_error("checkpoint has no array named " + name);
}

void checkpoint::save(const std::filesystem::path& path) const
{
    auto m = meta;
    m["arrays"] = nlohmann::json::array();
    for (const auto& [name, v] : arrays) m["arrays"].push_back({{"name", name}, {"size", v.size()}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out << checkpoint_tag << '\n' << m.dump() << '\n';
    for (const auto& [name, v] : arrays) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write on checkpoint: " + path.string());
}

checkpoint checkpoint::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw load_error("cannot read checkpoint: " + path.string());
    std::string tag, meta_line;
    if (!std::getline(in, tag) || tag != checkpoint_tag) throw load_error("bad checkpoint tag in " + path.string());
    if (!std::getline(in, meta_line)) throw load_error("truncated checkpoint: " + path.string());
    checkpoint c;
    try {
        c.meta = nlohmann::json::parse(meta_line);
        for (const auto& a : c.meta.at("arrays")) {
            const auto size = a.at("size").get<Eigen::Index>();
            vector_type v(size);
            in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size * sizeof(double)));
            if (!in) throw load_error("truncated checkpoint payload: " + path.string());
            c.arrays.emplace_back(a.at("name").get<std::string>(), std::move(v));
        }
    } catch (const nlohmann::json::exception& e) {
        throw load_error(std::string("corrupted checkpoint metadata: ") + e.what());
    }
    c.meta.erase("arrays");
    return c;
}

} // namespace logaction
