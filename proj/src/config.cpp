#include <logaction/config.hpp>
#include <logaction/hashing.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace logaction {
namespace {

// shortest text that reads back to the same double
std::string format_double(double v)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text)
{
    T v{};
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw config_error(key, "not a number: '" + text + "'");
    return v;
}

struct key_spec
{
    std::string name;
    std::function<std::string(const experiment_config&)> get;
    std::function<void(experiment_config&, const std::string&)> set;
    std::function<void(const experiment_config&)> check;
};

template <class T>
key_spec numeric(std::string name, T experiment_config::*field, T lo, T hi, bool open_lo = false)
{
    return key_spec{
        name,
        [field](const experiment_config& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*field);
            else return std::to_string(c.*field);
        },
        [field, name](experiment_config& c, const std::string& v) { c.*field = parse_number<T>(name, v); },
        [field, name, lo, hi, open_lo](const experiment_config& c) {
            const T v = c.*field;
            const bool below = open_lo ? !(v > lo) : !(v >= lo);
            if (below || v > hi) {
                std::ostringstream ss;
                ss << "value " << v << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi << "]";
                throw config_error(name, ss.str());
            }
        }};
}

key_spec text(std::string name, std::string experiment_config::*field, std::vector<std::string> allowed = {})
{
    return key_spec{
        name,
        [field](const experiment_config& c) { return c.*field; },
        [field](experiment_config& c, const std::string& v) { c.*field = v; },
        [field, name, allowed](const experiment_config& c) {
            if (allowed.empty()) return;
            for (const auto& a : allowed) {
                if (c.*field == a) return;
            }
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw config_error(name, "'" + c.*field + "' is not one of: " + list);
        }};
}

const std::vector<key_spec>& registry()
{
    using C = experiment_config;
    static const std::vector<key_spec> specs = {
        numeric<int>("epochs", &C::epochs, 0, 100000),
        numeric<int>("batch_size", &C::batch_size, 1, 1 << 20),
        numeric<double>("learning_rate", &C::learning_rate, 0, 10, true),
        numeric<double>("clip_norm", &C::clip_norm, 0, 1e6),
        numeric<int>("refresh_epochs", &C::refresh_epochs, 0, 100000),
        numeric<int>("finetune_epochs", &C::finetune_epochs, 0, 100000),
        numeric<int>("encoder_layers", &C::encoder_layers, 1, 16),
        numeric<int>("encoder_hidden", &C::encoder_hidden, 1, 1 << 16),
        numeric<int>("classifier_input", &C::classifier_input, 1, 1 << 16),
        numeric<int>("classifier_hidden", &C::classifier_hidden, 1, 1 << 16),
        numeric<int>("classifier_layer", &C::classifier_layer, 1, 1 << 16),
        numeric<double>("energy_align_weight", &C::energy_align_weight, 0, 1e6),
        numeric<double>("first_sample_ratio", &C::first_sample_ratio, 0, 1, true),
        numeric<double>("active_ratio", &C::active_ratio, 0, 1),
        numeric<int>("rounds", &C::rounds, 0, 10000),
        text("selection.uncertainty_order", &C::uncertainty_order, {"least_margin", "literal_max_U"}),
        text("probability_rule", &C::probability_rule, {"energy_ratio", "boltzmann"}),
        numeric<int>("window_size", &C::window_size, 1, 1 << 20),
        numeric<int>("stride", &C::stride, 1, 1 << 20),
        text("embed_backend", &C::embed_backend, {"hashed", "lm"}),
        numeric<int>("d_w", &C::d_w, 1, 1 << 16),
        numeric<double>("split_ratio", &C::split_ratio, 0, 1, true),
        numeric<double>("gap_seconds", &C::gap_seconds, 0, 1e12),
        numeric<int>("miner.depth", &C::miner_depth, 3, 64),
        numeric<double>("miner.similarity", &C::miner_similarity, 0, 1, true),
        numeric<int>("miner.max_children", &C::miner_max_children, 2, 1 << 20),
        numeric<std::uint64_t>("seed", &C::seed, 0, UINT64_MAX),
        text("experiment_id", &C::experiment_id),
        text("source.path", &C::source_path),
        text("source.format", &C::source_format, {"alert-prefix", "sidecar-labels"}),
        text("source.labels", &C::source_labels),
        text("target.path", &C::target_path),
        text("target.format", &C::target_format, {"alert-prefix", "sidecar-labels"}),
        text("target.labels", &C::target_labels),
        text("lm.model", &C::lm_model),
        text("lm.endpoint", &C::lm_endpoint),
    };
    return specs;
}

const key_spec& lookup(const std::string& key)
{
    for (const auto& s : registry()) {
        if (s.name == key) return s;
    }
    throw config_error(key, "unknown configuration key");
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

const std::vector<std::string>& experiment_config::keys()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& s : registry()) out.push_back(s.name);
        return out;
    }();
    return names;
}

void experiment_config::set(const std::string& key, const std::string& value) { lookup(key).set(*this, value); }

std::string experiment_config::get(const std::string& key) const { return lookup(key).get(*this); }

std::string experiment_config::to_text() const
{
    std::string out;
    for (const auto& s : registry()) out += s.name + "=" + s.get(*this) + "\n";
    return out;
}

std::uint64_t experiment_config::digest() const { return hash_string(to_text()); }

std::string experiment_config::digest_hex() const { return hex_digest(digest()); }

void experiment_config::validate() const
{
    for (const auto& s : registry()) s.check(*this);
    if (classifier_input != encoder_hidden) {
        throw config_error("classifier_input", "must equal encoder_hidden (the log vector width)");
    }
    if (window_size < 1 || stride < 1) throw config_error("window_size", "window and stride must be positive");
}

experiment_config parse_config(const std::string& text)
{
    experiment_config cfg;
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("", "line " + std::to_string(n) + " is not key=value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

experiment_config load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw config_error("", "cannot read config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void save_config(const std::filesystem::path& path, const experiment_config& cfg)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path.string());
    out << "# logaction-config v1 digest=" << cfg.digest_hex() << '\n' << cfg.to_text();
}

} // namespace logaction
