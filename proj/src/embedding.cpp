#include <logaction/embedding.hpp>
#include <logaction/hashing.hpp>

#include <cmath>
#include <fstream>
#include <httplib.h>
#include <iomanip>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>

namespace logaction {
namespace {

constexpr std::uint64_t wildcard_salt = 0x5eed'0000'2a2a'2a2aULL;

// Box-Muller over mt19937_64 bits; independent of the standard library's
// distribution implementations.
class gaussian_stream
{
public:
    explicit gaussian_stream(std::uint64_t seed) : engine_(seed) {}

    double next()
    {
        if (spare_) {
            double s = *spare_;
            spare_.reset();
            return s;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        return r * std::cos(a);
    }

private:
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

std::string join_tokens(const std::vector<std::string>& tokens)
{
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

} // namespace

hashed_token_backend::hashed_token_backend(int dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed)
{
    if (dimension < 1) throw std::invalid_argument("embedding dimension must be positive");
}

std::string hashed_token_backend::backend_id() const
{
    return "hashed-token/v1/d=" + std::to_string(dimension_) + "/seed=" + std::to_string(seed_);
}

vector_type hashed_token_backend::token_vector(std::string_view token) const
{
    const std::uint64_t key = token == wildcard_token ? splitmix64(seed_ ^ wildcard_salt)
                                                      : splitmix64(seed_ ^ hash_string(token));
    gaussian_stream g(key);
    vector_type v(dimension_);
    for (int i = 0; i < dimension_; ++i) v[i] = g.next();
    return v / v.norm();
}

vector_type hashed_token_backend::embed_tokens(const std::vector<std::string>& tokens) const
{
    if (tokens.empty()) return token_vector(wildcard_token);
    vector_type sum = vector_type::Zero(dimension_);
    for (const auto& t : tokens) sum += token_vector(t);
    return sum / static_cast<double>(tokens.size());
}

language_model_backend::language_model_backend(language_model_config config) : config_(std::move(config))
{
    if (config_.dimension < 1) throw std::invalid_argument("embedding dimension must be positive");
}

std::string language_model_backend::backend_id() const
{
    return "lm/" + config_.model + "/d=" + std::to_string(config_.dimension) + "/seed=" + std::to_string(config_.seed);
}

const matrix_type& language_model_backend::projection(int model_dim) const
{
    std::lock_guard lock(mutex_);
    if (!projection_ || projection_->cols() != model_dim) {
        gaussian_stream g(derive_seed(config_.seed, "lm-projection"));
        matrix_type p(config_.dimension, model_dim);
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, j) = g.next();
        }
        projection_ = p / std::sqrt(static_cast<double>(config_.dimension));
    }
    return *projection_;
}

vector_type language_model_backend::embed_tokens(const std::vector<std::string>& tokens) const
{
    const auto& ep = config_.endpoint;
    const auto scheme_end = ep.find("://");
    const auto path_start = ep.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string host = path_start == std::string::npos ? ep : ep.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : ep.substr(path_start);

    httplib::Client client(host);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    nlohmann::json body = {{"model", config_.model}, {"text", join_tokens(tokens)}};
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
        throw embedding_error("embedding backend " + backend_id() + " unavailable at " + ep + ": " +
                              httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw embedding_error("embedding backend " + backend_id() + " returned HTTP " + std::to_string(res->status));
    }

    vector_type pooled;
    try {
        const auto j = nlohmann::json::parse(res->body);
        if (j.contains("embedding")) {
            const auto v = j.at("embedding").get<std::vector<double>>();
            pooled = const_map_vector_t<double>(v.data(), static_cast<Eigen::Index>(v.size()));
        } else {
            const auto states = j.at("token_states").get<std::vector<std::vector<double>>>();
            if (states.empty()) throw embedding_error("embedding backend " + backend_id() + " returned no states");
            pooled = vector_type::Zero(static_cast<Eigen::Index>(states.front().size()));
            for (const auto& s : states) {
                if (s.size() != states.front().size()) throw embedding_error("ragged token states from " + backend_id());
                pooled += const_map_vector_t<double>(s.data(), static_cast<Eigen::Index>(s.size()));
            }
            pooled /= static_cast<double>(states.size());
        }
    } catch (const nlohmann::json::exception& e) {
        throw embedding_error("malformed response from embedding backend " + backend_id() + ": " + e.what());
    }
    if (pooled.size() == 0 || !pooled.allFinite()) {
        throw embedding_error("embedding backend " + backend_id() + " returned an empty or non-finite vector");
    }
    if (pooled.size() == config_.dimension) return pooled;
    return projection(static_cast<int>(pooled.size())) * pooled;
}

std::unique_ptr<embedding_backend> make_backend(const std::string& name, int dimension, std::uint64_t seed,
                                                const language_model_config& lm)
{
    if (name == "hashed") return std::make_unique<hashed_token_backend>(dimension, seed);
    if (name == "lm") {
        auto cfg = lm;
        cfg.dimension = dimension;
        cfg.seed = seed;
        return std::make_unique<language_model_backend>(cfg);
    }
    throw std::invalid_argument("unknown embedding backend: " + name);
}

std::optional<vector_type> embedding_cache::find(const std::string& backend_id, const std::string& text) const
{
    auto it = entries_.find({backend_id, text});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void embedding_cache::insert(const std::string& backend_id, const std::string& text, const vector_type& v)
{
    entries_[{backend_id, text}] = v;
}

void embedding_cache::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embedding cache: " + path.string());
    out << "logaction-embcache v1\n" << std::setprecision(17);
    for (const auto& [key, v] : entries_) {
        out << key.first << '\t' << key.second << '\t';
        for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
        out << '\n';
    }
}

embedding_cache embedding_cache::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw load_error("cannot read embedding cache: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "logaction-embcache v1") {
        throw load_error("not an embedding cache (bad format tag): " + path.string());
    }
    embedding_cache cache;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto a = line.find('\t');
        const auto b = line.find('\t', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos) throw load_error("malformed embedding cache line");
        std::istringstream ss(line.substr(b + 1));
        std::vector<double> vals;
        double x;
        while (ss >> x) vals.push_back(x);
        cache.insert(line.substr(0, a), line.substr(a + 1, b - a - 1),
                     const_map_vector_t<double>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    return cache;
}

event_embedding embed_template(const log_template& tmpl, const embedding_backend& backend)
{
    event_embedding e;
    e.template_id = tmpl.template_id;
    e.backend_id = backend.backend_id();
    e.vector = backend.embed_tokens(tmpl.tokens);
    if (e.vector.size() != backend.dimension() || !e.vector.allFinite()) {
        throw embedding_error("backend " + e.backend_id + " produced an invalid vector for template " +
                              std::to_string(tmpl.template_id));
    }
    return e;
}

std::map<std::size_t, event_embedding> embed_corpus(const std::vector<log_template>& templates,
                                                    const embedding_backend& backend,
                                                    embedding_cache* cache)
{
    std::map<std::size_t, event_embedding> out;
    const auto id = backend.backend_id();
    for (const auto& t : templates) {
        const auto text = t.text();
        if (cache) {
            if (auto hit = cache->find(id, text)) {
                out[t.template_id] = event_embedding{t.template_id, *hit, id};
                continue;
            }
        }
        try {
            auto e = embed_template(t, backend);
            if (cache) cache->insert(id, text, e.vector);
            out[t.template_id] = std::move(e);
        } catch (const embedding_error& e) {
            throw embedding_error("template " + std::to_string(t.template_id) + " \"" + text + "\": " + e.what());
        }
    }
    return out;
}

matrix_type embedding_table(const std::map<std::size_t, event_embedding>& embeddings, int dimension)
{
    const auto rows = embeddings.empty() ? 0 : static_cast<Eigen::Index>(embeddings.rbegin()->first + 1);
    matrix_type table = matrix_type::Zero(rows, dimension);
    for (const auto& [id, e] : embeddings) {
        if (e.vector.size() != dimension) throw shape_error("embedding width does not match table width");
        table.row(static_cast<Eigen::Index>(id)) = e.vector.transpose();
    }
    return table;
}

} // namespace logaction
