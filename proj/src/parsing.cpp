#include <logaction/parsing.hpp>
#include <logaction/types.hpp>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <regex>
#include <sstream>

namespace logaction {
namespace {

constexpr const char* miner_format = "logaction-miner";
constexpr int miner_version = 1;

bool has_digit(std::string_view s)
{
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

const std::vector<std::regex>& compiled_rules()
{
    static const std::vector<std::regex> rules = [] {
        std::vector<std::regex> out;
        for (const auto& r : masking_rules()) out.emplace_back(r.pattern, std::regex::optimize);
        return out;
    }();
    return rules;
}

} // namespace

void miner_config::validate() const
{
    if (tree_depth < 3) throw std::invalid_argument("tree_depth must be >= 3");
    if (!(similarity_threshold > 0 && similarity_threshold <= 1)) {
        throw std::invalid_argument("similarity_threshold must lie in (0,1]");
    }
    if (max_children < 2) throw std::invalid_argument("max_children must be >= 2");
}

std::string log_template::text() const
{
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

const std::vector<masking_rule>& masking_rules()
{
    static const std::vector<masking_rule> rules = {
        {"ipv4", R"(\d{1,3}(\.\d{1,3}){3}(:\d+)?)"},
        {"hex", R"(0[xX][0-9a-fA-F]+)"},
        {"number", R"([-+]?\d+(\.\d+)?)"},
        {"long-hex", R"([0-9a-fA-F]{8,})"},
    };
    return rules;
}

std::vector<std::string> tokenize(std::string_view content)
{
    std::vector<std::string> tokens;
    std::istringstream ss{std::string(content)};
    std::string tok;
    while (ss >> tok) {
        // every rule needs a digit to match
        if (has_digit(tok)) {
            for (const auto& re : compiled_rules()) {
                if (std::regex_match(tok, re)) {
                    tok = wildcard_token;
                    break;
                }
            }
        }
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

template_miner::template_miner(miner_config config) : config_(config)
{
    config_.validate();
    nodes_.emplace_back();
}

std::pair<double, int> template_miner::similarity(const std::vector<std::string>& tmpl,
                                                  const std::vector<std::string>& tokens)
{
    if (tmpl.size() != tokens.size()) return {0.0, 0};
    if (tmpl.empty()) return {1.0, 0};
    int equal = 0;
    int params = 0;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] == wildcard_token) {
            ++params;
        } else if (tmpl[i] == tokens[i]) {
            ++equal;
        }
    }
    return {static_cast<double>(equal) / static_cast<double>(tmpl.size()), params};
}

std::size_t template_miner::add_child(std::size_t parent, const std::string& key)
{
    const auto idx = nodes_.size();
    nodes_.emplace_back();
    nodes_[parent].children.emplace(key, idx);
    return idx;
}

std::size_t template_miner::descend(const std::vector<std::string>& tokens)
{
    const std::string wildcard(wildcard_token);
    const auto len_key = std::to_string(tokens.size());
    std::size_t node = 0;
    if (auto it = nodes_[0].children.find(len_key); it != nodes_[0].children.end()) {
        node = it->second;
    } else {
        node = add_child(0, len_key);
    }

    const auto max_children = static_cast<std::size_t>(config_.max_children);
    const auto layers = std::min<std::size_t>(static_cast<std::size_t>(config_.tree_depth - 2), tokens.size());
    for (std::size_t i = 0; i < layers; ++i) {
        const auto& tok = tokens[i];
        auto& children = nodes_[node].children;
        if (auto it = children.find(tok); it != children.end()) {
            node = it->second;
            continue;
        }
        auto wild = children.find(wildcard);
        if (has_digit(tok)) {
            node = wild != children.end() ? wild->second : add_child(node, wildcard);
        } else if (wild != children.end()) {
            node = children.size() < max_children ? add_child(node, tok) : wild->second;
        } else if (children.size() + 1 < max_children) {
            node = add_child(node, tok);
        } else {
            // last free slot becomes the catch-all
            node = add_child(node, wildcard);
        }
    }
    return node;
}

std::size_t template_miner::parse_record(std::string_view content)
{
    auto tokens = tokenize(content);
    const auto leaf = descend(tokens);
    ++parse_count_;

    std::size_t best = 0;
    double best_sim = -1;
    int best_params = -1;
    for (auto id : nodes_[leaf].clusters) {
        auto [sim, params] = similarity(templates_[id].tokens, tokens);
        if (sim > best_sim || (sim == best_sim && params > best_params)) {
            best = id;
            best_sim = sim;
            best_params = params;
        }
    }

    if (best_sim >= config_.similarity_threshold) {
        auto& t = templates_[best];
        for (std::size_t i = 0; i < t.tokens.size(); ++i) {
            if (t.tokens[i] != tokens[i]) t.tokens[i] = wildcard_token;
        }
        ++t.match_count;
        return best;
    }

    log_template t;
    t.template_id = templates_.size();
    t.tokens = std::move(tokens);
    t.example_line = std::string(content);
    t.match_count = 1;
    templates_.push_back(std::move(t));
    nodes_[leaf].clusters.push_back(templates_.back().template_id);
    return templates_.back().template_id;
}

std::string template_miner::serialize(const std::string& digest) const
{
    using nlohmann::json;
    json j;
    j["format"] = miner_format;
    j["version"] = miner_version;
    if (!digest.empty()) j["digest"] = digest;
    j["config"] = {{"tree_depth", config_.tree_depth},
                   {"similarity_threshold", config_.similarity_threshold},
                   {"max_children", config_.max_children}};
    j["parse_count"] = parse_count_;
    auto& ts = j["templates"] = json::array();
    for (const auto& t : templates_) {
        ts.push_back({{"id", t.template_id}, {"tokens", t.tokens}, {"example", t.example_line}, {"count", t.match_count}});
    }
    auto& ns = j["nodes"] = json::array();
    for (const auto& n : nodes_) {
        ns.push_back({{"children", n.children}, {"clusters", n.clusters}});
    }
    return j.dump(1);
}

template_miner template_miner::deserialize(const std::string& text)
{
    using nlohmann::json;
    try {
        const auto j = json::parse(text);
        if (j.at("format") != miner_format) throw load_error("not a template miner snapshot");
        if (j.at("version") != miner_version) {
            throw load_error("unsupported miner snapshot version " + j.at("version").dump());
        }
        miner_config cfg;
        cfg.tree_depth = j.at("config").at("tree_depth");
        cfg.similarity_threshold = j.at("config").at("similarity_threshold");
        cfg.max_children = j.at("config").at("max_children");
        template_miner m(cfg);
        m.parse_count_ = j.at("parse_count");
        for (const auto& t : j.at("templates")) {
            log_template lt;
            lt.template_id = t.at("id");
            lt.tokens = t.at("tokens").get<std::vector<std::string>>();
            lt.example_line = t.at("example");
            lt.match_count = t.at("count");
            if (lt.template_id != m.templates_.size()) throw load_error("template ids out of order");
            m.templates_.push_back(std::move(lt));
        }
        m.nodes_.clear();
        for (const auto& n : j.at("nodes")) {
            tree_node node;
            node.children = n.at("children").get<std::map<std::string, std::size_t>>();
            node.clusters = n.at("clusters").get<std::vector<std::size_t>>();
            m.nodes_.push_back(std::move(node));
        }
        if (m.nodes_.empty()) throw load_error("snapshot has no tree root");
        for (const auto& n : m.nodes_) {
            for (auto [k, c] : n.children) {
                if (c >= m.nodes_.size()) throw load_error("dangling tree node");
            }
            for (auto c : n.clusters) {
                if (c >= m.templates_.size()) throw load_error("dangling template id");
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw load_error(std::string("corrupted miner snapshot: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw load_error(std::string("invalid miner config in snapshot: ") + e.what());
    }
}

void template_miner::snapshot(const std::filesystem::path& path, const std::string& digest) const
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write miner snapshot: " + path.string());
    out << serialize(digest);
}

template_miner template_miner::restore(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw load_error("cannot read miner snapshot: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

} // namespace logaction
