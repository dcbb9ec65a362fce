#pragma once
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace logaction {

inline constexpr std::string_view wildcard_token = "<*>";

struct miner_config
{
    int tree_depth = 4;
    double similarity_threshold = 0.4;
    int max_children = 100;

    void validate() const;
    bool operator==(const miner_config&) const = default;
};

struct log_template
{
    std::size_t template_id = 0;
    std::vector<std::string> tokens;
    std::string example_line;
    std::size_t match_count = 0;

    std::string text() const;
    bool operator==(const log_template&) const = default;
};

// Ordered parameter masks applied to each whitespace token before mining.
// A token is replaced by the wildcard when it fully matches one of these.
struct masking_rule
{
    std::string name;
    std::string pattern;
};
const std::vector<masking_rule>& masking_rules();

std::vector<std::string> tokenize(std::string_view content);

// Fixed-depth parse tree template miner (Drain).
//
// The first tree level is keyed by token count, the next tree_depth - 2
// levels by leading tokens. Leaves hold template ids; a record joins the most
// similar leaf template when the share of position-wise equal tokens reaches
// the similarity threshold, else it starts a new template.
//
// parse_record mutates the tree; callers serialize writers.
class template_miner
{
public:
    explicit template_miner(miner_config config = {});

    std::size_t parse_record(std::string_view content);

    const std::vector<log_template>& templates() const { return templates_; }
    const log_template& at(std::size_t template_id) const { return templates_.at(template_id); }
    const miner_config& config() const { return config_; }
    std::size_t parse_count() const { return parse_count_; }

    // digest, when given, records the producing config
    void snapshot(const std::filesystem::path& path, const std::string& digest = {}) const;
    static template_miner restore(const std::filesystem::path& path);

    std::string serialize(const std::string& digest = {}) const;
    static template_miner deserialize(const std::string& text);

    // share of equal positions, and the number of wildcard positions in `tmpl`
    static std::pair<double, int> similarity(const std::vector<std::string>& tmpl,
                                             const std::vector<std::string>& tokens);

private:
    struct tree_node
    {
        std::map<std::string, std::size_t> children;
        std::vector<std::size_t> clusters;
    };

    std::size_t descend(const std::vector<std::string>& tokens);
    std::size_t add_child(std::size_t parent, const std::string& key);

    miner_config config_;
    std::vector<tree_node> nodes_;
    std::vector<log_template> templates_;
    std::size_t parse_count_ = 0;
};

} // namespace logaction
