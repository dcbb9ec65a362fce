#include <logaction/fixture.hpp>
#include <logaction/hashing.hpp>
#include <logaction/types.hpp>

#include <fstream>
#include <random>
#include <set>

namespace logaction {
namespace {

using rng_t = std::mt19937_64;

std::size_t pick(rng_t& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Pronounceable words from a private syllable set. Every word starts with a
// consonant cluster owned by this vocabulary, so different vocabularies never
// share a word.
std::vector<std::string> make_words(std::uint64_t vocabulary, std::size_t count)
{
    static const char* onsets[2][8] = {{"b", "d", "g", "k", "p", "t", "v", "z"},
                                       {"ch", "fl", "gr", "m", "n", "sh", "tr", "w"}};
    static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    static const char* codas[] = {"", "n", "r", "l", "x", "s"};
    const auto& own = onsets[vocabulary % 2];
    rng_t rng(derive_seed(vocabulary, "fixture-words"));
    std::set<std::string> seen;
    std::vector<std::string> words;
    while (words.size() < count) {
        std::string w = own[pick(rng, 8)];
        w += vowels[pick(rng, 7)];
        w += own[pick(rng, 8)];
        w += vowels[pick(rng, 7)];
        w += codas[pick(rng, 6)];
        if (seen.insert(w).second) words.push_back(w);
    }
    return words;
}

enum class slot
{
    word,
    number,
    address,
    hex
};

struct skeleton
{
    std::vector<std::string> words; // empty string marks a parameter slot
    std::vector<slot> kinds;
};

std::string render(const skeleton& s, rng_t& rng)
{
    std::string out;
    for (std::size_t i = 0; i < s.words.size(); ++i) {
        if (!out.empty()) out += ' ';
        switch (s.kinds[i]) {
        case slot::word: out += s.words[i]; break;
        case slot::number: out += std::to_string(pick(rng, 100000)); break;
        case slot::address:
            out += "10." + std::to_string(pick(rng, 256)) + '.' + std::to_string(pick(rng, 256)) + '.' +
                   std::to_string(pick(rng, 256));
            break;
        case slot::hex: {
            char buf[24];
            std::snprintf(buf, sizeof(buf), "0x%08llx", static_cast<unsigned long long>(rng() & 0xffffffffULL));
            out += buf;
            break;
        }
        }
    }
    return out;
}

skeleton make_skeleton(rng_t& rng, const std::vector<std::string>& words, const std::vector<std::string>& keywords,
                       std::size_t private_words)
{
    skeleton s;
    auto add = [&s](std::string w, slot k) {
        s.words.push_back(std::move(w));
        s.kinds.push_back(k);
    };
    for (std::size_t i = 0; i < private_words; ++i) add(words[pick(rng, words.size())], slot::word);
    for (const auto& k : keywords) {
        const auto at = pick(rng, s.words.size() + 1);
        s.words.insert(s.words.begin() + static_cast<std::ptrdiff_t>(at), k);
        s.kinds.insert(s.kinds.begin() + static_cast<std::ptrdiff_t>(at), slot::word);
    }
    const slot params[] = {slot::number, slot::address, slot::hex};
    const auto n_params = 1 + pick(rng, 2);
    for (std::size_t i = 0; i < n_params; ++i) add("", params[pick(rng, 3)]);
    return s;
}

} // namespace

const std::vector<std::vector<std::string>>& fixture_anomaly_keywords()
{
    static const std::vector<std::vector<std::string>> kinds = {
        {"error", "failed", "abort"},        {"fatal", "exception", "unhandled"},
        {"timeout", "refused", "unreachable"}, {"corrupted", "checksum", "mismatch"},
        {"panic", "halted", "dump"},          {"denied", "violation", "forbidden"},
    };
    return kinds;
}

const std::vector<std::string>& fixture_common_words()
{
    static const std::vector<std::string> words = {
        "info",    "started", "completed", "session", "request", "ok",      "connected", "received",
        "sent",    "opened",  "closed",    "user",    "job",     "task",    "queue",     "update",
        "loaded",  "saved",   "heartbeat", "sync",    "ready",   "stopped", "created",   "registered",
    };
    return words;
}

fixture_system fixture_source()
{
    fixture_system s;
    s.name = "source";
    s.vocabulary = 0;
    s.anomaly_rate = 0.2;
    s.anomaly_kinds = {0, 1, 2, 3};
    return s;
}

fixture_system fixture_target()
{
    fixture_system s;
    s.name = "target";
    s.vocabulary = 1;
    s.anomaly_rate = 0.05;
    s.anomaly_kinds = {0, 2, 4, 5};
    s.decoy_templates = 3;
    s.start_time = 1700000000;
    return s;
}

experiment_config fixture_config()
{
    experiment_config cfg;
    cfg.d_w = 64;
    cfg.encoder_hidden = 32;
    cfg.classifier_input = 32;
    cfg.classifier_hidden = 16;
    cfg.classifier_layer = 16;
    cfg.window_size = 10;
    cfg.stride = 10;
    cfg.epochs = 30;
    cfg.batch_size = 64;
    cfg.refresh_epochs = 10;
    cfg.finetune_epochs = 10;
    cfg.experiment_id = "fixture";
    return cfg;
}

std::vector<raw_log_record> generate_fixture(const fixture_system& sys, std::uint64_t seed)
{
    if (sys.block == 0 || sys.windows == 0 || sys.normal_templates == 0 || sys.workflows == 0 ||
        sys.anomaly_variants == 0 || sys.anomaly_lines == 0) throw contract_error("empty fixture system");
    const auto words = make_words(sys.vocabulary, 400);
    const auto& keywords = fixture_anomaly_keywords();

    // the layout of the system is fixed by its vocabulary; only the stream depends on seed
    rng_t layout(derive_seed(sys.vocabulary, "fixture-layout"));
    std::vector<skeleton> normal;
    const auto& common = fixture_common_words();
    for (std::size_t i = 0; i < sys.normal_templates; ++i) {
        std::vector<std::string> shared;
        for (std::size_t c = 0; c < sys.normal_common_words; ++c) shared.push_back(common[pick(layout, common.size())]);
        normal.push_back(make_skeleton(layout, words, shared, sys.normal_private_words));
    }
    for (std::size_t i = 0; i < sys.decoy_templates; ++i) {
        const auto& kind = keywords[static_cast<std::size_t>(sys.anomaly_kinds[i % sys.anomaly_kinds.size()])];
        normal.push_back(make_skeleton(layout, words, {kind[0]}, 4 + pick(layout, 3)));
    }
    std::vector<std::vector<skeleton>> anomalies;
    for (int k : sys.anomaly_kinds) {
        std::vector<skeleton> variants;
        for (std::size_t v = 0; v < sys.anomaly_variants; ++v) variants.push_back(make_skeleton(layout, words, keywords.at(static_cast<std::size_t>(k)), pick(layout, 2)));
        anomalies.push_back(std::move(variants));
    }
    // normal traffic follows a handful of fixed workflows
    std::vector<std::vector<std::size_t>> workflows(sys.workflows);
    for (auto& w : workflows) {
        const auto len = 4 + pick(layout, 5);
        for (std::size_t i = 0; i < len; ++i) w.push_back(pick(layout, normal.size()));
    }

    rng_t rng(derive_seed(seed, "fixture-stream-" + sys.name));
    std::bernoulli_distribution anomalous(sys.anomaly_rate);
    std::vector<raw_log_record> out;
    out.reserve(sys.windows * sys.block);
    std::size_t flow = pick(rng, workflows.size()), step = 0;
    for (std::size_t b = 0; b < sys.windows; ++b) {
        std::vector<raw_log_record> block;
        for (std::size_t i = 0; i < sys.block; ++i) {
            if (step >= workflows[flow].size()) {
                flow = pick(rng, workflows.size());
                step = 0;
            }
            raw_log_record r;
            r.content = render(normal[workflows[flow][step++]], rng);
            r.alert_tag = "-";
            block.push_back(std::move(r));
        }
        if (anomalous(rng)) {
            const auto kind = pick(rng, anomalies.size());
            const auto hits = 1 + pick(rng, sys.anomaly_lines);
            for (std::size_t h = 0; h < hits; ++h) {
                auto& r = block[pick(rng, block.size())];
                r.content = render(anomalies[kind][pick(rng, anomalies[kind].size())], rng);
                r.is_anomalous = true;
                r.alert_tag = "ALERT" + std::to_string(sys.anomaly_kinds[kind]);
            }
        }
        for (auto& r : block) {
            r.line_no = out.size();
            r.timestamp = sys.start_time + static_cast<std::int64_t>(out.size());
            out.push_back(std::move(r));
        }
    }
    return out;
}

void write_alert_prefix(const std::filesystem::path& path, const std::vector<raw_log_record>& records)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) out << (r.is_anomalous ? r.alert_tag.value_or("ALERT") : "-") << ' ' << r.timestamp << ' ' << r.content << '\n';
}

void write_sidecar_log(const std::filesystem::path& log_path, const std::filesystem::path& label_path,
                       const std::vector<raw_log_record>& records)
{
    std::ofstream log(log_path), labels(label_path);
    if (!log || !labels) throw std::runtime_error("cannot write fixture files next to " + log_path.string());
    for (std::size_t i = 0; i < records.size(); ++i) {
        log << records[i].timestamp << ' ' << records[i].content << '\n';
        labels << i << ' ' << (records[i].is_anomalous ? 1 : 0) << '\n';
    }
}

} // namespace logaction
