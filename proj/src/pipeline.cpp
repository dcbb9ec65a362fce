#include <logaction/pipeline.hpp>

namespace logaction {

namespace {
std::vector<int> labels_of(const std::vector<log_sequence>& ws)
{
    std::vector<int> out;
    out.reserve(ws.size());
    for (const auto& w : ws) out.push_back(w.label);
    return out;
}
} // namespace

std::vector<int> system_data::train_labels() const { return labels_of(train_windows); }
std::vector<int> system_data::test_labels() const { return labels_of(test_windows); }

std::vector<std::string> system_data::raw_lines(const log_sequence& w) const
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < w.length(); ++i) out.push_back(train_records.at(w.first_record + i).content);
    return out;
}

std::vector<std::string> system_data::template_lines(const log_sequence& w) const
{
    std::vector<std::string> out;
    for (auto id : w.events) out.push_back(miner.at(id).text());
    return out;
}

miner_config miner_settings(const experiment_config& cfg)
{
    return miner_config{cfg.miner_depth, cfg.miner_similarity, cfg.miner_max_children};
}

system_data prepare_system(const std::vector<raw_log_record>& records, const experiment_config& cfg,
                           origin_type origin, const embedding_backend& backend, embedding_cache* cache)
{
    system_data sys;
    sys.origin = origin;
    sys.miner = template_miner(miner_settings(cfg));
    std::vector<std::size_t> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(sys.miner.parse_record(r.content));

    auto split = temporal_split(records, cfg.split_ratio, cfg.gap_seconds);
    sys.train_records = std::move(split.train);
    sys.test_records = std::move(split.test);
    // train is a prefix of the input and test a suffix
    sys.train_template_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(sys.train_records.size()));
    sys.test_template_ids.assign(ids.end() - static_cast<std::ptrdiff_t>(sys.test_records.size()), ids.end());

    const auto embeddings = embed_corpus(sys.miner.templates(), backend, cache);
    sys.embeddings = std::make_shared<const matrix_type>(embedding_table(embeddings, backend.dimension()));

    const auto t = static_cast<std::size_t>(cfg.window_size);
    const auto s = static_cast<std::size_t>(cfg.stride);
    sys.train_windows = build_windows(sys.train_records, sys.train_template_ids, sys.embeddings, t, s, origin);
    sys.test_windows = build_windows(sys.test_records, sys.test_template_ids, sys.embeddings, t, s, origin);
    return sys;
}

std::vector<raw_log_record> load_system_records(const experiment_config& cfg, origin_type origin)
{
    const bool src = origin == origin_type::source;
    const auto& path = src ? cfg.source_path : cfg.target_path;
    const auto& format = src ? cfg.source_format : cfg.target_format;
    const auto& labels = src ? cfg.source_labels : cfg.target_labels;
    if (path.empty()) throw ingestion_error(std::string(to_string(origin)) + ".path is not configured");
    std::optional<std::filesystem::path> sidecar;
    if (!labels.empty()) sidecar = labels;
    return load_labeled_log(path, corpus_format_from_string(format), sidecar);
}

} // namespace logaction
