#pragma once
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace logaction {

struct raw_log_record
{
    std::size_t line_no = 0;          // 0-based physical line in the source file
    std::int64_t timestamp = 0;       // epoch seconds or monotone ordinal
    std::optional<std::string> alert_tag;
    std::string content;
    bool is_anomalous = false;

    bool operator==(const raw_log_record&) const = default;
};

enum class corpus_format
{
    alert_prefix,   // leading "-" marks a normal line, any other tag an anomaly
    sidecar_labels  // labels come from "<line_no> <0|1>" lines in a separate file
};

corpus_format corpus_format_from_string(const std::string& s);
const char* to_string(corpus_format f);

class ingestion_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class labeling_error : public std::runtime_error
{
public:
    labeling_error(std::size_t line_no, const std::string& what)
        : std::runtime_error(what), line_no_(line_no) {}
    std::size_t line_no() const { return line_no_; }

private:
    std::size_t line_no_;
};

class split_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct corpus_split
{
    std::vector<raw_log_record> train;
    std::vector<raw_log_record> test;
    std::vector<raw_log_record> dropped; // fell inside the gap window
    double gap_seconds = 0;
    double ratio = 0;
};

/// Loads one labeled log file. For corpus_format::sidecar_labels the label file
/// must be given and must cover every non-empty line.
std::vector<raw_log_record> load_labeled_log(
    const std::filesystem::path& path,
    corpus_format format,
    const std::optional<std::filesystem::path>& sidecar = std::nullopt);

/// Splits timestamp-sorted records into a leading train block and a trailing
/// test block. Records whose timestamp is below max(train) + gap_seconds are
/// dropped.
corpus_split temporal_split(const std::vector<raw_log_record>& records, double ratio, double gap_seconds);

/// Default sidecar for logs without an alert column: a line is anomalous when
/// one of its tokens is the level ERROR or FATAL.
std::vector<std::pair<std::size_t, int>> derive_severity_labels(const std::filesystem::path& log_path);

void write_sidecar(const std::filesystem::path& path, const std::vector<std::pair<std::size_t, int>>& labels);

} // namespace logaction
