#include <logaction/corpus.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace logaction {
namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ingestion_error("cannot read log file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    if (in.bad()) throw ingestion_error("read failure: " + path.string());
    return lines;
}

bool is_blank(const std::string& s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::optional<std::int64_t> parse_epoch(std::string_view tok)
{
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) return std::nullopt;
    return v;
}

// "YYYY-MM-DD HH:MM:SS[,mmm]" prefix, interpreted as UTC.
std::optional<std::int64_t> parse_datetime(const std::string& date, const std::string& time)
{
    std::tm tm{};
    if (std::sscanf(date.c_str(), "%4d-%2d-%2d", &tm.tm_year, &tm.tm_mon, &tm.tm_mday) != 3) return std::nullopt;
    if (std::sscanf(time.c_str(), "%2d:%2d:%2d", &tm.tm_hour, &tm.tm_min, &tm.tm_sec) != 3) return std::nullopt;
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    return static_cast<std::int64_t>(timegm(&tm));
}

std::string rest_after(std::istringstream& ss)
{
    std::string rest;
    std::getline(ss, rest);
    auto first = rest.find_first_not_of(" \t");
    return first == std::string::npos ? std::string() : rest.substr(first);
}

std::unordered_map<std::size_t, int> read_sidecar(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ingestion_error("cannot read label file: " + path.string());
    std::unordered_map<std::size_t, int> labels;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (is_blank(line)) continue;
        std::istringstream ss(line);
        long long line_no;
        int label;
        if (!(ss >> line_no >> label) || line_no < 0 || (label != 0 && label != 1)) {
            throw ingestion_error("malformed label line " + std::to_string(n) + " in " + path.string());
        }
        labels[static_cast<std::size_t>(line_no)] = label;
    }
    return labels;
}

} // namespace

corpus_format corpus_format_from_string(const std::string& s)
{
    if (s == "alert-prefix") return corpus_format::alert_prefix;
    if (s == "sidecar-labels") return corpus_format::sidecar_labels;
    throw std::invalid_argument("unknown corpus format: " + s);
}

const char* to_string(corpus_format f)
{
    return f == corpus_format::alert_prefix ? "alert-prefix" : "sidecar-labels";
}

std::vector<raw_log_record> load_labeled_log(
    const std::filesystem::path& path,
    corpus_format format,
    const std::optional<std::filesystem::path>& sidecar)
{
    const auto lines = read_lines(path);
    std::unordered_map<std::size_t, int> labels;
    if (format == corpus_format::sidecar_labels) {
        if (!sidecar) throw ingestion_error("sidecar-labels format requires a label file for " + path.string());
        labels = read_sidecar(*sidecar);
    }

    std::vector<raw_log_record> out;
    std::int64_t last_ts = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        if (is_blank(line)) continue;
        raw_log_record rec;
        rec.line_no = i;
        std::istringstream ss(line);
        std::optional<std::int64_t> ts;

        if (format == corpus_format::alert_prefix) {
            std::string tag, stamp;
            ss >> tag >> stamp;
            rec.alert_tag = tag;
            rec.is_anomalous = tag != "-";
            ts = parse_epoch(stamp);
            rec.content = rest_after(ss);
            if (!ts) rec.content = stamp + (rec.content.empty() ? "" : " " + rec.content);
        } else {
            std::string first, second;
            ss >> first;
            if ((ts = parse_epoch(first))) {
                rec.content = rest_after(ss);
            } else {
                ss >> second;
                ts = parse_datetime(first, second);
                rec.content = ts ? rest_after(ss) : line.substr(line.find_first_not_of(" \t"));
            }
            auto it = labels.find(i);
            if (it == labels.end()) {
                throw labeling_error(i, "label file has no entry for line " + std::to_string(i) + " of " + path.string());
            }
            rec.is_anomalous = it->second == 1;
        }
        // Malformed stamps inherit the previous record's time.
        rec.timestamp = ts ? *ts : last_ts;
        last_ts = rec.timestamp;
        out.push_back(std::move(rec));
    }
    return out;
}

corpus_split temporal_split(const std::vector<raw_log_record>& records, double ratio, double gap_seconds)
{
    if (!(ratio > 0 && ratio < 1)) throw split_error("split ratio must lie in (0,1)");
    if (gap_seconds < 0) throw split_error("gap must be non-negative");
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].timestamp < records[i - 1].timestamp) throw split_error("records are not timestamp-sorted");
    }
    const auto n = records.size();
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) throw split_error("split leaves the train or test side empty");

    corpus_split split;
    split.ratio = ratio;
    split.gap_seconds = gap_seconds;
    split.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_train));
    const double boundary = static_cast<double>(split.train.back().timestamp) + gap_seconds;
    for (std::size_t i = n_train; i < n; ++i) {
        if (static_cast<double>(records[i].timestamp) < boundary) {
            split.dropped.push_back(records[i]);
        } else {
            split.test.push_back(records[i]);
        }
    }
    if (split.test.empty()) throw split_error("time gap consumes every test record");
    return split;
}

std::vector<std::pair<std::size_t, int>> derive_severity_labels(const std::filesystem::path& log_path)
{
    const auto lines = read_lines(log_path);
    std::vector<std::pair<std::size_t, int>> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        std::istringstream ss(lines[i]);
        std::string tok;
        int label = 0;
        while (ss >> tok) {
            if (tok == "ERROR" || tok == "FATAL") {
                label = 1;
                break;
            }
        }
        out.emplace_back(i, label);
    }
    return out;
}

void write_sidecar(const std::filesystem::path& path, const std::vector<std::pair<std::size_t, int>>& labels)
{
    std::ofstream out(path);
    if (!out) throw ingestion_error("cannot write label file: " + path.string());
    for (auto [line_no, label] : labels) out << line_no << ' ' << label << '\n';
}

} // namespace logaction
