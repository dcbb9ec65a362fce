#pragma once
#include <logaction/config.hpp>

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

namespace logaction {

// Output root: $LOGACTION_RUN_DIR, else ./runs.
std::filesystem::path run_root();

class run_locked : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// One directory per experiment_id holding the config copy, stage artifacts,
/// per-round checkpoints, score tables, and manifests. The directory is held
/// through an advisory lock on ".lock" for the lifetime of the object.
class run_directory
{
public:
    run_directory(const experiment_config& cfg, const std::filesystem::path& root = run_root());
    ~run_directory();
    run_directory(const run_directory&) = delete;
    run_directory& operator=(const run_directory&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

    /// Throws stage_error(stage, "run stage <upstream> first") unless
    /// `artifact` exists.
    void require(const std::string& artifact, const std::string& upstream, const std::string& stage) const;

private:
    std::filesystem::path path_;
    int lock_fd_ = -1;
};

/// The logaction command line. Returns the process exit status.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace logaction
