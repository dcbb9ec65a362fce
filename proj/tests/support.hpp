#pragma once
#include <logaction/evaluation.hpp>
#include <logaction/fixture.hpp>

#include <filesystem>
#include <string>
#include <unistd.h>

namespace logaction::test {

// Small enough that a full campaign trains in about a second.
inline experiment_config tiny_config()
{
    experiment_config cfg;
    cfg.d_w = 8;
    cfg.encoder_hidden = 8;
    cfg.classifier_input = 8;
    cfg.classifier_hidden = 8;
    cfg.classifier_layer = 8;
    cfg.window_size = 10;
    cfg.stride = 10;
    cfg.epochs = 2;
    cfg.batch_size = 64;
    cfg.refresh_epochs = 1;
    cfg.finetune_epochs = 2;
    cfg.active_ratio = 0.02;
    cfg.rounds = 2;
    cfg.experiment_id = "tiny";
    return cfg;
}

inline fixture_system tiny_system(fixture_system sys, std::size_t windows = 300)
{
    sys.windows = windows;
    return sys;
}

inline system_pair tiny_pair(const experiment_config& cfg = tiny_config())
{
    return prepare_pair(generate_fixture(tiny_system(fixture_source()), 3), generate_fixture(tiny_system(fixture_target()), 3), cfg);
}

// Fresh directory under the system temp dir, removed on destruction.
class temp_dir
{
public:
    explicit temp_dir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("logaction-test-" + name + "-" + std::to_string(::getpid())))
    {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~temp_dir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace logaction::test
