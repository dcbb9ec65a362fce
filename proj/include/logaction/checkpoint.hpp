#pragma once
#include <logaction/types.hpp>

#include <filesystem>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

namespace logaction {

// Versioned parameter archive:
//   line 1: "logaction-checkpoint v1"
//   line 2: one-line JSON metadata, including "arrays": [{name, size}]
//   then the arrays as raw little-endian float64, in order.
struct checkpoint
{
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, vector_type>> arrays;

    const vector_type& array(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    static checkpoint load(const std::filesystem::path& path);
};

} // namespace logaction
