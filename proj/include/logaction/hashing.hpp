#pragma once
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace logaction {

// 64-bit FNV-1a. Used for stable digests and seed derivation; std::hash is
// not stable across standard library implementations.
class fnv1a
{
public:
    static constexpr std::uint64_t offset_basis = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t prime = 0x100000001b3ULL;

    void update(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= prime;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }

    template <class T>
    void update_value(const T& v) { update(&v, sizeof(T)); }

    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = offset_basis;
};

inline std::uint64_t hash_string(std::string_view s)
{
    fnv1a h;
    h.update(s);
    return h.digest();
}

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-stage seed: depends only on the global seed and the stage name, so
// adding a stage never shifts another stage's random stream.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage)
{
    return splitmix64(global_seed ^ splitmix64(hash_string(stage)));
}

inline std::string hex_digest(std::uint64_t d)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

} // namespace logaction
