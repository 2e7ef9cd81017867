#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hetfl {

inline constexpr std::string_view kVersion = "0.1.0";

/// Error categories map onto CLI exit codes (config = 1, infeasible = 2).
enum class ErrorKind { Config, Infeasible, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of tags.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
    std::uint64_t h = splitmix64(base);
    ((h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(tags) + 0x632be59bd9b4e019ULL))), ...);
    return h;
}

template <typename... Tags>
Rng make_stream(std::uint64_t base, Tags... tags) {
    return Rng{derive_seed(base, tags...)};
}

// Stream tags, one per consumer, so that policies never perturb each other's draws.
enum StreamTag : std::uint64_t {
    kTagPlacement = 1,
    kTagData = 2,
    kTagAccess = 3,
    kTagBackhaul = 4,
    kTagMobility = 5,
    kTagPolicy = 6,
    kTagSchedule = 7,
    kTagTrain = 8,
    kTagInit = 9,
    kTagTest = 10,
};

/// Round-trippable decimal form used for every float written to disk.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace hetfl
