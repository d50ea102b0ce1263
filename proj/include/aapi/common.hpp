#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace aapi {

// Error hierarchy shared across the library. Exit-code mapping lives in the CLI.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or axis mismatch between containers that must agree.
struct DimensionError : Error {
    using Error::Error;
};

/// Malformed configuration or input document.
struct ConfigError : Error {
    using Error::Error;
};

/// Non-finite values or otherwise broken numerics.
struct NumericError : Error {
    using Error::Error;
};

/// An iterative procedure exhausted its budget without stabilizing.
struct ConvergenceError : Error {
    using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent RNG stream derived from (seed, salt). Distinct salts give
/// decoupled streams, so optional components can be skipped without
/// shifting the draws of everything that follows.
inline std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t salt) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ salt));
}

inline double clamp(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace aapi
