#pragma once

// Shared vocabulary: time units, errors, random streams and seed derivation.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hybridsim {

using Seconds = std::int64_t;

inline constexpr Seconds kMinute = 60;
inline constexpr Seconds kHour = 3600;
inline constexpr Seconds kDay = 86400;
inline constexpr int kMinutesPerDay = 1440;

/// Raised for malformed or inconsistent model parameters. The message names
/// the offending cell or field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an operation is invoked outside its domain (zero-mean series,
/// zero total work, ...).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-run random stream. Every generator takes one of these by reference;
/// parallel runs each own a distinct instance.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(engine_);
    }

    std::int64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        return std::poisson_distribution<std::int64_t>(mean)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// NB2 draw with mean mu and variance mu + alpha mu^2, sampled as a
/// Gamma(1/alpha, alpha mu) mixture of Poissons. alpha == 0 is pure Poisson.
inline std::int64_t sample_nb2(double mu, double alpha, Rng& rng) {
    if (!(mu > 0.0) || !(alpha >= 0.0)) {
        throw DomainError("sample_nb2: requires mu > 0 and alpha >= 0");
    }
    if (alpha == 0.0) return rng.poisson(mu);
    const double lambda = rng.gamma(1.0 / alpha, alpha * mu);
    return rng.poisson(lambda);
}

namespace detail {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Stable substream seed for a (root, scope labels) path.
///
/// Algorithm: FNV-1a 64 over the root seed's 8 little-endian bytes, then over
/// each label's bytes followed by a 0xFF separator; the result is passed
/// through the splitmix64 finalizer. Pure function of its arguments.
inline std::uint64_t derive_seed(std::uint64_t root, const std::vector<std::string>& labels) {
    std::uint64_t h = detail::kFnvOffset;
    for (int i = 0; i < 8; ++i) {
        const char b = static_cast<char>((root >> (8 * i)) & 0xFF);
        h = detail::fnv1a(h, std::string_view(&b, 1));
    }
    for (const auto& label : labels) {
        h = detail::fnv1a(h, label);
        const char sep = static_cast<char>(0xFF);
        h = detail::fnv1a(h, std::string_view(&sep, 1));
    }
    return detail::splitmix64_finalize(h);
}

}  // namespace hybridsim
