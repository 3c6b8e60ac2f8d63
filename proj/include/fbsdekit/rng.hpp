#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random numbers: every draw is a pure function of
// (seed, path, stream, index), so path subsets are reproducible and
// generation order is irrelevant.
namespace fbsdekit::rng {

// Stream tags keep draws for different purposes statistically independent.
enum Stream : std::uint64_t {
    kBrownian = 0x9e3779b97f4a7c15ull,
    kJumpCount = 0xbf58476d1ce4e5b9ull,
    kJumpTime = 0x94d049bb133111ebull,
    kJumpMark = 0xd6e8feb86659fd93ull,
    kChecker = 0xa0761d6478bd642full,
};

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t path, std::uint64_t stream,
                         std::uint64_t index) {
    std::uint64_t k = mix64(seed ^ stream);
    k = mix64(k ^ path);
    k = mix64(k ^ index);
    return k;
}

// Uniform in (0,1), never exactly 0 or 1.
inline double uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t stream,
                      std::uint64_t index) {
    const std::uint64_t bits = key(seed, path, stream, index);
    return (double(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Inverse of the standard normal CDF (Acklam's rational approximation,
// relative error below 1.2e-9 over (0,1)).
inline double normal_icdf(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > 1 - plow) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

inline double normal(std::uint64_t seed, std::uint64_t path, std::uint64_t stream,
                     std::uint64_t index) {
    return normal_icdf(uniform(seed, path, stream, index));
}

// Sequential view over one counter stream; handed to mark samplers so they
// can draw as many uniforms as their law needs.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t stream, std::uint64_t base)
        : seed_(seed), path_(path), stream_(stream), index_(base << 20) {}

    double next_uniform() { return uniform(seed_, path_, stream_, index_++); }
    double next_normal() { return normal_icdf(next_uniform()); }

  private:
    std::uint64_t seed_, path_, stream_, index_;
};

}  // namespace fbsdekit::rng
