#pragma once

// Deterministic random streams. Every stochastic site (channel realization,
// weight init, partition shuffle, payload bits, ...) gets its own Stream keyed
// by a seed derived from (master seed, purpose tag, indices...). Reruns and
// any --jobs value therefore reproduce identical draws: no stream is ever
// shared across work items.
//
// mt19937_64 output is fully specified by the standard; the uniform and
// gaussian transforms below are spelled out explicitly instead of using
// std::*_distribution, whose algorithms are implementation-defined.

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace airfl::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Order-sensitive fold of an arbitrary tuple of integers into one seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x8c87'2f1e'9b0d'55a1ull;
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

// Compact tags so call sites read derive_seed({seed, tag::tx, round, client}).
namespace tag {
inline constexpr std::uint64_t init      = 0x01;
inline constexpr std::uint64_t partition = 0x02;
inline constexpr std::uint64_t shuffle   = 0x03;
inline constexpr std::uint64_t tx        = 0x04;
inline constexpr std::uint64_t ber       = 0x05;
inline constexpr std::uint64_t grad      = 0x06;
inline constexpr std::uint64_t subset    = 0x07;
}  // namespace tag

class Stream {
  public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t u64() { return eng_(); }

    // [0, 1) with 53 random bits; 1 - uniform01() is in (0, 1].
    double uniform01() { return double(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, both outputs used, fully specified arithmetic.
    void gaussian_pair(double& z0, double& z1) {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        z0 = r * std::cos(a);
        z1 = r * std::sin(a);
    }

    // Circularly-symmetric complex gaussian, E|z|^2 = 1.
    std::complex<double> cgaussian() {
        double z0, z1;
        gaussian_pair(z0, z1);
        return {z0 * 0.70710678118654752440, z1 * 0.70710678118654752440};
    }

    // Fisher-Yates with explicit index draws (rejection-free bounded draw).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = bounded(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Uniform integer in [0, n) via 128-bit multiply (Lemire), deterministic.
    std::uint64_t bounded(std::uint64_t n) {
        return std::uint64_t((__uint128_t(eng_()) * n) >> 64);
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace airfl::rng
