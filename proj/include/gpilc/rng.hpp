#ifndef GPILC_RNG_HPP
#define GPILC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace gpilc::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based substream derivation: a (master, tag, counter) triple always
// maps to the same seed, so adding a new consumer never shifts existing
// streams.
inline std::uint64_t derive(std::uint64_t master, std::string_view tag,
                            std::uint64_t counter = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s ^= h;
    std::uint64_t b = splitmix64(s);
    s ^= counter * 0x9e3779b97f4a7c15ULL;
    return a ^ b ^ splitmix64(s);
}

// Deterministic generator with a pinned normal sampler (Box-Muller).
// std::normal_distribution is implementation-defined, so we avoid it.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() {
        // 53-bit mantissa in [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * M_PI * u2;
        cached_ = rad * std::sin(ang);
        has_cached_ = true;
        return rad * std::cos(ang);
    }

    Eigen::VectorXd normal_vector(Eigen::Index n, double stddev = 1.0) {
        Eigen::VectorXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = stddev * normal();
        return out;
    }

  private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace gpilc::rng

#endif
