#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "safer/stats.hpp"

namespace safer::rng {

/// Philox2x64, 10 rounds. Counter-based: the output is a pure function of
/// (counter, key), so any block can be generated out of order.
inline std::array<std::uint64_t, 2> philox2x64(std::uint64_t c0, std::uint64_t c1,
                                               std::uint64_t key) {
    constexpr std::uint64_t kMul  = 0xD2B74407B1CE6E93ull;
    constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;
    for (int round = 0; round < 10; ++round) {
        const unsigned __int128 prod = static_cast<unsigned __int128>(kMul) * c0;
        const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
        const std::uint64_t lo = static_cast<std::uint64_t>(prod);
        c0 = hi ^ key ^ c1;
        c1 = lo;
        key += kWeyl;
    }
    return {c0, c1};
}

/// One logical random stream, identified by (master_seed, stream_id).
/// Replaying a stream reproduces its draws bit-exactly on any host or thread;
/// distinct stream_ids index disjoint counter blocks of the same generator.
class Stream {
  public:
    Stream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_(master_seed), stream_(stream_id) {}

    std::uint64_t next_u64() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto block = philox2x64(pos_++, stream_, key_);
        spare_ = block[1];
        have_spare_ = true;
        return block[0];
    }

    /// Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1), never returns an exact endpoint.
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t stream_id() const { return stream_; }
    std::uint64_t master_seed() const { return key_; }

  private:
    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t pos_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

/// Exponential deviate by inversion: -ln(u)/rate for u in (0,1).
inline double exponential_from_uniform(double u, double rate) {
    if (rate <= 0.0) throw std::invalid_argument("exponential rate must be > 0");
    if (u <= 0.0 || u >= 1.0) throw std::invalid_argument("uniform input must be in (0,1)");
    return -std::log(u) / rate;
}

inline double sample_exponential(double rate, Stream& rng) {
    if (rate <= 0.0) throw std::invalid_argument("exponential rate must be > 0");
    return -std::log(rng.uniform_open()) / rate;
}

inline double sample_uniform(double lo, double hi, Stream& rng) {
    if (lo > hi) throw std::invalid_argument("uniform bounds out of order");
    if (lo == hi) return lo;
    return lo + rng.uniform() * (hi - lo);
}

/// Standard normal deviate via the inverse CDF (keeps one draw per variate,
/// which the deterministic-replay contract relies on).
inline double sample_normal(Stream& rng) {
    return stats::normal_quantile(rng.uniform_open());
}

/// Gamma deviate, Marsaglia-Tsang squeeze. Valid for shape >= 1; every use in
/// this project has shape 50.
inline double sample_gamma(double shape, double scale, Stream& rng) {
    if (shape < 1.0 || scale <= 0.0)
        throw std::invalid_argument("gamma requires shape >= 1 and scale > 0");
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
        const double x = sample_normal(rng);
        const double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        const double v = t * t * t;
        const double u = rng.uniform_open();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

}  // namespace safer::rng
