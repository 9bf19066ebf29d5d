#pragma once

// Counter-based random number generation (Philox4x32-10) with explicit
// substreams. Every simulation module draws variates through Rng so that a
// run is a pure function of (seed, stream_id) regardless of how work is
// partitioned across threads.

#include <cmath>
#include <cstdint>
#include <limits>

namespace qfc {

namespace detail {

struct Philox4x32State {
    uint32_t counter[4];
    uint32_t key[2];
};

inline void philox4x32_10(const Philox4x32State& in, uint32_t out[4]) {
    constexpr uint32_t kMul0 = 0xD2511F53u;
    constexpr uint32_t kMul1 = 0xCD9E8D57u;
    constexpr uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr uint32_t kWeyl1 = 0xBB67AE85u;

    uint32_t x0 = in.counter[0], x1 = in.counter[1];
    uint32_t x2 = in.counter[2], x3 = in.counter[3];
    uint32_t k0 = in.key[0], k1 = in.key[1];

    for (int round = 0; round < 10; ++round) {
        const uint64_t p0 = static_cast<uint64_t>(kMul0) * x0;
        const uint64_t p1 = static_cast<uint64_t>(kMul1) * x2;
        const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
        const uint32_t lo0 = static_cast<uint32_t>(p0);
        const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
        const uint32_t lo1 = static_cast<uint32_t>(p1);
        x0 = hi1 ^ x1 ^ k0;
        x1 = lo1;
        x2 = hi0 ^ x3 ^ k1;
        x3 = lo0;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    out[0] = x0;
    out[1] = x1;
    out[2] = x2;
    out[3] = x3;
}

}  // namespace detail

/// Identifies one deterministic variate sequence: (seed, stream_id) fully
/// determine all draws. stream_id selects a substream; substreams are
/// statistically independent and may be consumed in any order.
struct RngHandle {
    uint64_t seed = 0;
    uint64_t stream_id = 0;
};

/// Stateful draw cursor over one Philox4x32-10 substream.
///
/// Layout: key = seed (two 32-bit words), counter = (block_lo, block_hi,
/// stream_lo, stream_hi). Each 128-bit block yields four 32-bit outputs;
/// jump-ahead is a counter assignment (see skip_to_block).
class Rng {
public:
    Rng() : Rng(RngHandle{}) {}
    explicit Rng(RngHandle h) : handle_(h) { reset(); }
    Rng(uint64_t seed, uint64_t stream_id) : Rng(RngHandle{seed, stream_id}) {}

    const RngHandle& handle() const { return handle_; }

    /// Restart the sequence from the beginning.
    void reset() {
        block_ = 0;
        pos_ = 4;
    }

    /// Jump directly to 128-bit block `block` (4 * block draws of 32 bits).
    void skip_to_block(uint64_t block) {
        block_ = block;
        pos_ = 4;
    }

    uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    uint64_t next_u64() {
        const uint64_t hi = next_u32();
        const uint64_t lo = next_u32();
        return (hi << 32) | lo;
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [0, 1) from a single 32-bit word (coarser grid,
    /// half the generator work; fine for Bernoulli-style comparisons).
    double uniform32() {
        return static_cast<double>(next_u32()) * 0x1.0p-32;
    }

    bool bernoulli(double p) { return uniform32() < p; }

    /// Exponential with the given mean, by inverse CDF.
    double exponential(double mean) {
        return -mean * std::log1p(-uniform());
    }

    /// Zero-mean Gaussian via Box-Muller (two uniforms per draw).
    double normal(double sigma) {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Gaussian truncated to +/- bound_sigmas standard deviations.
    double truncated_normal(double sigma, double bound_sigmas = 3.0) {
        if (sigma <= 0.0) return 0.0;
        const double bound = bound_sigmas * sigma;
        for (;;) {
            const double x = normal(sigma);
            if (x >= -bound && x <= bound) return x;
        }
    }

    /// Number of Bernoulli(p) failures before the first success, by inverse
    /// CDF. p must be in (0, 1].
    uint64_t geometric_failures(double p) {
        if (p >= 1.0) return 0;
        const double g = std::floor(std::log1p(-uniform()) / std::log1p(-p));
        if (g >= static_cast<double>(std::numeric_limits<int64_t>::max()))
            return std::numeric_limits<uint64_t>::max();
        return static_cast<uint64_t>(g);
    }

private:
    void refill() {
        detail::Philox4x32State s;
        s.counter[0] = static_cast<uint32_t>(block_);
        s.counter[1] = static_cast<uint32_t>(block_ >> 32);
        s.counter[2] = static_cast<uint32_t>(handle_.stream_id);
        s.counter[3] = static_cast<uint32_t>(handle_.stream_id >> 32);
        s.key[0] = static_cast<uint32_t>(handle_.seed);
        s.key[1] = static_cast<uint32_t>(handle_.seed >> 32);
        detail::philox4x32_10(s, buf_);
        ++block_;
        pos_ = 0;
    }

    RngHandle handle_;
    uint64_t block_ = 0;
    uint32_t buf_[4] = {0, 0, 0, 0};
    int pos_ = 4;
};

/// Draw from [0,1) the way Rng::uniform does, given a raw handle. Convenience
/// for one-off draws in tests.
inline double rng_uniform(Rng& rng) { return rng.uniform(); }

}  // namespace qfc
