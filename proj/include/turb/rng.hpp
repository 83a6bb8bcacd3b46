#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based random streams (Philox4x32-10). A stream is addressed by
// (seed, tag, index); any stream can be recreated from those three values
// alone, so realizations and training steps draw independent reproducible
// noise with no shared state.

namespace turb::rng {

enum class StreamTag : std::uint32_t {
    Noise = 1,
    FbmSpectral = 2,
    MrwBase = 3,
    MrwLog = 4,
    TrainNoise = 5,
    WeightInit = 6,
    Shuffle = 7,
};

namespace detail {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
    std::uint64_t p = std::uint64_t(a) * b;
    hi = std::uint32_t(p >> 32);
    lo = std::uint32_t(p);
}

} // namespace detail

/// Philox4x32-10 block function: 128-bit counter, 64-bit key, 128-bit output.
struct Philox4x32 {
    static void block(const std::uint32_t ctr[4], const std::uint32_t key[2],
                      std::uint32_t out[4]) {
        constexpr std::uint32_t kM0 = 0xD2511F53u;
        constexpr std::uint32_t kM1 = 0xCD9E8D57u;
        constexpr std::uint32_t kW0 = 0x9E3779B9u;
        constexpr std::uint32_t kW1 = 0xBB67AE85u;
        std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int r = 0; r < 10; ++r) {
            std::uint32_t hi0, lo0, hi1, lo1;
            detail::mulhilo(kM0, c0, hi0, lo0);
            detail::mulhilo(kM1, c2, hi1, lo1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += kW0;
            k1 += kW1;
        }
        out[0] = c0;
        out[1] = c1;
        out[2] = c2;
        out[3] = c3;
    }
};

class Stream {
public:
    Stream(std::uint64_t seed, StreamTag tag, std::uint64_t index)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          base_{std::uint32_t(std::uint32_t(tag) ^ std::uint32_t(index >> 32) * 0x85EBCA6Bu),
                std::uint32_t(index)} {}

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32();
        std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    /// Uniform on the open interval (0,1): 53 mantissa bits, never 0 or 1.
    double next_uniform() {
        return (double(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

    /// Standard normal via Box-Muller; draws come in pairs, second cached.
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    template <class T>
    void fill_gaussian(T* dst, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) dst[i] = T(next_gaussian());
    }

    /// Uniform integer in [0, bound) by rejection; bound > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        std::uint64_t limit = bound * (~std::uint64_t(0) / bound);
        for (;;) {
            std::uint64_t x = next_u64();
            if (x < limit) return x % bound;
        }
    }

private:
    void refill() {
        std::uint32_t ctr[4] = {std::uint32_t(block_), std::uint32_t(block_ >> 32),
                                base_[0], base_[1]};
        Philox4x32::block(ctr, key_, buf_);
        ++block_;
        pos_ = 0;
    }

    std::uint32_t key_[2];
    std::uint32_t base_[2];
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {};
    int pos_ = 4;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

/// Deterministic in-place shuffle driven by its own stream.
template <class T>
void shuffle(T* v, std::int64_t n, Stream& s) {
    for (std::int64_t i = n - 1; i > 0; --i) {
        std::int64_t j = std::int64_t(s.next_below(std::uint64_t(i) + 1));
        T tmp = v[i];
        v[i] = v[j];
        v[j] = tmp;
    }
}

} // namespace turb::rng
