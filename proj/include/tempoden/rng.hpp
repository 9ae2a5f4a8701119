#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace tempoden {

// Philox4x64-10 counter-based generator (Salmon et al., SC'11). Pure
// function of (counter, key): any (seed, stream, element) substream can be
// sampled independently, in any order, on any thread, with identical
// results.
struct Philox4x64 {
    static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> ctr,
                                              std::array<std::uint64_t, 2> key) {
        constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
        constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
        constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
        constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 p0 = (unsigned __int128)kMul0 * ctr[0];
            const unsigned __int128 p1 = (unsigned __int128)kMul1 * ctr[2];
            ctr = {std::uint64_t(p1 >> 64) ^ ctr[1] ^ key[0], std::uint64_t(p1),
                   std::uint64_t(p0 >> 64) ^ ctr[3] ^ key[1], std::uint64_t(p0)};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

// One substream of the keyed generator. Key = (seed, stream); counter =
// (substream, block index). Draws within a substream are sequential, but
// distinct substreams are independent regardless of evaluation order.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
        : key_{seed, stream}, substream_(substream) {}

    std::uint64_t next_u64() {
        if (word_ == 4) {
            buf_ = Philox4x64::block({substream_, block_++, 0, 0}, key_);
            word_ = 0;
        }
        return buf_[word_++];
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log argument.
    double next_double_open0() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Standard normal via Box-Muller (cosine branch).
    double normal() {
        const double u1 = next_double_open0();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Poisson draw by Knuth's product method; means above 500 are split
    // using Poisson additivity to keep exp() in range.
    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
        std::uint64_t total = 0;
        while (mean > 500.0) {
            total += poisson_chunk(500.0);
            mean -= 500.0;
        }
        return total + poisson_chunk(mean);
    }

private:
    std::uint64_t poisson_chunk(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_double();
        } while (p > limit);
        return k - 1;
    }

    std::array<std::uint64_t, 2> key_;
    std::uint64_t substream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 4> buf_{};
    int word_ = 4;
};

} // namespace tempoden
