#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tempoden/frame.hpp"
#include "tempoden/rng.hpp"

namespace tempoden {

// Band-limited procedural texture translating at constant subpixel velocity:
// a seeded sum of sinusoids with wavelengths between ~6 and ~32 px, sampled
// continuously so non-integer motion needs no resampling. Values are mapped
// into [0.08, 0.92].
inline FrameSequence synth_translating_texture(int frames, int height, int width, std::uint64_t seed,
                                               int channels = 1, double vx = 0.4, double vy = 0.25) {
    if (frames < 1 || height < 1 || width < 1 || channels < 1) {
        throw std::invalid_argument("synth: frames/height/width/channels must be positive");
    }
    constexpr int kWaves = 12;
    constexpr double kPi = 3.14159265358979323846;
    struct Wave {
        double kx, ky, phase, amp;
    };
    std::vector<std::vector<Wave>> waves(static_cast<size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        CounterRng rng(seed, 0x5917, std::uint64_t(c));
        for (int j = 0; j < kWaves; ++j) {
            const double wavelength = rng.uniform(6.0, 32.0);
            const double angle = rng.uniform(0.0, 2.0 * kPi);
            const double mag = 2.0 * kPi / wavelength;
            waves[size_t(c)].push_back(
                {mag * std::cos(angle), mag * std::sin(angle), rng.uniform(0.0, 2.0 * kPi),
                 wavelength / 32.0});
        }
    }
    auto sample = [&](int c, double x, double y) {
        double v = 0.0;
        for (const Wave& w : waves[size_t(c)]) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
        return v;
    };

    double lo = 1e300, hi = -1e300;
    FrameSequence seq;
    seq.bit_depth = 32;
    seq.fps = 120.0;
    for (int t = 0; t < frames; ++t) {
        Frame f = make_frame(channels, height, width);
        for (int c = 0; c < channels; ++c) {
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    const double v = sample(c, x - vx * t, y - vy * t);
                    f.at(c, y, x) = float(v);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        }
        seq.frames.push_back(std::move(f));
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (auto& f : seq.frames) {
        for (auto& v : f.values) v = float(0.08 + 0.84 * (double(v) - lo) / span);
    }
    return seq;
}

} // namespace tempoden
