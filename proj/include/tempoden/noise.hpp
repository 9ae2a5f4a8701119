#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "tempoden/frame.hpp"
#include "tempoden/rng.hpp"
#include "tempoden/video_io.hpp"

namespace tempoden {

enum class NoiseFamily { gaussian, poisson, impulse };

inline std::string to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return "gaussian";
        case NoiseFamily::poisson: return "poisson";
        case NoiseFamily::impulse: return "impulse";
    }
    return "?";
}

inline NoiseFamily noise_family_from_string(const std::string& s) {
    if (s == "gaussian") return NoiseFamily::gaussian;
    if (s == "poisson") return NoiseFamily::poisson;
    if (s == "impulse") return NoiseFamily::impulse;
    throw std::invalid_argument("unknown noise family '" + s + "'");
}

// Noise family, level and seed fully determine a materialized noisy dataset.
// level is sigma in 8-bit units for gaussian, the maximum event count for
// poisson, and the replaced-pixel ratio for impulse.
struct NoiseSpec {
    NoiseFamily family = NoiseFamily::gaussian;
    double level = 30.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (family == NoiseFamily::impulse) {
            if (!(level > 0.0 && level < 1.0)) {
                throw std::invalid_argument("impulse ratio must be in (0,1), got " +
                                            std::to_string(level));
            }
        } else if (!(level > 0.0)) {
            throw std::invalid_argument(to_string(family) + " level must be > 0, got " +
                                        std::to_string(level));
        }
    }

    json to_json() const {
        return json{{"family", to_string(family)}, {"level", level}, {"seed", seed}};
    }

    static NoiseSpec from_json(const json& j) {
        NoiseSpec spec;
        spec.family = noise_family_from_string(j.at("family").get<std::string>());
        spec.level = j.at("level").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        spec.validate();
        return spec;
    }
};

// x + N(0, (sigma/255)^2) per element, unclipped. One keyed substream per
// (seed, frame, element), so results do not depend on evaluation order.
inline Frame add_gaussian(const Frame& frame, double sigma_8bit, std::uint64_t seed,
                          std::uint64_t frame_index) {
    if (!(sigma_8bit > 0.0)) {
        throw std::invalid_argument("add_gaussian: sigma must be > 0, got " + std::to_string(sigma_8bit));
    }
    const double sigma = sigma_8bit / 255.0;
    Frame out = frame;
    for (size_t e = 0; e < out.values.size(); ++e) {
        CounterRng rng(seed, frame_index, e);
        out.values[e] = float(double(frame.values[e]) + sigma * rng.normal());
    }
    return out;
}

// y = Poisson(lambda * x) / lambda per element; x must be non-negative.
inline Frame add_poisson(const Frame& frame, double lambda, std::uint64_t seed,
                         std::uint64_t frame_index) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("add_poisson: lambda must be > 0, got " + std::to_string(lambda));
    }
    Frame out = frame;
    for (size_t e = 0; e < out.values.size(); ++e) {
        const double x = double(frame.values[e]);
        if (x < 0.0) {
            throw std::invalid_argument("add_poisson: negative pixel at element " + std::to_string(e));
        }
        CounterRng rng(seed, frame_index, e);
        out.values[e] = float(double(rng.poisson(lambda * x)) / lambda);
    }
    return out;
}

// Each pixel is independently replaced with probability alpha; replacements
// are 0 or 1 with equal probability and move all channels of the pixel
// jointly. Untouched pixels stay bit-identical.
inline Frame add_impulse(const Frame& frame, double alpha, std::uint64_t seed,
                         std::uint64_t frame_index) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("add_impulse: ratio must be in (0,1), got " + std::to_string(alpha));
    }
    Frame out = frame;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            CounterRng rng(seed, frame_index, std::uint64_t(y) * std::uint64_t(frame.width) + x);
            if (rng.next_double() >= alpha) continue;
            const float v = rng.next_double() < 0.5 ? 0.0f : 1.0f;
            for (int c = 0; c < frame.channels; ++c) out.at(c, y, x) = v;
        }
    }
    return out;
}

inline Frame apply_noise(const Frame& frame, const NoiseSpec& spec, std::uint64_t frame_index) {
    spec.validate();
    switch (spec.family) {
        case NoiseFamily::gaussian: return add_gaussian(frame, spec.level, spec.seed, frame_index);
        case NoiseFamily::poisson: return add_poisson(frame, spec.level, spec.seed, frame_index);
        case NoiseFamily::impulse: return add_impulse(frame, spec.level, spec.seed, frame_index);
    }
    throw std::invalid_argument("apply_noise: bad family");
}

// Corrupts every frame once and writes the result to disk (f32raw, noise
// spec embedded in the manifest). Training always reads these files, so the
// noise stays constant across epochs; re-running produces identical bytes.
inline std::filesystem::path materialize(const FrameSequence& clean, const NoiseSpec& spec,
                                         const std::filesystem::path& out_dir) {
    if (clean.empty()) throw std::invalid_argument("materialize: empty sequence");
    spec.validate();
    clean.validate_uniform();
    FrameSequence noisy;
    noisy.bit_depth = 32;
    noisy.fps = clean.fps;
    noisy.frames.reserve(clean.frames.size());
    for (size_t t = 0; t < clean.frames.size(); ++t) {
        noisy.frames.push_back(apply_noise(clean.frames[t], spec, t));
    }
    return write_sequence(noisy, out_dir, "f32raw", spec.to_json());
}

inline std::filesystem::path materialize(const std::filesystem::path& clean_manifest,
                                         const NoiseSpec& spec, const std::filesystem::path& out_dir) {
    return materialize(read_sequence(clean_manifest), spec, out_dir);
}

} // namespace tempoden
