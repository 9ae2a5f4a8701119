#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tempoden/frame.hpp"
#include "tempoden/ops.hpp"
#include "tempoden/rng.hpp"
#include "tempoden/temporal_kernel.hpp"
#include "tempoden/tensor.hpp"

namespace tempoden {

struct ArchConfig {
    int frames = 7;           // window length N, odd
    int image_channels = 1;   // channels per input frame
    int feature_channels = 16; // per-frame feature maps produced by the generator
    int out_channels = 1;     // channels of the denoised frame

    void validate() const {
        if (frames < 3 || frames % 2 == 0) {
            throw std::invalid_argument("arch: frames must be odd and >= 3, got " +
                                        std::to_string(frames));
        }
        if (image_channels < 1 || feature_channels < 1 || out_channels < 1) {
            throw std::invalid_argument("arch: channel counts must be positive");
        }
    }
};

struct LayerSpec {
    std::string name;
    int out_ch = 0;
    int in_ch = 0;
    int k = 3;
    int groups = 1;
    bool relu_after = true;
};

// The full layer table: a three-layer depthwise feature generator, a U-Net
// with three encoders and two decoders (encoder convs 48-wide except the
// first two of encoder 3 at 96, decoder convs 96-wide), and a 1x1 cascade
// of widths 384, 96, C_out. No layer has a bias term.
inline std::vector<LayerSpec> model_layers(const ArchConfig& a) {
    a.validate();
    const int nf = a.frames * a.feature_channels;
    std::vector<LayerSpec> layers = {
        {"fg.conv1", nf, a.frames * a.image_channels, 3, a.frames, true},
        {"fg.conv2", nf, nf, 3, a.frames, true},
        {"fg.conv3", nf, nf, 3, a.frames, false},
        {"enc1.conv1", 48, nf, 3, 1, true},
        {"enc1.conv2", 48, 48, 3, 1, true},
        {"enc1.conv3", 48, 48, 3, 1, true},
        {"enc2.conv1", 48, 48, 3, 1, true},
        {"enc2.conv2", 48, 48, 3, 1, true},
        {"enc2.conv3", 48, 48, 3, 1, true},
        {"enc3.conv1", 96, 48, 3, 1, true},
        {"enc3.conv2", 96, 96, 3, 1, true},
        {"enc3.conv3", 48, 96, 3, 1, true},
        {"dec1.conv1", 96, 96, 3, 1, true},
        {"dec1.conv2", 96, 96, 3, 1, true},
        {"dec1.conv3", 96, 96, 3, 1, true},
        {"dec2.conv1", 96, 96 + nf, 3, 1, true},
        {"dec2.conv2", 96, 96, 3, 1, true},
        {"dec2.conv3", 96, 96, 3, 1, true},
        {"cascade.conv1", 384, 96, 1, 1, true},
        {"cascade.conv2", 96, 384, 1, 1, true},
        {"cascade.conv3", a.out_channels, 96, 1, 1, false},
    };
    return layers;
}

template <typename T>
struct ModelParams {
    ArchConfig arch;
    std::vector<LayerSpec> layers;
    std::vector<TensorPtr<T>> tensors; // one weight per layer, same order

    std::int64_t parameter_count() const {
        std::int64_t total = 0;
        for (const auto& t : tensors) total += t->numel();
        return total;
    }

    void set_requires_grad(bool value) {
        for (auto& t : tensors) t->requires_grad = value;
    }

    void zero_grad() {
        for (auto& t : tensors) t->zero_grad();
    }

    const TensorPtr<T>& tensor(const std::string& name) const {
        for (size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].name == name) return tensors[i];
        }
        throw std::invalid_argument("model: no parameter named " + name);
    }
};

// Seeded uniform init in +-sqrt(6/fan_in); the same seed always yields
// bit-identical parameters.
template <typename T = float>
ModelParams<T> model_init(const ArchConfig& arch, std::uint64_t seed) {
    ModelParams<T> params;
    params.arch = arch;
    params.layers = model_layers(arch);
    params.tensors.reserve(params.layers.size());
    for (size_t li = 0; li < params.layers.size(); ++li) {
        const LayerSpec& spec = params.layers[li];
        const int fan_in = (spec.in_ch / spec.groups) * spec.k * spec.k;
        const double bound = std::sqrt(6.0 / double(fan_in));
        const Shape4 shape{spec.out_ch, spec.in_ch / spec.groups, spec.k, spec.k};
        std::vector<T> values(size_t(shape.numel()));
        CounterRng rng(seed, 0x1000 + li, 0);
        for (auto& v : values) v = T(rng.uniform(-bound, bound));
        params.tensors.push_back(make_tensor<T>(shape, std::move(values)));
    }
    return params;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
    ModelParams<To> out;
    out.arch = src.arch;
    out.layers = src.layers;
    out.tensors.reserve(src.tensors.size());
    for (const auto& t : src.tensors) out.tensors.push_back(cast_tensor<To>(t));
    return out;
}

template <typename T>
ModelParams<T> clone_params(const ModelParams<T>& src) {
    ModelParams<T> out;
    out.arch = src.arch;
    out.layers = src.layers;
    out.tensors.reserve(src.tensors.size());
    for (const auto& t : src.tensors) out.tensors.push_back(clone_values(t));
    return out;
}

namespace detail {

template <typename T>
TensorPtr<T> apply_layer(const ModelParams<T>& params, size_t index, const TensorPtr<T>& x) {
    const LayerSpec& spec = params.layers[index];
    auto y = conv2d(x, params.tensors[index], 1, spec.k / 2, spec.groups);
    return spec.relu_after ? relu(y) : y;
}

template <typename T>
size_t layer_index(const ModelParams<T>& params, const std::string& name) {
    for (size_t i = 0; i < params.layers.size(); ++i) {
        if (params.layers[i].name == name) return i;
    }
    throw std::invalid_argument("model: no layer named " + name);
}

} // namespace detail

// Runs the depthwise generator over a stacked window (B, N*C_img, H, W) and
// splits the result into per-frame feature maps. groups == N everywhere, so
// frame j's features depend on frame j alone.
template <typename T>
std::vector<TensorPtr<T>> feature_generate(const ModelParams<T>& params, const TensorPtr<T>& window) {
    const int n = params.arch.frames;
    if (window->shape.c != n * params.arch.image_channels) {
        throw std::invalid_argument("feature_generate: window has " + std::to_string(window->shape.c) +
                                    " channels, expected " +
                                    std::to_string(n * params.arch.image_channels));
    }
    auto x = detail::apply_layer(params, 0, window);
    x = detail::apply_layer(params, 1, x);
    x = detail::apply_layer(params, 2, x);
    const int cf = params.arch.feature_channels;
    std::vector<TensorPtr<T>> features;
    features.reserve(size_t(n));
    for (int f = 0; f < n; ++f) features.push_back(slice_channels(x, f * cf, (f + 1) * cf));
    return features;
}

// F'_t = gamma_t * F_t. The central map comes out exactly zero.
template <typename T>
std::vector<TensorPtr<T>> apply_temporal_filter(const std::vector<TensorPtr<T>>& features,
                                                const TemporalKernel& kernel) {
    if (int(features.size()) != kernel.window()) {
        throw std::invalid_argument("apply_temporal_filter: " + std::to_string(features.size()) +
                                    " feature maps vs kernel window " + std::to_string(kernel.window()));
    }
    std::vector<TensorPtr<T>> weighted;
    weighted.reserve(features.size());
    for (size_t t = 0; t < features.size(); ++t) {
        weighted.push_back(scale(features[t], T(kernel.weights[t])));
    }
    return weighted;
}

// U-Net denoiser over the concatenated weighted features. Encoders 1-2 end
// with a max-pool, encoder 3 is the bottleneck, decoders start with a 2x
// upsample. Skips: encoder-1 output joins decoder 1, the weighted feature
// stack joins decoder 2. The last cascade layer is linear.
template <typename T>
TensorPtr<T> denoise_forward(const ModelParams<T>& params, const std::vector<TensorPtr<T>>& weighted) {
    if (int(weighted.size()) != params.arch.frames) {
        throw std::invalid_argument("denoise_forward: expected " + std::to_string(params.arch.frames) +
                                    " feature maps, got " + std::to_string(weighted.size()));
    }
    auto x = concat_channels(weighted);
    if (x->shape.h % 4 != 0 || x->shape.w % 4 != 0) {
        throw std::invalid_argument("denoise_forward: spatial dims must be multiples of 4, got " +
                                    x->shape.str());
    }
    const size_t e1 = detail::layer_index(params, "enc1.conv1");
    auto t = detail::apply_layer(params, e1 + 0, x);
    t = detail::apply_layer(params, e1 + 1, t);
    t = detail::apply_layer(params, e1 + 2, t);
    auto p1 = maxpool2(t);

    t = detail::apply_layer(params, e1 + 3, p1);
    t = detail::apply_layer(params, e1 + 4, t);
    t = detail::apply_layer(params, e1 + 5, t);
    auto p2 = maxpool2(t);

    t = detail::apply_layer(params, e1 + 6, p2);
    t = detail::apply_layer(params, e1 + 7, t);
    t = detail::apply_layer(params, e1 + 8, t);

    t = concat_channels(upsample_nearest2(t), p1);
    t = detail::apply_layer(params, e1 + 9, t);
    t = detail::apply_layer(params, e1 + 10, t);
    t = detail::apply_layer(params, e1 + 11, t);

    t = concat_channels(upsample_nearest2(t), x);
    t = detail::apply_layer(params, e1 + 12, t);
    t = detail::apply_layer(params, e1 + 13, t);
    t = detail::apply_layer(params, e1 + 14, t);

    t = detail::apply_layer(params, e1 + 15, t);
    t = detail::apply_layer(params, e1 + 16, t);
    t = detail::apply_layer(params, e1 + 17, t);
    return t;
}

template <typename T>
TensorPtr<T> model_forward(const ModelParams<T>& params, const TensorPtr<T>& window,
                           const TemporalKernel& kernel) {
    return denoise_forward(params, apply_temporal_filter(feature_generate(params, window), kernel));
}

// Mirror index j into [0, count); boundary windows reflect off both ends.
inline int reflect_index(int j, int count) {
    if (count == 1) return 0;
    while (j < 0 || j >= count) {
        if (j < 0) j = -j;
        if (j >= count) j = 2 * (count - 1) - j;
    }
    return j;
}

// Frame index for window slot `step` (centre 0) of the window at t. Out of
// range slots reflect across the central frame first (for t=0 this yields
// [k..1, 0, 1..k]), then fold at the sequence ends. A non-central slot never
// resolves to t itself — plain end-folding can bounce back onto t near the
// boundaries, which would leak the central frame past the gamma_c = 0 blind
// spot. Only a single-frame sequence degenerates to the repeated frame.
inline int window_frame_index(int t, int step, int stride, int count) {
    if (step == 0 || count == 1) return t;
    const int direct = t + step * stride;
    if (direct >= 0 && direct < count) return direct;
    const int mirrored = t - step * stride;
    if (mirrored >= 0 && mirrored < count) return mirrored;
    const int folded = reflect_index(direct, count);
    if (folded != t) return folded;
    for (int d = 1; d < count; ++d) {
        for (const int cand : {folded + d, folded - d}) {
            if (cand >= 0 && cand < count && cand != t) return cand;
        }
    }
    return t;
}

namespace detail {

inline int mirror_source(int i, int extent) {
    if (i < extent) return i;
    return std::max(0, 2 * extent - 2 - i);
}

} // namespace detail

// Stacks the window centred at t (frame indices t + i*stride, reflected at
// the sequence ends) into a (1, N*C, H', W') tensor, spatially mirror-padded
// so both U-Net pools divide evenly.
inline TensorPtr<float> make_window_stack(const FrameSequence& seq, int t, int frames, int stride) {
    const Frame& f0 = seq.frames.front();
    const int k = frames / 2;
    const int ph = (4 - f0.height % 4) % 4;
    const int pw = (4 - f0.width % 4) % 4;
    const int hh = f0.height + ph, ww = f0.width + pw;
    auto stack = zeros<float>({1, frames * f0.channels, hh, ww});
    for (int i = -k; i <= k; ++i) {
        const Frame& src = seq.frames[size_t(window_frame_index(t, i, stride, seq.size()))];
        for (int c = 0; c < f0.channels; ++c) {
            for (int y = 0; y < hh; ++y) {
                const int sy = detail::mirror_source(y, f0.height);
                for (int x = 0; x < ww; ++x) {
                    stack->at(0, (i + k) * f0.channels + c, y, x) =
                        src.at(c, sy, detail::mirror_source(x, f0.width));
                }
            }
        }
    }
    return stack;
}

// Denoises the frame at index t: feature generation, temporal weighting,
// U-Net forward, crop back to the source geometry. The output never depends
// on frame t's own pixels.
inline Frame pipeline_denoise_frame(const ModelParams<float>& params, const FrameSequence& seq, int t,
                                    const TemporalKernel& kernel, int stride = 1) {
    if (seq.empty()) throw std::invalid_argument("pipeline_denoise_frame: empty sequence");
    if (t < 0 || t >= seq.size()) {
        throw std::invalid_argument("pipeline_denoise_frame: t=" + std::to_string(t) +
                                    " out of range [0," + std::to_string(seq.size()) + ")");
    }
    if (stride < 1) throw std::invalid_argument("pipeline_denoise_frame: stride must be >= 1");
    if (kernel.window() != params.arch.frames) {
        throw std::invalid_argument("pipeline_denoise_frame: kernel window " +
                                    std::to_string(kernel.window()) + " vs model frames " +
                                    std::to_string(params.arch.frames));
    }
    seq.validate_uniform();
    const Frame& f0 = seq.frames.front();
    if (f0.channels != params.arch.image_channels) {
        throw std::invalid_argument("pipeline_denoise_frame: sequence has " +
                                    std::to_string(f0.channels) + " channels, model expects " +
                                    std::to_string(params.arch.image_channels));
    }
    auto stack = make_window_stack(seq, t, params.arch.frames, stride);
    auto out = model_forward(params, stack, kernel);
    Frame result = make_frame(params.arch.out_channels, f0.height, f0.width);
    for (int c = 0; c < result.channels; ++c) {
        for (int y = 0; y < f0.height; ++y) {
            for (int x = 0; x < f0.width; ++x) {
                result.at(c, y, x) = out->at(0, c, y, x);
            }
        }
    }
    return result;
}

// Full-resolution inference over every frame.
inline FrameSequence denoise_video(const ModelParams<float>& params, const FrameSequence& seq,
                                   const TemporalKernel& kernel, int stride = 1) {
    if (seq.empty()) throw std::invalid_argument("denoise_video: empty sequence");
    FrameSequence out;
    out.bit_depth = seq.bit_depth;
    out.fps = seq.fps;
    out.frames.reserve(seq.frames.size());
    for (int t = 0; t < seq.size(); ++t) {
        out.frames.push_back(pipeline_denoise_frame(params, seq, t, kernel, stride));
    }
    return out;
}

} // namespace tempoden
