#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempoden/adam.hpp"
#include "tempoden/errors.hpp"
#include "tempoden/metrics.hpp"
#include "tempoden/model.hpp"
#include "tempoden/rng.hpp"
#include "tempoden/temporal_kernel.hpp"
#include "tempoden/video_io.hpp"

namespace tempoden {

struct TrainConfig {
    int frames = 7;
    int patch = 128;
    int batch = 8;
    int epochs = 25;            // main-paper span; up to 100 (companion setup)
    double lr0 = 1e-3;
    int lr_halve_every = 10;
    int patience = 5;
    std::uint64_t seed = 0;
    bool deterministic = false;
    bool temporal_filter = true;
    int stride = 1;
    bool augment = true;
    int max_iters = 0;          // 0 = no cap; desk-scale runs cap here
    int feature_channels = 16;
    double holdout = 0.1;

    double lr_at(int epoch) const {
        return std::ldexp(lr0, -(epoch / std::max(1, lr_halve_every)));
    }

    void validate(int frame_h, int frame_w) const {
        if (frames < 3 || frames % 2 == 0) {
            throw std::invalid_argument("config: frames must be odd and >= 3, got " +
                                        std::to_string(frames));
        }
        if (patch < 16) throw std::invalid_argument("config: patch must be >= 16");
        if (patch % 4 != 0) throw std::invalid_argument("config: patch must be a multiple of 4");
        if (patch > frame_h || patch > frame_w) {
            throw std::invalid_argument("config: patch " + std::to_string(patch) +
                                        " larger than frames " + std::to_string(frame_h) + "x" +
                                        std::to_string(frame_w));
        }
        if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
        if (epochs < 1 || epochs > 100) {
            throw std::invalid_argument("config: epochs must be in [1,100], got " +
                                        std::to_string(epochs));
        }
        if (stride < 1) throw std::invalid_argument("config: stride must be >= 1");
        if (!(holdout > 0.0 && holdout < 1.0)) {
            throw std::invalid_argument("config: holdout must be in (0,1)");
        }
        if (patience < 0) throw std::invalid_argument("config: patience must be >= 0");
        if (feature_channels < 1) throw std::invalid_argument("config: feature_channels must be >= 1");
        if (max_iters < 0) throw std::invalid_argument("config: max_iters must be >= 0");
        if (!(lr0 > 0.0)) throw std::invalid_argument("config: lr0 must be > 0");
    }

    json to_json() const {
        return json{{"frames", frames},
                    {"patch", patch},
                    {"batch", batch},
                    {"epochs", epochs},
                    {"lr0", lr0},
                    {"lr_halve_every", lr_halve_every},
                    {"patience", patience},
                    {"seed", seed},
                    {"deterministic", deterministic},
                    {"temporal_filter", temporal_filter},
                    {"stride", stride},
                    {"augment", augment},
                    {"max_iters", max_iters},
                    {"feature_channels", feature_channels},
                    {"holdout", holdout}};
    }

    // Every key optional; unknown keys are rejected so typos cannot
    // silently fall back to defaults.
    static TrainConfig from_json(const json& j) {
        TrainConfig cfg;
        const json defaults = cfg.to_json();
        for (const auto& [key, value] : j.items()) {
            if (!defaults.contains(key)) {
                throw std::invalid_argument("config: unknown key '" + key + "'");
            }
            (void)value;
        }
        cfg.frames = j.value("frames", cfg.frames);
        cfg.patch = j.value("patch", cfg.patch);
        cfg.batch = j.value("batch", cfg.batch);
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.lr0 = j.value("lr0", cfg.lr0);
        cfg.lr_halve_every = j.value("lr_halve_every", cfg.lr_halve_every);
        cfg.patience = j.value("patience", cfg.patience);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.deterministic = j.value("deterministic", cfg.deterministic);
        cfg.temporal_filter = j.value("temporal_filter", cfg.temporal_filter);
        cfg.stride = j.value("stride", cfg.stride);
        cfg.augment = j.value("augment", cfg.augment);
        cfg.max_iters = j.value("max_iters", cfg.max_iters);
        cfg.feature_channels = j.value("feature_channels", cfg.feature_channels);
        cfg.holdout = j.value("holdout", cfg.holdout);
        return cfg;
    }
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> lr_trace;
    std::string stop_reason;
    double wall_seconds = 0.0;
    int epochs_run = 0;
    int iterations = 0;

    json to_json() const {
        return json{{"train_loss", train_loss}, {"val_loss", val_loss},
                    {"lr_trace", lr_trace},     {"stop_reason", stop_reason},
                    {"wall_seconds", wall_seconds}, {"epochs_run", epochs_run},
                    {"iterations", iterations}};
    }
};

// Stop once the best validation value is `patience` or more epochs old. An
// epoch that just improved never stops; patience 0 stops on the first
// non-improving epoch.
inline bool early_stop_check(const std::vector<double>& history, int patience) {
    if (history.empty()) throw std::invalid_argument("early_stop_check: empty history");
    size_t best = 0;
    for (size_t i = 1; i < history.size(); ++i) {
        if (history[i] < history[best]) best = i;
    }
    const int since_best = int(history.size() - 1 - best);
    return since_best >= std::max(patience, 1);
}

// Frame indices of the window centred at `center` (no reflection; callers
// pick centers that fit).
inline std::vector<int> window_indices(int center, int frames, int stride) {
    const int k = frames / 2;
    std::vector<int> idx;
    idx.reserve(size_t(frames));
    for (int i = -k; i <= k; ++i) idx.push_back(center + i * stride);
    return idx;
}

// One training sample: N co-located patches plus the central noisy patch as
// target, both CHW per frame.
struct TrainSample {
    int frames = 0;
    int channels = 0;
    int patch = 0;
    std::vector<float> window; // frames * channels * patch * patch
    std::vector<float> target; // channels * patch * patch
};

// Reverses the window's temporal order; the centre of an odd window stays
// put, so the target is untouched.
inline void time_reverse(TrainSample& sample) {
    const std::int64_t frame_len = std::int64_t(sample.channels) * sample.patch * sample.patch;
    for (int a = 0, b = sample.frames - 1; a < b; ++a, --b) {
        std::swap_ranges(sample.window.begin() + a * frame_len,
                         sample.window.begin() + (a + 1) * frame_len,
                         sample.window.begin() + b * frame_len);
    }
}

// Flips window and target horizontally, identically.
inline void hflip(TrainSample& sample) {
    auto flip = [&](std::vector<float>& buf, int planes) {
        for (int p = 0; p < planes; ++p) {
            for (int y = 0; y < sample.patch; ++y) {
                float* row = buf.data() + (std::int64_t(p) * sample.patch + y) * sample.patch;
                std::reverse(row, row + sample.patch);
            }
        }
    };
    flip(sample.window, sample.frames * sample.channels);
    flip(sample.target, sample.channels);
}

// With probability 1/2 each: time reversal and/or horizontal flip.
inline TrainSample augment(TrainSample sample, CounterRng& rng) {
    if (rng.next_double() < 0.5) time_reverse(sample);
    if (rng.next_double() < 0.5) hflip(sample);
    return sample;
}

namespace detail {

inline TrainSample crop_sample(const FrameSequence& seq, int center, int frames, int stride, int patch,
                               int y0, int x0) {
    const Frame& f0 = seq.frames.front();
    TrainSample s;
    s.frames = frames;
    s.channels = f0.channels;
    s.patch = patch;
    s.window.resize(size_t(frames) * f0.channels * patch * patch);
    s.target.resize(size_t(f0.channels) * patch * patch);
    const auto idx = window_indices(center, frames, stride);
    for (int f = 0; f < frames; ++f) {
        const Frame& src = seq.frames[size_t(idx[size_t(f)])];
        for (int c = 0; c < f0.channels; ++c) {
            for (int y = 0; y < patch; ++y) {
                const float* srow = &src.at(c, y0 + y, x0);
                float* drow =
                    s.window.data() + ((std::int64_t(f) * f0.channels + c) * patch + y) * patch;
                std::copy_n(srow, patch, drow);
            }
        }
    }
    const Frame& ctr = seq.frames[size_t(center)];
    for (int c = 0; c < f0.channels; ++c) {
        for (int y = 0; y < patch; ++y) {
            std::copy_n(&ctr.at(c, y0 + y, x0), patch,
                        s.target.data() + (std::int64_t(c) * patch + y) * patch);
        }
    }
    return s;
}

// Valid window centers for a sequence of length count.
inline std::vector<int> usable_centers(int count, int frames, int stride) {
    const int k = frames / 2;
    std::vector<int> centers;
    for (int c = k * stride; c + k * stride < count; ++c) centers.push_back(c);
    return centers;
}

} // namespace detail

// Draws a batch of window/target patch pairs; every frame of a sample is
// cropped at the same spatial rectangle.
inline std::vector<TrainSample> sample_patch_batch(const FrameSequence& seq, const TrainConfig& cfg,
                                                   const std::vector<int>& centers, CounterRng& rng) {
    if (centers.empty()) throw std::invalid_argument("sample_patch_batch: no usable windows");
    const Frame& f0 = seq.frames.front();
    if (cfg.patch > f0.height || cfg.patch > f0.width) {
        throw std::invalid_argument("sample_patch_batch: patch larger than frame");
    }
    std::vector<TrainSample> batch;
    batch.reserve(size_t(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
        const int center = centers[size_t(rng.next_u64() % centers.size())];
        const int y0 = int(rng.next_u64() % std::uint64_t(f0.height - cfg.patch + 1));
        const int x0 = int(rng.next_u64() % std::uint64_t(f0.width - cfg.patch + 1));
        TrainSample s = detail::crop_sample(seq, center, cfg.frames, cfg.stride, cfg.patch, y0, x0);
        batch.push_back(cfg.augment ? augment(std::move(s), rng) : std::move(s));
    }
    return batch;
}

struct TrainResult {
    ModelParams<float> params;
    TrainReport report;
};

namespace detail {

inline TensorPtr<float> stack_batch_windows(const std::vector<TrainSample>& batch) {
    const TrainSample& s0 = batch.front();
    auto t = zeros<float>({int(batch.size()), s0.frames * s0.channels, s0.patch, s0.patch});
    float* dst = t->data.data();
    for (const auto& s : batch) dst = std::copy(s.window.begin(), s.window.end(), dst);
    return t;
}

inline TensorPtr<float> stack_batch_targets(const std::vector<TrainSample>& batch) {
    const TrainSample& s0 = batch.front();
    auto t = zeros<float>({int(batch.size()), s0.channels, s0.patch, s0.patch});
    float* dst = t->data.data();
    for (const auto& s : batch) dst = std::copy(s.target.begin(), s.target.end(), dst);
    return t;
}

} // namespace detail

// The unsupervised loop. Consumes only noisy frames: the loss is the l2
// distance between the model output and the central noisy patch, Adam on the
// halving schedule, best-validation parameters retained, early stopping on
// the held-out windows (the last `holdout` share of usable centers).
inline TrainResult train(const FrameSequence& noisy, const TrainConfig& cfg) {
    if (noisy.empty()) throw std::invalid_argument("train: empty dataset");
    noisy.validate_uniform();
    const Frame& f0 = noisy.frames.front();
    cfg.validate(f0.height, f0.width);

    const auto all_centers = detail::usable_centers(noisy.size(), cfg.frames, cfg.stride);
    if (all_centers.size() < 2) {
        throw std::invalid_argument("train: only " + std::to_string(all_centers.size()) +
                                    " usable windows (need >= 2); sequence too short for frames=" +
                                    std::to_string(cfg.frames) + " stride=" + std::to_string(cfg.stride));
    }
    const int val_count = std::clamp(int(std::ceil(double(all_centers.size()) * cfg.holdout)), 1,
                                     int(all_centers.size()) - 1);
    const std::vector<int> train_centers(all_centers.begin(), all_centers.end() - val_count);
    const std::vector<int> val_centers(all_centers.end() - val_count, all_centers.end());

    ArchConfig arch;
    arch.frames = cfg.frames;
    arch.image_channels = f0.channels;
    arch.feature_channels = cfg.feature_channels;
    arch.out_channels = f0.channels;
    ModelParams<float> params = model_init(arch, cfg.seed);
    params.set_requires_grad(true);
    const TemporalKernel kernel =
        cfg.temporal_filter ? temporal_kernel(cfg.frames) : flat_kernel(cfg.frames);
    AdamState<float> adam(params.tensors);

    const int iters_per_epoch = int((train_centers.size() + cfg.batch - 1) / size_t(cfg.batch));
    const int val_y0 = (f0.height - cfg.patch) / 2;
    const int val_x0 = (f0.width - cfg.patch) / 2;

    auto validation_loss = [&]() {
        params.set_requires_grad(false);
        double acc = 0.0;
        for (const int center : val_centers) {
            TrainSample s = detail::crop_sample(noisy, center, cfg.frames, cfg.stride, cfg.patch,
                                                val_y0, val_x0);
            auto window = detail::stack_batch_windows({s});
            auto target = detail::stack_batch_targets({s});
            acc += double(mse(model_forward(params, window, kernel), target)->data[0]);
        }
        params.set_requires_grad(true);
        return acc / double(val_centers.size());
    };

    TrainReport report;
    ModelParams<float> best_params = clone_params(params);
    double best_val = std::numeric_limits<double>::infinity();
    const auto t_start = std::chrono::steady_clock::now();
    bool stopped = false;

    for (int epoch = 0; epoch < cfg.epochs && !stopped; ++epoch) {
        adam.lr = cfg.lr_at(epoch);
        report.lr_trace.push_back(adam.lr);
        double epoch_loss = 0.0;
        int epoch_iters = 0;
        for (int iter = 0; iter < iters_per_epoch; ++iter) {
            CounterRng rng(cfg.seed, 0x5a0000 + std::uint64_t(epoch), std::uint64_t(iter));
            const auto batch = sample_patch_batch(noisy, cfg, train_centers, rng);
            auto window = detail::stack_batch_windows(batch);
            auto target = detail::stack_batch_targets(batch);
            double loss_value = 0.0;
            try {
                auto loss = mse(model_forward(params, window, kernel), target);
                loss_value = double(loss->data[0]);
                params.zero_grad();
                backward(loss);
            } catch (const numeric_error& e) {
                throw numeric_error("training diverged at epoch " + std::to_string(epoch) + " iter " +
                                    std::to_string(iter) + ": " + e.what());
            }
            adam_step(params.tensors, adam);
            epoch_loss += loss_value;
            ++epoch_iters;
            ++report.iterations;
            if (cfg.max_iters > 0 && report.iterations >= cfg.max_iters) {
                stopped = true;
                report.stop_reason = "max_iters";
                break;
            }
        }
        report.train_loss.push_back(epoch_loss / std::max(1, epoch_iters));
        report.val_loss.push_back(validation_loss());
        report.epochs_run = epoch + 1;
        if (report.val_loss.back() < best_val) {
            best_val = report.val_loss.back();
            best_params = clone_params(params);
        }
        if (!stopped && early_stop_check(report.val_loss, cfg.patience)) {
            stopped = true;
            report.stop_reason = "early_stop";
        }
    }
    if (report.stop_reason.empty()) report.stop_reason = "completed";
    // Deterministic runs zero the wall clock so reports are byte-identical.
    report.wall_seconds =
        cfg.deterministic
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(best_params), std::move(report)};
}

inline TrainResult train(const std::filesystem::path& noisy_manifest, const TrainConfig& cfg) {
    return train(read_sequence(noisy_manifest), cfg);
}

// --- ablation harness -------------------------------------------------------

struct AblationRow {
    std::string label;
    double mean_psnr_db = 0.0;
    double mean_ssim = 0.0;
    double final_train_mse = 0.0;
    double final_val_mse = 0.0;
    json extra;
};

struct AblationReport {
    std::string mode;
    std::vector<AblationRow> rows;

    json to_json() const {
        json rows_json = json::array();
        for (const auto& r : rows) {
            json row{{"label", r.label},
                     {"mean_psnr_db", r.mean_psnr_db},
                     {"mean_ssim", r.mean_ssim},
                     {"final_train_mse", r.final_train_mse},
                     {"final_val_mse", r.final_val_mse}};
            if (!r.extra.is_null()) row["extra"] = r.extra;
            rows_json.push_back(row);
        }
        return json{{"mode", mode}, {"rows", rows_json}};
    }

    std::string table() const {
        char line[160];
        std::string out;
        std::snprintf(line, sizeof(line), "%-22s %10s %8s %14s\n", "condition", "PSNR(dB)", "SSIM",
                      "train_mse");
        out += line;
        for (const auto& r : rows) {
            std::snprintf(line, sizeof(line), "%-22s %10.2f %8.3f %14.6g\n", r.label.c_str(),
                          r.mean_psnr_db, r.mean_ssim, r.final_train_mse);
            out += line;
        }
        return out;
    }
};

inline const std::vector<int>& default_frames_sweep() {
    static const std::vector<int> sweep{3, 5, 7, 9, 11};
    return sweep;
}

inline const std::vector<int>& default_stride_sweep() {
    static const std::vector<int> sweep{1, 2, 4, 5};
    return sweep;
}

// 120fps capture emulated at lower rates by temporal subsampling.
inline int stride_to_fps(int stride) {
    switch (stride) {
        case 1: return 120;
        case 2: return 60;
        case 4: return 30;
        case 5: return 24;
        default: return 0;
    }
}

// Retrains per condition and scores against the clean reference. The clean
// frames are used for scoring only, never for training.
inline AblationReport ablate(const FrameSequence& noisy, const FrameSequence& clean,
                             const TrainConfig& base, const std::string& mode,
                             std::vector<int> sweep = {}) {
    if (clean.size() != noisy.size()) {
        throw std::invalid_argument("ablate: clean/noisy length mismatch");
    }
    AblationReport report;
    report.mode = mode;

    auto run_condition = [&](const TrainConfig& cfg, const std::string& label, json extra) {
        TrainResult result = train(noisy, cfg);
        const TemporalKernel kernel =
            cfg.temporal_filter ? temporal_kernel(cfg.frames) : flat_kernel(cfg.frames);
        const FrameSequence denoised = denoise_video(result.params, noisy, kernel, cfg.stride);
        const ScoreReport scores = evaluate_sequence(clean, denoised);
        AblationRow row;
        row.label = label;
        row.mean_psnr_db = scores.mean_psnr_db;
        row.mean_ssim = scores.mean_ssim;
        row.final_train_mse = result.report.train_loss.back();
        row.final_val_mse = result.report.val_loss.back();
        row.extra = std::move(extra);
        report.rows.push_back(std::move(row));
    };

    if (mode == "tf") {
        TrainConfig off = base;
        off.temporal_filter = false;
        run_condition(off, "G+D", json{{"temporal_filter", false}});
        TrainConfig on = base;
        on.temporal_filter = true;
        run_condition(on, "G+TF+D", json{{"temporal_filter", true}});
    } else if (mode == "frames") {
        if (sweep.empty()) sweep = default_frames_sweep();
        for (const int n : sweep) {
            TrainConfig cfg = base;
            cfg.frames = n;
            run_condition(cfg, "N=" + std::to_string(n), json{{"frames", n}});
        }
    } else if (mode == "stride") {
        if (sweep.empty()) sweep = default_stride_sweep();
        for (const int s : sweep) {
            TrainConfig cfg = base;
            cfg.stride = s;
            const int fps = stride_to_fps(s);
            std::string label = "stride=" + std::to_string(s);
            if (fps > 0) label += " (" + std::to_string(fps) + "fps)";
            run_condition(cfg, label, json{{"stride", s}, {"fps", fps}});
        }
    } else {
        throw std::invalid_argument("ablate: unknown mode '" + mode + "' (expected tf|frames|stride)");
    }
    return report;
}

} // namespace tempoden
