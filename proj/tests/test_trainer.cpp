#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tempoden/noise.hpp"
#include "tempoden/synth.hpp"
#include "tempoden/trainer.hpp"

#include "testutil.hpp"

using namespace tempoden;

namespace {

// Small corrupted dataset for fast loop tests.
FrameSequence tiny_noisy(int frames, int size, double sigma, std::uint64_t seed) {
    auto clean = synth_translating_texture(frames, size, size, seed);
    NoiseSpec spec;
    spec.family = NoiseFamily::gaussian;
    spec.level = sigma;
    spec.seed = seed + 1;
    FrameSequence noisy = clean;
    for (int t = 0; t < frames; ++t) {
        noisy.frames[size_t(t)] = apply_noise(clean.frames[size_t(t)], spec, std::uint64_t(t));
    }
    return noisy;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.frames = 3;
    cfg.patch = 16;
    cfg.batch = 2;
    cfg.epochs = 2;
    cfg.feature_channels = 2;
    cfg.max_iters = 6;
    cfg.augment = false;
    cfg.deterministic = true;
    cfg.seed = 4;
    return cfg;
}

} // namespace

TEST_CASE("early stopping rule") {
    REQUIRE_FALSE(early_stop_check({3.0, 2.0, 1.0}, 3));          // improving: continue
    REQUIRE(early_stop_check({1.0, 1.1, 1.1, 1.1}, 3));           // 3 stale epochs, patience 3
    REQUIRE_FALSE(early_stop_check({1.0, 1.1, 1.1}, 3));          // only 2 stale epochs
    REQUIRE(early_stop_check({1.0, 1.2}, 0));                     // patience 0: first stale epoch
    REQUIRE_FALSE(early_stop_check({1.0}, 0));                    // best is current
    REQUIRE_THROWS_AS(early_stop_check({}, 1), std::invalid_argument);
}

TEST_CASE("window indices follow the stride arithmetic") {
    REQUIRE(window_indices(10, 7, 1) == std::vector<int>{7, 8, 9, 10, 11, 12, 13});
    REQUIRE(window_indices(40, 7, 4) == std::vector<int>{28, 32, 36, 40, 44, 48, 52});
    REQUIRE(window_indices(2, 3, 2) == std::vector<int>{0, 2, 4});
}

TEST_CASE("learning-rate schedule halves every ten epochs") {
    TrainConfig cfg;
    for (int e = 0; e <= 9; ++e) REQUIRE(cfg.lr_at(e) == 1e-3);
    for (int e = 10; e <= 19; ++e) REQUIRE(cfg.lr_at(e) == 0.5e-3);
    for (int e = 20; e <= 24; ++e) REQUIRE(cfg.lr_at(e) == 0.25e-3);
}

TEST_CASE("patch sampling crops the same rectangle across the window") {
    // Frame value encodes (frame, y, x) as an exactly representable integer
    // so the crop offsets can be recovered bit-exactly.
    FrameSequence seq;
    seq.bit_depth = 32;
    const int size = 32;
    for (int t = 0; t < 12; ++t) {
        Frame f = make_frame(1, size, size);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) f.at(0, y, x) = float(t * 4096 + y * 64 + x);
        }
        seq.frames.push_back(std::move(f));
    }
    TrainConfig cfg;
    cfg.frames = 5;
    cfg.patch = 16;
    cfg.batch = 4;
    cfg.augment = false;
    const auto centers = std::vector<int>{2, 3, 4, 5, 6, 7, 8, 9};
    CounterRng rng(9, 0, 0);
    const auto batch = sample_patch_batch(seq, cfg, centers, rng);
    REQUIRE(batch.size() == 4);
    const std::int64_t plane = cfg.patch * std::int64_t(cfg.patch);
    for (const auto& s : batch) {
        const int first = int(s.window[0]);
        const int f0 = first / 4096;
        const int spatial0 = first % 4096;
        // consecutive frame ids, identical crop offsets
        for (int f = 0; f < cfg.frames; ++f) {
            const int v = int(s.window[size_t(f) * plane]);
            REQUIRE(v / 4096 == f0 + f);
            REQUIRE(v % 4096 == spatial0);
        }
        // target equals the central frame patch
        const int tv = int(s.target[0]);
        REQUIRE(tv / 4096 == f0 + cfg.frames / 2);
        REQUIRE(tv % 4096 == spatial0);
    }

    TrainConfig big = cfg;
    big.patch = 64;
    CounterRng rng2(9, 0, 1);
    REQUIRE_THROWS_WITH(sample_patch_batch(seq, big, centers, rng2),
                        Catch::Matchers::ContainsSubstring("patch"));
}

TEST_CASE("augmentation transforms are involutions and keep the target centred") {
    TrainSample s;
    s.frames = 5;
    s.channels = 2;
    s.patch = 4;
    CounterRng rng(3, 1, 0);
    s.window.resize(5 * 2 * 16);
    s.target.resize(2 * 16);
    for (auto& v : s.window) v = float(rng.next_double());
    for (auto& v : s.target) v = float(rng.next_double());

    TrainSample twice = s;
    time_reverse(twice);
    REQUIRE(twice.window != s.window);
    REQUIRE(twice.target == s.target); // centre of an odd window is fixed
    time_reverse(twice);
    REQUIRE(twice.window == s.window);

    TrainSample flipped = s;
    hflip(flipped);
    REQUIRE(flipped.window != s.window);
    hflip(flipped);
    REQUIRE(flipped.window == s.window);
    REQUIRE(flipped.target == s.target);

    // time reversal maps the window onto the reversed frame order exactly
    TrainSample rev = s;
    time_reverse(rev);
    const std::int64_t flen = 2 * 16;
    for (int f = 0; f < 5; ++f) {
        for (std::int64_t i = 0; i < flen; ++i) {
            REQUIRE(rev.window[size_t(f * flen + i)] == s.window[size_t((4 - f) * flen + i)]);
        }
    }
}

TEST_CASE("config validation catches bad values and unknown keys") {
    TrainConfig cfg = tiny_config();
    REQUIRE_NOTHROW(cfg.validate(32, 32));
    cfg.frames = 4;
    REQUIRE_THROWS_AS(cfg.validate(32, 32), std::invalid_argument);
    cfg = tiny_config();
    cfg.patch = 64;
    REQUIRE_THROWS_AS(cfg.validate(32, 32), std::invalid_argument);
    cfg = tiny_config();
    cfg.epochs = 101;
    REQUIRE_THROWS_AS(cfg.validate(32, 32), std::invalid_argument);

    REQUIRE_THROWS_WITH(TrainConfig::from_json(json{{"patchh", 32}}),
                        Catch::Matchers::ContainsSubstring("patchh"));
    const TrainConfig parsed = TrainConfig::from_json(json{{"patch", 32}, {"stride", 2}});
    REQUIRE(parsed.patch == 32);
    REQUIRE(parsed.stride == 2);
    REQUIRE(parsed.batch == 8); // untouched default

    // round-trip
    const TrainConfig again = TrainConfig::from_json(parsed.to_json());
    REQUIRE(again.to_json() == parsed.to_json());
}

TEST_CASE("training runs deterministically and follows the schedule") {
    const auto noisy = tiny_noisy(10, 24, 25.0, 6);
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 0;
    cfg.epochs = 3;

    const TrainResult a = train(noisy, cfg);
    const TrainResult b = train(noisy, cfg);
    REQUIRE(a.report.train_loss == b.report.train_loss);
    REQUIRE(a.report.val_loss == b.report.val_loss);
    REQUIRE(a.report.lr_trace == b.report.lr_trace);
    REQUIRE(a.report.wall_seconds == 0.0); // deterministic mode zeroes the clock
    for (size_t i = 0; i < a.params.tensors.size(); ++i) {
        REQUIRE(a.params.tensors[i]->data == b.params.tensors[i]->data);
    }
    for (int e = 0; e < a.report.epochs_run; ++e) {
        REQUIRE(a.report.lr_trace[size_t(e)] == cfg.lr_at(e));
    }
    REQUIRE((a.report.stop_reason == "completed" || a.report.stop_reason == "early_stop"));
}

TEST_CASE("max_iters caps the loop") {
    const auto noisy = tiny_noisy(10, 24, 25.0, 7);
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 3;
    const TrainResult r = train(noisy, cfg);
    REQUIRE(r.report.iterations == 3);
    REQUIRE(r.report.stop_reason == "max_iters");
}

TEST_CASE("blind-spot training loss respects the noise floor from the start") {
    const double sigma = 25.0 / 255.0;
    const auto noisy = tiny_noisy(12, 24, 25.0, 8);
    TrainConfig cfg = tiny_config();
    cfg.max_iters = 8;
    const TrainResult r = train(noisy, cfg);
    // the target's own noise is unpredictable for a blind-spot model, so the
    // loss can never fall meaningfully below sigma^2
    for (const double loss : r.report.train_loss) {
        REQUIRE(loss >= 0.9 * sigma * sigma);
    }
}

TEST_CASE("diverging training aborts with a located diagnostic") {
    const auto noisy = tiny_noisy(10, 24, 25.0, 12);
    TrainConfig cfg = tiny_config();
    cfg.lr0 = 1e25; // blows the parameters up within a few steps
    cfg.max_iters = 20;
    REQUIRE_THROWS_WITH(train(noisy, cfg), Catch::Matchers::ContainsSubstring("diverged"));
}

TEST_CASE("training rejects impossible datasets") {
    FrameSequence empty;
    REQUIRE_THROWS_AS(train(empty, tiny_config()), std::invalid_argument);
    const auto noisy = tiny_noisy(3, 24, 25.0, 9);
    TrainConfig cfg = tiny_config();
    cfg.frames = 3;
    cfg.stride = 4; // no usable windows
    REQUIRE_THROWS_WITH(train(noisy, cfg), Catch::Matchers::ContainsSubstring("usable"));
}

TEST_CASE("ablation harness emits labelled rows per mode") {
    const auto clean = synth_translating_texture(14, 24, 24, 10);
    NoiseSpec spec;
    spec.family = NoiseFamily::gaussian;
    spec.level = 25.0;
    spec.seed = 3;
    FrameSequence noisy = clean;
    for (int t = 0; t < clean.size(); ++t) {
        noisy.frames[size_t(t)] = apply_noise(clean.frames[size_t(t)], spec, std::uint64_t(t));
    }
    TrainConfig base = tiny_config();
    base.max_iters = 2;
    base.epochs = 1;

    const AblationReport tf = ablate(noisy, clean, base, "tf");
    REQUIRE(tf.rows.size() == 2);
    REQUIRE(tf.rows[0].label == "G+D");
    REQUIRE(tf.rows[1].label == "G+TF+D");
    REQUIRE(tf.table().find("G+TF+D") != std::string::npos);

    const AblationReport frames = ablate(noisy, clean, base, "frames", {3, 5});
    REQUIRE(frames.rows.size() == 2);
    REQUIRE(frames.rows[0].label == "N=3");
    REQUIRE(frames.rows[1].label == "N=5");

    const AblationReport stride = ablate(noisy, clean, base, "stride", {1, 2});
    REQUIRE(stride.rows[0].label == "stride=1 (120fps)");
    REQUIRE(stride.rows[1].label == "stride=2 (60fps)");
    REQUIRE(stride.rows[1].extra["fps"] == 60);

    REQUIRE_THROWS_AS(ablate(noisy, clean, base, "bogus"), std::invalid_argument);
}
