// Command-line front end: corrupt / train / denoise / evaluate / ablate /
// gradcheck / synth. Exit codes: 0 ok, 1 usage, 2 I/O, 3 numeric.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tempoden/tempoden.hpp"

namespace fs = std::filesystem;
using tempoden::json;

namespace {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("TEMPODEN_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return 0;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    const auto bytes = tempoden::detail::read_file(path);
    json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw tempoden::io_error(path + ": config is not valid JSON");
    return j;
}

tempoden::TrainConfig resolve_train_config(const std::string& config_path,
                                           const std::optional<std::uint64_t>& seed_flag,
                                           bool deterministic_flag) {
    const json raw = load_config_file(config_path);
    tempoden::TrainConfig cfg = tempoden::TrainConfig::from_json(raw);
    if (seed_flag) {
        cfg.seed = *seed_flag;
    } else if (!raw.contains("seed")) {
        cfg.seed = resolve_seed(seed_flag); // TEMPODEN_SEED fallback
    }
    if (deterministic_flag) cfg.deterministic = true;
    return cfg;
}

void write_report(const std::string& path, const json& report) {
    if (path.empty()) return;
    tempoden::atomic_write_text(path, report.dump(2) + "\n");
}

int run(int argc, char** argv) {
    CLI::App app{"DeepTemporal Interpolation video denoiser"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tempoden::kVersion));

    std::optional<std::uint64_t> seed_flag;
    bool deterministic = false;
    int jobs = 1;

    // corrupt
    auto* corrupt = app.add_subcommand("corrupt", "materialize a fixed-noise dataset");
    std::string c_clean, c_noise, c_out;
    double c_level = 30.0;
    corrupt->add_option("--clean", c_clean, "clean manifest")->required();
    corrupt->add_option("--noise", c_noise, "gaussian|poisson|impulse")->required();
    corrupt->add_option("--level", c_level, "sigma / lambda / ratio")->required();
    corrupt->add_option("--out", c_out, "output directory")->required();
    corrupt->add_option("--seed", seed_flag, "noise seed (falls back to TEMPODEN_SEED)");

    // train
    auto* train = app.add_subcommand("train", "train on a noisy dataset");
    std::string t_noisy, t_config, t_ckpt, t_report;
    train->add_option("--noisy", t_noisy, "noisy manifest")->required();
    train->add_option("--config", t_config, "JSON config file");
    train->add_option("--out", t_ckpt, "output checkpoint")->required();
    train->add_option("--report", t_report, "also write the train report JSON");
    train->add_option("--seed", seed_flag, "seed override");
    train->add_flag("--deterministic", deterministic, "zero wall-clock fields; byte-stable outputs");
    train->add_option("--jobs", jobs, "worker threads");

    // denoise
    auto* denoise = app.add_subcommand("denoise", "denoise a sequence with a checkpoint");
    std::string d_ckpt, d_noisy, d_out, d_encoding = "f32raw";
    int d_stride = 1;
    denoise->add_option("--ckpt", d_ckpt, "checkpoint file")->required();
    denoise->add_option("--noisy", d_noisy, "noisy manifest")->required();
    denoise->add_option("--out", d_out, "output directory")->required();
    denoise->add_option("--encoding", d_encoding, "f32raw|u8");
    denoise->add_option("--stride", d_stride, "temporal stride (frame-rate emulation)");
    denoise->add_option("--jobs", jobs, "worker threads");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "PSNR/SSIM against a clean reference");
    std::string e_clean, e_test, e_report;
    bool e_table = false;
    evaluate->add_option("--clean", e_clean, "clean manifest")->required();
    evaluate->add_option("--test", e_test, "test manifest")->required();
    evaluate->add_option("--report", e_report, "output report JSON")->required();
    evaluate->add_flag("--table", e_table, "print an aligned text table");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run an ablation protocol");
    std::string a_mode, a_noisy, a_clean, a_config, a_report;
    std::vector<int> a_sweep;
    bool a_table = false;
    ablate->add_option("--mode", a_mode, "tf|frames|stride")->required();
    ablate->add_option("--noisy", a_noisy, "noisy manifest")->required();
    ablate->add_option("--clean", a_clean, "clean manifest (scoring only)")->required();
    ablate->add_option("--config", a_config, "JSON config file");
    ablate->add_option("--report", a_report, "output report JSON")->required();
    ablate->add_option("--sweep", a_sweep, "override the sweep values");
    ablate->add_flag("--table", a_table, "print an aligned text table");
    ablate->add_option("--seed", seed_flag, "seed override");
    ablate->add_flag("--deterministic", deterministic, "byte-stable outputs");
    ablate->add_option("--jobs", jobs, "worker threads");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    bool g_f64 = false, g_corrupt = false;
    gradcheck->add_option("--seed", seed_flag, "probe seed");
    gradcheck->add_flag("--f64", g_f64, "run in 64-bit verification mode (threshold 1e-6)");
    auto* hook = gradcheck->add_flag("--inject-backward-bug", g_corrupt,
                                     "negative control: corrupt one backward on purpose");
    hook->group(""); // hidden

    // synth
    auto* synth = app.add_subcommand("synth", "generate a translating-texture demo sequence");
    std::string s_out, s_encoding = "f32raw";
    int s_frames = 60, s_height = 64, s_width = 64, s_channels = 1;
    synth->add_option("--out", s_out, "output directory")->required();
    synth->add_option("--frames", s_frames, "frame count");
    synth->add_option("--height", s_height, "frame height");
    synth->add_option("--width", s_width, "frame width");
    synth->add_option("--channels", s_channels, "1 or 3");
    synth->add_option("--encoding", s_encoding, "f32raw|u8");
    synth->add_option("--seed", seed_flag, "texture seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors are exit 1; --help/--version exit 0
    }
    tempoden::set_num_threads(jobs);

    if (corrupt->parsed()) {
        tempoden::NoiseSpec spec;
        spec.family = tempoden::noise_family_from_string(c_noise);
        spec.level = c_level;
        spec.seed = resolve_seed(seed_flag);
        spec.validate();
        const fs::path manifest = tempoden::materialize(fs::path(c_clean), spec, c_out);
        std::cout << manifest.string() << "\n";
        return 0;
    }

    if (train->parsed()) {
        const tempoden::TrainConfig cfg = resolve_train_config(t_config, seed_flag, deterministic);
        tempoden::TrainResult result = tempoden::train(fs::path(t_noisy), cfg);
        json report{{"version", tempoden::kVersion},
                    {"config", cfg.to_json()},
                    {"train", result.report.to_json()}};
        tempoden::save_checkpoint(result.params, report, t_ckpt);
        write_report(t_report, report);
        std::cout << t_ckpt << "\n";
        return 0;
    }

    if (denoise->parsed()) {
        if (d_stride < 1) throw std::invalid_argument("denoise: stride must be >= 1");
        tempoden::Checkpoint ckpt = tempoden::load_checkpoint(d_ckpt);
        const tempoden::FrameSequence noisy = tempoden::read_sequence(d_noisy);
        const bool tf = ckpt.report.is_object()
                            ? ckpt.report.value("config", json::object())
                                  .value("temporal_filter", true)
                            : true;
        const tempoden::TemporalKernel kernel = tf
                                                    ? tempoden::temporal_kernel(ckpt.params.arch.frames)
                                                    : tempoden::flat_kernel(ckpt.params.arch.frames);
        const tempoden::FrameSequence out = tempoden::denoise_video(ckpt.params, noisy, kernel, d_stride);
        const fs::path manifest = tempoden::write_sequence(out, d_out, d_encoding);
        std::cout << manifest.string() << "\n";
        return 0;
    }

    if (evaluate->parsed()) {
        const tempoden::FrameSequence clean = tempoden::read_sequence(e_clean);
        const tempoden::FrameSequence test = tempoden::read_sequence(e_test);
        const tempoden::ScoreReport scores = tempoden::evaluate_sequence(clean, test);
        json report = scores.to_json();
        report["version"] = tempoden::kVersion;
        report["config"] = {{"clean", e_clean}, {"test", e_test}};
        write_report(e_report, report);
        if (e_table) {
            std::printf("%-8s %10s %8s\n", "frame", "PSNR(dB)", "SSIM");
            for (size_t i = 0; i < scores.psnr_db.size(); ++i) {
                std::printf("%-8zu %10.2f %8.4f\n", i, scores.psnr_db[i], scores.ssim[i]);
            }
            std::printf("%-8s %10.2f %8.4f\n", "mean", scores.mean_psnr_db, scores.mean_ssim);
        } else {
            std::printf("mean_psnr_db=%.4f mean_ssim=%.4f\n", scores.mean_psnr_db, scores.mean_ssim);
        }
        return 0;
    }

    if (ablate->parsed()) {
        const tempoden::TrainConfig cfg = resolve_train_config(a_config, seed_flag, deterministic);
        const tempoden::FrameSequence noisy = tempoden::read_sequence(a_noisy);
        const tempoden::FrameSequence clean = tempoden::read_sequence(a_clean);
        const tempoden::AblationReport result = tempoden::ablate(noisy, clean, cfg, a_mode, a_sweep);
        json report = result.to_json();
        report["version"] = tempoden::kVersion;
        report["config"] = cfg.to_json();
        write_report(a_report, report);
        if (a_table) std::cout << result.table();
        return 0;
    }

    if (gradcheck->parsed()) {
        const std::uint64_t seed = resolve_seed(seed_flag);
        tempoden::detail::corrupt_relu_backward() = g_corrupt;
        const auto results = g_f64 ? tempoden::run_gradcheck_suite<double>(seed)
                                   : tempoden::run_gradcheck_suite<float>(seed);
        bool all_pass = true;
        for (const auto& r : results) {
            std::printf("%-18s max_rel_err=%.3e threshold=%.0e %s\n", r.op.c_str(), r.error,
                        r.threshold, r.pass ? "ok" : "FAIL");
            all_pass = all_pass && r.pass;
        }
        if (!all_pass) throw tempoden::numeric_error("gradient check failed");
        return 0;
    }

    if (synth->parsed()) {
        const tempoden::FrameSequence seq = tempoden::synth_translating_texture(
            s_frames, s_height, s_width, resolve_seed(seed_flag), s_channels);
        const fs::path manifest = tempoden::write_sequence(seq, s_out, s_encoding);
        std::cout << manifest.string() << "\n";
        return 0;
    }

    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const tempoden::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tempoden::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
