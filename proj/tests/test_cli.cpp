#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <string>

#include "tempoden/noise.hpp"
#include "tempoden/synth.hpp"
#include "tempoden/version.hpp"
#include "tempoden/video_io.hpp"

#include "testutil.hpp"

using namespace tempoden;

namespace {

const std::string kCli = TEMPODEN_CLI_PATH;

int run_cli(const std::string& args, const std::filesystem::path& log) {
    const std::string cmd = kCli + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("corrupt is byte-identical across runs and embeds the noise spec") {
    testutil::TempDir dir("cli_corrupt");
    const auto log = dir.path() / "log.txt";
    write_sequence(synth_translating_texture(6, 16, 16, 3), dir.path() / "clean", "f32raw");
    const std::string clean = (dir.path() / "clean" / "manifest.json").string();

    REQUIRE(run_cli("corrupt --clean " + clean + " --noise gaussian --level 30 --seed 7 --out " +
                        (dir.path() / "a").string(),
                    log) == 0);
    REQUIRE(run_cli("corrupt --clean " + clean + " --noise gaussian --level 30 --seed 7 --out " +
                        (dir.path() / "b").string(),
                    log) == 0);
    for (int t = 0; t < 6; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06d.f32", t);
        REQUIRE(detail::read_file(dir.path() / "a" / name) ==
                detail::read_file(dir.path() / "b" / name));
    }

    REQUIRE(run_cli("corrupt --clean " + clean + " --noise poisson --level 30 --seed 5 --out " +
                        (dir.path() / "p").string(),
                    log) == 0);
    const Manifest m = read_manifest(dir.path() / "p" / "manifest.json");
    REQUIRE(m.noise["family"] == "poisson");
    REQUIRE(m.noise["level"] == 30.0);
    REQUIRE(m.noise["seed"] == 5);
}

TEST_CASE("corrupt rejects an out-of-range impulse ratio as a usage error") {
    testutil::TempDir dir("cli_usage");
    const auto log = dir.path() / "log.txt";
    write_sequence(synth_translating_texture(2, 16, 16, 4), dir.path() / "clean", "f32raw");
    const int code = run_cli("corrupt --clean " + (dir.path() / "clean" / "manifest.json").string() +
                                 " --noise impulse --level 1.5 --out " + (dir.path() / "x").string(),
                             log);
    REQUIRE(code == 1);
    REQUIRE(slurp(log).find("(0,1)") != std::string::npos);
}

TEST_CASE("missing inputs exit with the I/O code") {
    testutil::TempDir dir("cli_io");
    const auto log = dir.path() / "log.txt";
    const int code = run_cli("corrupt --clean /nonexistent/manifest.json --noise gaussian "
                             "--level 30 --out " +
                                 (dir.path() / "x").string(),
                             log);
    REQUIRE(code == 2);
}

TEST_CASE("train, denoise and evaluate chain together") {
    testutil::TempDir dir("cli_chain");
    const auto log = dir.path() / "log.txt";
    write_sequence(synth_translating_texture(10, 24, 24, 5), dir.path() / "clean", "f32raw");
    const std::string clean = (dir.path() / "clean" / "manifest.json").string();
    REQUIRE(run_cli("corrupt --clean " + clean + " --noise gaussian --level 25 --seed 2 --out " +
                        (dir.path() / "noisy").string(),
                    log) == 0);
    const std::string noisy = (dir.path() / "noisy" / "manifest.json").string();

    const std::string cfg_path = (dir.path() / "cfg.json").string();
    atomic_write_text(cfg_path,
                      json{{"frames", 3}, {"patch", 16}, {"batch", 2}, {"epochs", 1},
                           {"feature_channels", 2}, {"max_iters", 2}, {"augment", false}}
                          .dump());
    const std::string ckpt = (dir.path() / "model.ckpt").string();
    REQUIRE(run_cli("train --noisy " + noisy + " --config " + cfg_path + " --out " + ckpt +
                        " --seed 1 --deterministic",
                    log) == 0);

    REQUIRE(run_cli("denoise --ckpt " + ckpt + " --noisy " + noisy + " --out " +
                        (dir.path() / "out").string(),
                    log) == 0);
    const Manifest out = read_manifest(dir.path() / "out" / "manifest.json");
    REQUIRE(out.frame_files.size() == 10); // output length == input length

    const std::string report = (dir.path() / "scores.json").string();
    REQUIRE(run_cli("evaluate --clean " + clean + " --test " + clean + " --report " + report, log) ==
            0);
    const json scores = json::parse(std::ifstream(report));
    REQUIRE(scores["mean_ssim"] == 1.0);
    REQUIRE(scores["mean_psnr_db"].is_null()); // +inf sentinel serializes as null
    REQUIRE(scores["version"] == std::string(kVersion));
    REQUIRE(scores.contains("config"));
}

TEST_CASE("train rejects unknown config keys as usage errors") {
    testutil::TempDir dir("cli_cfg");
    const auto log = dir.path() / "log.txt";
    write_sequence(synth_translating_texture(8, 16, 16, 6), dir.path() / "clean", "f32raw");
    const std::string cfg_path = (dir.path() / "cfg.json").string();
    atomic_write_text(cfg_path, json{{"patchh", 16}}.dump());
    const int code = run_cli("train --noisy " + (dir.path() / "clean" / "manifest.json").string() +
                                 " --config " + cfg_path + " --out " + (dir.path() / "m.ckpt").string(),
                             log);
    REQUIRE(code == 1);
    REQUIRE(slurp(log).find("patchh") != std::string::npos);
}

TEST_CASE("gradcheck passes, lists each op once, and the negative control fails") {
    testutil::TempDir dir("cli_grad");
    const auto log = dir.path() / "log.txt";
    REQUIRE(run_cli("gradcheck --seed 2024", log) == 0);
    const std::string out = slurp(log);
    for (const std::string op : {"conv2d", "relu", "maxpool2", "upsample_nearest2",
                                 "concat_channels", "slice_channels", "scale", "mse", "pipeline"}) {
        size_t first = out.find(op + " ");
        if (first == std::string::npos) first = out.find(op);
        REQUIRE(first != std::string::npos);
        REQUIRE(out.find(op, first + op.size()) == std::string::npos); // exactly once
    }
    REQUIRE(run_cli("gradcheck --seed 2024 --inject-backward-bug", log) == 3);
    REQUIRE(slurp(log).find("FAIL") != std::string::npos);
}

TEST_CASE("ablate emits labelled rows through the CLI") {
    testutil::TempDir dir("cli_ablate");
    const auto log = dir.path() / "log.txt";
    write_sequence(synth_translating_texture(14, 16, 16, 8), dir.path() / "clean", "f32raw");
    const std::string clean = (dir.path() / "clean" / "manifest.json").string();
    REQUIRE(run_cli("corrupt --clean " + clean + " --noise gaussian --level 25 --seed 3 --out " +
                        (dir.path() / "noisy").string(),
                    log) == 0);
    atomic_write_text(dir.path() / "cfg.json",
                      json{{"frames", 3}, {"patch", 16}, {"batch", 2}, {"epochs", 1},
                           {"feature_channels", 2}, {"max_iters", 2}, {"augment", false}}
                          .dump());
    const std::string report = (dir.path() / "tf.json").string();
    REQUIRE(run_cli("ablate --mode tf --noisy " + (dir.path() / "noisy" / "manifest.json").string() +
                        " --clean " + clean + " --config " + (dir.path() / "cfg.json").string() +
                        " --report " + report + " --table --deterministic",
                    log) == 0);
    const json j = json::parse(std::ifstream(report));
    REQUIRE(j["mode"] == "tf");
    REQUIRE(j["rows"][0]["label"] == "G+D");
    REQUIRE(j["rows"][1]["label"] == "G+TF+D");
    REQUIRE(j["version"] == std::string(kVersion));
    REQUIRE(j.contains("config"));
    REQUIRE(slurp(log).find("G+TF+D") != std::string::npos);
}

TEST_CASE("gradcheck runs in the f64 verification mode") {
    testutil::TempDir dir("cli_f64");
    const auto log = dir.path() / "log.txt";
    REQUIRE(run_cli("gradcheck --seed 2024 --f64", log) == 0);
    REQUIRE(slurp(log).find("1e-06") != std::string::npos);
}

TEST_CASE("TEMPODEN_SEED is used when no seed flag is given") {
    testutil::TempDir dir("cli_env");
    const auto log = dir.path() / "log.txt";
    write_sequence(synth_translating_texture(2, 16, 16, 7), dir.path() / "clean", "f32raw");
    const std::string clean = (dir.path() / "clean" / "manifest.json").string();
    const std::string base = "corrupt --clean " + clean + " --noise gaussian --level 30 --out ";
    const std::string env_cmd = "TEMPODEN_SEED=9 " + kCli + " " + base +
                                (dir.path() / "env").string() + " >" + log.string() + " 2>&1";
    REQUIRE(WEXITSTATUS(std::system(env_cmd.c_str())) == 0);
    REQUIRE(run_cli(base + (dir.path() / "flag").string() + " --seed 9", log) == 0);
    REQUIRE(detail::read_file(dir.path() / "env" / "frame_000000.f32") ==
            detail::read_file(dir.path() / "flag" / "frame_000000.f32"));
}
