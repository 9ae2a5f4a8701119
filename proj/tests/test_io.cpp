#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "tempoden/model.hpp"
#include "tempoden/synth.hpp"
#include "tempoden/video_io.hpp"

#include "testutil.hpp"

using namespace tempoden;

TEST_CASE("u8 codec normalizes endpoints and rounds half up") {
    Frame f = make_frame(1, 1, 4);
    f.values = {0.0f, 1.0f, 0.5f, 1.7f}; // 1.7 clips to 1.0
    const auto bytes = encode_u8_frame(f);
    const Frame back = decode_u8_frame(bytes, "test");
    REQUIRE(back.values[0] == 0.0f);
    REQUIRE(back.values[1] == 1.0f);
    // 0.5*255 = 127.5 rounds half up to 128
    REQUIRE(bytes[bytes.size() - 2] == 128);
    REQUIRE(bytes.back() == 255);
    REQUIRE(back.values[2] == Catch::Approx(128.0 / 255.0));
}

TEST_CASE("pgm parser handles comments and rejects corrupt headers") {
    const std::string text = "P5\n# a comment\n2 1\n255\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    bytes.push_back(0);
    bytes.push_back(255);
    const Frame f = decode_u8_frame(bytes, "inline");
    REQUIRE(f.width == 2);
    REQUIRE(f.values[0] == 0.0f);
    REQUIRE(f.values[1] == 1.0f);

    std::vector<std::uint8_t> bad{'P', '4', '\n'};
    REQUIRE_THROWS_AS(decode_u8_frame(bad, "bad"), io_error);
    std::vector<std::uint8_t> truncated(text.begin(), text.end());
    truncated.push_back(0); // one pixel missing
    REQUIRE_THROWS_WITH(decode_u8_frame(truncated, "short"),
                        Catch::Matchers::ContainsSubstring("truncated"));
}

TEST_CASE("f32raw round-trips exactly, including out-of-range values") {
    Frame f = make_frame(2, 3, 5);
    CounterRng rng(1, 2, 3);
    for (auto& v : f.values) v = float(rng.uniform(-2.0, 3.0));
    const auto bytes = encode_f32raw_frame(f);
    const Frame back = decode_f32raw_frame(bytes, "test");
    REQUIRE(back.channels == 2);
    REQUIRE(back.values == f.values);
    REQUIRE(encode_f32raw_frame(back) == bytes);
}

TEST_CASE("sequence round-trip through manifests") {
    auto seq = synth_translating_texture(5, 16, 12, 3);
    testutil::TempDir dir("seq");
    const auto manifest = write_sequence(seq, dir.path(), "f32raw");
    const FrameSequence back = read_sequence(manifest);
    REQUIRE(back.size() == 5);
    REQUIRE(back.bit_depth == 32);
    for (int t = 0; t < 5; ++t) REQUIRE(back.frames[t].values == seq.frames[t].values);

    // u8 path: 3-channel PPM
    FrameSequence rgb;
    rgb.frames.push_back(make_frame(3, 8, 8, 0.25f));
    testutil::TempDir dir2("rgb");
    const auto m2 = write_sequence(rgb, dir2.path(), "u8");
    const FrameSequence rgb_back = read_sequence(m2);
    REQUIRE(rgb_back.bit_depth == 8);
    REQUIRE(rgb_back.frames[0].channels == 3);
    REQUIRE(rgb_back.frames[0].values[0] == Catch::Approx(64.0 / 255.0));
}

TEST_CASE("manifest errors name the offending file") {
    auto seq = synth_translating_texture(3, 8, 8, 4);
    testutil::TempDir dir("missing");
    const auto manifest = write_sequence(seq, dir.path(), "f32raw");
    std::filesystem::remove(dir.path() / "frame_000001.f32");
    REQUIRE_THROWS_WITH(read_sequence(manifest),
                        Catch::Matchers::ContainsSubstring("frame_000001.f32"));
}

TEST_CASE("manifest ignores unknown keys but validates geometry") {
    auto seq = synth_translating_texture(2, 8, 8, 5);
    testutil::TempDir dir("fwd");
    const auto manifest_path = write_sequence(seq, dir.path(), "f32raw");
    json j = json::parse(std::ifstream(manifest_path));
    j["future_extension"] = {{"a", 1}};
    atomic_write_text(manifest_path, j.dump(2));
    REQUIRE(read_sequence(manifest_path).size() == 2);

    j["height"] = 9; // now the frame files disagree
    atomic_write_text(manifest_path, j.dump(2));
    REQUIRE_THROWS_WITH(read_sequence(manifest_path),
                        Catch::Matchers::ContainsSubstring("manifest"));
}

TEST_CASE("writes are deterministic byte-for-byte") {
    auto seq = synth_translating_texture(3, 8, 8, 6);
    testutil::TempDir a("det_a"), b("det_b");
    write_sequence(seq, a.path(), "f32raw");
    write_sequence(seq, b.path(), "f32raw");
    for (const auto& name : {"manifest.json", "frame_000000.f32", "frame_000002.f32"}) {
        REQUIRE(detail::read_file(a.path() / name) == detail::read_file(b.path() / name));
    }
}

TEST_CASE("checkpoint save/load/save is byte-identical and preserves the forward pass") {
    ArchConfig arch;
    arch.frames = 3;
    arch.image_channels = 1;
    arch.feature_channels = 4;
    arch.out_channels = 1;
    auto params = model_init(arch, 55);
    const json report{{"note", "fixture"}, {"loss", 0.25}};

    testutil::TempDir dir("ckpt");
    const auto path_a = dir.path() / "a.ckpt";
    const auto path_b = dir.path() / "b.ckpt";
    save_checkpoint(params, report, path_a);
    Checkpoint loaded = load_checkpoint(path_a);
    save_checkpoint(loaded.params, loaded.report, path_b);
    REQUIRE(detail::read_file(path_a) == detail::read_file(path_b));
    REQUIRE(loaded.report["loss"] == 0.25);

    auto window = testutil::random_tensor<float>({1, 3, 8, 8}, 56, 0.0, 1.0);
    const auto kern = temporal_kernel(3);
    auto before = model_forward(params, window, kern);
    auto after = model_forward(loaded.params, window, kern);
    REQUIRE(before->data == after->data);
}

TEST_CASE("tampered checkpoints fail with a structured error") {
    ArchConfig arch;
    arch.frames = 3;
    arch.image_channels = 1;
    arch.feature_channels = 2;
    arch.out_channels = 1;
    auto params = model_init(arch, 9);
    testutil::TempDir dir("tamper");
    const auto path = dir.path() / "m.ckpt";
    save_checkpoint(params, json::object(), path);

    auto bytes = detail::read_file(path);
    // truncate payload
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 64);
    atomic_write_file(dir.path() / "cut.ckpt", cut);
    REQUIRE_THROWS_WITH(load_checkpoint(dir.path() / "cut.ckpt"),
                        Catch::Matchers::ContainsSubstring("truncated"));

    // tamper tensor count in the header
    const std::uint32_t header_len = detail::get_u32le(bytes.data() + 8);
    json header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    header["tensors"].erase(header["tensors"].size() - 1);
    const std::string new_header = header.dump();
    std::vector<std::uint8_t> tampered(bytes.begin(), bytes.begin() + 8);
    detail::put_u32le(tampered, std::uint32_t(new_header.size()));
    tampered.insert(tampered.end(), new_header.begin(), new_header.end());
    tampered.insert(tampered.end(), bytes.begin() + 12 + header_len, bytes.end());
    atomic_write_file(dir.path() / "bad.ckpt", tampered);
    REQUIRE_THROWS_WITH(load_checkpoint(dir.path() / "bad.ckpt"),
                        Catch::Matchers::ContainsSubstring("tensor count"));

    // wrong magic
    bytes[0] = 'X';
    atomic_write_file(dir.path() / "magic.ckpt", bytes);
    REQUIRE_THROWS_WITH(load_checkpoint(dir.path() / "magic.ckpt"),
                        Catch::Matchers::ContainsSubstring("magic"));
}
