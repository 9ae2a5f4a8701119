#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempoden/errors.hpp"
#include "tempoden/frame.hpp"
#include "tempoden/model.hpp"

namespace tempoden {

using json = nlohmann::json;

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 24));
}

inline std::uint32_t get_u32le(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

inline void put_f32le(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(out, bits);
}

inline float get_f32le(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32le(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("read failed for " + path.string());
    return bytes;
}

} // namespace detail

// All writes go through a temp file plus rename, so a crash mid-write never
// leaves a readable-but-corrupt artifact at the target path.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::vector<std::uint8_t>& bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot create " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
        if (!out) throw io_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw io_error("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

inline void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
    atomic_write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// --- frame codecs ---------------------------------------------------------

// Binary PGM (P5) / PPM (P6), maxval 255. Float 0..1 exports clip then round
// half up; import maps v -> v/255.
inline std::vector<std::uint8_t> encode_u8_frame(const Frame& frame) {
    if (frame.channels != 1 && frame.channels != 3) {
        throw std::invalid_argument("u8 export supports 1 (PGM) or 3 (PPM) channels, got " +
                                    std::to_string(frame.channels) + "; use f32raw instead");
    }
    std::string header = (frame.channels == 1 ? "P5\n" : "P6\n") + std::to_string(frame.width) + " " +
                         std::to_string(frame.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + size_t(frame.numel()));
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            for (int c = 0; c < frame.channels; ++c) {
                float v = frame.at(c, y, x);
                v = std::min(1.0f, std::max(0.0f, v));
                out.push_back(std::uint8_t(std::floor(v * 255.0f + 0.5f)));
            }
        }
    }
    return out;
}

inline Frame decode_u8_frame(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    size_t pos = 0;
    auto fail = [&](const std::string& why) { throw io_error(name + ": " + why); };
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> int {
        skip_space();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail("corrupt header (expected integer)");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
        return int(v);
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        fail("corrupt header (not a binary PGM/PPM)");
    }
    const int channels = bytes[1] == '5' ? 1 : 3;
    pos = 2;
    const int width = read_int();
    const int height = read_int();
    const int maxval = read_int();
    if (maxval != 255) fail("unsupported maxval " + std::to_string(maxval));
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("corrupt header (missing separator)");
    ++pos;
    const std::int64_t need = std::int64_t(channels) * width * height;
    if (std::int64_t(bytes.size() - pos) < need) fail("truncated pixel data");
    Frame frame = make_frame(channels, height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                frame.at(c, y, x) = float(bytes[pos++]) / 255.0f;
            }
        }
    }
    return frame;
}

// f32raw: magic "FR32", u32 C, H, W little-endian, then C*H*W f32 LE. Exact
// for any float, including values outside [0,1].
inline std::vector<std::uint8_t> encode_f32raw_frame(const Frame& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + size_t(frame.numel()) * 4);
    out.insert(out.end(), {'F', 'R', '3', '2'});
    detail::put_u32le(out, std::uint32_t(frame.channels));
    detail::put_u32le(out, std::uint32_t(frame.height));
    detail::put_u32le(out, std::uint32_t(frame.width));
    for (const float v : frame.values) detail::put_f32le(out, v);
    return out;
}

inline Frame decode_f32raw_frame(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "FR32", 4) != 0) {
        throw io_error(name + ": corrupt header (bad f32raw magic)");
    }
    const int channels = int(detail::get_u32le(bytes.data() + 4));
    const int height = int(detail::get_u32le(bytes.data() + 8));
    const int width = int(detail::get_u32le(bytes.data() + 12));
    const std::int64_t need = std::int64_t(channels) * height * width;
    if (std::int64_t(bytes.size()) != 16 + need * 4) {
        throw io_error(name + ": truncated f32raw payload");
    }
    Frame frame = make_frame(channels, height, width);
    for (std::int64_t i = 0; i < need; ++i) {
        frame.values[size_t(i)] = detail::get_f32le(bytes.data() + 16 + i * 4);
    }
    return frame;
}

// --- manifests -------------------------------------------------------------

struct Manifest {
    int format_version = 1;
    std::string encoding = "f32raw"; // "u8" | "f32raw"
    int channels = 0;
    int height = 0;
    int width = 0;
    int bit_depth = 32;
    double fps = 0.0;
    std::vector<std::string> frame_files;
    json noise; // optional embedded NoiseSpec

    json to_json() const {
        json j;
        j["format_version"] = format_version;
        j["encoding"] = encoding;
        j["channels"] = channels;
        j["height"] = height;
        j["width"] = width;
        j["bit_depth"] = bit_depth;
        if (fps > 0.0) j["fps"] = fps;
        j["frames"] = frame_files;
        if (!noise.is_null()) j["noise"] = noise;
        return j;
    }

    // Unknown keys are ignored for forward compatibility.
    static Manifest from_json(const json& j, const std::string& name) {
        Manifest m;
        try {
            m.format_version = j.at("format_version").get<int>();
            m.encoding = j.at("encoding").get<std::string>();
            m.channels = j.at("channels").get<int>();
            m.height = j.at("height").get<int>();
            m.width = j.at("width").get<int>();
            m.bit_depth = j.at("bit_depth").get<int>();
            if (j.contains("fps")) m.fps = j.at("fps").get<double>();
            m.frame_files = j.at("frames").get<std::vector<std::string>>();
            if (j.contains("noise")) m.noise = j.at("noise");
        } catch (const json::exception& e) {
            throw io_error(name + ": invalid manifest: " + e.what());
        }
        if (m.encoding != "u8" && m.encoding != "f32raw") {
            throw io_error(name + ": unknown encoding '" + m.encoding + "'");
        }
        return m;
    }
};

inline Manifest read_manifest(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw io_error(path.string() + ": corrupt header (not valid JSON)");
    return Manifest::from_json(j, path.string());
}

inline FrameSequence read_sequence(const std::filesystem::path& manifest_path) {
    const Manifest m = read_manifest(manifest_path);
    const std::filesystem::path dir = manifest_path.parent_path();
    FrameSequence seq;
    seq.bit_depth = m.bit_depth;
    seq.fps = m.fps;
    seq.frames.reserve(m.frame_files.size());
    for (const auto& name : m.frame_files) {
        const std::filesystem::path fp = dir / name;
        if (!std::filesystem::exists(fp)) throw io_error("missing frame file " + fp.string());
        const auto bytes = detail::read_file(fp);
        Frame f = (m.encoding == "u8") ? decode_u8_frame(bytes, fp.string())
                                       : decode_f32raw_frame(bytes, fp.string());
        if (f.channels != m.channels || f.height != m.height || f.width != m.width) {
            throw io_error(fp.string() + ": geometry " + std::to_string(f.channels) + "x" +
                           std::to_string(f.height) + "x" + std::to_string(f.width) +
                           " does not match manifest " + std::to_string(m.channels) + "x" +
                           std::to_string(m.height) + "x" + std::to_string(m.width));
        }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

inline std::filesystem::path write_sequence(const FrameSequence& seq, const std::filesystem::path& dir,
                                            const std::string& encoding, const json& noise = json()) {
    if (seq.empty()) throw std::invalid_argument("write_sequence: empty sequence");
    if (encoding != "u8" && encoding != "f32raw") {
        throw std::invalid_argument("write_sequence: unknown encoding '" + encoding + "'");
    }
    seq.validate_uniform();
    std::filesystem::create_directories(dir);
    const Frame& f0 = seq.frames.front();
    Manifest m;
    m.encoding = encoding;
    m.channels = f0.channels;
    m.height = f0.height;
    m.width = f0.width;
    m.bit_depth = encoding == "u8" ? 8 : 32;
    m.fps = seq.fps;
    m.noise = noise;
    const std::string ext = encoding == "u8" ? (f0.channels == 1 ? ".pgm" : ".ppm") : ".f32";
    char name[32];
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%06zu%s", i, ext.c_str());
        m.frame_files.push_back(name);
        const auto bytes = encoding == "u8" ? encode_u8_frame(seq.frames[i])
                                            : encode_f32raw_frame(seq.frames[i]);
        atomic_write_file(dir / name, bytes);
    }
    const std::filesystem::path manifest_path = dir / "manifest.json";
    atomic_write_text(manifest_path, m.to_json().dump(2) + "\n");
    return manifest_path;
}

// --- checkpoints ------------------------------------------------------------

// Layout: magic "UVDN", u32 version, u32 JSON header length, JSON header
// (architecture, report, ordered tensor table), then little-endian f32
// payloads concatenated in table order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const ModelParams<float>& params, const json& report,
                            const std::filesystem::path& path) {
    json header;
    header["arch"] = {{"frames", params.arch.frames},
                      {"image_channels", params.arch.image_channels},
                      {"feature_channels", params.arch.feature_channels},
                      {"out_channels", params.arch.out_channels}};
    header["report"] = report;
    json table = json::array();
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        const Shape4 s = params.tensors[i]->shape;
        table.push_back({{"name", params.layers[i].name}, {"shape", {s.n, s.c, s.h, s.w}}});
    }
    header["tensors"] = table;
    const std::string header_text = header.dump();

    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), {'U', 'V', 'D', 'N'});
    detail::put_u32le(bytes, kCheckpointVersion);
    detail::put_u32le(bytes, std::uint32_t(header_text.size()));
    bytes.insert(bytes.end(), header_text.begin(), header_text.end());
    for (const auto& t : params.tensors) {
        for (const float v : t->data) detail::put_f32le(bytes, v);
    }
    atomic_write_file(path, bytes);
}

struct Checkpoint {
    ModelParams<float> params;
    json report;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    const std::string name = path.string();
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "UVDN", 4) != 0) {
        throw io_error(name + ": bad checkpoint magic");
    }
    const std::uint32_t version = detail::get_u32le(bytes.data() + 4);
    if (version != kCheckpointVersion) {
        throw io_error(name + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t header_len = detail::get_u32le(bytes.data() + 8);
    if (bytes.size() < 12 + size_t(header_len)) throw io_error(name + ": truncated header");
    json header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len, nullptr, false);
    if (header.is_discarded()) throw io_error(name + ": corrupt JSON header");

    Checkpoint ckpt;
    try {
        const json& arch = header.at("arch");
        ckpt.params.arch.frames = arch.at("frames").get<int>();
        ckpt.params.arch.image_channels = arch.at("image_channels").get<int>();
        ckpt.params.arch.feature_channels = arch.at("feature_channels").get<int>();
        ckpt.params.arch.out_channels = arch.at("out_channels").get<int>();
        ckpt.report = header.value("report", json());
    } catch (const json::exception& e) {
        throw io_error(name + ": invalid checkpoint header: " + std::string(e.what()));
    }
    ckpt.params.layers = model_layers(ckpt.params.arch);

    const json& table = header.at("tensors");
    if (table.size() != ckpt.params.layers.size()) {
        throw io_error(name + ": tensor count " + std::to_string(table.size()) +
                       " does not match architecture (" + std::to_string(ckpt.params.layers.size()) +
                       " expected)");
    }
    size_t offset = 12 + header_len;
    for (size_t i = 0; i < ckpt.params.layers.size(); ++i) {
        const LayerSpec& spec = ckpt.params.layers[i];
        const Shape4 expect{spec.out_ch, spec.in_ch / spec.groups, spec.k, spec.k};
        const std::string tname = table[i].value("name", "");
        const auto tshape = table[i].at("shape").get<std::vector<int>>();
        if (tname != spec.name || tshape != std::vector<int>{expect.n, expect.c, expect.h, expect.w}) {
            throw io_error(name + ": tensor " + std::to_string(i) + " (" + tname +
                           ") conflicts with architecture layer " + spec.name + " " + expect.str());
        }
        const size_t count = size_t(expect.numel());
        if (bytes.size() < offset + count * 4) {
            throw io_error(name + ": truncated payload at tensor " + spec.name);
        }
        std::vector<float> values(count);
        for (size_t e = 0; e < count; ++e) values[e] = detail::get_f32le(bytes.data() + offset + e * 4);
        offset += count * 4;
        ckpt.params.tensors.push_back(make_tensor<float>(expect, std::move(values)));
    }
    if (offset != bytes.size()) throw io_error(name + ": trailing bytes after payload");
    return ckpt;
}

} // namespace tempoden
