#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tempoden {

// One video frame, CHW float values. Clean data lives in [0,1]; noisy data
// may exceed that range (noise is stored unclipped).
struct Frame {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> values;

    std::int64_t numel() const { return std::int64_t(channels) * height * width; }
    float& at(int c, int y, int x) { return values[(std::int64_t(c) * height + y) * width + x]; }
    const float& at(int c, int y, int x) const {
        return values[(std::int64_t(c) * height + y) * width + x];
    }
};

inline Frame make_frame(int channels, int height, int width, float fill = 0.0f) {
    Frame f;
    f.channels = channels;
    f.height = height;
    f.width = width;
    f.values.assign(size_t(std::int64_t(channels) * height * width), fill);
    return f;
}

// Ordered frame stack with value-range metadata. bit_depth 8 marks data that
// originated from 8-bit files (PSNR peak 255); 32 marks float-native data.
struct FrameSequence {
    std::vector<Frame> frames;
    int bit_depth = 8;
    double fps = 0.0;

    int size() const { return int(frames.size()); }
    bool empty() const { return frames.empty(); }

    void validate_uniform() const {
        if (frames.empty()) return;
        const Frame& f0 = frames.front();
        for (size_t i = 1; i < frames.size(); ++i) {
            const Frame& f = frames[i];
            if (f.channels != f0.channels || f.height != f0.height || f.width != f0.width) {
                throw std::invalid_argument("frame " + std::to_string(i) +
                                            " geometry differs from frame 0");
            }
        }
    }
};

} // namespace tempoden
