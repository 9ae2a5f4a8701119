#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace tempoden {

// V-shaped temporal weight vector: zero at the window centre, one at both
// ends, piecewise linear in between. weights[i] == |i-k|/k with k = M/2.
struct TemporalKernel {
    std::vector<float> weights;

    int window() const { return int(weights.size()); }
    int center() const { return int(weights.size()) / 2; }
};

inline TemporalKernel temporal_kernel(int m) {
    if (m < 3 || m % 2 == 0) {
        throw std::invalid_argument("temporal_kernel: window must be odd and >= 3, got " +
                                    std::to_string(m));
    }
    const int k = m / 2;
    TemporalKernel kernel;
    kernel.weights.resize(size_t(m));
    for (int i = 0; i < m; ++i) {
        kernel.weights[size_t(i)] = float(std::abs(i - k)) / float(k);
    }
    return kernel;
}

// Bypassed filter for the ablation arm: every weight is one, including the
// centre, so the denoiser sees the raw central-frame features.
inline TemporalKernel flat_kernel(int m) {
    if (m < 3 || m % 2 == 0) {
        throw std::invalid_argument("flat_kernel: window must be odd and >= 3, got " + std::to_string(m));
    }
    TemporalKernel kernel;
    kernel.weights.assign(size_t(m), 1.0f);
    return kernel;
}

} // namespace tempoden
