#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "tempoden/rng.hpp"
#include "tempoden/tensor.hpp"

namespace testutil {

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("tempoden_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

template <typename T>
tempoden::TensorPtr<T> random_tensor(tempoden::Shape4 shape, std::uint64_t seed, double lo = -1.0,
                                     double hi = 1.0) {
    tempoden::CounterRng rng(seed, 0xbeef, 0);
    std::vector<T> values(size_t(shape.numel()));
    for (auto& v : values) v = T(rng.uniform(lo, hi));
    return tempoden::make_tensor<T>(shape, std::move(values));
}

// Straightforward reference convolution: independent of the im2col/GEMM
// implementation path it checks.
template <typename T>
tempoden::TensorPtr<T> naive_conv2d(const tempoden::TensorPtr<T>& x, const tempoden::TensorPtr<T>& w,
                                    int stride, int pad, int groups) {
    const auto xs = x->shape;
    const auto ws = w->shape;
    const int k = ws.h;
    const int oh = (xs.h + 2 * pad - k) / stride + 1;
    const int ow = (xs.w + 2 * pad - k) / stride + 1;
    const int cig = xs.c / groups;
    const int cog = ws.n / groups;
    auto out = tempoden::zeros<T>({xs.n, ws.n, oh, ow});
    for (int n = 0; n < xs.n; ++n) {
        for (int g = 0; g < groups; ++g) {
            for (int oc = 0; oc < cog; ++oc) {
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        double acc = 0.0;
                        for (int ic = 0; ic < cig; ++ic) {
                            for (int ky = 0; ky < k; ++ky) {
                                for (int kx = 0; kx < k; ++kx) {
                                    const int iy = oy * stride - pad + ky;
                                    const int ix = ox * stride - pad + kx;
                                    if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                                    acc += double(x->at(n, g * cig + ic, iy, ix)) *
                                           double(w->at(g * cog + oc, ic, ky, kx));
                                }
                            }
                        }
                        out->at(n, g * cog + oc, oy, ox) = T(acc);
                    }
                }
            }
        }
    }
    return out;
}

} // namespace testutil
