#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "tempoden/frame.hpp"

namespace tempoden {

using json = nlohmann::json;

// 10*log10(peak^2 / MSE), in dB. Frames and peak must be in the same units.
// Identical frames return +infinity (serialized as null in reports).
inline double psnr(const Frame& reference, const Frame& test, double peak) {
    if (reference.channels != test.channels || reference.height != test.height ||
        reference.width != test.width) {
        throw std::invalid_argument("psnr: frame geometry mismatch");
    }
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    double acc = 0.0;
    for (size_t i = 0; i < reference.values.size(); ++i) {
        const double d = double(reference.values[i]) - double(test.values[i]);
        acc += d * d;
    }
    const double mse = acc / double(reference.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

// Forces a rounding point. GCC contracts mul+add into FMA even across
// statements (-ffp-contract=fast is the -O default), which would break the
// exact SSIM identities below.
inline double store_rounded(double x) {
    volatile double v = x;
    return v;
}

inline const std::vector<double>& ssim_window() {
    static const std::vector<double> weights = [] {
        constexpr int kSize = 11;
        constexpr double kSigma = 1.5;
        std::vector<double> w(kSize * kSize);
        double sum = 0.0;
        for (int y = 0; y < kSize; ++y) {
            for (int x = 0; x < kSize; ++x) {
                const double dy = y - kSize / 2, dx = x - kSize / 2;
                w[y * kSize + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
                sum += w[y * kSize + x];
            }
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return weights;
}

} // namespace detail

// Single-scale SSIM: Gaussian 11x11 window (sigma 1.5), K1=0.01, K2=0.03,
// valid region only, channels scored independently then averaged.
inline double ssim(const Frame& reference, const Frame& test, double peak) {
    if (reference.channels != test.channels || reference.height != test.height ||
        reference.width != test.width) {
        throw std::invalid_argument("ssim: frame geometry mismatch");
    }
    constexpr int kWin = 11;
    if (reference.height < kWin || reference.width < kWin) {
        throw std::invalid_argument("ssim: frame smaller than the 11x11 window");
    }
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const auto& win = detail::ssim_window();

    double channel_sum = 0.0;
    for (int c = 0; c < reference.channels; ++c) {
        double acc = 0.0;
        std::int64_t count = 0;
        for (int y0 = 0; y0 + kWin <= reference.height; ++y0) {
            for (int x0 = 0; x0 + kWin <= reference.width; ++x0) {
                double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
                for (int dy = 0; dy < kWin; ++dy) {
                    for (int dx = 0; dx < kWin; ++dx) {
                        const double w = win[dy * kWin + dx];
                        const double a = reference.at(c, y0 + dy, x0 + dx);
                        const double b = test.at(c, y0 + dy, x0 + dx);
                        mx += w * a;
                        my += w * b;
                        mxx += w * (a * a);
                        myy += w * (b * b);
                        mxy += w * (a * b); // a*b first keeps ssim(a,b) == ssim(b,a) bit-exact
                    }
                }
                // Single rounded operation per statement keeps SSIM(x,x) == 1
                // and ssim(a,b) == ssim(b,a) exact.
                const double mean_xx = detail::store_rounded(mx * mx);
                const double mean_yy = detail::store_rounded(my * my);
                const double mean_xy = detail::store_rounded(mx * my);
                const double var_x = mxx - mean_xx;
                const double var_y = myy - mean_yy;
                const double cov = mxy - mean_xy;
                const double cross2 = 2.0 * mean_xy;
                const double lum_num = cross2 + c1;
                const double sq_sum = mean_xx + mean_yy;
                const double lum_den = sq_sum + c1;
                const double cov2 = 2.0 * cov;
                const double str_num = cov2 + c2;
                const double var_sum = var_x + var_y;
                const double str_den = var_sum + c2;
                acc += (lum_num * str_num) / (lum_den * str_den);
                ++count;
            }
        }
        channel_sum += acc / double(count);
    }
    return channel_sum / double(reference.channels);
}

struct ScoreReport {
    std::vector<double> psnr_db;
    std::vector<double> ssim;
    double mean_psnr_db = 0.0;
    double mean_ssim = 0.0;
    double peak = 1.0;

    json to_json() const {
        json frames = json::array();
        for (size_t i = 0; i < psnr_db.size(); ++i) {
            frames.push_back({{"frame_index", i}, {"psnr_db", psnr_db[i]}, {"ssim", ssim[i]}});
        }
        return json{{"frames", frames},
                    {"mean_psnr_db", mean_psnr_db},
                    {"mean_ssim", mean_ssim},
                    {"peak", peak}};
    }
};

// Per-frame PSNR/SSIM plus arithmetic means. Scores are computed on the
// [0,1] float representation; `peak` records the source range (255 for data
// that originated as 8-bit, 1.0 for float-native), which leaves the dB and
// SSIM values unchanged.
inline ScoreReport evaluate_sequence(const FrameSequence& clean, const FrameSequence& test) {
    if (clean.size() != test.size()) {
        throw std::invalid_argument("evaluate_sequence: length mismatch " +
                                    std::to_string(clean.size()) + " vs " + std::to_string(test.size()));
    }
    if (clean.empty()) throw std::invalid_argument("evaluate_sequence: empty sequences");
    ScoreReport report;
    report.peak = clean.bit_depth == 8 ? 255.0 : 1.0;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (int t = 0; t < clean.size(); ++t) {
        const double p = psnr(clean.frames[t], test.frames[t], 1.0);
        const double s = ssim(clean.frames[t], test.frames[t], 1.0);
        report.psnr_db.push_back(p);
        report.ssim.push_back(s);
        psnr_sum += p;
        ssim_sum += s;
    }
    report.mean_psnr_db = psnr_sum / double(clean.size());
    report.mean_ssim = ssim_sum / double(clean.size());
    return report;
}

} // namespace tempoden
