#pragma once

#include <string>
#include <vector>

#include "tempoden/gradcheck.hpp"
#include "tempoden/model.hpp"
#include "tempoden/ops.hpp"
#include "tempoden/rng.hpp"

namespace tempoden {

struct GradCheckResult {
    std::string op;
    double error = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

namespace detail {

// Random values bounded away from zero, so relu kinks and pool ties stay
// clear of the probe steps.
template <typename T>
TensorPtr<T> random_signed(Shape4 shape, CounterRng& rng, double scale = 1.0) {
    std::vector<T> values(size_t(shape.numel()));
    for (auto& v : values) {
        const double mag = rng.uniform(0.2, 1.0) * scale;
        v = T(rng.next_double() < 0.5 ? -mag : mag);
    }
    return make_tensor<T>(shape, std::move(values));
}

// Checks the T-precision analytic gradient of build(input) against a
// double-precision central-difference oracle of the same graph. `build`
// must accept TensorPtr<T> and TensorPtr<double> alike.
template <typename T, typename Build>
double dual_grad_check(const TensorPtr<double>& input, Build&& build) {
    auto x = cast_tensor<T>(input, true);
    auto loss = build(x);
    backward(loss);
    std::vector<T> analytic = x->grad.empty() ? std::vector<T>(x->data.size(), T(0)) : x->grad;

    constexpr double eps = 1e-6;
    double worst = 0.0;
    for (size_t i = 0; i < input->data.size(); ++i) {
        auto probe = [&](double delta) {
            auto xp = clone_values(input);
            xp->data[i] += delta;
            return double(build(xp)->data[0]);
        };
        const double numeric = (probe(eps) - probe(-eps)) / (2.0 * eps);
        worst = std::max(worst, rel_error(double(analytic[i]), numeric));
    }
    return worst;
}

} // namespace detail

// Finite-difference verification of every differentiable op plus the
// end-to-end pipeline on an 8x8, N=3 toy model. Each op appears exactly
// once; the reported error is the max over all probed directions.
template <typename T>
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
    const bool is_double = sizeof(T) == 8;
    const double threshold = is_double ? 1e-6 : 1e-2;
    CounterRng rng(seed, 0x6c, 0);

    std::vector<GradCheckResult> results;
    auto add = [&](const std::string& op, double error) {
        results.push_back({op, error, threshold, error < threshold});
    };
    auto scalar = [](const auto& like) {
        using U = typename std::decay_t<decltype(*like)>::value_type;
        return U(0);
    };

    { // conv2d: input and weight routes, plain and grouped
        auto x = detail::random_signed<double>({2, 4, 6, 6}, rng);
        auto w = detail::random_signed<double>({3, 4, 3, 3}, rng, 0.35);
        auto tgt = detail::random_signed<double>({2, 3, 6, 6}, rng);
        double err = detail::dual_grad_check<T>(x, [&](auto in) {
            decltype(in) wq = cast_tensor<decltype(scalar(in))>(w);
            decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
            return mse(conv2d(in, wq, 1, 1, 1), tq);
        });
        err = std::max(err, detail::dual_grad_check<T>(w, [&](auto in) {
                           decltype(in) xq = cast_tensor<decltype(scalar(in))>(x);
                           decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
                           return mse(conv2d(xq, in, 1, 1, 1), tq);
                       }));
        auto xg = detail::random_signed<double>({1, 6, 4, 4}, rng);
        auto wg = detail::random_signed<double>({6, 2, 3, 3}, rng, 0.35);
        auto tgtg = detail::random_signed<double>({1, 6, 2, 2}, rng);
        err = std::max(err, detail::dual_grad_check<T>(xg, [&](auto in) {
                           decltype(in) wq = cast_tensor<decltype(scalar(in))>(wg);
                           decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgtg);
                           return mse(conv2d(in, wq, 2, 1, 3), tq);
                       }));
        add("conv2d", err);
    }
    {
        auto x = detail::random_signed<double>({1, 3, 4, 4}, rng);
        add("relu", detail::dual_grad_check<T>(x, [&](auto in) {
                return mse(relu(in), zeros<decltype(scalar(in))>({1, 3, 4, 4}));
            }));
    }
    {
        auto x = detail::random_signed<double>({1, 2, 6, 6}, rng);
        auto tgt = detail::random_signed<double>({1, 2, 3, 3}, rng);
        add("maxpool2", detail::dual_grad_check<T>(x, [&](auto in) {
                decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
                return mse(maxpool2(in), tq);
            }));
    }
    {
        auto x = detail::random_signed<double>({1, 2, 3, 3}, rng);
        auto tgt = detail::random_signed<double>({1, 2, 6, 6}, rng);
        add("upsample_nearest2", detail::dual_grad_check<T>(x, [&](auto in) {
                decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
                return mse(upsample_nearest2(in), tq);
            }));
    }
    {
        auto a = detail::random_signed<double>({1, 2, 3, 3}, rng);
        auto b = detail::random_signed<double>({1, 3, 3, 3}, rng);
        auto tgt = detail::random_signed<double>({1, 5, 3, 3}, rng);
        double err = detail::dual_grad_check<T>(a, [&](auto in) {
            decltype(in) bq = cast_tensor<decltype(scalar(in))>(b);
            decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
            return mse(concat_channels(in, bq), tq);
        });
        err = std::max(err, detail::dual_grad_check<T>(b, [&](auto in) {
                           decltype(in) aq = cast_tensor<decltype(scalar(in))>(a);
                           decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
                           return mse(concat_channels(aq, in), tq);
                       }));
        add("concat_channels", err);
    }
    {
        auto x = detail::random_signed<double>({1, 6, 3, 3}, rng);
        auto tgt = detail::random_signed<double>({1, 3, 3, 3}, rng);
        add("slice_channels", detail::dual_grad_check<T>(x, [&](auto in) {
                decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
                return mse(slice_channels(in, 2, 5), tq);
            }));
    }
    {
        auto x = detail::random_signed<double>({1, 2, 3, 3}, rng);
        auto tgt = detail::random_signed<double>({1, 2, 3, 3}, rng);
        add("scale", detail::dual_grad_check<T>(x, [&](auto in) {
                using U = decltype(scalar(in));
                decltype(in) tq = cast_tensor<U>(tgt);
                return mse(scale(in, U(2.0 / 3.0)), tq);
            }));
    }
    {
        auto x = detail::random_signed<double>({1, 2, 3, 3}, rng);
        auto tgt = detail::random_signed<double>({1, 2, 3, 3}, rng);
        add("mse", detail::dual_grad_check<T>(x, [&](auto in) {
                decltype(in) tq = cast_tensor<decltype(scalar(in))>(tgt);
                return mse(in, tq);
            }));
    }
    { // end-to-end: loss through generator, filter, and U-Net on an 8x8 toy
        const double eps = is_double ? 1e-5 : 1e-4;
        ArchConfig arch;
        arch.frames = 3;
        arch.image_channels = 1;
        arch.feature_channels = 4;
        arch.out_channels = 1;
        ModelParams<T> params = cast_params<T>(model_init<float>(arch, seed + 1));
        params.set_requires_grad(true);
        ModelParams<double> mirror = cast_params<double>(params);
        const TemporalKernel kernel = temporal_kernel(arch.frames);
        auto window = zeros<T>({1, 3, 8, 8});
        CounterRng wrng(seed, 0x77, 0);
        for (auto& v : window->data) v = T(wrng.uniform(0.1, 0.9));
        auto target = zeros<T>({1, 1, 8, 8});
        for (auto& v : target->data) v = T(wrng.uniform(0.1, 0.9));
        auto window_d = cast_tensor<double>(window);
        auto target_d = cast_tensor<double>(target);
        const double err = grad_check_params<T>(
            [&] { return mse(model_forward(params, window, kernel), target); }, params.tensors,
            [&] { return mse(model_forward(mirror, window_d, kernel), target_d); }, mirror.tensors,
            eps, 3, seed);
        add("pipeline", err);
    }
    return results;
}

} // namespace tempoden
