#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tempoden/ops.hpp"
#include "tempoden/rng.hpp"
#include "tempoden/tensor.hpp"

namespace tempoden {

namespace detail {

inline double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

} // namespace detail

// Compares the analytic gradient of build(input) against central finite
// differences, elementwise over the input. Returns the max relative error
// |a-n| / max(|a|,|n|,1e-6).
template <typename T>
double grad_check(const std::function<TensorPtr<T>(TensorPtr<T>)>& build, const TensorPtr<T>& input,
                  T eps) {
    auto x = clone_values(input, true);
    auto loss = build(x);
    if (loss->numel() != 1) throw std::invalid_argument("grad_check: graph must yield a scalar");
    backward(loss);
    std::vector<T> analytic = x->grad.empty() ? std::vector<T>(x->data.size(), T(0)) : x->grad;

    double worst = 0.0;
    for (size_t i = 0; i < x->data.size(); ++i) {
        auto probe = [&](T delta) {
            auto xp = clone_values(input, false);
            xp->data[i] += delta;
            return double(build(xp)->data[0]);
        };
        const double numeric = (probe(eps) - probe(-eps)) / (2.0 * double(eps));
        worst = std::max(worst, detail::rel_error(double(analytic[i]), numeric));
    }
    return worst;
}

// Finite-difference check of a loss over a parameter list, probing a few
// elements per tensor. The analytic gradients under test come from the
// T-precision graph; the central-difference oracle is evaluated on a
// double-precision mirror of the same point, because an f32-evaluated
// difference carries forward-rounding noise of the same order as the 1e-2
// bound being certified. Probes skip vanishing-gradient elements and steps
// that straddle a relu/pool kink (second-difference test).
template <typename T>
double grad_check_params(const std::function<TensorPtr<T>()>& loss_fn,
                         const std::vector<TensorPtr<T>>& params,
                         const std::function<TensorPtr<double>()>& oracle_fn,
                         const std::vector<TensorPtr<double>>& oracle_params, double eps,
                         int probes_per_tensor, std::uint64_t seed) {
    if (params.size() != oracle_params.size()) {
        throw std::invalid_argument("grad_check_params: parameter lists differ");
    }
    for (const auto& p : params) p->zero_grad();
    auto loss = loss_fn();
    if (loss->numel() != 1) throw std::invalid_argument("grad_check_params: loss must be scalar");
    backward(loss);
    const double center = double(oracle_fn()->data[0]);

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        auto& q = oracle_params[pi];
        if (p->grad.empty()) p->ensure_grad();
        double max_mag = 0.0;
        for (size_t i = 0; i < p->grad.size(); ++i) {
            max_mag = std::max(max_mag, std::abs(double(p->grad[i])));
        }
        const double floor = std::max(0.05 * max_mag, 1e-12);

        CounterRng rng(seed, 0xabcdef, pi);
        int accepted = 0;
        for (int tries = 0; tries < 200 && accepted < probes_per_tensor; ++tries) {
            const size_t idx = size_t(rng.next_u64() % p->data.size());
            if (std::abs(double(p->grad[idx])) < floor) continue;
            const double saved = q->data[idx];
            q->data[idx] = saved + eps;
            const double up = double(oracle_fn()->data[0]);
            q->data[idx] = saved - eps;
            const double down = double(oracle_fn()->data[0]);
            q->data[idx] = saved;
            const double diff = up - down;
            if (diff == 0.0) continue;
            // kink detection: curvature against the slope scale
            const double bend = std::abs(up + down - 2.0 * center);
            if (bend > 0.25 * std::abs(diff)) continue;
            const double numeric = diff / (2.0 * eps);
            worst = std::max(worst, detail::rel_error(double(p->grad[idx]), numeric));
            ++accepted;
        }
    }
    return worst;
}

} // namespace tempoden
