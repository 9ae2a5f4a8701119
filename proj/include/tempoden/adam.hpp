#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tempoden/tensor.hpp"

namespace tempoden {

// Adam with the usual defaults; one state object drives a fixed, ordered
// parameter list.
template <typename T>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;

    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    explicit AdamState(const std::vector<TensorPtr<T>>& params) {
        m.reserve(params.size());
        v.reserve(params.size());
        for (const auto& p : params) {
            m.emplace_back(p->data.size(), T(0));
            v.emplace_back(p->data.size(), T(0));
        }
    }
};

// Bias-corrected in-place update. Parameters without an accumulated gradient
// are rejected; zero gradients still advance the step counter.
template <typename T>
void adam_step(const std::vector<TensorPtr<T>>& params, AdamState<T>& state) {
    if (params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: state tracks " + std::to_string(state.m.size()) +
                                    " parameters, got " + std::to_string(params.size()));
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i]->grad.size() != params[i]->data.size()) {
            throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                        " has no accumulated gradient");
        }
        detail::check_finite(params[i]->grad, "adam_step");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->data;
        const auto& g = params[i]->grad;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            const double gj = double(g[j]);
            const double mj = state.beta1 * double(m[j]) + (1.0 - state.beta1) * gj;
            const double vj = state.beta2 * double(v[j]) + (1.0 - state.beta2) * gj * gj;
            m[j] = T(mj);
            v[j] = T(vj);
            p[j] = T(double(p[j]) - state.lr * (mj / bc1) / (std::sqrt(vj / bc2) + state.eps));
        }
    }
}

} // namespace tempoden
