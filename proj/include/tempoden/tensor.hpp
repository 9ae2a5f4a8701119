#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tempoden/errors.hpp"

namespace tempoden {

// NCHW shape of a dense 4-D tensor.
struct Shape4 {
    int n = 0, c = 0, h = 0, w = 0;

    std::int64_t numel() const {
        return std::int64_t(n) * c * h * w;
    }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << "(" << n << "," << c << "," << h << "," << w << ")";
        return os.str();
    }
};

template <typename T>
class Tensor4;

template <typename T>
using TensorPtr = std::shared_ptr<Tensor4<T>>;

// Dense NCHW tensor doubling as a node in the reverse-mode graph. Ops link
// results to their inputs via `parents` and a closure that routes the
// incoming gradient; leaves carry requires_grad set by the caller.
template <typename T>
class Tensor4 {
public:
    using value_type = T;

    Shape4 shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::vector<T> grad; // allocated on first accumulation, same length as data

    std::vector<TensorPtr<T>> parents;
    std::function<void(const Tensor4<T>&)> backprop; // reads this->grad
    const char* op = "leaf";

    std::int64_t numel() const { return shape.numel(); }

    T& at(int n_, int c_, int h_, int w_) {
        return data[((std::int64_t(n_) * shape.c + c_) * shape.h + h_) * shape.w + w_];
    }
    const T& at(int n_, int c_, int h_, int w_) const {
        return data[((std::int64_t(n_) * shape.c + c_) * shape.h + h_) * shape.w + w_];
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }
    bool is_leaf() const { return parents.empty(); }
};

namespace detail {

template <typename T>
inline void check_finite(const std::vector<T>& values, const char* where) {
    for (const T v : values) {
        if (!std::isfinite(double(v))) {
            throw numeric_error(std::string(where) + ": non-finite value encountered");
        }
    }
}

} // namespace detail

template <typename T>
TensorPtr<T> make_tensor(Shape4 shape, std::vector<T> values, bool requires_grad = false) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw std::invalid_argument("make_tensor: negative dimension in " + shape.str());
    }
    if (std::int64_t(values.size()) != shape.numel()) {
        throw std::invalid_argument("make_tensor: data length " + std::to_string(values.size()) +
                                    " does not match shape " + shape.str());
    }
    detail::check_finite(values, "make_tensor");
    auto t = std::make_shared<Tensor4<T>>();
    t->shape = shape;
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

template <typename T>
TensorPtr<T> zeros(Shape4 shape, bool requires_grad = false) {
    return make_tensor<T>(shape, std::vector<T>(size_t(shape.numel()), T(0)), requires_grad);
}

template <typename T>
TensorPtr<T> full(Shape4 shape, T value, bool requires_grad = false) {
    return make_tensor<T>(shape, std::vector<T>(size_t(shape.numel()), value), requires_grad);
}

// Deep copy of values only; the copy is a leaf.
template <typename T>
TensorPtr<T> clone_values(const TensorPtr<T>& t, bool requires_grad = false) {
    return make_tensor<T>(t->shape, t->data, requires_grad);
}

template <typename To, typename From>
TensorPtr<To> cast_tensor(const TensorPtr<From>& t, bool requires_grad = false) {
    std::vector<To> out(t->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = To(t->data[i]);
    return make_tensor<To>(t->shape, std::move(out), requires_grad);
}

} // namespace tempoden
