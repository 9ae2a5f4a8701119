#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "tempoden/gemm.hpp"
#include "tempoden/tensor.hpp"

namespace tempoden {

namespace detail {

// Test-only negative control for the gradient checker: when set, relu's
// backward is deliberately wrong.
inline bool& corrupt_relu_backward() {
    static bool flag = false;
    return flag;
}

template <typename T>
void im2col(const T* src, int channels, int h, int w, int k, int stride, int pad,
            int out_h, int out_w, T* col) {
    const std::int64_t plane = std::int64_t(out_h) * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + ((std::int64_t(c) * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    T* row = dst + std::int64_t(oy) * out_w;
                    if (iy < 0 || iy >= h) {
                        std::fill(row, row + out_w, T(0));
                        continue;
                    }
                    const T* srow = src + (std::int64_t(c) * h + iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, int stride, int pad,
                int out_h, int out_w, T* dst) {
    const std::int64_t plane = std::int64_t(out_h) * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* srcp = col + ((std::int64_t(c) * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* drow = dst + (std::int64_t(c) * h + iy) * w;
                    const T* srow = srcp + std::int64_t(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

} // namespace detail

// 2-D convolution, zero padding, square kernel, no bias. groups == frame
// count realizes the depthwise feature generator; groups == 1 is a standard
// conv.
template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& input, const TensorPtr<T>& weight, int stride, int pad,
                    int groups) {
    const Shape4 xs = input->shape;
    const Shape4 ws = weight->shape;
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1, got " + std::to_string(stride));
    if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0, got " + std::to_string(pad));
    if (groups < 1) throw std::invalid_argument("conv2d: groups must be >= 1, got " + std::to_string(groups));
    if (ws.h != ws.w) {
        throw std::invalid_argument("conv2d: kernel must be square, got kh=" + std::to_string(ws.h) +
                                    " kw=" + std::to_string(ws.w));
    }
    if (xs.c % groups != 0) {
        throw std::invalid_argument("conv2d: in_ch=" + std::to_string(xs.c) +
                                    " not divisible by groups=" + std::to_string(groups));
    }
    if (ws.n % groups != 0) {
        throw std::invalid_argument("conv2d: out_ch=" + std::to_string(ws.n) +
                                    " not divisible by groups=" + std::to_string(groups));
    }
    if (ws.c != xs.c / groups) {
        throw std::invalid_argument("conv2d: weight in_ch/groups=" + std::to_string(ws.c) +
                                    " does not match input in_ch/groups=" + std::to_string(xs.c / groups));
    }
    const int k = ws.h;
    const int out_h = (xs.h + 2 * pad - k) / stride + 1;
    const int out_w = (xs.w + 2 * pad - k) / stride + 1;
    if (xs.h + 2 * pad < k || xs.w + 2 * pad < k) {
        throw std::invalid_argument("conv2d: kernel k=" + std::to_string(k) + " larger than padded input " +
                                    xs.str());
    }

    const int cig = xs.c / groups;  // input channels per group
    const int cog = ws.n / groups;  // output channels per group
    const std::int64_t in_plane = std::int64_t(xs.h) * xs.w;
    const std::int64_t out_plane = std::int64_t(out_h) * out_w;
    const int col_rows = cig * k * k;
    const bool direct = (k == 1 && stride == 1 && pad == 0);

    auto out = zeros<T>({xs.n, ws.n, out_h, out_w});
    std::vector<T> col(direct ? 0 : std::size_t(col_rows) * out_plane);
    for (int i = 0; i < xs.n; ++i) {
        for (int g = 0; g < groups; ++g) {
            const T* xg = input->data.data() + (std::int64_t(i) * xs.c + std::int64_t(g) * cig) * in_plane;
            const T* wg = weight->data.data() + std::size_t(g) * cog * col_rows;
            T* og = out->data.data() + (std::int64_t(i) * ws.n + std::int64_t(g) * cog) * out_plane;
            if (direct) {
                detail::gemm_nn(cog, int(out_plane), cig, wg, xg, og);
            } else {
                detail::im2col(xg, cig, xs.h, xs.w, k, stride, pad, out_h, out_w, col.data());
                detail::gemm_nn(cog, int(out_plane), col_rows, wg, col.data(), og);
            }
        }
    }
    detail::check_finite(out->data, "conv2d");

    out->requires_grad = input->requires_grad || weight->requires_grad;
    out->op = "conv2d";
    out->parents = {input, weight};
    if (out->requires_grad) {
        out->backprop = [stride, pad, groups, k, cig, cog, col_rows, out_h, out_w](const Tensor4<T>& self) {
            const auto& x = self.parents[0];
            const auto& w = self.parents[1];
            const Shape4 xs2 = x->shape;
            const std::int64_t in_plane2 = std::int64_t(xs2.h) * xs2.w;
            const std::int64_t out_plane2 = std::int64_t(out_h) * out_w;
            const bool direct2 = (k == 1 && stride == 1 && pad == 0);
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            std::vector<T> col(direct2 ? 0 : std::size_t(col_rows) * out_plane2);
            std::vector<T> dcol;
            for (int i = 0; i < xs2.n; ++i) {
                for (int g = 0; g < groups; ++g) {
                    const std::int64_t xoff = (std::int64_t(i) * xs2.c + std::int64_t(g) * cig) * in_plane2;
                    const std::int64_t ooff =
                        (std::int64_t(i) * self.shape.c + std::int64_t(g) * cog) * out_plane2;
                    const T* dout = self.grad.data() + ooff;
                    const T* wg = w->data.data() + std::size_t(g) * cog * col_rows;
                    if (direct2) {
                        if (w->requires_grad) {
                            detail::gemm_nt(cog, cig, int(out_plane2), dout, x->data.data() + xoff,
                                            w->grad.data() + std::size_t(g) * cog * cig);
                        }
                        if (x->requires_grad) {
                            detail::gemm_tn(cig, int(out_plane2), cog, wg, dout, x->grad.data() + xoff);
                        }
                        continue;
                    }
                    if (w->requires_grad) {
                        detail::im2col(x->data.data() + xoff, cig, xs2.h, xs2.w, k, stride, pad, out_h,
                                       out_w, col.data());
                        detail::gemm_nt(cog, col_rows, int(out_plane2), dout, col.data(),
                                        w->grad.data() + std::size_t(g) * cog * col_rows);
                    }
                    if (x->requires_grad) {
                        dcol.assign(std::size_t(col_rows) * out_plane2, T(0));
                        detail::gemm_tn(col_rows, int(out_plane2), cog, wg, dout, dcol.data());
                        detail::col2im_add(dcol.data(), cig, xs2.h, xs2.w, k, stride, pad, out_h, out_w,
                                           x->grad.data() + xoff);
                    }
                }
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& input) {
    auto out = zeros<T>(input->shape);
    for (size_t i = 0; i < input->data.size(); ++i) out->data[i] = std::max(T(0), input->data[i]);
    out->requires_grad = input->requires_grad;
    out->op = "relu";
    out->parents = {input};
    if (out->requires_grad) {
        out->backprop = [](const Tensor4<T>& self) {
            const auto& x = self.parents[0];
            if (!x->requires_grad) return;
            x->ensure_grad();
            const T bias = detail::corrupt_relu_backward() ? T(0.05) : T(0);
            for (size_t i = 0; i < self.grad.size(); ++i) {
                if (x->data[i] > T(0)) x->grad[i] += self.grad[i] * (T(1) + bias);
            }
        };
    }
    return out;
}

// 2x2 max-pooling, stride 2. Spatial dims must be even.
template <typename T>
TensorPtr<T> maxpool2(const TensorPtr<T>& input) {
    const Shape4 s = input->shape;
    if (s.h % 2 != 0 || s.w % 2 != 0) {
        throw std::invalid_argument("maxpool2: spatial dims must be even, got h=" + std::to_string(s.h) +
                                    " w=" + std::to_string(s.w));
    }
    const int oh = s.h / 2, ow = s.w / 2;
    auto out = zeros<T>({s.n, s.c, oh, ow});
    std::vector<std::int64_t> argmax(size_t(out->numel()));
    std::int64_t oi = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const std::int64_t base = (std::int64_t(n) * s.c + c) * s.h * s.w;
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    T best = input->data[base + std::int64_t(2 * y) * s.w + 2 * x];
                    std::int64_t besti = base + std::int64_t(2 * y) * s.w + 2 * x;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::int64_t idx = base + std::int64_t(2 * y + dy) * s.w + (2 * x + dx);
                            if (input->data[idx] > best) {
                                best = input->data[idx];
                                besti = idx;
                            }
                        }
                    }
                    out->data[oi] = best;
                    argmax[oi] = besti;
                    ++oi;
                }
            }
        }
    }
    out->requires_grad = input->requires_grad;
    out->op = "maxpool2";
    out->parents = {input};
    if (out->requires_grad) {
        out->backprop = [argmax = std::move(argmax)](const Tensor4<T>& self) {
            const auto& x = self.parents[0];
            if (!x->requires_grad) return;
            x->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) x->grad[argmax[i]] += self.grad[i];
        };
    }
    return out;
}

// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.
template <typename T>
TensorPtr<T> upsample_nearest2(const TensorPtr<T>& input) {
    const Shape4 s = input->shape;
    const int oh = s.h * 2, ow = s.w * 2;
    auto out = zeros<T>({s.n, s.c, oh, ow});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const std::int64_t ibase = (std::int64_t(n) * s.c + c) * s.h * s.w;
            const std::int64_t obase = (std::int64_t(n) * s.c + c) * oh * ow;
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    const T v = input->data[ibase + std::int64_t(y) * s.w + x];
                    const std::int64_t o = obase + std::int64_t(2 * y) * ow + 2 * x;
                    out->data[o] = v;
                    out->data[o + 1] = v;
                    out->data[o + ow] = v;
                    out->data[o + ow + 1] = v;
                }
            }
        }
    }
    out->requires_grad = input->requires_grad;
    out->op = "upsample_nearest2";
    out->parents = {input};
    if (out->requires_grad) {
        out->backprop = [](const Tensor4<T>& self) {
            const auto& x = self.parents[0];
            if (!x->requires_grad) return;
            x->ensure_grad();
            const Shape4 s2 = x->shape;
            const int oh2 = s2.h * 2, ow2 = s2.w * 2;
            for (int n = 0; n < s2.n; ++n) {
                for (int c = 0; c < s2.c; ++c) {
                    const std::int64_t ibase = (std::int64_t(n) * s2.c + c) * s2.h * s2.w;
                    const std::int64_t obase = (std::int64_t(n) * s2.c + c) * oh2 * ow2;
                    for (int y = 0; y < s2.h; ++y) {
                        for (int x2 = 0; x2 < s2.w; ++x2) {
                            const std::int64_t o = obase + std::int64_t(2 * y) * ow2 + 2 * x2;
                            x->grad[ibase + std::int64_t(y) * s2.w + x2] +=
                                self.grad[o] + self.grad[o + 1] + self.grad[o + ow2] + self.grad[o + ow2 + 1];
                        }
                    }
                }
            }
        };
    }
    return out;
}

// Concatenates along the channel dimension, inputs in order. Zero-channel
// inputs are allowed and contribute nothing.
template <typename T>
TensorPtr<T> concat_channels(const std::vector<TensorPtr<T>>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const Shape4 first = inputs[0]->shape;
    int total_c = 0;
    for (const auto& t : inputs) {
        if (t->shape.n != first.n || t->shape.h != first.h || t->shape.w != first.w) {
            throw std::invalid_argument("concat_channels: mismatched geometry " + t->shape.str() + " vs " +
                                        first.str());
        }
        total_c += t->shape.c;
    }
    auto out = zeros<T>({first.n, total_c, first.h, first.w});
    const std::int64_t plane = std::int64_t(first.h) * first.w;
    for (int n = 0; n < first.n; ++n) {
        std::int64_t coff = 0;
        for (const auto& t : inputs) {
            const std::int64_t len = std::int64_t(t->shape.c) * plane;
            std::copy_n(t->data.data() + std::int64_t(n) * len, len,
                        out->data.data() + (std::int64_t(n) * total_c + coff) * plane);
            coff += t->shape.c;
        }
    }
    out->op = "concat_channels";
    out->parents = inputs;
    for (const auto& t : inputs) out->requires_grad = out->requires_grad || t->requires_grad;
    if (out->requires_grad) {
        out->backprop = [](const Tensor4<T>& self) {
            const Shape4 os = self.shape;
            const std::int64_t plane2 = std::int64_t(os.h) * os.w;
            std::int64_t coff = 0;
            for (const auto& t : self.parents) {
                if (t->requires_grad) {
                    t->ensure_grad();
                    const std::int64_t len = std::int64_t(t->shape.c) * plane2;
                    for (int n = 0; n < os.n; ++n) {
                        const T* src = self.grad.data() + (std::int64_t(n) * os.c + coff) * plane2;
                        T* dst = t->grad.data() + std::int64_t(n) * len;
                        for (std::int64_t i = 0; i < len; ++i) dst[i] += src[i];
                    }
                }
                coff += t->shape.c;
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> concat_channels(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    return concat_channels<T>(std::vector<TensorPtr<T>>{a, b});
}

// Channel-range view copy [c_begin, c_end).
template <typename T>
TensorPtr<T> slice_channels(const TensorPtr<T>& input, int c_begin, int c_end) {
    const Shape4 s = input->shape;
    if (c_begin < 0 || c_end > s.c || c_begin > c_end) {
        throw std::invalid_argument("slice_channels: range [" + std::to_string(c_begin) + "," +
                                    std::to_string(c_end) + ") out of bounds for c=" + std::to_string(s.c));
    }
    const int cs = c_end - c_begin;
    auto out = zeros<T>({s.n, cs, s.h, s.w});
    const std::int64_t plane = std::int64_t(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
        std::copy_n(input->data.data() + (std::int64_t(n) * s.c + c_begin) * plane, std::int64_t(cs) * plane,
                    out->data.data() + std::int64_t(n) * cs * plane);
    }
    out->requires_grad = input->requires_grad;
    out->op = "slice_channels";
    out->parents = {input};
    if (out->requires_grad) {
        out->backprop = [c_begin, cs](const Tensor4<T>& self) {
            const auto& x = self.parents[0];
            if (!x->requires_grad) return;
            x->ensure_grad();
            const Shape4 s2 = x->shape;
            const std::int64_t plane2 = std::int64_t(s2.h) * s2.w;
            for (int n = 0; n < s2.n; ++n) {
                const T* src = self.grad.data() + std::int64_t(n) * cs * plane2;
                T* dst = x->grad.data() + (std::int64_t(n) * s2.c + c_begin) * plane2;
                for (std::int64_t i = 0; i < std::int64_t(cs) * plane2; ++i) dst[i] += src[i];
            }
        };
    }
    return out;
}

// Multiplies every element by s. s == 0 produces an exact zero tensor, which
// is what makes the central-frame blind spot airtight.
template <typename T>
TensorPtr<T> scale(const TensorPtr<T>& input, T s) {
    if (!std::isfinite(double(s))) throw std::invalid_argument("scale: factor must be finite");
    auto out = zeros<T>(input->shape);
    if (s != T(0)) {
        for (size_t i = 0; i < input->data.size(); ++i) out->data[i] = input->data[i] * s;
    }
    out->requires_grad = input->requires_grad;
    out->op = "scale";
    out->parents = {input};
    if (out->requires_grad) {
        out->backprop = [s](const Tensor4<T>& self) {
            const auto& x = self.parents[0];
            if (!x->requires_grad || s == T(0)) return;
            x->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) x->grad[i] += s * self.grad[i];
        };
    }
    return out;
}

// Mean squared error over all elements; returns a (1,1,1,1) scalar node.
template <typename T>
TensorPtr<T> mse(const TensorPtr<T>& pred, const TensorPtr<T>& target) {
    if (!(pred->shape == target->shape)) {
        throw std::invalid_argument("mse: shape mismatch " + pred->shape.str() + " vs " +
                                    target->shape.str());
    }
    if (pred->numel() == 0) throw std::invalid_argument("mse: empty tensors");
    double acc = 0.0;
    for (size_t i = 0; i < pred->data.size(); ++i) {
        const double d = double(pred->data[i]) - double(target->data[i]);
        acc += d * d;
    }
    const double value = acc / double(pred->numel());
    auto out = make_tensor<T>({1, 1, 1, 1}, {T(value)});
    out->requires_grad = pred->requires_grad || target->requires_grad;
    out->op = "mse";
    out->parents = {pred, target};
    if (out->requires_grad) {
        out->backprop = [](const Tensor4<T>& self) {
            const auto& p = self.parents[0];
            const auto& t = self.parents[1];
            const T g = self.grad[0];
            const T inv = T(2) / T(double(p->numel()));
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->data.size(); ++i) {
                    p->grad[i] += g * inv * (p->data[i] - t->data[i]);
                }
            }
            if (t->requires_grad) {
                t->ensure_grad();
                for (size_t i = 0; i < t->data.size(); ++i) {
                    t->grad[i] -= g * inv * (p->data[i] - t->data[i]);
                }
            }
        };
    }
    return out;
}

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively
// into every reachable tensor with requires_grad; call zero_grad on leaves
// to reset between steps.
template <typename T>
void backward(const TensorPtr<T>& loss) {
    if (loss->numel() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " + loss->shape.str());
    }
    if (!loss->requires_grad) return;

    // Post-order DFS over parents; reversed, every node runs before the
    // tensors it feeds gradient into.
    std::vector<Tensor4<T>*> order;
    std::unordered_set<Tensor4<T>*> visited;
    std::vector<std::pair<Tensor4<T>*, size_t>> stack;
    stack.push_back({loss.get(), 0});
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor4<T>* parent = node->parents[next].get();
            ++next;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior gradients are per-sweep scratch; only leaves accumulate
    // across repeated backward calls.
    for (Tensor4<T>* node : order) {
        if (!node->is_leaf()) node->zero_grad();
    }
    loss->ensure_grad();
    loss->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor4<T>* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

} // namespace tempoden
