#pragma once

#include <vector>

#include <algorithm>
#include <cmath>
#include <limits>

#include "svkit/detail/blas.hpp"
#include "svkit/tape.hpp"
#include "svkit/tensor.hpp"

namespace svkit {

// Elementwise binary ops require equal shapes; a size-1 second operand is
// broadcast as a scalar. No other broadcasting.
template <class S> TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);

template <class S> TensorT<S> add_scalar(const TensorT<S>& a, S c);
template <class S> TensorT<S> scale(const TensorT<S>& a, S c);

template <class S> TensorT<S> relu(const TensorT<S>& a);
template <class S> TensorT<S> tanh(const TensorT<S>& a);
template <class S> TensorT<S> exp(const TensorT<S>& a);

// [m,k] x [k,n] -> [m,n]
template <class S> TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);

template <class S> TensorT<S> sum(const TensorT<S>& a);
template <class S> TensorT<S> sum(const TensorT<S>& a, std::size_t axis);
template <class S> TensorT<S> mean(const TensorT<S>& a);
template <class S> TensorT<S> mean(const TensorT<S>& a, std::size_t axis);
template <class S> TensorT<S> max(const TensorT<S>& a);
template <class S> TensorT<S> max(const TensorT<S>& a, std::size_t axis);

template <class S> TensorT<S> reshape(const TensorT<S>& a, Shape shape);
// rank-2 only
template <class S> TensorT<S> transpose(const TensorT<S>& a);

// numerically stabilized softmax along `axis`
template <class S> TensorT<S> softmax(const TensorT<S>& a, std::size_t axis);

// Channel axis is dim 0 for [C,F,T] and dim 1 for [N,C,F,T].
template <class S> TensorT<S> concat_channels(const std::vector<TensorT<S>>& parts);
template <class S>
TensorT<S> slice_channels(const TensorT<S>& a, std::size_t from, std::size_t count);

// rank-2 [n_i, d] -> [sum n_i, d]
template <class S> TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts);

// [N,C,F,T] <-> per-sample [C,F,T]
template <class S> TensorT<S> stack_batch(const std::vector<TensorT<S>>& samples);
template <class S> TensorT<S> select_batch(const TensorT<S>& a, std::size_t n);

// one element as a scalar tensor (row-major flat index)
template <class S> TensorT<S> select_scalar(const TensorT<S>& a, std::size_t flat_index);

// mean negative log-softmax of the true class over the batch
template <class S>
TensorT<S> softmax_cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels);



namespace opdetail {

template <class S>
void check_same_shape(const char* op, const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(msg(op, ": shape mismatch ", shape_str(a.shape()),
                                        " vs ", shape_str(b.shape())));
}

// outer * n * inner decomposition around a reduction axis
struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size())
        throw std::invalid_argument(
            msg("axis ", axis, " out of range for shape ", shape_str(shape)));
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.n = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

inline Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out;
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (i != axis) out.push_back(shape[i]);
    if (out.empty()) out.push_back(1);
    return out;
}

inline std::size_t channel_axis(const Shape& shape) {
    if (shape.size() == 3) return 0;
    if (shape.size() == 4) return 1;
    throw std::invalid_argument(
        msg("channel ops expect rank 3 or 4, got shape ", shape_str(shape)));
}

}  // namespace opdetail

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    const bool scalar_b = b.size() == 1 && a.size() != 1;
    if (!scalar_b) opdetail::check_same_shape("add", a, b);
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + (scalar_b ? bd[0] : bd[i]);
    if (tracing<S>({&a, &b})) {
        TapeT<S>::current()->record("add", {a, b}, out, [a = a, b = b, out, scalar_b]() mutable {
            auto g = out.grad();
            accumulate_grad(a, g.data(), g.size());
            if (wants_grad(b)) {
                b.ensure_grad();
                auto gb = b.grad();
                if (scalar_b) {
                    S s = 0;
                    for (S v : g) s += v;
                    gb[0] += s;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                }
            }
        });
    }
    return out;
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    const bool scalar_b = b.size() == 1 && a.size() != 1;
    if (!scalar_b) opdetail::check_same_shape("sub", a, b);
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - (scalar_b ? bd[0] : bd[i]);
    if (tracing<S>({&a, &b})) {
        TapeT<S>::current()->record("sub", {a, b}, out, [a = a, b = b, out, scalar_b]() mutable {
            auto g = out.grad();
            accumulate_grad(a, g.data(), g.size());
            if (wants_grad(b)) {
                b.ensure_grad();
                auto gb = b.grad();
                if (scalar_b) {
                    S s = 0;
                    for (S v : g) s += v;
                    gb[0] -= s;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                }
            }
        });
    }
    return out;
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    const bool scalar_b = b.size() == 1 && a.size() != 1;
    if (!scalar_b) opdetail::check_same_shape("mul", a, b);
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * (scalar_b ? bd[0] : bd[i]);
    if (tracing<S>({&a, &b})) {
        TapeT<S>::current()->record("mul", {a, b}, out, [a = a, b = b, out, scalar_b]() mutable {
            auto g = out.grad();
            auto ad2 = a.data();
            auto bd2 = b.data();
            if (wants_grad(a)) {
                a.ensure_grad();
                auto ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (scalar_b ? bd2[0] : bd2[i]);
            }
            if (wants_grad(b)) {
                b.ensure_grad();
                auto gb = b.grad();
                if (scalar_b) {
                    S s = 0;
                    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * ad2[i];
                    gb[0] += s;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad2[i];
                }
            }
        });
    }
    return out;
}

template <class S>
TensorT<S> add_scalar(const TensorT<S>& a, S c) {
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + c;
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("add_scalar", {a}, out, [a = a, out]() mutable {
            auto g = out.grad();
            accumulate_grad(a, g.data(), g.size());
        });
    }
    return out;
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * c;
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("scale", {a}, out, [a = a, out, c]() mutable {
            auto g = out.grad();
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        });
    }
    return out;
}

template <class S>
TensorT<S> relu(const TensorT<S>& a) {
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] > S(0) ? ad[i] : S(0);
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("relu", {a}, out, [a = a, out]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto g = out.grad();
            auto ad2 = a.data();
            auto ga = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (ad2[i] > S(0)) ga[i] += g[i];
        });
    }
    return out;
}

template <class S>
TensorT<S> tanh(const TensorT<S>& a) {
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = std::tanh(ad[i]);
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("tanh", {a}, out, [a = a, out]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto g = out.grad();
            auto od2 = out.data();
            auto ga = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * (S(1) - od2[i] * od2[i]);
        });
    }
    return out;
}

template <class S>
TensorT<S> exp(const TensorT<S>& a) {
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = std::exp(ad[i]);
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("exp", {a}, out, [a = a, out]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto g = out.grad();
            auto od2 = out.data();
            auto ga = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * od2[i];
        });
    }
    return out;
}

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument(msg("matmul: expects rank-2 operands, got ",
                                        shape_str(a.shape()), " and ", shape_str(b.shape())));
    if (a.dim(1) != b.dim(0))
        throw std::invalid_argument(msg("matmul: inner dimensions differ, ",
                                        shape_str(a.shape()), " x ", shape_str(b.shape())));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<S> out = TensorT<S>::zeros({m, n});
    detail::gemm(false, false, static_cast<int>(m), static_cast<int>(n),
                 static_cast<int>(k), S(1), a.data().data(), static_cast<int>(k),
                 b.data().data(), static_cast<int>(n), S(0), out.data().data(),
                 static_cast<int>(n));
    if (tracing<S>({&a, &b})) {
        TapeT<S>::current()->record("matmul", {a, b}, out, [a = a, b = b, out, m, k, n]() mutable {
            auto g = out.grad();
            if (wants_grad(a)) {
                a.ensure_grad();
                // dA = G * B^T
                detail::gemm(false, true, static_cast<int>(m), static_cast<int>(k),
                             static_cast<int>(n), S(1), g.data(), static_cast<int>(n),
                             b.data().data(), static_cast<int>(n), S(1),
                             a.grad().data(), static_cast<int>(k));
            }
            if (wants_grad(b)) {
                b.ensure_grad();
                // dB = A^T * G
                detail::gemm(true, false, static_cast<int>(k), static_cast<int>(n),
                             static_cast<int>(m), S(1), a.data().data(),
                             static_cast<int>(k), g.data(), static_cast<int>(n), S(1),
                             b.grad().data(), static_cast<int>(n));
            }
        });
    }
    return out;
}

template <class S>
TensorT<S> sum(const TensorT<S>& a) {
    TensorT<S> out = TensorT<S>::zeros({1});
    S s = 0;
    for (S v : a.data()) s += v;
    out.data()[0] = s;
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("sum", {a}, out, [a = a, out]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            S g = out.grad()[0];
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

template <class S>
TensorT<S> mean(const TensorT<S>& a) {
    TensorT<S> out = sum(a);
    return scale(out, S(1) / static_cast<S>(a.size()));
}

template <class S>
TensorT<S> sum(const TensorT<S>& a, std::size_t axis) {
    opdetail::AxisSplit s = opdetail::split_axis(a.shape(), axis);
    TensorT<S> out = TensorT<S>::zeros(opdetail::drop_axis(a.shape(), axis));
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t j = 0; j < s.n; ++j)
            for (std::size_t in = 0; in < s.inner; ++in)
                od[o * s.inner + in] += ad[(o * s.n + j) * s.inner + in];
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("sum_axis", {a}, out, [a = a, out, s]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t j = 0; j < s.n; ++j)
                    for (std::size_t in = 0; in < s.inner; ++in)
                        ga[(o * s.n + j) * s.inner + in] += g[o * s.inner + in];
        });
    }
    return out;
}

template <class S>
TensorT<S> mean(const TensorT<S>& a, std::size_t axis) {
    opdetail::AxisSplit s = opdetail::split_axis(a.shape(), axis);
    TensorT<S> out = sum(a, axis);
    return scale(out, S(1) / static_cast<S>(s.n));
}

template <class S>
TensorT<S> max(const TensorT<S>& a) {
    TensorT<S> out = TensorT<S>::zeros({1});
    auto ad = a.data();
    std::size_t arg = 0;
    for (std::size_t i = 1; i < ad.size(); ++i)
        if (ad[i] > ad[arg]) arg = i;
    out.data()[0] = ad[arg];
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("max", {a}, out, [a = a, out, arg]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            a.grad()[arg] += out.grad()[0];
        });
    }
    return out;
}

template <class S>
TensorT<S> max(const TensorT<S>& a, std::size_t axis) {
    opdetail::AxisSplit s = opdetail::split_axis(a.shape(), axis);
    TensorT<S> out = TensorT<S>::zeros(opdetail::drop_axis(a.shape(), axis));
    std::vector<std::size_t> argmax(s.outer * s.inner, 0);
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t in = 0; in < s.inner; ++in) {
            std::size_t best = 0;
            S bv = ad[(o * s.n) * s.inner + in];
            for (std::size_t j = 1; j < s.n; ++j) {
                S v = ad[(o * s.n + j) * s.inner + in];
                if (v > bv) {
                    bv = v;
                    best = j;
                }
            }
            od[o * s.inner + in] = bv;
            argmax[o * s.inner + in] = best;
        }
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record(
            "max_axis", {a}, out, [a = a, out, s, argmax = std::move(argmax)]() mutable {
                if (!wants_grad(a)) return;
                a.ensure_grad();
                auto g = out.grad();
                auto ga = a.grad();
                for (std::size_t o = 0; o < s.outer; ++o)
                    for (std::size_t in = 0; in < s.inner; ++in) {
                        std::size_t j = argmax[o * s.inner + in];
                        ga[(o * s.n + j) * s.inner + in] += g[o * s.inner + in];
                    }
            });
    }
    return out;
}

template <class S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape) {
    check_shape(shape);
    if (numel(shape) != a.size())
        throw std::invalid_argument(msg("reshape: cannot view ", shape_str(a.shape()),
                                        " as ", shape_str(shape)));
    TensorT<S> out = TensorT<S>::from_vector(
        std::move(shape), std::vector<S>(a.data().begin(), a.data().end()));
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("reshape", {a}, out, [a = a, out]() mutable {
            auto g = out.grad();
            accumulate_grad(a, g.data(), g.size());
        });
    }
    return out;
}

template <class S>
TensorT<S> transpose(const TensorT<S>& a) {
    if (a.rank() != 2)
        throw std::invalid_argument(
            msg("transpose: expects rank-2, got ", shape_str(a.shape())));
    const std::size_t m = a.dim(0), n = a.dim(1);
    TensorT<S> out = TensorT<S>::zeros({n, m});
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) od[j * m + i] = ad[i * n + j];
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("transpose", {a}, out, [a = a, out, m, n]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
        });
    }
    return out;
}

template <class S>
TensorT<S> softmax(const TensorT<S>& a, std::size_t axis) {
    opdetail::AxisSplit s = opdetail::split_axis(a.shape(), axis);
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t in = 0; in < s.inner; ++in) {
            S m = ad[(o * s.n) * s.inner + in];
            for (std::size_t j = 1; j < s.n; ++j)
                m = std::max(m, ad[(o * s.n + j) * s.inner + in]);
            S z = 0;
            for (std::size_t j = 0; j < s.n; ++j) {
                S e = std::exp(ad[(o * s.n + j) * s.inner + in] - m);
                od[(o * s.n + j) * s.inner + in] = e;
                z += e;
            }
            for (std::size_t j = 0; j < s.n; ++j) od[(o * s.n + j) * s.inner + in] /= z;
        }
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("softmax", {a}, out, [a = a, out, s]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto g = out.grad();
            auto od2 = out.data();
            auto ga = a.grad();
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t in = 0; in < s.inner; ++in) {
                    S dot = 0;
                    for (std::size_t j = 0; j < s.n; ++j) {
                        std::size_t idx = (o * s.n + j) * s.inner + in;
                        dot += g[idx] * od2[idx];
                    }
                    for (std::size_t j = 0; j < s.n; ++j) {
                        std::size_t idx = (o * s.n + j) * s.inner + in;
                        ga[idx] += od2[idx] * (g[idx] - dot);
                    }
                }
        });
    }
    return out;
}

template <class S>
TensorT<S> concat_channels(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const Shape& first = parts[0].shape();
    const std::size_t caxis = opdetail::channel_axis(first);
    std::size_t channels = 0;
    for (const auto& p : parts) {
        if (p.rank() != parts[0].rank())
            throw std::invalid_argument("concat_channels: rank mismatch");
        for (std::size_t d = 0; d < first.size(); ++d)
            if (d != caxis && p.shape()[d] != first[d])
                throw std::invalid_argument(
                    msg("concat_channels: incompatible shapes ", shape_str(first), " vs ",
                        shape_str(p.shape())));
        channels += p.dim(caxis);
    }
    Shape oshape = first;
    oshape[caxis] = channels;
    const std::size_t outer = caxis == 0 ? 1 : first[0];
    const std::size_t spatial = numel(first) / (first[caxis] * outer);
    TensorT<S> out = TensorT<S>::zeros(oshape);
    auto od = out.data();
    std::size_t coffset = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p.dim(caxis);
        auto pd = p.data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(pd.begin() + o * pc * spatial, pd.begin() + (o + 1) * pc * spatial,
                      od.begin() + (o * channels + coffset) * spatial);
        coffset += pc;
    }
    if (tracing(parts)) {
        auto parts_copy = parts;
        TensorT<S> out_copy = out;
        TapeT<S>::current()->record(
            "concat_channels", parts, out,
            [parts_copy, out_copy, outer, spatial, channels, caxis]() mutable {
                auto g = out_copy.grad();
                std::size_t coffset = 0;
                for (auto& p : parts_copy) {
                    const std::size_t pc = p.shape()[caxis];
                    if (wants_grad(p)) {
                        p.ensure_grad();
                        auto gp = p.grad();
                        for (std::size_t o = 0; o < outer; ++o)
                            for (std::size_t i = 0; i < pc * spatial; ++i)
                                gp[o * pc * spatial + i] +=
                                    g[(o * channels + coffset) * spatial + i];
                    }
                    coffset += pc;
                }
            });
    }
    return out;
}

template <class S>
TensorT<S> slice_channels(const TensorT<S>& a, std::size_t from, std::size_t count) {
    const std::size_t caxis = opdetail::channel_axis(a.shape());
    const std::size_t channels = a.dim(caxis);
    if (count == 0 || from + count > channels)
        throw std::invalid_argument(msg("slice_channels: range [", from, ", ", from + count,
                                        ") out of ", channels, " channels"));
    Shape oshape = a.shape();
    oshape[caxis] = count;
    const std::size_t outer = caxis == 0 ? 1 : a.dim(0);
    const std::size_t spatial = a.size() / (channels * outer);
    TensorT<S> out = TensorT<S>::zeros(oshape);
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy(ad.begin() + (o * channels + from) * spatial,
                  ad.begin() + (o * channels + from + count) * spatial,
                  od.begin() + o * count * spatial);
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record(
            "slice_channels", {a}, out,
            [a = a, out, outer, spatial, channels, from, count]() mutable {
                if (!wants_grad(a)) return;
                a.ensure_grad();
                auto g = out.grad();
                auto ga = a.grad();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < count * spatial; ++i)
                        ga[(o * channels + from) * spatial + i] += g[o * count * spatial + i];
            });
    }
    return out;
}

template <class S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const std::size_t d = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(1) != d)
            throw std::invalid_argument("concat_rows: inputs must be rank-2 with equal width");
        rows += p.dim(0);
    }
    TensorT<S> out = TensorT<S>::zeros({rows, d});
    auto od = out.data();
    std::size_t off = 0;
    for (const auto& p : parts) {
        auto pd = p.data();
        std::copy(pd.begin(), pd.end(), od.begin() + off);
        off += pd.size();
    }
    if (tracing(parts)) {
        auto parts_copy = parts;
        TensorT<S> out_copy = out;
        TapeT<S>::current()->record("concat_rows", parts, out,
                                    [parts_copy, out_copy]() mutable {
                                        auto g = out_copy.grad();
                                        std::size_t off = 0;
                                        for (auto& p : parts_copy) {
                                            if (wants_grad(p)) {
                                                p.ensure_grad();
                                                auto gp = p.grad();
                                                for (std::size_t i = 0; i < gp.size(); ++i)
                                                    gp[i] += g[off + i];
                                            }
                                            off += p.size();
                                        }
                                    });
    }
    return out;
}

template <class S>
TensorT<S> stack_batch(const std::vector<TensorT<S>>& samples) {
    if (samples.empty()) throw std::invalid_argument("stack_batch: no inputs");
    const Shape& s0 = samples[0].shape();
    if (s0.size() != 3)
        throw std::invalid_argument("stack_batch: samples must be rank-3 [C,F,T]");
    for (const auto& p : samples)
        if (p.shape() != s0)
            throw std::invalid_argument(msg("stack_batch: shape mismatch ", shape_str(s0),
                                            " vs ", shape_str(p.shape())));
    Shape oshape = {samples.size(), s0[0], s0[1], s0[2]};
    TensorT<S> out = TensorT<S>::zeros(oshape);
    auto od = out.data();
    const std::size_t stride = numel(s0);
    for (std::size_t n = 0; n < samples.size(); ++n) {
        auto pd = samples[n].data();
        std::copy(pd.begin(), pd.end(), od.begin() + n * stride);
    }
    if (tracing(samples)) {
        auto parts_copy = samples;
        TensorT<S> out_copy = out;
        TapeT<S>::current()->record("stack_batch", samples, out,
                                    [parts_copy, out_copy, stride]() mutable {
                                        auto g = out_copy.grad();
                                        for (std::size_t n = 0; n < parts_copy.size(); ++n) {
                                            auto& p = parts_copy[n];
                                            if (!wants_grad(p)) continue;
                                            p.ensure_grad();
                                            auto gp = p.grad();
                                            for (std::size_t i = 0; i < stride; ++i)
                                                gp[i] += g[n * stride + i];
                                        }
                                    });
    }
    return out;
}

template <class S>
TensorT<S> select_batch(const TensorT<S>& a, std::size_t n) {
    if (a.rank() != 4)
        throw std::invalid_argument("select_batch: expects rank-4 [N,C,F,T]");
    if (n >= a.dim(0))
        throw std::invalid_argument(msg("select_batch: index ", n, " out of ", a.dim(0)));
    Shape oshape = {a.dim(1), a.dim(2), a.dim(3)};
    const std::size_t stride = numel(oshape);
    TensorT<S> out = TensorT<S>::zeros(oshape);
    auto ad = a.data();
    std::copy(ad.begin() + n * stride, ad.begin() + (n + 1) * stride, out.data().begin());
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("select_batch", {a}, out, [a = a, out, n, stride]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < stride; ++i) ga[n * stride + i] += g[i];
        });
    }
    return out;
}

template <class S>
TensorT<S> select_scalar(const TensorT<S>& a, std::size_t flat_index) {
    if (flat_index >= a.size())
        throw std::invalid_argument(
            msg("select_scalar: index ", flat_index, " out of ", a.size()));
    TensorT<S> out = TensorT<S>::zeros({1});
    out.data()[0] = a.data()[flat_index];
    if (tracing<S>({&a})) {
        TapeT<S>::current()->record("select_scalar", {a}, out, [a = a, out, flat_index]() mutable {
            if (!wants_grad(a)) return;
            a.ensure_grad();
            a.grad()[flat_index] += out.grad()[0];
        });
    }
    return out;
}

template <class S>
TensorT<S> softmax_cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw std::invalid_argument(
            msg("softmax_cross_entropy: logits must be [N,K], got ", shape_str(logits.shape())));
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n)
        throw std::invalid_argument(msg("softmax_cross_entropy: ", labels.size(),
                                        " labels for ", n, " rows"));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument(
                msg("softmax_cross_entropy: label ", y, " outside [0, ", k, ")"));
    auto zd = logits.data();
    // probs kept for the backward rule
    std::vector<S> probs(n * k);
    S total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const S* row = zd.data() + i * k;
        S m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        S z = 0;
        for (std::size_t j = 0; j < k; ++j) {
            S e = std::exp(row[j] - m);
            probs[i * k + j] = e;
            z += e;
        }
        for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= z;
        // -log softmax(true) = log(z) + m - z_true, stable form
        total += std::log(z) + m - row[labels[i]];
    }
    TensorT<S> out = TensorT<S>::zeros({1});
    out.data()[0] = total / static_cast<S>(n);
    if (tracing<S>({&logits})) {
        TapeT<S>::current()->record(
            "softmax_cross_entropy", {logits}, out,
            [logits = logits, out, labels, probs = std::move(probs), n, k]() mutable {
                if (!wants_grad(logits)) return;
                logits.ensure_grad();
                S g = out.grad()[0] / static_cast<S>(n);
                auto gl = logits.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < k; ++j)
                        gl[i * k + j] += g * probs[i * k + j];
                    gl[i * k + labels[i]] -= g;
                }
            });
    }
    return out;
}

}  // namespace svkit
