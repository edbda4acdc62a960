#pragma once

#include <cstddef>
#include <utility>

#include <algorithm>

#include "svkit/detail/blas.hpp"
#include "svkit/ops.hpp"
#include "svkit/tensor.hpp"

namespace svkit {

struct Conv2dOptions {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::pair<std::size_t, std::size_t> kernel{3, 3};    // (freq, time)
    std::pair<std::size_t, std::size_t> stride{1, 1};
    std::pair<std::size_t, std::size_t> padding{0, 0};
    std::size_t groups = 1;
    bool bias = false;  // convs feeding BatchNorm carry no bias
};


// Grouped 2-D cross-correlation over [C,F,T] or [N,C,F,T], im2col + GEMM.
// Group g maps input channel slice g to output channel slice g.
template <class S>
class Conv2dLayerT {
public:
    Conv2dLayerT(const Conv2dOptions& opts, Rng& rng);

    TensorT<S> forward(const TensorT<S>& x) const;

    const Conv2dOptions& options() const { return opts_; }
    TensorT<S>& weight() { return weight_; }
    const TensorT<S>& weight() const { return weight_; }
    TensorT<S>& bias() { return bias_; }

    std::vector<TensorT<S>> parameters();
    std::size_t parameter_count() const;

private:
    Conv2dOptions opts_;
    TensorT<S> weight_;  // [out, in/groups, kf, kt]
    TensorT<S> bias_;    // [out] when enabled
};

using Conv2dLayer = Conv2dLayerT<float>;


inline std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
    if (stride == 0) throw std::invalid_argument("conv: stride must be >= 1");
    if (in + 2 * padding < kernel)
        throw std::invalid_argument(msg("conv: input extent ", in, " with padding ", padding,
                                        " is smaller than kernel ", kernel));
    return (in + 2 * padding - kernel) / stride + 1;
}

namespace convdetail {

struct ConvGeom {
    std::size_t cin, cout, kf, kt, sf, st, pf, pt, groups;
    std::size_t fin, tin, fout, tout;
    std::size_t positions() const { return fout * tout; }
    std::size_t col_rows() const { return cin * kf * kt; }
};

// cols[(c*kf + i)*kt + j][fo*tout + to] = x[c][fo*sf + i - pf][to*st + j - pt]
template <class S>
void im2col(const S* x, const ConvGeom& g, S* cols) {
    const std::size_t positions = g.positions();
    for (std::size_t c = 0; c < g.cin; ++c) {
        const S* xc = x + c * g.fin * g.tin;
        for (std::size_t i = 0; i < g.kf; ++i) {
            for (std::size_t j = 0; j < g.kt; ++j) {
                S* row = cols + ((c * g.kf + i) * g.kt + j) * positions;
                for (std::size_t fo = 0; fo < g.fout; ++fo) {
                    const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(fo * g.sf + i) -
                                              static_cast<std::ptrdiff_t>(g.pf);
                    S* dst = row + fo * g.tout;
                    if (fi < 0 || fi >= static_cast<std::ptrdiff_t>(g.fin)) {
                        std::fill(dst, dst + g.tout, S(0));
                        continue;
                    }
                    const S* src = xc + static_cast<std::size_t>(fi) * g.tin;
                    for (std::size_t to = 0; to < g.tout; ++to) {
                        const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * g.st + j) -
                                                  static_cast<std::ptrdiff_t>(g.pt);
                        dst[to] = (ti < 0 || ti >= static_cast<std::ptrdiff_t>(g.tin))
                                      ? S(0)
                                      : src[static_cast<std::size_t>(ti)];
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_add(const S* cols, const ConvGeom& g, S* dx) {
    const std::size_t positions = g.positions();
    for (std::size_t c = 0; c < g.cin; ++c) {
        S* xc = dx + c * g.fin * g.tin;
        for (std::size_t i = 0; i < g.kf; ++i) {
            for (std::size_t j = 0; j < g.kt; ++j) {
                const S* row = cols + ((c * g.kf + i) * g.kt + j) * positions;
                for (std::size_t fo = 0; fo < g.fout; ++fo) {
                    const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(fo * g.sf + i) -
                                              static_cast<std::ptrdiff_t>(g.pf);
                    if (fi < 0 || fi >= static_cast<std::ptrdiff_t>(g.fin)) continue;
                    S* dst = xc + static_cast<std::size_t>(fi) * g.tin;
                    const S* src = row + fo * g.tout;
                    for (std::size_t to = 0; to < g.tout; ++to) {
                        const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * g.st + j) -
                                                  static_cast<std::ptrdiff_t>(g.pt);
                        if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(g.tin)) continue;
                        dst[static_cast<std::size_t>(ti)] += src[to];
                    }
                }
            }
        }
    }
}

// y[cout][positions] = W x cols, per group
template <class S>
void forward_sample(const S* x, const S* w, const S* bias, const ConvGeom& g, S* cols,
                    S* y) {
    im2col(x, g, cols);
    const std::size_t positions = g.positions();
    const std::size_t cout_g = g.cout / g.groups;
    const std::size_t rows_g = g.col_rows() / g.groups;
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
        detail::gemm(false, false, static_cast<int>(cout_g), static_cast<int>(positions),
                     static_cast<int>(rows_g), S(1), w + grp * cout_g * rows_g,
                     static_cast<int>(rows_g), cols + grp * rows_g * positions,
                     static_cast<int>(positions), S(0), y + grp * cout_g * positions,
                     static_cast<int>(positions));
    }
    if (bias != nullptr)
        for (std::size_t c = 0; c < g.cout; ++c)
            for (std::size_t p = 0; p < positions; ++p) y[c * positions + p] += bias[c];
}

template <class S>
void backward_sample(const S* x, const S* w, const S* dy, const ConvGeom& g, S* cols,
                     S* dcols, S* dx, S* dw, S* dbias) {
    const std::size_t positions = g.positions();
    const std::size_t cout_g = g.cout / g.groups;
    const std::size_t rows_g = g.col_rows() / g.groups;
    if (dw != nullptr || dx != nullptr) im2col(x, g, cols);
    if (dw != nullptr) {
        // dW_g += dY_g * cols_g^T
        for (std::size_t grp = 0; grp < g.groups; ++grp)
            detail::gemm(false, true, static_cast<int>(cout_g), static_cast<int>(rows_g),
                         static_cast<int>(positions), S(1), dy + grp * cout_g * positions,
                         static_cast<int>(positions), cols + grp * rows_g * positions,
                         static_cast<int>(positions), S(1), dw + grp * cout_g * rows_g,
                         static_cast<int>(rows_g));
    }
    if (dx != nullptr) {
        // dcols_g = W_g^T * dY_g, then scatter back
        for (std::size_t grp = 0; grp < g.groups; ++grp)
            detail::gemm(true, false, static_cast<int>(rows_g), static_cast<int>(positions),
                         static_cast<int>(cout_g), S(1), w + grp * cout_g * rows_g,
                         static_cast<int>(rows_g), dy + grp * cout_g * positions,
                         static_cast<int>(positions), S(0),
                         dcols + grp * rows_g * positions, static_cast<int>(positions));
        col2im_add(dcols, g, dx);
    }
    if (dbias != nullptr)
        for (std::size_t c = 0; c < g.cout; ++c) {
            S s = 0;
            for (std::size_t p = 0; p < positions; ++p) s += dy[c * positions + p];
            dbias[c] += s;
        }
}

}  // namespace convdetail

template <class S>
Conv2dLayerT<S>::Conv2dLayerT(const Conv2dOptions& opts, Rng& rng) : opts_(opts) {
    if (opts.in_channels == 0 || opts.out_channels == 0)
        throw std::invalid_argument("conv: channel counts must be >= 1");
    if (opts.groups == 0 || opts.in_channels % opts.groups != 0 ||
        opts.out_channels % opts.groups != 0)
        throw std::invalid_argument(msg("conv: groups=", opts.groups,
                                        " must divide in_channels=", opts.in_channels,
                                        " and out_channels=", opts.out_channels));
    if (opts.kernel.first == 0 || opts.kernel.second == 0)
        throw std::invalid_argument("conv: kernel extents must be >= 1");
    const std::size_t fan_in =
        (opts.in_channels / opts.groups) * opts.kernel.first * opts.kernel.second;
    weight_ = TensorT<S>::he_uniform(
        {opts.out_channels, opts.in_channels / opts.groups, opts.kernel.first,
         opts.kernel.second},
        fan_in, rng);
    weight_.set_requires_grad(true);
    if (opts.bias) {
        bias_ = TensorT<S>::zeros({opts.out_channels}, true);
    }
}

template <class S>
TensorT<S> Conv2dLayerT<S>::forward(const TensorT<S>& x) const {
    const bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3)
        throw std::invalid_argument(
            msg("conv: input must be [C,F,T] or [N,C,F,T], got ", shape_str(x.shape())));
    const std::size_t n = batched ? x.dim(0) : 1;
    const std::size_t cin = x.dim(batched ? 1 : 0);
    const std::size_t fin = x.dim(batched ? 2 : 1);
    const std::size_t tin = x.dim(batched ? 3 : 2);
    if (cin != opts_.in_channels)
        throw std::invalid_argument(msg("conv: input has ", cin, " channels, layer expects ",
                                        opts_.in_channels));
    convdetail::ConvGeom g;
    g.cin = cin;
    g.cout = opts_.out_channels;
    g.kf = opts_.kernel.first;
    g.kt = opts_.kernel.second;
    g.sf = opts_.stride.first;
    g.st = opts_.stride.second;
    g.pf = opts_.padding.first;
    g.pt = opts_.padding.second;
    g.groups = opts_.groups;
    g.fin = fin;
    g.tin = tin;
    g.fout = conv_output_extent(fin, g.kf, g.sf, g.pf);
    g.tout = conv_output_extent(tin, g.kt, g.st, g.pt);

    Shape oshape = batched ? Shape{n, g.cout, g.fout, g.tout} : Shape{g.cout, g.fout, g.tout};
    TensorT<S> out = TensorT<S>::zeros(oshape);
    std::vector<S> cols(g.col_rows() * g.positions());
    const std::size_t in_stride = cin * fin * tin;
    const std::size_t out_stride = g.cout * g.positions();
    const S* bias_ptr = opts_.bias ? bias_.data().data() : nullptr;
    for (std::size_t i = 0; i < n; ++i)
        convdetail::forward_sample(x.data().data() + i * in_stride, weight_.data().data(), bias_ptr, g,
                       cols.data(), out.data().data() + i * out_stride);

    std::vector<TensorT<S>> inputs{x, weight_};
    if (opts_.bias) inputs.push_back(bias_);
    if (tracing(inputs)) {
        TensorT<S> xc = x, w = weight_, b = bias_;
        bool has_bias = opts_.bias;
        TapeT<S>::current()->record(
            "conv2d", inputs, out, [xc, w, b, out, g, n, in_stride, out_stride, has_bias]() mutable {
                auto dy = out.grad();
                const bool need_dx = wants_grad(xc);
                const bool need_dw = wants_grad(w);
                const bool need_db = has_bias && wants_grad(b);
                if (need_dx) xc.ensure_grad();
                if (need_dw) w.ensure_grad();
                if (need_db) b.ensure_grad();
                std::vector<S> cols(g.col_rows() * g.positions());
                std::vector<S> dcols(need_dx ? cols.size() : 0);
                for (std::size_t i = 0; i < n; ++i)
                    convdetail::backward_sample(xc.data().data() + i * in_stride, w.data().data(),
                                    dy.data() + i * out_stride, g, cols.data(),
                                    need_dx ? dcols.data() : nullptr,
                                    need_dx ? xc.grad().data() + i * in_stride : nullptr,
                                    need_dw ? w.grad().data() : nullptr,
                                    need_db ? b.grad().data() : nullptr);
            });
    }
    return out;
}

template <class S>
std::vector<TensorT<S>> Conv2dLayerT<S>::parameters() {
    std::vector<TensorT<S>> ps{weight_};
    if (opts_.bias) ps.push_back(bias_);
    return ps;
}

template <class S>
std::size_t Conv2dLayerT<S>::parameter_count() const {
    return weight_.size() + (opts_.bias ? bias_.size() : 0);
}

}  // namespace svkit
