#pragma once

#include <cmath>

#include "svkit/tape.hpp"
#include "svkit/tensor.hpp"

namespace svkit {

// Per-channel batch normalization over [C,F,T] or [N,C,F,T]. Training mode
// normalizes with batch statistics and updates the running estimates;
// inference mode uses the running estimates only.
template <class S>
class BatchNormLayerT {
public:
    explicit BatchNormLayerT(std::size_t channels, S epsilon = S(1e-5),
                             S momentum = S(0.1));

    TensorT<S> forward(const TensorT<S>& x, bool training);

    std::size_t channels() const { return channels_; }
    TensorT<S>& gain() { return gain_; }
    TensorT<S>& bias() { return bias_; }
    // running statistics are state, not trainable parameters
    TensorT<S>& running_mean() { return running_mean_; }
    TensorT<S>& running_var() { return running_var_; }

    std::vector<TensorT<S>> parameters();
    std::size_t parameter_count() const { return 2 * channels_; }

private:
    std::size_t channels_;
    S epsilon_;
    S momentum_;
    TensorT<S> gain_, bias_;
    TensorT<S> running_mean_, running_var_;
};

using BatchNormLayer = BatchNormLayerT<float>;


namespace bndetail {

struct BnGeom {
    std::size_t n, c, spatial;
    std::size_t per_channel() const { return n * spatial; }
    std::size_t index(std::size_t sample, std::size_t channel, std::size_t s) const {
        return (sample * c + channel) * spatial + s;
    }
};

template <class S>
BnGeom bn_geom(const TensorT<S>& x, std::size_t channels) {
    const bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3)
        throw std::invalid_argument(
            msg("batchnorm: input must be [C,F,T] or [N,C,F,T], got ", shape_str(x.shape())));
    BnGeom g;
    g.n = batched ? x.dim(0) : 1;
    g.c = x.dim(batched ? 1 : 0);
    g.spatial = x.dim(batched ? 2 : 1) * x.dim(batched ? 3 : 2);
    if (g.c != channels)
        throw std::invalid_argument(
            msg("batchnorm: input has ", g.c, " channels, layer expects ", channels));
    return g;
}

}  // namespace bndetail

template <class S>
BatchNormLayerT<S>::BatchNormLayerT(std::size_t channels, S epsilon, S momentum)
    : channels_(channels), epsilon_(epsilon), momentum_(momentum) {
    if (channels == 0) throw std::invalid_argument("batchnorm: channels must be >= 1");
    gain_ = TensorT<S>::full({channels}, S(1), true);
    bias_ = TensorT<S>::zeros({channels}, true);
    running_mean_ = TensorT<S>::zeros({channels});
    running_var_ = TensorT<S>::full({channels}, S(1));
}

template <class S>
TensorT<S> BatchNormLayerT<S>::forward(const TensorT<S>& x, bool training) {
    const bndetail::BnGeom g = bndetail::bn_geom(x, channels_);
    auto xd = x.data();
    std::vector<S> mean(channels_), inv_std(channels_);
    if (training) {
        const S m = static_cast<S>(g.per_channel());
        auto rm = running_mean_.data();
        auto rv = running_var_.data();
        for (std::size_t c = 0; c < channels_; ++c) {
            S mu = 0;
            for (std::size_t n = 0; n < g.n; ++n)
                for (std::size_t s = 0; s < g.spatial; ++s) mu += xd[g.index(n, c, s)];
            mu /= m;
            S var = 0;
            for (std::size_t n = 0; n < g.n; ++n)
                for (std::size_t s = 0; s < g.spatial; ++s) {
                    const S d = xd[g.index(n, c, s)] - mu;
                    var += d * d;
                }
            var /= m;
            mean[c] = mu;
            inv_std[c] = S(1) / std::sqrt(var + epsilon_);
            rm[c] = (S(1) - momentum_) * rm[c] + momentum_ * mu;
            rv[c] = (S(1) - momentum_) * rv[c] + momentum_ * var;
        }
    } else {
        auto rm = running_mean_.data();
        auto rv = running_var_.data();
        for (std::size_t c = 0; c < channels_; ++c) {
            mean[c] = rm[c];
            inv_std[c] = S(1) / std::sqrt(rv[c] + epsilon_);
        }
    }

    TensorT<S> out = TensorT<S>::zeros(x.shape());
    auto od = out.data();
    auto gd = gain_.data();
    auto bd = bias_.data();
    for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t c = 0; c < channels_; ++c) {
            const S mu = mean[c], is = inv_std[c], ga = gd[c], be = bd[c];
            const std::size_t base = g.index(n, c, 0);
            for (std::size_t s = 0; s < g.spatial; ++s)
                od[base + s] = (xd[base + s] - mu) * is * ga + be;
        }

    if (tracing<S>({&x, &gain_, &bias_})) {
        TensorT<S> xc = x, gainc = gain_, biasc = bias_, outc = out;
        const std::size_t channels = channels_;
        TapeT<S>::current()->record(
            "batchnorm", {x, gain_, bias_}, out,
            [xc, gainc, biasc, outc, g, channels, training, mean = std::move(mean),
             inv_std = std::move(inv_std)]() mutable {
                auto dy = outc.grad();
                auto xd2 = xc.data();
                auto gd2 = gainc.data();
                const S m = static_cast<S>(g.per_channel());
                const bool need_dx = wants_grad(xc);
                const bool need_dg = wants_grad(gainc);
                const bool need_db = wants_grad(biasc);
                if (need_dx) xc.ensure_grad();
                if (need_dg) gainc.ensure_grad();
                if (need_db) biasc.ensure_grad();
                for (std::size_t c = 0; c < channels; ++c) {
                    const S mu = mean[c], is = inv_std[c];
                    S sum_dy = 0, sum_dy_xhat = 0;
                    for (std::size_t n = 0; n < g.n; ++n) {
                        const std::size_t base = g.index(n, c, 0);
                        for (std::size_t s = 0; s < g.spatial; ++s) {
                            const S go = dy[base + s];
                            sum_dy += go;
                            sum_dy_xhat += go * (xd2[base + s] - mu) * is;
                        }
                    }
                    if (need_dg) gainc.grad()[c] += sum_dy_xhat;
                    if (need_db) biasc.grad()[c] += sum_dy;
                    if (!need_dx) continue;
                    auto gx = xc.grad();
                    const S ga = gd2[c];
                    if (training) {
                        for (std::size_t n = 0; n < g.n; ++n) {
                            const std::size_t base = g.index(n, c, 0);
                            for (std::size_t s = 0; s < g.spatial; ++s) {
                                const S xhat = (xd2[base + s] - mu) * is;
                                gx[base + s] += ga * is / m *
                                                (m * dy[base + s] - sum_dy -
                                                 xhat * sum_dy_xhat);
                            }
                        }
                    } else {
                        // running statistics are constants
                        for (std::size_t n = 0; n < g.n; ++n) {
                            const std::size_t base = g.index(n, c, 0);
                            for (std::size_t s = 0; s < g.spatial; ++s)
                                gx[base + s] += dy[base + s] * ga * is;
                        }
                    }
                }
            });
    }
    return out;
}

template <class S>
std::vector<TensorT<S>> BatchNormLayerT<S>::parameters() {
    return {gain_, bias_};
}

}  // namespace svkit
