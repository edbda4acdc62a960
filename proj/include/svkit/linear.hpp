#pragma once

#include "svkit/ops.hpp"

namespace svkit {

// y = x W (+ b), x: [N, in], W: [in, out]
template <class S>
class LinearLayerT {
public:
    LinearLayerT(std::size_t in_features, std::size_t out_features, bool bias, Rng& rng)
        : in_(in_features), out_(out_features), has_bias_(bias) {
        weight_ = TensorT<S>::he_uniform({in_features, out_features}, in_features, rng);
        weight_.set_requires_grad(true);
        if (bias) bias_ = TensorT<S>::zeros({1, out_features}, true);
    }

    TensorT<S> forward(const TensorT<S>& x) const {
        TensorT<S> y = matmul(x, weight_);
        if (!has_bias_) return y;
        if (x.dim(0) == 1) return add(y, bias_);
        // replicate the bias row across the batch
        std::vector<TensorT<S>> rows(x.dim(0), bias_);
        return add(y, concat_rows(rows));
    }

    TensorT<S>& weight() { return weight_; }
    const TensorT<S>& weight() const { return weight_; }
    TensorT<S>& bias() { return bias_; }

    std::vector<TensorT<S>> parameters() {
        std::vector<TensorT<S>> ps{weight_};
        if (has_bias_) ps.push_back(bias_);
        return ps;
    }
    std::size_t parameter_count() const {
        return weight_.size() + (has_bias_ ? bias_.size() : 0);
    }

private:
    std::size_t in_, out_;
    bool has_bias_;
    TensorT<S> weight_;
    TensorT<S> bias_;
};

using LinearLayer = LinearLayerT<float>;

}  // namespace svkit
