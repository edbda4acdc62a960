#pragma once

#include "svkit/tensor.hpp"

namespace svkit {

// SGD with classical momentum: v <- m*v + g, p <- p - lr*v,
// weight decay added to g before the velocity update.
template <class S>
class SgdOptimizerT {
public:
    SgdOptimizerT(std::vector<TensorT<S>> params, S learning_rate, S momentum = S(0),
                  S weight_decay = S(0))
        : params_(std::move(params)),
          lr_(learning_rate),
          momentum_(momentum),
          weight_decay_(weight_decay) {
        velocity_.reserve(params_.size());
        for (const auto& p : params_) velocity_.emplace_back(p.size(), S(0));
    }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.has_grad())
                throw std::runtime_error(
                    msg("sgd: parameter ", i, " of shape ", shape_str(p.shape()),
                        " has no gradient"));
            auto pd = p.data();
            auto gd = p.grad();
            auto& v = velocity_[i];
            for (std::size_t j = 0; j < pd.size(); ++j) {
                const S g = gd[j] + weight_decay_ * pd[j];
                v[j] = momentum_ * v[j] + g;
                pd[j] -= lr_ * v[j];
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void set_learning_rate(S lr) { lr_ = lr; }
    S learning_rate() const { return lr_; }

private:
    std::vector<TensorT<S>> params_;
    std::vector<std::vector<S>> velocity_;
    S lr_, momentum_, weight_decay_;
};

using SgdOptimizer = SgdOptimizerT<float>;

}  // namespace svkit
