#pragma once

#include "svkit/ops.hpp"

namespace svkit {

// Multi-head attentive pooling. Per head h over frames m_t:
//   e_{h,t} = v_h^T tanh(W_h^T m_t),  alpha_h = softmax_t(e_h),
//   u_h = sum_t alpha_{h,t} m_t
// and the pooled embedding is the average of the head outputs, keeping the
// output dimension equal to the frame dimension.
template <class S>
class AttentivePoolingT {
public:
    AttentivePoolingT(std::size_t embed_dim, std::size_t heads, std::size_t attn_dim,
                      Rng& rng);

    // frames [T, D] -> [1, D]
    TensorT<S> forward(const TensorT<S>& frames) const;

    // per-head attention distributions, inference only: [H][T]
    std::vector<std::vector<S>> attention_weights(const TensorT<S>& frames) const;
    // Shannon entropy of each head's distribution, in nats
    std::vector<S> attention_entropy(const TensorT<S>& frames) const;

    std::size_t heads() const { return heads_; }
    std::size_t attn_dim() const { return attn_dim_; }
    void append_state(const std::string& prefix, std::vector<NamedTensor<S>>& out);
    std::size_t parameter_count() const;

    std::vector<TensorT<S>>& projections() { return proj_; }
    std::vector<TensorT<S>>& score_vectors() { return score_; }

private:
    std::size_t embed_dim_, heads_, attn_dim_;
    std::vector<TensorT<S>> proj_;   // W_h: [D, d_a]
    std::vector<TensorT<S>> score_;  // v_h: [d_a, 1]
};

using AttentivePooling = AttentivePoolingT<float>;

extern template class AttentivePoolingT<float>;
extern template class AttentivePoolingT<double>;

}  // namespace svkit
