#include "svkit/pooling.hpp"

#include <cmath>

namespace svkit {

template <class S>
AttentivePoolingT<S>::AttentivePoolingT(std::size_t embed_dim, std::size_t heads,
                                        std::size_t attn_dim, Rng& rng)
    : embed_dim_(embed_dim), heads_(heads), attn_dim_(attn_dim) {
    if (heads == 0 || attn_dim == 0 || embed_dim == 0)
        throw std::invalid_argument("attentive pooling: all dimensions must be >= 1");
    proj_.reserve(heads);
    score_.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        proj_.push_back(TensorT<S>::he_uniform({embed_dim, attn_dim}, embed_dim, rng));
        proj_.back().set_requires_grad(true);
        score_.push_back(TensorT<S>::he_uniform({attn_dim, 1}, attn_dim, rng));
        score_.back().set_requires_grad(true);
    }
}

template <class S>
TensorT<S> AttentivePoolingT<S>::forward(const TensorT<S>& frames) const {
    if (frames.rank() != 2 || frames.dim(1) != embed_dim_)
        throw std::invalid_argument(msg("attentive pooling: frames must be [T, ", embed_dim_,
                                        "], got ", shape_str(frames.shape())));
    TensorT<S> pooled;
    for (std::size_t h = 0; h < heads_; ++h) {
        TensorT<S> scores = matmul(tanh(matmul(frames, proj_[h])), score_[h]);  // [T,1]
        TensorT<S> alpha = softmax(transpose(scores), 1);                       // [1,T]
        TensorT<S> head = matmul(alpha, frames);                                // [1,D]
        pooled = h == 0 ? head : add(pooled, head);
    }
    return scale(pooled, S(1) / static_cast<S>(heads_));
}

template <class S>
std::vector<std::vector<S>> AttentivePoolingT<S>::attention_weights(
    const TensorT<S>& frames) const {
    if (frames.rank() != 2 || frames.dim(1) != embed_dim_)
        throw std::invalid_argument(msg("attentive pooling: frames must be [T, ", embed_dim_,
                                        "], got ", shape_str(frames.shape())));
    const std::size_t t_len = frames.dim(0);
    auto fd = frames.data();
    std::vector<std::vector<S>> weights(heads_, std::vector<S>(t_len));
    for (std::size_t h = 0; h < heads_; ++h) {
        auto wd = proj_[h].data();
        auto vd = score_[h].data();
        std::vector<S>& alpha = weights[h];
        for (std::size_t t = 0; t < t_len; ++t) {
            S e = 0;
            for (std::size_t a = 0; a < attn_dim_; ++a) {
                S p = 0;
                for (std::size_t d = 0; d < embed_dim_; ++d)
                    p += fd[t * embed_dim_ + d] * wd[d * attn_dim_ + a];
                e += std::tanh(p) * vd[a];
            }
            alpha[t] = e;
        }
        S m = alpha[0];
        for (S v : alpha) m = std::max(m, v);
        S z = 0;
        for (S& v : alpha) {
            v = std::exp(v - m);
            z += v;
        }
        for (S& v : alpha) v /= z;
    }
    return weights;
}

template <class S>
std::vector<S> AttentivePoolingT<S>::attention_entropy(const TensorT<S>& frames) const {
    auto weights = attention_weights(frames);
    std::vector<S> entropy(heads_, S(0));
    for (std::size_t h = 0; h < heads_; ++h) {
        S e = 0;
        for (S a : weights[h])
            if (a > S(0)) e -= a * std::log(a);
        entropy[h] = e;
    }
    return entropy;
}

template <class S>
void AttentivePoolingT<S>::append_state(const std::string& prefix,
                                        std::vector<NamedTensor<S>>& out) {
    for (std::size_t h = 0; h < heads_; ++h) {
        out.push_back({msg(prefix, ".head", h, ".proj"), proj_[h], true});
        out.push_back({msg(prefix, ".head", h, ".score"), score_[h], true});
    }
}

template <class S>
std::size_t AttentivePoolingT<S>::parameter_count() const {
    return heads_ * (embed_dim_ * attn_dim_ + attn_dim_);
}

template class AttentivePoolingT<float>;
template class AttentivePoolingT<double>;

}  // namespace svkit
