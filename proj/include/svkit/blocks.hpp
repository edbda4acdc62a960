#pragma once

#include <string>
#include <variant>
#include <vector>

#include "svkit/batchnorm.hpp"
#include "svkit/conv2d.hpp"

namespace svkit {

enum class BlockKind { Basic, ResNext, Res2Net };

// Residual block family of one model variant. Stage widths scale as
// base_width * stage_multiplier with multipliers 1/2/4 for the three stages.
struct BlockSpec {
    BlockKind kind = BlockKind::Basic;
    std::size_t base_width = 0;   // w (resnext / res2net)
    std::size_t cardinality = 1;  // c (resnext)
    std::size_t scale = 1;        // s (res2net)

    // grouped / multi-scale transform width W at a given stage
    std::size_t inner_width(std::size_t stage_multiplier) const;

    // "resnet" | "resnext-{w}w{c}c" | "res2net-{w}w{s}s"
    static BlockSpec parse(const std::string& name);
    std::string name() const;
};

// y = ReLU(x + BN(conv3x3(ReLU(BN(conv3x3(x))))))
template <class S>
class BasicBlockT {
public:
    BasicBlockT(std::size_t channels, Rng& rng);
    TensorT<S> forward(const TensorT<S>& x, bool training);
    void append_state(const std::string& prefix, std::vector<NamedTensor<S>>& out);

    Conv2dLayerT<S>& conv1() { return conv1_; }
    Conv2dLayerT<S>& conv2() { return conv2_; }

private:
    Conv2dLayerT<S> conv1_, conv2_;
    BatchNormLayerT<S> bn1_, bn2_;
};

// 1x1 reduce, grouped 3x3 with `cardinality` groups, 1x1 expand; ReLU after
// the skip addition.
template <class S>
class ResNextBlockT {
public:
    ResNextBlockT(std::size_t channels, const BlockSpec& spec,
                  std::size_t stage_multiplier, Rng& rng);
    TensorT<S> forward(const TensorT<S>& x, bool training);
    void append_state(const std::string& prefix, std::vector<NamedTensor<S>>& out);
    std::size_t inner_width() const { return width_; }
    Conv2dLayerT<S>& conv_reduce() { return conv_reduce_; }
    Conv2dLayerT<S>& grouped_conv() { return conv_transform_; }
    Conv2dLayerT<S>& conv_expand() { return conv_expand_; }
    BatchNormLayerT<S>& bn_reduce() { return bn_reduce_; }
    BatchNormLayerT<S>& bn_transform() { return bn_transform_; }
    BatchNormLayerT<S>& bn_expand() { return bn_expand_; }

private:
    std::size_t width_;
    Conv2dLayerT<S> conv_reduce_, conv_transform_, conv_expand_;
    BatchNormLayerT<S> bn_reduce_, bn_transform_, bn_expand_;
};

// Channel slices x_1..x_s; y_1 = x_1, y_2 = K_2(x_2), y_i = K_i(x_i + y_{i-1});
// output is the concatenation. Each K_i is conv3x3 + BN + ReLU over one
// subset width; x_1 is passed through untouched.
template <class S>
class Res2NetModuleT {
public:
    Res2NetModuleT(std::size_t channels, std::size_t scale, Rng& rng);
    TensorT<S> forward(const TensorT<S>& x, bool training);
    void append_state(const std::string& prefix, std::vector<NamedTensor<S>>& out);

    std::size_t scale() const { return scale_; }
    std::size_t subset_width() const { return subset_width_; }
    std::vector<Conv2dLayerT<S>>& convs() { return convs_; }
    std::vector<BatchNormLayerT<S>>& bns() { return bns_; }

private:
    std::size_t scale_;
    std::size_t subset_width_;
    std::vector<Conv2dLayerT<S>> convs_;  // K_2 .. K_s
    std::vector<BatchNormLayerT<S>> bns_;
};

// 3x3 conv to width W, Res2Net module, 1x1 conv back to the stage channel
// count; ReLU after the skip addition.
template <class S>
class Res2NetBlockT {
public:
    Res2NetBlockT(std::size_t channels, const BlockSpec& spec,
                  std::size_t stage_multiplier, Rng& rng);
    TensorT<S> forward(const TensorT<S>& x, bool training);
    void append_state(const std::string& prefix, std::vector<NamedTensor<S>>& out);
    std::size_t inner_width() const { return width_; }
    Res2NetModuleT<S>& module() { return module_; }
    Conv2dLayerT<S>& conv_in() { return conv_in_; }
    Conv2dLayerT<S>& conv_out() { return conv_out_; }

private:
    std::size_t width_;
    Conv2dLayerT<S> conv_in_, conv_out_;
    BatchNormLayerT<S> bn_in_, bn_out_;
    Res2NetModuleT<S> module_;
};

// One stage block of whichever family the variant selects.
template <class S>
class ResidualBlockT {
public:
    ResidualBlockT(std::size_t channels, const BlockSpec& spec,
                   std::size_t stage_multiplier, Rng& rng);
    TensorT<S> forward(const TensorT<S>& x, bool training);
    void append_state(const std::string& prefix, std::vector<NamedTensor<S>>& out);

    template <class Block>
    Block& as() {
        return std::get<Block>(impl_);
    }

private:
    std::variant<BasicBlockT<S>, ResNextBlockT<S>, Res2NetBlockT<S>> impl_;
};

extern template class BasicBlockT<float>;
extern template class BasicBlockT<double>;
extern template class ResNextBlockT<float>;
extern template class ResNextBlockT<double>;
extern template class Res2NetModuleT<float>;
extern template class Res2NetModuleT<double>;
extern template class Res2NetBlockT<float>;
extern template class Res2NetBlockT<double>;
extern template class ResidualBlockT<float>;
extern template class ResidualBlockT<double>;

}  // namespace svkit
