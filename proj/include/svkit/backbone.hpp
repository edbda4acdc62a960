#pragma once

#include <array>
#include <map>

#include "svkit/blocks.hpp"
#include "svkit/pooling.hpp"

namespace svkit {

// Full network configuration. parse() fills the published configuration for
// a variant name; the struct fields stay adjustable as generic depth/width
// knobs for smaller experiments.
struct ModelVariant {
    std::string name = "resnet";
    BlockSpec block;
    std::array<std::size_t, 3> stage_channels{64, 128, 256};
    std::array<std::size_t, 3> blocks_per_stage{2, 2, 2};
    std::array<std::size_t, 3> stage_multipliers{1, 2, 4};
    std::size_t embedding_dim = 128;
    std::size_t num_classes = 5994;
    std::size_t attn_heads = 16;
    std::size_t attn_dim = 64;

    static ModelVariant parse(const std::string& name, std::size_t num_classes = 5994);
};

struct ParameterBreakdown {
    std::vector<std::pair<std::string, std::size_t>> per_component;
    std::size_t total = 0;
};

// Named activations captured during a forward pass, for shape audits and
// class activation maps.
template <class S>
using ActivationTrace = std::vector<std::pair<std::string, TensorT<S>>>;

// The speaker embedding extractor: five standalone strided conv+BN stages
// interleaved with three pairs of residual blocks, attentive pooling, and a
// bias-free classification matrix. Input features are [80, T] log-Mel
// frames; frame-level output is [T/8, embedding_dim].
template <class S>
class SpeakerModelT {
public:
    SpeakerModelT(const ModelVariant& variant, std::uint64_t seed);

    static constexpr std::size_t kMinFrames = 8;

    // [80,T] -> [T', D] frame-level embeddings
    TensorT<S> forward_frames(const TensorT<S>& features, bool training,
                              ActivationTrace<S>* trace = nullptr);
    // [80,T] -> [D] utterance embedding (pooling applied, no classifier)
    TensorT<S> forward_embedding(const TensorT<S>& features, bool training);
    // [80,T] -> [1, num_classes]
    TensorT<S> forward_logits(const TensorT<S>& features, bool training,
                              ActivationTrace<S>* trace = nullptr);
    // fixed-length crops, one [80,T] tensor per sample -> [N, num_classes]
    TensorT<S> forward_logits_batch(const std::vector<TensorT<S>>& features, bool training);
    // resumes the network right after the named traced layer, feeding a
    // replacement activation; used by activation-sensitivity checks
    TensorT<S> forward_logits_from(const std::string& layer, const TensorT<S>& activation,
                                   bool training = false);

    const ModelVariant& variant() const { return variant_; }
    AttentivePoolingT<S>& pooling() { return pooling_; }
    TensorT<S>& classifier_weight() { return classifier_; }

    std::vector<NamedTensor<S>> named_state();
    std::vector<TensorT<S>> parameters();
    ParameterBreakdown count_parameters();
    std::size_t conv_layer_count() const;

    // layer names accepted by activation tracing: conv1..conv5, blockI.J,
    // and stage aliases block1/block2/block3
    static bool is_trace_layer(const std::string& name);

private:
    TensorT<S> trunk(const TensorT<S>& x, bool training, ActivationTrace<S>* trace,
                     const std::string& start_after = {});
    TensorT<S> frames_from_trunk(const TensorT<S>& trunk_out);

    ModelVariant variant_;
    Conv2dLayerT<S> conv1_, conv2_, conv3_, conv4_, conv5_;
    BatchNormLayerT<S> bn1_, bn2_, bn3_, bn4_, bn5_;
    std::vector<ResidualBlockT<S>> stage1_, stage2_, stage3_;
    AttentivePoolingT<S> pooling_;
    TensorT<S> classifier_;  // [D, num_classes], no bias
};

using SpeakerModel = SpeakerModelT<float>;

extern template class SpeakerModelT<float>;
extern template class SpeakerModelT<double>;

}  // namespace svkit
