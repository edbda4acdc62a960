#include "svkit/backbone.hpp"

#include <functional>

namespace svkit {

namespace {

Conv2dOptions downsample_conv(std::size_t in, std::size_t out, std::size_t time_stride) {
    // Frequency padding 0 drives the 80 -> 39 -> 19 -> 9 -> 4 -> 1 chain;
    // temporal padding 1 keeps T -> ceil(T/stride).
    Conv2dOptions o;
    o.in_channels = in;
    o.out_channels = out;
    o.kernel = {3, 3};
    o.stride = {2, time_stride};
    o.padding = {0, 1};
    return o;
}

}  // namespace

ModelVariant ModelVariant::parse(const std::string& name, std::size_t num_classes) {
    ModelVariant v;
    v.block = BlockSpec::parse(name);
    v.name = v.block.name();
    v.num_classes = num_classes;
    return v;
}

template <class S>
SpeakerModelT<S>::SpeakerModelT(const ModelVariant& variant, std::uint64_t seed)
    : variant_(variant),
      conv1_([&] {
          Rng rng(seed);
          return Conv2dLayerT<S>(downsample_conv(1, variant.stage_channels[0], 2), rng);
      }()),
      conv2_([&] {
          Rng rng = Rng(seed).fork(2);
          return Conv2dLayerT<S>(
              downsample_conv(variant.stage_channels[0], variant.stage_channels[1], 2), rng);
      }()),
      conv3_([&] {
          Rng rng = Rng(seed).fork(3);
          return Conv2dLayerT<S>(
              downsample_conv(variant.stage_channels[1], variant.stage_channels[2], 2), rng);
      }()),
      conv4_([&] {
          Rng rng = Rng(seed).fork(4);
          return Conv2dLayerT<S>(
              downsample_conv(variant.stage_channels[2], variant.stage_channels[2], 1), rng);
      }()),
      conv5_([&] {
          Rng rng = Rng(seed).fork(5);
          return Conv2dLayerT<S>(
              downsample_conv(variant.stage_channels[2], variant.embedding_dim, 1), rng);
      }()),
      bn1_(variant.stage_channels[0]),
      bn2_(variant.stage_channels[1]),
      bn3_(variant.stage_channels[2]),
      bn4_(variant.stage_channels[2]),
      bn5_(variant.embedding_dim),
      pooling_([&] {
          Rng rng = Rng(seed).fork(6);
          return AttentivePoolingT<S>(variant.embedding_dim, variant.attn_heads,
                                      variant.attn_dim, rng);
      }()) {
    for (std::size_t stage = 0; stage < 3; ++stage) {
        auto& blocks = stage == 0 ? stage1_ : stage == 1 ? stage2_ : stage3_;
        for (std::size_t b = 0; b < variant.blocks_per_stage[stage]; ++b) {
            Rng rng = Rng(seed).fork(10 + stage * 10 + b);
            blocks.emplace_back(variant.stage_channels[stage], variant.block,
                                variant.stage_multipliers[stage], rng);
        }
    }
    Rng rng = Rng(seed).fork(7);
    classifier_ = TensorT<S>::he_uniform({variant.embedding_dim, variant.num_classes},
                                         variant.embedding_dim, rng);
    classifier_.set_requires_grad(true);
}

template <class S>
TensorT<S> SpeakerModelT<S>::trunk(const TensorT<S>& x, bool training,
                                   ActivationTrace<S>* trace,
                                   const std::string& start_after) {
    struct Step {
        std::string name;
        std::string alias;  // emitted after the step when nonempty
        std::function<TensorT<S>(const TensorT<S>&)> fn;
    };
    std::vector<Step> steps;
    auto conv_step = [&](const char* name, Conv2dLayerT<S>& conv, BatchNormLayerT<S>& bn) {
        steps.push_back({name, {}, [&conv, &bn, training](const TensorT<S>& h) {
                             return relu(bn.forward(conv.forward(h), training));
                         }});
    };
    auto stage_steps = [&](const char* stage, std::vector<ResidualBlockT<S>>& blocks) {
        for (std::size_t b = 0; b < blocks.size(); ++b)
            steps.push_back({msg(stage, ".", b), b + 1 == blocks.size() ? stage : "",
                             [&blocks, b, training](const TensorT<S>& h) {
                                 return blocks[b].forward(h, training);
                             }});
    };
    conv_step("conv1", conv1_, bn1_);
    stage_steps("block1", stage1_);
    conv_step("conv2", conv2_, bn2_);
    stage_steps("block2", stage2_);
    conv_step("conv3", conv3_, bn3_);
    stage_steps("block3", stage3_);
    conv_step("conv4", conv4_, bn4_);
    conv_step("conv5", conv5_, bn5_);

    std::size_t begin = 0;
    if (!start_after.empty()) {
        bool found = false;
        for (std::size_t i = 0; i < steps.size(); ++i)
            if (steps[i].name == start_after || steps[i].alias == start_after) {
                begin = i + 1;
                found = true;
            }
        if (!found) throw DataError(msg("unknown layer \"", start_after, "\""));
    }
    TensorT<S> h = x;
    for (std::size_t i = begin; i < steps.size(); ++i) {
        h = steps[i].fn(h);
        if (trace != nullptr) {
            trace->emplace_back(steps[i].name, h);
            if (!steps[i].alias.empty()) trace->emplace_back(steps[i].alias, h);
        }
    }
    return h;
}

template <class S>
TensorT<S> SpeakerModelT<S>::forward_logits_from(const std::string& layer,
                                                 const TensorT<S>& activation,
                                                 bool training) {
    if (!is_trace_layer(layer))
        throw DataError(msg("unknown layer \"", layer,
                            "\"; expected conv1..conv5, blockN or blockN.i"));
    TensorT<S> h = trunk(activation, training, nullptr, layer);
    TensorT<S> pooled = pooling_.forward(frames_from_trunk(h));
    return matmul(pooled, classifier_);
}

template <class S>
TensorT<S> SpeakerModelT<S>::frames_from_trunk(const TensorT<S>& trunk_out) {
    // [D, 1, T'] -> [T', D]
    const std::size_t d = trunk_out.dim(0);
    const std::size_t t = trunk_out.dim(2);
    return transpose(reshape(trunk_out, {d, t}));
}

template <class S>
TensorT<S> SpeakerModelT<S>::forward_frames(const TensorT<S>& features, bool training,
                                            ActivationTrace<S>* trace) {
    TensorT<S> x = features;
    if (x.rank() == 2) x = reshape(x, {1, x.dim(0), x.dim(1)});
    if (x.rank() != 3 || x.dim(0) != 1 || x.dim(1) != 80)
        throw std::invalid_argument(msg("forward: features must be [80, T], got ",
                                        shape_str(features.shape())));
    if (x.dim(2) < kMinFrames)
        throw std::invalid_argument(msg("forward: input has ", x.dim(2),
                                        " frames; the stride chain requires at least ",
                                        kMinFrames));
    return frames_from_trunk(trunk(x, training, trace));
}

template <class S>
TensorT<S> SpeakerModelT<S>::forward_embedding(const TensorT<S>& features, bool training) {
    TensorT<S> pooled = pooling_.forward(forward_frames(features, training));
    return reshape(pooled, {variant_.embedding_dim});
}

template <class S>
TensorT<S> SpeakerModelT<S>::forward_logits(const TensorT<S>& features, bool training,
                                            ActivationTrace<S>* trace) {
    TensorT<S> pooled = pooling_.forward(forward_frames(features, training, trace));
    return matmul(pooled, classifier_);
}

template <class S>
TensorT<S> SpeakerModelT<S>::forward_logits_batch(const std::vector<TensorT<S>>& features,
                                                  bool training) {
    if (features.empty()) throw std::invalid_argument("forward: empty batch");
    std::vector<TensorT<S>> samples;
    samples.reserve(features.size());
    for (const auto& f : features) {
        if (f.rank() != 2 || f.dim(0) != 80)
            throw std::invalid_argument(
                msg("forward: features must be [80, T], got ", shape_str(f.shape())));
        samples.push_back(reshape(f, {1, f.dim(0), f.dim(1)}));
    }
    if (samples[0].dim(2) < kMinFrames)
        throw std::invalid_argument(msg("forward: input has ", samples[0].dim(2),
                                        " frames; the stride chain requires at least ",
                                        kMinFrames));
    TensorT<S> batch = stack_batch(samples);           // [N,1,80,T]
    TensorT<S> h = trunk(batch, training, nullptr);    // [N,D,1,T']
    std::vector<TensorT<S>> rows;
    rows.reserve(features.size());
    // classifier applied per sample so batched and single-utterance paths
    // stay bit-identical
    for (std::size_t n = 0; n < features.size(); ++n) {
        TensorT<S> pooled = pooling_.forward(frames_from_trunk(select_batch(h, n)));
        rows.push_back(matmul(pooled, classifier_));
    }
    return concat_rows(rows);  // [N,K]
}

template <class S>
std::vector<NamedTensor<S>> SpeakerModelT<S>::named_state() {
    std::vector<NamedTensor<S>> out;
    auto conv_bn = [&out](const std::string& prefix, Conv2dLayerT<S>& conv,
                          BatchNormLayerT<S>& bn) {
        out.push_back({prefix + ".weight", conv.weight(), true});
        out.push_back({prefix + ".bn.gain", bn.gain(), true});
        out.push_back({prefix + ".bn.bias", bn.bias(), true});
        out.push_back({prefix + ".bn.running_mean", bn.running_mean(), false});
        out.push_back({prefix + ".bn.running_var", bn.running_var(), false});
    };
    conv_bn("conv1", conv1_, bn1_);
    for (std::size_t b = 0; b < stage1_.size(); ++b)
        stage1_[b].append_state(msg("block1.", b), out);
    conv_bn("conv2", conv2_, bn2_);
    for (std::size_t b = 0; b < stage2_.size(); ++b)
        stage2_[b].append_state(msg("block2.", b), out);
    conv_bn("conv3", conv3_, bn3_);
    for (std::size_t b = 0; b < stage3_.size(); ++b)
        stage3_[b].append_state(msg("block3.", b), out);
    conv_bn("conv4", conv4_, bn4_);
    conv_bn("conv5", conv5_, bn5_);
    pooling_.append_state("pooling", out);
    out.push_back({"classifier.weight", classifier_, true});
    return out;
}

template <class S>
std::vector<TensorT<S>> SpeakerModelT<S>::parameters() {
    std::vector<TensorT<S>> ps;
    for (auto& entry : named_state())
        if (entry.trainable) ps.push_back(entry.tensor);
    return ps;
}

template <class S>
ParameterBreakdown SpeakerModelT<S>::count_parameters() {
    ParameterBreakdown breakdown;
    for (auto& entry : named_state()) {
        if (!entry.trainable) continue;
        const std::string component = entry.name.substr(0, entry.name.find('.'));
        if (breakdown.per_component.empty() ||
            breakdown.per_component.back().first != component)
            breakdown.per_component.emplace_back(component, 0);
        breakdown.per_component.back().second += entry.tensor.size();
        breakdown.total += entry.tensor.size();
    }
    return breakdown;
}

template <class S>
std::size_t SpeakerModelT<S>::conv_layer_count() const {
    std::size_t per_block = 0;
    switch (variant_.block.kind) {
        case BlockKind::Basic:
            per_block = 2;
            break;
        case BlockKind::ResNext:
            per_block = 3;
            break;
        case BlockKind::Res2Net:
            per_block = 2 + (variant_.block.scale - 1);
            break;
    }
    std::size_t blocks = 0;
    for (std::size_t n : variant_.blocks_per_stage) blocks += n;
    return 5 + blocks * per_block;
}

template <class S>
bool SpeakerModelT<S>::is_trace_layer(const std::string& name) {
    static const char* fixed[] = {"conv1", "conv2", "conv3", "conv4", "conv5",
                                  "block1", "block2", "block3"};
    for (const char* f : fixed)
        if (name == f) return true;
    for (const char* stage : {"block1.", "block2.", "block3."})
        if (name.rfind(stage, 0) == 0 && name.size() > 7) return true;
    return false;
}

template class SpeakerModelT<float>;
template class SpeakerModelT<double>;

}  // namespace svkit
