#include "svkit/blocks.hpp"

#include <cctype>

namespace svkit {

namespace {

constexpr const char* kVariantGrammar =
    "\"resnet\" | \"resnext-{w}w{c}c\" | \"res2net-{w}w{s}s\" "
    "(lowercase, w >= 1, c >= 1, s >= 2)";

Conv2dOptions conv3x3(std::size_t in, std::size_t out, std::size_t groups = 1) {
    Conv2dOptions o;
    o.in_channels = in;
    o.out_channels = out;
    o.kernel = {3, 3};
    o.stride = {1, 1};
    o.padding = {1, 1};
    o.groups = groups;
    return o;
}

Conv2dOptions conv1x1(std::size_t in, std::size_t out) {
    Conv2dOptions o;
    o.in_channels = in;
    o.out_channels = out;
    o.kernel = {1, 1};
    return o;
}

// parses "<num><suffix>" starting at pos, advancing pos past the suffix
bool take_number(const std::string& s, std::size_t& pos, char suffix, std::size_t& value) {
    std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start || pos >= s.size() || s[pos] != suffix) return false;
    value = std::stoul(s.substr(start, pos - start));
    ++pos;
    return true;
}

template <class S>
void append_conv_bn(const std::string& prefix, Conv2dLayerT<S>& conv,
                    BatchNormLayerT<S>& bn, std::vector<NamedTensor<S>>& out) {
    out.push_back({prefix + ".weight", conv.weight(), true});
    out.push_back({prefix + ".bn.gain", bn.gain(), true});
    out.push_back({prefix + ".bn.bias", bn.bias(), true});
    out.push_back({prefix + ".bn.running_mean", bn.running_mean(), false});
    out.push_back({prefix + ".bn.running_var", bn.running_var(), false});
}

}  // namespace

std::size_t BlockSpec::inner_width(std::size_t stage_multiplier) const {
    switch (kind) {
        case BlockKind::Basic:
            return 0;
        case BlockKind::ResNext:
            return base_width * cardinality * stage_multiplier;
        case BlockKind::Res2Net:
            return base_width * scale * stage_multiplier;
    }
    return 0;
}

BlockSpec BlockSpec::parse(const std::string& name) {
    BlockSpec spec;
    if (name == "resnet") {
        spec.kind = BlockKind::Basic;
        return spec;
    }
    auto fail = [&name]() -> BlockSpec {
        throw DataError(msg("unknown model variant \"", name, "\"; expected ", kVariantGrammar));
    };
    if (name.rfind("resnext-", 0) == 0) {
        std::size_t pos = 8, w = 0, c = 0;
        if (!take_number(name, pos, 'w', w) || !take_number(name, pos, 'c', c) ||
            pos != name.size())
            return fail();
        if (w < 1 || c < 1)
            throw DataError(msg("invalid variant \"", name, "\": requires w >= 1 and c >= 1"));
        spec.kind = BlockKind::ResNext;
        spec.base_width = w;
        spec.cardinality = c;
        return spec;
    }
    if (name.rfind("res2net-", 0) == 0) {
        std::size_t pos = 8, w = 0, s = 0;
        if (!take_number(name, pos, 'w', w) || !take_number(name, pos, 's', s) ||
            pos != name.size())
            return fail();
        if (w < 1 || s < 2)
            throw DataError(msg("invalid variant \"", name, "\": requires w >= 1 and s >= 2"));
        spec.kind = BlockKind::Res2Net;
        spec.base_width = w;
        spec.scale = s;
        return spec;
    }
    return fail();
}

std::string BlockSpec::name() const {
    switch (kind) {
        case BlockKind::Basic:
            return "resnet";
        case BlockKind::ResNext:
            return msg("resnext-", base_width, "w", cardinality, "c");
        case BlockKind::Res2Net:
            return msg("res2net-", base_width, "w", scale, "s");
    }
    return "?";
}

// ---------------------------------------------------------------------------

template <class S>
BasicBlockT<S>::BasicBlockT(std::size_t channels, Rng& rng)
    : conv1_(conv3x3(channels, channels), rng),
      conv2_(conv3x3(channels, channels), rng),
      bn1_(channels),
      bn2_(channels) {}

template <class S>
TensorT<S> BasicBlockT<S>::forward(const TensorT<S>& x, bool training) {
    TensorT<S> h = relu(bn1_.forward(conv1_.forward(x), training));
    h = bn2_.forward(conv2_.forward(h), training);
    return relu(add(h, x));
}

template <class S>
void BasicBlockT<S>::append_state(const std::string& prefix,
                                  std::vector<NamedTensor<S>>& out) {
    append_conv_bn(prefix + ".conv1", conv1_, bn1_, out);
    append_conv_bn(prefix + ".conv2", conv2_, bn2_, out);
}

// ---------------------------------------------------------------------------

template <class S>
ResNextBlockT<S>::ResNextBlockT(std::size_t channels, const BlockSpec& spec,
                                std::size_t stage_multiplier, Rng& rng)
    : width_(spec.inner_width(stage_multiplier)),
      conv_reduce_(conv1x1(channels, width_), rng),
      conv_transform_(conv3x3(width_, width_, spec.cardinality), rng),
      conv_expand_(conv1x1(width_, channels), rng),
      bn_reduce_(width_),
      bn_transform_(width_),
      bn_expand_(channels) {
    if (spec.kind != BlockKind::ResNext)
        throw std::invalid_argument("ResNextBlock: spec kind mismatch");
}

template <class S>
TensorT<S> ResNextBlockT<S>::forward(const TensorT<S>& x, bool training) {
    TensorT<S> h = relu(bn_reduce_.forward(conv_reduce_.forward(x), training));
    h = relu(bn_transform_.forward(conv_transform_.forward(h), training));
    h = bn_expand_.forward(conv_expand_.forward(h), training);
    return relu(add(h, x));
}

template <class S>
void ResNextBlockT<S>::append_state(const std::string& prefix,
                                    std::vector<NamedTensor<S>>& out) {
    append_conv_bn(prefix + ".reduce", conv_reduce_, bn_reduce_, out);
    append_conv_bn(prefix + ".transform", conv_transform_, bn_transform_, out);
    append_conv_bn(prefix + ".expand", conv_expand_, bn_expand_, out);
}

// ---------------------------------------------------------------------------

template <class S>
Res2NetModuleT<S>::Res2NetModuleT(std::size_t channels, std::size_t scale, Rng& rng)
    : scale_(scale), subset_width_(channels / std::max<std::size_t>(scale, 1)) {
    if (scale < 2) throw std::invalid_argument("Res2NetModule: scale must be >= 2");
    if (channels % scale != 0)
        throw std::invalid_argument(msg("Res2NetModule: ", channels,
                                        " channels not divisible into ", scale, " subsets"));
    convs_.reserve(scale - 1);
    bns_.reserve(scale - 1);
    for (std::size_t i = 0; i + 1 < scale; ++i) {
        convs_.emplace_back(conv3x3(subset_width_, subset_width_), rng);
        bns_.emplace_back(subset_width_);
    }
}

template <class S>
TensorT<S> Res2NetModuleT<S>::forward(const TensorT<S>& x, bool training) {
    const std::size_t caxis = x.rank() == 4 ? 1 : 0;
    if (x.dim(caxis) != scale_ * subset_width_)
        throw std::invalid_argument(msg("Res2NetModule: input has ", x.dim(caxis),
                                        " channels, expected ", scale_ * subset_width_));
    std::vector<TensorT<S>> outputs;
    outputs.reserve(scale_);
    outputs.push_back(slice_channels(x, 0, subset_width_));  // y_1 = x_1
    TensorT<S> prev;
    for (std::size_t i = 1; i < scale_; ++i) {
        TensorT<S> subset = slice_channels(x, i * subset_width_, subset_width_);
        TensorT<S> h = i == 1 ? subset : add(subset, prev);
        h = relu(bns_[i - 1].forward(convs_[i - 1].forward(h), training));
        outputs.push_back(h);
        prev = h;
    }
    return concat_channels(outputs);
}

template <class S>
void Res2NetModuleT<S>::append_state(const std::string& prefix,
                                     std::vector<NamedTensor<S>>& out) {
    for (std::size_t i = 0; i < convs_.size(); ++i)
        append_conv_bn(msg(prefix, ".k", i + 2), convs_[i], bns_[i], out);
}

// ---------------------------------------------------------------------------

template <class S>
Res2NetBlockT<S>::Res2NetBlockT(std::size_t channels, const BlockSpec& spec,
                                std::size_t stage_multiplier, Rng& rng)
    : width_(spec.inner_width(stage_multiplier)),
      conv_in_(conv3x3(channels, width_), rng),
      conv_out_(conv1x1(width_, channels), rng),
      bn_in_(width_),
      bn_out_(channels),
      module_(width_, spec.scale, rng) {
    if (spec.kind != BlockKind::Res2Net)
        throw std::invalid_argument("Res2NetBlock: spec kind mismatch");
}

template <class S>
TensorT<S> Res2NetBlockT<S>::forward(const TensorT<S>& x, bool training) {
    TensorT<S> h = relu(bn_in_.forward(conv_in_.forward(x), training));
    h = module_.forward(h, training);
    h = bn_out_.forward(conv_out_.forward(h), training);
    return relu(add(h, x));
}

template <class S>
void Res2NetBlockT<S>::append_state(const std::string& prefix,
                                    std::vector<NamedTensor<S>>& out) {
    append_conv_bn(prefix + ".in", conv_in_, bn_in_, out);
    module_.append_state(prefix + ".module", out);
    append_conv_bn(prefix + ".out", conv_out_, bn_out_, out);
}

// ---------------------------------------------------------------------------

namespace {

template <class S>
std::variant<BasicBlockT<S>, ResNextBlockT<S>, Res2NetBlockT<S>> make_block(
    std::size_t channels, const BlockSpec& spec, std::size_t stage_multiplier, Rng& rng) {
    switch (spec.kind) {
        case BlockKind::Basic:
            return BasicBlockT<S>(channels, rng);
        case BlockKind::ResNext:
            return ResNextBlockT<S>(channels, spec, stage_multiplier, rng);
        case BlockKind::Res2Net:
            return Res2NetBlockT<S>(channels, spec, stage_multiplier, rng);
    }
    throw std::logic_error("unreachable block kind");
}

}  // namespace

template <class S>
ResidualBlockT<S>::ResidualBlockT(std::size_t channels, const BlockSpec& spec,
                                  std::size_t stage_multiplier, Rng& rng)
    : impl_(make_block<S>(channels, spec, stage_multiplier, rng)) {}

template <class S>
TensorT<S> ResidualBlockT<S>::forward(const TensorT<S>& x, bool training) {
    return std::visit([&](auto& block) { return block.forward(x, training); }, impl_);
}

template <class S>
void ResidualBlockT<S>::append_state(const std::string& prefix,
                                     std::vector<NamedTensor<S>>& out) {
    std::visit([&](auto& block) { block.append_state(prefix, out); }, impl_);
}

template class BasicBlockT<float>;
template class BasicBlockT<double>;
template class ResNextBlockT<float>;
template class ResNextBlockT<double>;
template class Res2NetModuleT<float>;
template class Res2NetModuleT<double>;
template class Res2NetBlockT<float>;
template class Res2NetBlockT<double>;
template class ResidualBlockT<float>;
template class ResidualBlockT<double>;

}  // namespace svkit
