#include "svkit/gradcam.hpp"

#include <cmath>
#include <fstream>

namespace svkit {

namespace {

// align-corners bilinear resize of a [rows, cols] grid
template <class S>
std::vector<S> bilinear_resize(const std::vector<S>& in, std::size_t rows, std::size_t cols,
                               std::size_t out_rows, std::size_t out_cols) {
    std::vector<S> out(out_rows * out_cols);
    for (std::size_t i = 0; i < out_rows; ++i) {
        const double fi = out_rows > 1 ? static_cast<double>(i) * (rows - 1) / (out_rows - 1)
                                       : 0.0;
        const std::size_t r0 = static_cast<std::size_t>(fi);
        const std::size_t r1 = std::min(r0 + 1, rows - 1);
        const double wr = fi - static_cast<double>(r0);
        for (std::size_t j = 0; j < out_cols; ++j) {
            const double fj =
                out_cols > 1 ? static_cast<double>(j) * (cols - 1) / (out_cols - 1) : 0.0;
            const std::size_t c0 = static_cast<std::size_t>(fj);
            const std::size_t c1 = std::min(c0 + 1, cols - 1);
            const double wc = fj - static_cast<double>(c0);
            const double v = (1 - wr) * ((1 - wc) * in[r0 * cols + c0] +
                                         wc * in[r0 * cols + c1]) +
                             wr * ((1 - wc) * in[r1 * cols + c0] + wc * in[r1 * cols + c1]);
            out[i * out_cols + j] = static_cast<S>(v);
        }
    }
    return out;
}

template <class S>
TensorT<S> traced_activation(const ActivationTrace<S>& trace, const std::string& layer) {
    const TensorT<S>* found = nullptr;
    for (const auto& [name, tensor] : trace)
        if (name == layer) found = &tensor;
    if (found == nullptr)
        throw DataError(msg("unknown layer \"", layer,
                            "\"; expected conv1..conv5, blockN or blockN.i"));
    return *found;
}

}  // namespace

template <class S>
ActivationMapT<S> grad_cam(SpeakerModelT<S>& model, const TensorT<S>& features,
                           const std::string& layer, std::ptrdiff_t target) {
    if (!SpeakerModelT<S>::is_trace_layer(layer))
        throw DataError(msg("unknown layer \"", layer,
                            "\"; expected conv1..conv5, blockN or blockN.i"));
    ActivationTrace<S> trace;
    TapeT<S> tape;
    TensorT<S> activation;
    TensorT<S> logits;
    {
        typename TapeT<S>::Scope scope(tape);
        logits = model.forward_logits(features, false, &trace);
        activation = traced_activation(trace, layer);
        std::size_t cls;
        if (target >= 0) {
            if (static_cast<std::size_t>(target) >= logits.dim(1))
                throw std::invalid_argument(msg("class ", target, " out of range [0, ",
                                                logits.dim(1), ")"));
            cls = static_cast<std::size_t>(target);
        } else {
            cls = 0;
            for (std::size_t k = 1; k < logits.dim(1); ++k)
                if (logits.at({0, k}) > logits.at({0, cls})) cls = k;
        }
        TensorT<S> objective = select_scalar(logits, cls);
        tape.backward(objective);
        target = static_cast<std::ptrdiff_t>(cls);
    }

    const std::size_t channels = activation.dim(0);
    const std::size_t rows = activation.dim(1);
    const std::size_t cols = activation.dim(2);
    const std::size_t plane = rows * cols;

    ActivationMapT<S> map;
    map.layer = layer;
    map.target_class = static_cast<std::size_t>(target);
    map.rows = rows;
    map.cols = cols;
    map.values.assign(plane, S(0));

    if (activation.has_grad()) {
        auto grad = activation.grad();
        auto act = activation.data();
        for (std::size_t c = 0; c < channels; ++c) {
            S w = 0;
            for (std::size_t p = 0; p < plane; ++p) w += grad[c * plane + p];
            w /= static_cast<S>(plane);
            for (std::size_t p = 0; p < plane; ++p) map.values[p] += w * act[c * plane + p];
        }
    }
    for (S& v : map.values) v = v > S(0) ? v : S(0);
    map.peak = 0;
    for (S v : map.values) map.peak = std::max(map.peak, v);
    if (map.peak > S(0))
        for (S& v : map.values) v /= map.peak;

    map.up_rows = features.rank() == 2 ? features.dim(0) : features.dim(1);
    map.up_cols = features.rank() == 2 ? features.dim(1) : features.dim(2);
    map.upsampled = bilinear_resize(map.values, rows, cols, map.up_rows, map.up_cols);
    return map;
}

template <class S>
std::vector<S> grad_cam_channel_weights(SpeakerModelT<S>& model, const TensorT<S>& features,
                                        const std::string& layer, std::size_t target) {
    ActivationTrace<S> trace;
    TapeT<S> tape;
    TensorT<S> activation;
    {
        typename TapeT<S>::Scope scope(tape);
        TensorT<S> logits = model.forward_logits(features, false, &trace);
        activation = traced_activation(trace, layer);
        TensorT<S> objective = select_scalar(logits, target);
        tape.backward(objective);
    }
    const std::size_t channels = activation.dim(0);
    const std::size_t plane = activation.dim(1) * activation.dim(2);
    std::vector<S> weights(channels, S(0));
    if (activation.has_grad()) {
        auto grad = activation.grad();
        for (std::size_t c = 0; c < channels; ++c) {
            S w = 0;
            for (std::size_t p = 0; p < plane; ++p) w += grad[c * plane + p];
            weights[c] = w / static_cast<S>(plane);
        }
    }
    return weights;
}

template <class S>
void export_pgm(const ActivationMapT<S>& map, const std::string& path, bool upsampled) {
    const std::size_t rows = upsampled ? map.up_rows : map.rows;
    const std::size_t cols = upsampled ? map.up_cols : map.cols;
    const std::vector<S>& values = upsampled ? map.upsampled : map.values;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(msg("cannot write ", path));
    os << "P5\n" << cols << " " << rows << "\n255\n";
    for (S v : values) {
        const double clamped = std::min(std::max(static_cast<double>(v), 0.0), 1.0);
        os.put(static_cast<char>(
            static_cast<unsigned char>(std::floor(clamped * 255.0 + 0.5))));
    }
    if (!os) throw DataError(msg("write failed for ", path));
}

template <class S>
void export_csv(const ActivationMapT<S>& map, const std::string& path, bool upsampled) {
    const std::size_t rows = upsampled ? map.up_rows : map.rows;
    const std::size_t cols = upsampled ? map.up_cols : map.cols;
    const std::vector<S>& values = upsampled ? map.upsampled : map.values;
    std::ofstream os(path);
    if (!os) throw DataError(msg("cannot write ", path));
    char buf[48];
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.8g", static_cast<double>(values[i * cols + j]));
            os << buf << (j + 1 < cols ? "," : "");
        }
        os << '\n';
    }
    if (!os) throw DataError(msg("write failed for ", path));
}

template struct ActivationMapT<float>;
template struct ActivationMapT<double>;

template ActivationMapT<float> grad_cam(SpeakerModelT<float>&, const TensorT<float>&,
                                        const std::string&, std::ptrdiff_t);
template ActivationMapT<double> grad_cam(SpeakerModelT<double>&, const TensorT<double>&,
                                         const std::string&, std::ptrdiff_t);
template std::vector<float> grad_cam_channel_weights(SpeakerModelT<float>&,
                                                     const TensorT<float>&,
                                                     const std::string&, std::size_t);
template std::vector<double> grad_cam_channel_weights(SpeakerModelT<double>&,
                                                      const TensorT<double>&,
                                                      const std::string&, std::size_t);
template void export_pgm(const ActivationMapT<float>&, const std::string&, bool);
template void export_pgm(const ActivationMapT<double>&, const std::string&, bool);
template void export_csv(const ActivationMapT<float>&, const std::string&, bool);
template void export_csv(const ActivationMapT<double>&, const std::string&, bool);

}  // namespace svkit
