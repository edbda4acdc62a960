#pragma once

#include "svkit/backbone.hpp"

namespace svkit {

// Class activation map over a convolutional layer: channel weights are the
// spatial means of the target-logit gradients, the map is the rectified
// weighted sum of activations, max-normalized and bilinearly upsampled to
// the input plane.
template <class S>
struct ActivationMapT {
    std::string layer;
    std::size_t target_class = 0;
    std::size_t rows = 0, cols = 0;  // layer resolution (F', T')
    std::vector<S> values;           // normalized to [0, 1]
    S peak = S(0);                   // pre-normalization maximum
    std::size_t up_rows = 0, up_cols = 0;  // input resolution (80, T)
    std::vector<S> upsampled;              // normalized, input resolution
};

using ActivationMap = ActivationMapT<float>;

// target < 0 selects the model's own argmax class for the utterance.
template <class S>
ActivationMapT<S> grad_cam(SpeakerModelT<S>& model, const TensorT<S>& features,
                           const std::string& layer = "block3",
                           std::ptrdiff_t target = -1);

// per-channel logit gradients averaged over the spatial plane, in channel
// order; exposed for sensitivity checks
template <class S>
std::vector<S> grad_cam_channel_weights(SpeakerModelT<S>& model, const TensorT<S>& features,
                                        const std::string& layer, std::size_t target);

// PGM (P5) grayscale export, 255 = maximum activation, round half up.
template <class S>
void export_pgm(const ActivationMapT<S>& map, const std::string& path,
                bool upsampled = true);

// row-major float CSV
template <class S>
void export_csv(const ActivationMapT<S>& map, const std::string& path,
                bool upsampled = true);

extern template struct ActivationMapT<float>;
extern template struct ActivationMapT<double>;

}  // namespace svkit
