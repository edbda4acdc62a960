#include "svkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include "svkit/features.hpp"
#include "svkit/serialize.hpp"
#include "svkit/sgd.hpp"

namespace svkit {

std::vector<std::string> speaker_classes(const Manifest& manifest) {
    std::set<std::string> speakers;
    for (const auto& e : manifest.entries) {
        if (e.speaker.empty())
            throw DataError(msg("training manifest entry \"", e.id,
                                "\" has no speaker column"));
        speakers.insert(e.speaker);
    }
    return {speakers.begin(), speakers.end()};
}

namespace {

// crop `frames` contiguous frames starting at `offset`, wrapping around
// when the utterance is shorter than the crop
FeatureMatrix crop_features(const FeatureMatrix& f, std::size_t frames, std::size_t offset) {
    FeatureMatrix out;
    out.dims = f.dims;
    out.frames = frames;
    out.values.resize(f.dims * frames);
    for (std::size_t d = 0; d < f.dims; ++d)
        for (std::size_t t = 0; t < frames; ++t)
            out.at(d, t) = f.at(d, (offset + t) % f.frames);
    return out;
}

}  // namespace

TrainResult train_model(const RunConfig& config, SpeakerModel& model, std::ostream* log) {
    Manifest manifest = Manifest::load(config.manifest);
    std::vector<std::string> classes = speaker_classes(manifest);
    if (classes.size() < 2)
        throw DataError(msg("training requires at least 2 speakers, manifest has ",
                            classes.size()));
    if (model.variant().num_classes < classes.size())
        throw DataError(msg("model has ", model.variant().num_classes,
                            " classes but the manifest names ", classes.size(),
                            " speakers"));
    auto class_of = [&classes](const std::string& speaker) {
        return static_cast<int>(std::lower_bound(classes.begin(), classes.end(), speaker) -
                                classes.begin());
    };

    std::vector<FeatureMatrix> features;
    std::vector<int> labels;
    features.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        features.push_back(FeatureMatrix::from_tensor(read_tensor(e.path)));
        labels.push_back(class_of(e.speaker));
    }

    const std::size_t crop_frames = frames_for_seconds(config.crop_seconds);
    if (crop_frames == 0)
        throw std::invalid_argument("train: crop_seconds shorter than one window");

    auto params = model.parameters();
    SgdOptimizer optimizer(params, static_cast<float>(config.learning_rate),
                           static_cast<float>(config.momentum),
                           static_cast<float>(config.weight_decay));
    const std::size_t decay_epoch = (2 * config.epochs + 2) / 3;  // ceil(2/3 epochs)

    TrainResult result;
    result.num_speakers = classes.size();
    std::ofstream log_file;
    if (!config.log_path.empty()) {
        log_file.open(config.log_path);
        if (!log_file) throw DataError(msg("cannot write ", config.log_path));
    }

    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr =
            config.learning_rate * (epoch >= decay_epoch && decay_epoch > 0 ? 0.1 : 1.0);
        optimizer.set_learning_rate(static_cast<float>(lr));

        Rng epoch_rng = Rng(config.seed).fork(40000 + epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[epoch_rng.integer(i)]);

        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            std::vector<Tensor> crops;
            std::vector<int> batch_labels;
            crops.reserve(count);
            for (std::size_t b = 0; b < count; ++b) {
                const std::size_t idx = order[start + b];
                const FeatureMatrix& f = features[idx];
                const std::size_t span = f.frames > crop_frames ? f.frames - crop_frames + 1
                                                                : f.frames;
                const std::size_t offset = epoch_rng.integer(span);
                crops.push_back(
                    mean_normalize(crop_features(f, crop_frames, offset)).to_tensor());
                batch_labels.push_back(labels[idx]);
            }
            Tape tape;
            float loss_value;
            {
                Tape::Scope scope(tape);
                Tensor logits = model.forward_logits_batch(crops, true);
                for (std::size_t b = 0; b < count; ++b) {
                    std::size_t best = 0;
                    for (std::size_t k = 1; k < logits.dim(1); ++k)
                        if (logits.at({b, k}) > logits.at({b, best})) best = k;
                    if (static_cast<int>(best) == batch_labels[b]) ++correct;
                }
                Tensor loss = softmax_cross_entropy(logits, batch_labels);
                loss_value = loss.scalar();
                if (!std::isfinite(loss_value))
                    throw NumericError(msg("training loss is not finite at epoch ", epoch));
                tape.backward(loss);
            }
            optimizer.step();
            optimizer.zero_grad();
            loss_sum += static_cast<double>(loss_value) * count;
            seen += count;
        }

        EpochStats stats{epoch + 1, loss_sum / static_cast<double>(seen),
                         static_cast<double>(correct) / static_cast<double>(seen), lr};
        result.epochs.push_back(stats);
        if (log != nullptr)
            *log << "epoch " << stats.epoch << "/" << config.epochs << " loss " << stats.loss
                 << " acc " << stats.accuracy << " lr " << stats.learning_rate << std::endl;
        if (log_file)
            log_file << stats.epoch << '\t' << stats.loss << '\t' << stats.accuracy << '\t'
                     << stats.learning_rate << '\n';
    }

    if (!config.checkpoint_out.empty()) {
        write_checkpoint(config.checkpoint_out, model.named_state());
        result.checkpoint_path = config.checkpoint_out;
    }
    return result;
}

TrainResult run_training(const RunConfig& config, std::ostream* log) {
    Manifest manifest = Manifest::load(config.manifest);
    const std::size_t speakers = speaker_classes(manifest).size();
    const std::size_t classes = config.num_classes > 0 ? config.num_classes : speakers;
    ModelVariant variant = ModelVariant::parse(config.variant, classes);
    SpeakerModel model(variant, config.seed);
    if (!config.resume.empty()) load_state(config.resume, model.named_state());
    return train_model(config, model, log);
}

}  // namespace svkit
