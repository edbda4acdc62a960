#pragma once

#include <iosfwd>

#include "svkit/backbone.hpp"
#include "svkit/trials.hpp"

namespace svkit {

struct RunConfig {
    std::string variant = "resnet";
    std::uint64_t seed = 1;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double crop_seconds = 2.0;   // fixed-length random crops
    std::size_t num_classes = 0;  // 0: number of speakers in the manifest
    std::string manifest;         // feature manifest with the speaker column
    std::string checkpoint_out;
    std::string resume;    // optional checkpoint to continue from
    std::string log_path;  // optional per-epoch loss log
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double learning_rate = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> epochs;
    std::size_t num_speakers = 0;
    std::string checkpoint_path;
};

// Mini-batch SGD on softmax cross-entropy over fixed-length crops. The
// learning rate drops by 10x at two thirds of the run. Deterministic under
// a fixed seed: data order, crop offsets, and initialization all derive
// from config.seed.
TrainResult train_model(const RunConfig& config, SpeakerModel& model,
                        std::ostream* log = nullptr);

// builds the model from config.variant (respecting resume) and trains it
TrainResult run_training(const RunConfig& config, std::ostream* log = nullptr);

// sorted speaker -> class-index mapping used by training
std::vector<std::string> speaker_classes(const Manifest& manifest);

}  // namespace svkit
