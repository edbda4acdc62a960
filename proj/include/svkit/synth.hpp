#pragma once

#include <string>

#include "svkit/wav.hpp"

namespace svkit {

// Synthetic speaker corpus: each speaker is a fixed fundamental plus three
// resonant filters excited by a pulse train, with per-utterance pitch
// contour and noise. Enough spectral identity for log-Mel features to
// separate the speakers at desk scale.
struct SyntheticSpeakerSpec {
    std::size_t num_speakers = 20;
    std::size_t utterances_per_speaker = 10;
    std::size_t test_utterances_per_speaker = 4;
    double min_seconds = 2.5;
    double max_seconds = 4.5;
    double noise_level = 0.03;
    std::uint64_t seed = 1;
};

struct SynthResult {
    std::string wav_dir;
    std::string train_manifest;  // id<TAB>path<TAB>speaker
    std::string test_manifest;
    std::string trial_path;  // balanced target/nontarget pairs over the test split
    std::size_t num_wavs = 0;
    std::size_t num_trials = 0;
};

// per-speaker voice signature, deterministic in (seed, speaker index)
struct SpeakerVoice {
    double f0;
    double formants[3];
    double bandwidths[3];
};

SpeakerVoice speaker_voice(const SyntheticSpeakerSpec& spec, std::size_t speaker);

// one utterance waveform, deterministic in (seed, speaker, utterance)
Waveform synthesize_utterance(const SyntheticSpeakerSpec& spec, std::size_t speaker,
                              std::size_t utterance);

SynthResult synthesize_dataset(const SyntheticSpeakerSpec& spec, const std::string& out_dir);

}  // namespace svkit
