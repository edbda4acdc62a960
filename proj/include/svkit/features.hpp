#pragma once

#include "svkit/tensor.hpp"
#include "svkit/wav.hpp"

namespace svkit {

struct LogMelOptions {
    std::size_t sample_rate = 16000;
    std::size_t window = 400;  // 25 ms
    std::size_t hop = 160;     // 10 ms
    std::size_t fft_size = 512;
    std::size_t mel_bins = 80;
    double fmin = 20.0;
    double fmax = 7600.0;
    double log_floor = 1e-10;
};

// 80 x T log-Mel energies for one utterance, stored dimension-major to
// match the [80, T] tensor file layout.
struct FeatureMatrix {
    std::size_t dims = 80;
    std::size_t frames = 0;
    std::vector<float> values;  // [dims][frames]
    bool normalized = false;

    float& at(std::size_t d, std::size_t t) { return values[d * frames + t]; }
    float at(std::size_t d, std::size_t t) const { return values[d * frames + t]; }

    Tensor to_tensor() const;
    static FeatureMatrix from_tensor(const Tensor& t, bool normalized = false);

    // duration implied by the framing arithmetic
    double seconds(const LogMelOptions& opts = {}) const;
};

// frames produced by `seconds` of audio: 1 + floor((N - window)/hop)
std::size_t frames_for_seconds(double seconds, const LogMelOptions& opts = {});

// Hamming-windowed STFT power spectrum through a triangular Mel filterbank,
// natural log with a fixed floor.
FeatureMatrix logmel(const Waveform& w, const LogMelOptions& opts = {});

// Subtracts the per-dimension temporal mean; variance untouched.
FeatureMatrix mean_normalize(const FeatureMatrix& f);

enum class TruncateOffset { Start, Random };

struct TruncateResult {
    FeatureMatrix features;
    bool truncated = false;  // false when the utterance was shorter than asked
};

// Contiguous sub-matrix covering `seconds` of audio, re-normalized.
// Utterances shorter than the request pass through whole, flagged.
TruncateResult truncate(const FeatureMatrix& f, double seconds,
                        TruncateOffset offset = TruncateOffset::Start,
                        std::uint64_t seed = 0, const LogMelOptions& opts = {});

// Triangular Mel filterbank weights, one row per Mel bin over FFT bins
// [0, fft_size/2]. Exposed for tests that locate filter peaks.
std::vector<std::vector<float>> mel_filterbank(const LogMelOptions& opts);

}  // namespace svkit
