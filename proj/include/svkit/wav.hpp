#pragma once

#include <string>
#include <vector>

#include "svkit/common.hpp"

namespace svkit {

struct Waveform {
    std::vector<float> samples;  // in [-1, 1]
    std::size_t sample_rate = 16000;

    double seconds() const {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }
};

// Reads RIFF/WAVE PCM 16-bit audio. Stereo is downmixed by channel mean;
// any sample rate other than 16 kHz is linearly resampled to 16 kHz.
Waveform read_wav(const std::string& path);

// PCM 16-bit mono writer.
void write_wav(const std::string& path, const Waveform& w);

// Linear-interpolation resampler.
Waveform resample(const Waveform& in, std::size_t target_rate);

}  // namespace svkit
