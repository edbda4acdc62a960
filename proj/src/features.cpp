#include "svkit/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace svkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// iterative radix-2 FFT, in place
void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace

std::vector<std::vector<float>> mel_filterbank(const LogMelOptions& opts) {
    const std::size_t bins = opts.fft_size / 2 + 1;
    const double bin_hz =
        static_cast<double>(opts.sample_rate) / static_cast<double>(opts.fft_size);
    const double mel_lo = hz_to_mel(opts.fmin);
    const double mel_hi = hz_to_mel(opts.fmax);
    std::vector<double> centers(opts.mel_bins + 2);
    for (std::size_t i = 0; i < centers.size(); ++i)
        centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                            static_cast<double>(opts.mel_bins + 1));
    std::vector<std::vector<float>> filters(opts.mel_bins,
                                            std::vector<float>(bins, 0.0f));
    for (std::size_t m = 0; m < opts.mel_bins; ++m) {
        const double left = centers[m], center = centers[m + 1], right = centers[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double hz = bin_hz * static_cast<double>(k);
            double w = 0.0;
            if (hz > left && hz < center)
                w = (hz - left) / (center - left);
            else if (hz >= center && hz < right)
                w = (right - hz) / (right - center);
            filters[m][k] = static_cast<float>(w);
        }
    }
    return filters;
}

std::size_t frames_for_seconds(double seconds, const LogMelOptions& opts) {
    if (seconds <= 0.0) throw std::invalid_argument("frames_for_seconds: seconds must be > 0");
    const double samples = seconds * static_cast<double>(opts.sample_rate);
    if (samples < static_cast<double>(opts.window)) return 0;
    return 1 + static_cast<std::size_t>((samples - static_cast<double>(opts.window)) /
                                        static_cast<double>(opts.hop));
}

FeatureMatrix logmel(const Waveform& w, const LogMelOptions& opts) {
    if (w.sample_rate != opts.sample_rate)
        throw DataError(msg("logmel: expected ", opts.sample_rate, " Hz audio, got ",
                            w.sample_rate));
    if (w.samples.size() < opts.window)
        throw DataError(msg("logmel: audio too short (", w.samples.size(), " samples, window ",
                            opts.window, ")"));
    const std::size_t frames = 1 + (w.samples.size() - opts.window) / opts.hop;
    const auto filters = mel_filterbank(opts);
    const std::size_t bins = opts.fft_size / 2 + 1;

    std::vector<double> window(opts.window);
    for (std::size_t i = 0; i < opts.window; ++i)
        window[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                           static_cast<double>(opts.window - 1));

    FeatureMatrix out;
    out.dims = opts.mel_bins;
    out.frames = frames;
    out.values.assign(opts.mel_bins * frames, 0.0f);

    std::vector<std::complex<double>> buf(opts.fft_size);
    std::vector<double> power(bins);
    for (std::size_t t = 0; t < frames; ++t) {
        const float* src = w.samples.data() + t * opts.hop;
        for (std::size_t i = 0; i < opts.fft_size; ++i)
            buf[i] = i < opts.window
                         ? std::complex<double>(static_cast<double>(src[i]) * window[i], 0.0)
                         : std::complex<double>(0.0, 0.0);
        fft(buf);
        for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
        for (std::size_t m = 0; m < opts.mel_bins; ++m) {
            double e = 0.0;
            const auto& filt = filters[m];
            for (std::size_t k = 0; k < bins; ++k) e += filt[k] * power[k];
            out.at(m, t) = static_cast<float>(std::log(std::max(e, opts.log_floor)));
        }
    }
    return out;
}

FeatureMatrix mean_normalize(const FeatureMatrix& f) {
    FeatureMatrix out = f;
    for (std::size_t d = 0; d < f.dims; ++d) {
        double mu = 0.0;
        for (std::size_t t = 0; t < f.frames; ++t) mu += f.at(d, t);
        mu /= static_cast<double>(f.frames);
        for (std::size_t t = 0; t < f.frames; ++t)
            out.at(d, t) = static_cast<float>(f.at(d, t) - mu);
    }
    out.normalized = true;
    return out;
}

TruncateResult truncate(const FeatureMatrix& f, double seconds, TruncateOffset offset,
                        std::uint64_t seed, const LogMelOptions& opts) {
    if (seconds <= 0.0) throw std::invalid_argument("truncate: seconds must be > 0");
    const std::size_t want = frames_for_seconds(seconds, opts);
    if (want == 0 || want >= f.frames) {
        TruncateResult r{mean_normalize(f), false};
        return r;
    }
    std::size_t start = 0;
    if (offset == TruncateOffset::Random) {
        Rng rng(seed);
        start = rng.integer(f.frames - want + 1);
    }
    FeatureMatrix cut;
    cut.dims = f.dims;
    cut.frames = want;
    cut.values.resize(f.dims * want);
    for (std::size_t d = 0; d < f.dims; ++d)
        for (std::size_t t = 0; t < want; ++t) cut.at(d, t) = f.at(d, start + t);
    return {mean_normalize(cut), true};
}

Tensor FeatureMatrix::to_tensor() const {
    return Tensor::from_vector({dims, frames}, values);
}

FeatureMatrix FeatureMatrix::from_tensor(const Tensor& t, bool normalized) {
    if (t.rank() != 2)
        throw DataError(msg("feature tensor must be [dims, frames], got ",
                            shape_str(t.shape())));
    FeatureMatrix f;
    f.dims = t.dim(0);
    f.frames = t.dim(1);
    f.values.assign(t.data().begin(), t.data().end());
    f.normalized = normalized;
    return f;
}

double FeatureMatrix::seconds(const LogMelOptions& opts) const {
    if (frames == 0) return 0.0;
    return (static_cast<double>(frames - 1) * static_cast<double>(opts.hop) +
            static_cast<double>(opts.window)) /
           static_cast<double>(opts.sample_rate);
}

}  // namespace svkit
