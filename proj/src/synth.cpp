#include "svkit/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "svkit/trials.hpp"

namespace svkit {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kRate = 16000;

std::string utterance_id(std::size_t speaker, std::size_t utt) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "spk%02zu-utt%02zu", speaker, utt);
    return buf;
}

std::string speaker_id(std::size_t speaker) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "spk%02zu", speaker);
    return buf;
}

// two-pole resonator applied in place over the excitation
void resonate(const std::vector<float>& x, double freq, double bandwidth, double gain,
              std::vector<float>& acc) {
    const double r = std::exp(-kPi * bandwidth / kRate);
    const double theta = 2.0 * kPi * freq / kRate;
    const double a1 = 2.0 * r * std::cos(theta);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double y = static_cast<double>(x[i]) + a1 * y1 + a2 * y2;
        acc[i] += static_cast<float>(gain * y);
        y2 = y1;
        y1 = y;
    }
}

}  // namespace

SpeakerVoice speaker_voice(const SyntheticSpeakerSpec& spec, std::size_t speaker) {
    Rng rng = Rng(spec.seed).fork(900000 + speaker);
    const std::size_t n = spec.num_speakers;
    SpeakerVoice v;
    // evenly spread grids, visited in decorrelated orders, keep signatures
    // pairwise distinct; the jitter is small against the grid step
    v.f0 = 85.0 + 180.0 * static_cast<double>(speaker) / std::max<std::size_t>(n - 1, 1) +
           rng.uniform(-2.0, 2.0);
    v.formants[0] = 330.0 + 560.0 * static_cast<double>((speaker * 7 + 3) % n) /
                                std::max<std::size_t>(n - 1, 1) +
                    rng.uniform(-6.0, 6.0);
    v.formants[1] = 1000.0 + 1250.0 * static_cast<double>((speaker * 11 + 5) % n) /
                                 std::max<std::size_t>(n - 1, 1) +
                    rng.uniform(-10.0, 10.0);
    v.formants[2] = 2350.0 + 1000.0 * static_cast<double>((speaker * 13 + 7) % n) /
                                 std::max<std::size_t>(n - 1, 1) +
                    rng.uniform(-10.0, 10.0);
    v.bandwidths[0] = 70.0;
    v.bandwidths[1] = 90.0;
    v.bandwidths[2] = 120.0;
    return v;
}

Waveform synthesize_utterance(const SyntheticSpeakerSpec& spec, std::size_t speaker,
                              std::size_t utterance) {
    Rng rng = Rng(spec.seed).fork(speaker * 1000 + utterance);
    const SpeakerVoice voice = speaker_voice(spec, speaker);
    const double seconds = rng.uniform(spec.min_seconds, spec.max_seconds);
    const std::size_t n = static_cast<std::size_t>(seconds * kRate);

    // pulse-train excitation with a slow pitch contour and syllabic envelope
    const double vibrato_rate = rng.uniform(3.5, 6.0);
    const double vibrato_phase = rng.uniform(0.0, 2.0 * kPi);
    const double vibrato_depth = rng.uniform(0.01, 0.04);
    const double am_rate = rng.uniform(2.0, 4.0);
    const double am_phase = rng.uniform(0.0, 2.0 * kPi);
    const double f0_scale = rng.uniform(0.96, 1.04);

    std::vector<float> excitation(n, 0.0f);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kRate;
        const double f0 = voice.f0 * f0_scale *
                          (1.0 + vibrato_depth * std::sin(2.0 * kPi * vibrato_rate * t +
                                                          vibrato_phase));
        phase += f0 / kRate;
        if (phase >= 1.0) {
            phase -= 1.0;
            excitation[i] = 1.0f;
        }
    }

    std::vector<float> voiced(n, 0.0f);
    resonate(excitation, voice.formants[0], voice.bandwidths[0], 1.0, voiced);
    resonate(excitation, voice.formants[1], voice.bandwidths[1], 0.7, voiced);
    resonate(excitation, voice.formants[2], voice.bandwidths[2], 0.4, voiced);

    Waveform w;
    w.sample_rate = kRate;
    w.samples.resize(n);
    const std::size_t attack = kRate / 20, release = kRate / 10;
    float peak = 1e-9f;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kRate;
        double env = 0.6 + 0.4 * std::fabs(std::sin(2.0 * kPi * am_rate * t + am_phase));
        if (i < attack) env *= static_cast<double>(i) / attack;
        if (n - i < release) env *= static_cast<double>(n - i) / release;
        const double s = env * voiced[i] + spec.noise_level * rng.uniform(-1.0, 1.0);
        w.samples[i] = static_cast<float>(s);
        peak = std::max(peak, std::fabs(w.samples[i]));
    }
    for (float& s : w.samples) s *= 0.5f / peak;
    return w;
}

SynthResult synthesize_dataset(const SyntheticSpeakerSpec& spec, const std::string& out_dir) {
    if (spec.num_speakers < 2)
        throw std::invalid_argument("synth: need at least 2 speakers");
    if (spec.test_utterances_per_speaker >= spec.utterances_per_speaker)
        throw std::invalid_argument("synth: test split must leave training utterances");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/wav");

    SynthResult result;
    result.wav_dir = out_dir + "/wav";
    Manifest train, test;
    const std::size_t train_per_speaker =
        spec.utterances_per_speaker - spec.test_utterances_per_speaker;
    for (std::size_t s = 0; s < spec.num_speakers; ++s) {
        for (std::size_t u = 0; u < spec.utterances_per_speaker; ++u) {
            const std::string id = utterance_id(s, u);
            const std::string path = result.wav_dir + "/" + id + ".wav";
            write_wav(path, synthesize_utterance(spec, s, u));
            ++result.num_wavs;
            ManifestEntry entry{id, path, speaker_id(s)};
            (u < train_per_speaker ? train : test).entries.push_back(entry);
        }
    }
    result.train_manifest = out_dir + "/train.tsv";
    result.test_manifest = out_dir + "/test.tsv";
    train.save(result.train_manifest);
    test.save(result.test_manifest);

    // balanced trials over the test split: all within-speaker pairs as
    // targets, an equal count of sampled cross-speaker pairs as nontargets
    TrialSet trials;
    const std::size_t per = spec.test_utterances_per_speaker;
    for (std::size_t s = 0; s < spec.num_speakers; ++s)
        for (std::size_t i = 0; i < per; ++i)
            for (std::size_t j = i + 1; j < per; ++j)
                trials.trials.push_back({true,
                                         utterance_id(s, train_per_speaker + i),
                                         utterance_id(s, train_per_speaker + j)});
    const std::size_t target_count = trials.trials.size();
    Rng rng = Rng(spec.seed).fork(777);
    std::set<std::pair<std::size_t, std::size_t>> used;
    std::size_t guard = 0;
    while (trials.trials.size() < 2 * target_count && guard < 100000) {
        ++guard;
        const std::size_t sa = rng.integer(spec.num_speakers);
        const std::size_t sb = rng.integer(spec.num_speakers);
        if (sa == sb) continue;
        const std::size_t ua = train_per_speaker + rng.integer(per);
        const std::size_t ub = train_per_speaker + rng.integer(per);
        const auto key = std::make_pair(sa * 1000 + ua, sb * 1000 + ub);
        if (!used.insert(key).second) continue;
        trials.trials.push_back({false, utterance_id(sa, ua), utterance_id(sb, ub)});
    }
    result.trial_path = out_dir + "/trials.txt";
    trials.save(result.trial_path);
    result.num_trials = trials.trials.size();
    return result;
}

}  // namespace svkit
