#include "svkit/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "svkit/serialize.hpp"

namespace svkit {

namespace {

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::size_t count = std::min(workers, n);
    for (std::size_t t = 0; t < count; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += count) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

Manifest cmd_features(const FeatureExtractOptions& options) {
    Manifest wavs = Manifest::load(options.manifest);
    std::filesystem::create_directories(options.out_dir);
    Manifest out;
    out.entries.resize(wavs.entries.size());
    parallel_for(wavs.entries.size(), options.workers, [&](std::size_t i) {
        const ManifestEntry& e = wavs.entries[i];
        FeatureMatrix f = mean_normalize(logmel(read_wav(e.path)));
        const std::string path = options.out_dir + "/" + e.id + ".tnsr";
        write_tensor(path, f.to_tensor());
        out.entries[i] = {e.id, path, e.speaker};
    });
    out.save(options.out_dir + "/features.tsv");
    return out;
}

std::string AuditReport::table() const {
    std::string out =
        "variant            params        expected   deviation\n";
    char buf[160];
    for (const AuditRow& r : rows) {
        if (!r.ok) {
            std::snprintf(buf, sizeof(buf), "%-18s parse error: %s\n", r.name.c_str(),
                          r.error.c_str());
            out += buf;
            continue;
        }
        if (r.expected > 0) {
            const double dev = (static_cast<double>(r.total) - r.expected) / r.expected;
            std::snprintf(buf, sizeof(buf), "%-18s %10zu %13.0f %+9.1f%%\n", r.name.c_str(),
                          r.total, r.expected, 100.0 * dev);
        } else {
            std::snprintf(buf, sizeof(buf), "%-18s %10zu %13s %9s\n", r.name.c_str(), r.total,
                          "-", "-");
        }
        out += buf;
    }
    return out;
}

std::string AuditReport::key_values() const {
    std::string out;
    char buf[160];
    for (const AuditRow& r : rows) {
        if (!r.ok) continue;
        std::snprintf(buf, sizeof(buf), "params_%s=%zu\n", r.name.c_str(), r.total);
        out += buf;
        for (const auto& [component, count] : r.breakdown.per_component) {
            std::snprintf(buf, sizeof(buf), "params_%s_%s=%zu\n", r.name.c_str(),
                          component.c_str(), count);
            out += buf;
        }
        if (r.expected > 0) {
            const double dev = (static_cast<double>(r.total) - r.expected) / r.expected;
            std::snprintf(buf, sizeof(buf), "deviation_%s=%.4f\n", r.name.c_str(), dev);
            out += buf;
        }
    }
    return out;
}

AuditReport cmd_audit(const AuditOptions& options) {
    if (!options.expected_millions.empty() &&
        options.expected_millions.size() != options.variants.size())
        throw std::invalid_argument(
            "audit: expected-params list must match the variant list length");
    AuditReport report;
    for (std::size_t i = 0; i < options.variants.size(); ++i) {
        AuditRow row;
        row.name = options.variants[i];
        try {
            ModelVariant v = ModelVariant::parse(row.name, options.num_classes);
            SpeakerModel model(v, 1);
            row.breakdown = model.count_parameters();
            row.total = row.breakdown.total;
            row.ok = true;
            if (!options.expected_millions.empty())
                row.expected = options.expected_millions[i] * 1e6;
        } catch (const DataError& e) {
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

SpeakerModel load_model(const std::string& variant, std::uint64_t seed,
                        const std::string& checkpoint, std::size_t num_classes) {
    if (!checkpoint.empty()) {
        auto tensors = read_checkpoint(checkpoint);
        auto it = tensors.find("classifier.weight");
        if (it == tensors.end())
            throw DataError(msg(checkpoint, ": no classifier.weight tensor"));
        num_classes = it->second.dim(1);
    }
    ModelVariant v = ModelVariant::parse(variant, num_classes);
    SpeakerModel model(v, seed);
    if (!checkpoint.empty()) load_state(checkpoint, model.named_state());
    return model;
}

Manifest cmd_embed(const EmbedOptions& options) {
    SpeakerModel model = load_model(options.variant, options.seed, options.checkpoint);
    Manifest feats = Manifest::load(options.manifest);
    std::filesystem::create_directories(options.out_dir);
    Manifest out;
    out.entries.resize(feats.entries.size());
    // inference reads the model's weights only; each forward owns its
    // activations, so utterances parallelize freely
    parallel_for(feats.entries.size(), options.workers, [&](std::size_t i) {
        const ManifestEntry& e = feats.entries[i];
        FeatureMatrix f = FeatureMatrix::from_tensor(read_tensor(e.path));
        Tensor features = mean_normalize(f).to_tensor();
        Tensor emb = model.forward_embedding(features, false);
        for (float v : emb.data())
            if (!std::isfinite(v)) throw NumericError(msg("embedding for ", e.id, " is not finite"));
        const std::string path = options.out_dir + "/" + e.id + ".tnsr";
        write_tensor(path, emb);
        out.entries[i] = {e.id, path, e.speaker};
    });
    out.save(options.out_dir + "/embeddings.tsv");
    return out;
}

EvalReport cmd_eval(const EvalCmdOptions& options) {
    SpeakerModel model = load_model(options.variant, options.seed, options.checkpoint);
    TrialSet trials = TrialSet::load(options.trials);
    Manifest features = Manifest::load(options.manifest);
    EvalReport report = evaluate_trials(model, trials, features, options.eval);
    if (!options.report_out.empty()) {
        std::ofstream os(options.report_out);
        if (!os) throw DataError(msg("cannot write ", options.report_out));
        os << report.table() << "\n" << report.key_values();
    }
    return report;
}

ActivationMap cmd_gradcam(const GradCamOptions& options) {
    if (options.feature_path.empty() == options.wav_path.empty())
        throw std::invalid_argument("gradcam: give exactly one of a feature file or a wav");
    FeatureMatrix f =
        options.feature_path.empty()
            ? logmel(read_wav(options.wav_path))
            : FeatureMatrix::from_tensor(read_tensor(options.feature_path));
    SpeakerModel model = load_model(options.variant, options.seed, options.checkpoint);
    Tensor features = mean_normalize(f).to_tensor();
    ActivationMap map = grad_cam(model, features, options.layer, options.target);
    if (!options.out_path.empty()) {
        if (options.format == "pgm")
            export_pgm(map, options.out_path, options.upsampled);
        else if (options.format == "csv")
            export_csv(map, options.out_path, options.upsampled);
        else
            throw std::invalid_argument(msg("gradcam: unknown format \"", options.format,
                                            "\" (pgm|csv)"));
    }
    return map;
}

Manifest cmd_truncate(const TruncateCmdOptions& options) {
    Manifest feats = Manifest::load(options.manifest);
    std::filesystem::create_directories(options.out_dir);
    Manifest out;
    for (const ManifestEntry& e : feats.entries) {
        FeatureMatrix f = FeatureMatrix::from_tensor(read_tensor(e.path));
        TruncateResult cut =
            truncate(f, options.seconds,
                     options.random_offset ? TruncateOffset::Random : TruncateOffset::Start,
                     options.seed);
        const std::string path = options.out_dir + "/" + e.id + ".tnsr";
        write_tensor(path, cut.features.to_tensor());
        out.entries.push_back({e.id, path, e.speaker});
    }
    out.save(options.out_dir + "/features.tsv");
    return out;
}

}  // namespace svkit
