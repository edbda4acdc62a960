#pragma once

#include "svkit/evalrun.hpp"
#include "svkit/gradcam.hpp"
#include "svkit/synth.hpp"
#include "svkit/train.hpp"

namespace svkit {

// Library entry points backing the CLI subcommands. The CLI binary is a
// thin flag parser over these.

struct FeatureExtractOptions {
    std::string manifest;  // id<TAB>wav_path[<TAB>speaker]
    std::string out_dir;
    std::size_t workers = 1;
};

// extracts mean-normalized log-Mel features to <out_dir>/<id>.tnsr and
// writes <out_dir>/features.tsv
Manifest cmd_features(const FeatureExtractOptions& options);

struct AuditOptions {
    std::vector<std::string> variants;
    std::vector<double> expected_millions;  // optional, aligned with variants
    std::size_t num_classes = 5994;
};

struct AuditRow {
    std::string name;
    bool ok = false;
    std::string error;
    std::size_t total = 0;
    ParameterBreakdown breakdown;
    double expected = 0.0;  // absolute count, 0 when not supplied
};

struct AuditReport {
    std::vector<AuditRow> rows;
    std::string table() const;
    std::string key_values() const;
};

// parameter audit; parse failures are reported per name while the
// remaining variants are still audited
AuditReport cmd_audit(const AuditOptions& options);

// builds a model for `variant`; when a checkpoint is given the classifier
// width is taken from it
SpeakerModel load_model(const std::string& variant, std::uint64_t seed,
                        const std::string& checkpoint, std::size_t num_classes = 5994);

struct EmbedOptions {
    std::string variant = "resnet";
    std::uint64_t seed = 1;
    std::string checkpoint;
    std::string manifest;  // feature manifest
    std::string out_dir;
    std::size_t workers = 1;
};

Manifest cmd_embed(const EmbedOptions& options);

struct EvalCmdOptions {
    std::string variant = "resnet";
    std::uint64_t seed = 1;
    std::string checkpoint;
    std::string manifest;  // feature manifest
    std::string trials;
    EvalOptions eval;
    std::string report_out;  // optional: write table + key=value lines
};

EvalReport cmd_eval(const EvalCmdOptions& options);

struct GradCamOptions {
    std::string variant = "resnet";
    std::uint64_t seed = 1;
    std::string checkpoint;
    std::string feature_path;  // TNSR features, or
    std::string wav_path;      // raw audio to featurize
    std::string layer = "block3";
    std::ptrdiff_t target = -1;  // -1: model argmax
    std::string format = "pgm";  // pgm | csv
    std::string out_path;
    bool upsampled = true;
};

ActivationMap cmd_gradcam(const GradCamOptions& options);

struct TruncateCmdOptions {
    std::string manifest;  // feature manifest
    std::string out_dir;
    double seconds = 2.0;
    bool random_offset = false;
    std::uint64_t seed = 0;
};

// writes truncated copies of every feature file plus a new manifest
Manifest cmd_truncate(const TruncateCmdOptions& options);

}  // namespace svkit
