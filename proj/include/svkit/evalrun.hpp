#pragma once

#include "svkit/backbone.hpp"
#include "svkit/features.hpp"
#include "svkit/trials.hpp"

namespace svkit {

struct EvalOptions {
    // extra report rows scoring truncated test utterances (seconds)
    std::vector<double> truncate_seconds;
    // duration boundaries for per-bucket rows on the regular condition,
    // e.g. {2, 4} -> "<2s", "2-4s", ">4s"
    std::vector<double> bucket_bounds;
    DcfParams dcf;
    std::size_t workers = 1;
    std::string score_path;  // optional: dump regular-condition scores
};

struct EvalRow {
    std::string label;
    double eer = 0.0;
    double eer_threshold = 0.0;
    double min_dcf = 0.0;
    double dcf_threshold = 0.0;
    std::size_t targets = 0;
    std::size_t nontargets = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;

    const EvalRow* find(const std::string& label) const;
    std::string table() const;
    std::string key_values() const;
};

// Embeds every unique utterance once (enrollment always at full length,
// test utterances additionally truncated per option), scores all trials by
// cosine, and reports EER / minDCF per condition.
EvalReport evaluate_trials(SpeakerModel& model, const TrialSet& trials,
                           const Manifest& features, const EvalOptions& options = {});

}  // namespace svkit
