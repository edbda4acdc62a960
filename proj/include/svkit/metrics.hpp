#pragma once

#include <span>
#include <vector>

#include "svkit/common.hpp"

namespace svkit {

// one labeled trial with its score
struct ScoredTrial {
    bool target = false;
    double score = 0.0;
};

using ScoreSet = std::vector<ScoredTrial>;

struct DcfParams {
    double p_target = 0.01;
    double c_miss = 1.0;
    double c_fa = 1.0;
};

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

struct DcfResult {
    double min_dcf = 0.0;
    double threshold = 0.0;
};

double cosine_score(std::span<const float> a, std::span<const float> b);

// Equal error rate, linearly interpolated between the two thresholds
// bracketing the false-accept / false-reject crossing. Thresholds are the
// midpoints between consecutive distinct scores plus the two extremes.
EerResult compute_eer(const ScoreSet& scores);

// Minimum normalized detection cost over the same threshold set.
DcfResult compute_min_dcf(const ScoreSet& scores, const DcfParams& params = {});

}  // namespace svkit
