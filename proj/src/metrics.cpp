#include "svkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svkit {

double cosine_score(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw std::invalid_argument(
            msg("cosine: dimension mismatch ", a.size(), " vs ", b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine: zero vector has no direction");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

struct RatePoint {
    double threshold, fa, fr;
};

// (threshold, FA, FR) at every midpoint between consecutive distinct scores
// plus the two all-accept / all-reject extremes, in increasing threshold
// order. Accept rule: score >= threshold.
std::vector<RatePoint> rate_curve(const ScoreSet& scores) {
    std::size_t n_target = 0, n_nontarget = 0;
    for (const auto& t : scores) (t.target ? n_target : n_nontarget)++;
    if (n_target == 0 || n_nontarget == 0)
        throw std::invalid_argument(
            "metrics: need at least one target and one nontarget trial");

    std::vector<std::pair<double, bool>> sorted;
    sorted.reserve(scores.size());
    for (const auto& t : scores) sorted.emplace_back(t.score, t.target);
    std::sort(sorted.begin(), sorted.end());

    std::vector<RatePoint> points;
    points.reserve(scores.size() + 2);
    // walking the sorted scores, everything below the threshold is rejected
    std::size_t rejected_targets = 0, rejected_nontargets = 0;
    auto push = [&](double th) {
        points.push_back(
            {th,
             static_cast<double>(n_nontarget - rejected_nontargets) / n_nontarget,
             static_cast<double>(rejected_targets) / n_target});
    };
    push(sorted.front().first - 1.0);
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double s = sorted[i].first;
        while (i < sorted.size() && sorted[i].first == s) {
            (sorted[i].second ? rejected_targets : rejected_nontargets)++;
            ++i;
        }
        const double next =
            i < sorted.size() ? 0.5 * (s + sorted[i].first) : s + 1.0;
        push(next);
    }
    return points;
}

}  // namespace

EerResult compute_eer(const ScoreSet& scores) {
    const auto points = rate_curve(scores);
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const RatePoint& p0 = points[i];
        const RatePoint& p1 = points[i + 1];
        if (p0.fr > p0.fa || p1.fr < p1.fa) continue;  // not the crossing bracket
        const double d0 = p0.fa - p0.fr;
        const double d1 = p1.fr - p1.fa;
        if (d0 + d1 == 0.0) return {p0.fa, p0.threshold};
        const double u = d0 / (d0 + d1);
        return {p0.fa + u * (p1.fa - p0.fa),
                p0.threshold + u * (p1.threshold - p0.threshold)};
    }
    // FA and FR never cross strictly; the last point is the closest
    const RatePoint& last = points.back();
    return {0.5 * (last.fa + last.fr), last.threshold};
}

DcfResult compute_min_dcf(const ScoreSet& scores, const DcfParams& params) {
    if (params.p_target <= 0.0 || params.p_target >= 1.0)
        throw std::invalid_argument("minDCF: p_target must be in (0, 1)");
    if (params.c_miss <= 0.0 || params.c_fa <= 0.0)
        throw std::invalid_argument("minDCF: costs must be positive");
    const auto points = rate_curve(scores);
    const double norm =
        std::min(params.c_miss * params.p_target, params.c_fa * (1.0 - params.p_target));
    DcfResult best{std::numeric_limits<double>::infinity(), 0.0};
    for (const RatePoint& p : points) {
        const double cost = (params.c_miss * params.p_target * p.fr +
                             params.c_fa * (1.0 - params.p_target) * p.fa) /
                            norm;
        if (cost < best.min_dcf) best = {cost, p.threshold};
    }
    return best;
}

}  // namespace svkit
