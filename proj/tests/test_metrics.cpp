#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "svkit/metrics.hpp"

using namespace svkit;

namespace {

ScoreSet to_scoreset(const std::vector<std::pair<bool, double>>& trials) {
    ScoreSet s;
    for (auto& t : trials) s.push_back({t.first, t.second});
    return s;
}

std::vector<std::pair<bool, double>> random_trials(Rng& rng, std::size_t n) {
    std::vector<std::pair<bool, double>> out;
    std::size_t targets = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool target = rng.uniform() < 0.4;
        targets += target;
        // targets biased upward so the sets are not pure noise
        const double score = rng.uniform(-1.0, 1.0) + (target ? rng.uniform(0.0, 0.8) : 0.0);
        out.emplace_back(target, score);
    }
    if (targets == 0) out[0].first = true;
    if (targets == n) out[0].first = false;
    return out;
}

}  // namespace

TEST_CASE("cosine score basics") {
    std::vector<float> a{1, 0, 0}, b{1, 0, 0}, c{0, 1, 0}, d{2, 0, 0};
    CHECK(cosine_score(a, b) == doctest::Approx(1.0));
    CHECK(cosine_score(a, c) == doctest::Approx(0.0));
    CHECK(cosine_score(d, b) == doctest::Approx(cosine_score(a, b)));
    std::vector<float> zero{0, 0, 0};
    CHECK_THROWS_AS(cosine_score(a, zero), std::invalid_argument);
}

TEST_CASE("EER of perfectly separated scores is zero") {
    ScoreSet s{{true, 0.9}, {true, 0.8}, {false, 0.2}, {false, 0.1}};
    EerResult r = compute_eer(s);
    CHECK(r.eer == doctest::Approx(0.0));
}

TEST_CASE("EER of identical scores with mixed labels is one half") {
    ScoreSet s{{true, 0.5}, {false, 0.5}, {true, 0.5}, {false, 0.5}};
    CHECK(compute_eer(s).eer == doctest::Approx(0.5));
}

TEST_CASE("six-trial case from the sweep oracle") {
    std::vector<std::pair<bool, double>> trials{{true, 0.9},  {true, 0.8},  {true, 0.3},
                                                {false, 0.7}, {false, 0.2}, {false, 0.1}};
    CHECK(compute_eer(to_scoreset(trials)).eer == doctest::Approx(1.0 / 3.0));
    CHECK(oracles::sweep_eer(trials) == doctest::Approx(1.0 / 3.0));

    DcfParams p;
    const double oracle = oracles::sweep_min_dcf(trials, p.p_target, p.c_miss, p.c_fa);
    CHECK(compute_min_dcf(to_scoreset(trials), p).min_dcf == doctest::Approx(oracle));
}

TEST_CASE("single-class score sets are rejected") {
    ScoreSet targets_only{{true, 0.5}, {true, 0.6}};
    CHECK_THROWS_AS(compute_eer(targets_only), std::invalid_argument);
    CHECK_THROWS_AS(compute_min_dcf(targets_only), std::invalid_argument);
}

TEST_CASE("minDCF of separated scores is zero; reversed scores pin it at one") {
    ScoreSet good{{true, 0.9}, {false, 0.1}};
    CHECK(compute_min_dcf(good).min_dcf == doctest::Approx(0.0));

    // nontargets above targets: nothing beats the trivial reject-all rule
    ScoreSet bad{{true, 0.1}, {true, 0.2}, {false, 0.8}, {false, 0.9}};
    CHECK(compute_min_dcf(bad).min_dcf == doctest::Approx(1.0));
}

TEST_CASE("implementation agrees with the exhaustive sweep on random sets") {
    Rng rng(101);
    for (int round = 0; round < 120; ++round) {
        const std::size_t n = 2 + rng.integer(199);
        auto trials = random_trials(rng, n);
        ScoreSet s = to_scoreset(trials);
        CHECK(compute_eer(s).eer == doctest::Approx(oracles::sweep_eer(trials)).epsilon(1e-12));
        DcfParams p;
        CHECK(compute_min_dcf(s, p).min_dcf ==
              doctest::Approx(oracles::sweep_min_dcf(trials, p.p_target, p.c_miss, p.c_fa))
                  .epsilon(1e-12));
    }
}

TEST_CASE("EER is invariant under strictly monotone score transforms") {
    Rng rng(103);
    for (int round = 0; round < 30; ++round) {
        auto trials = random_trials(rng, 40);
        ScoreSet plain = to_scoreset(trials);
        ScoreSet warped = plain;
        for (auto& t : warped) t.score = std::tanh(2.0 * t.score) * 3.0 + 1.0;
        CHECK(compute_eer(plain).eer ==
              doctest::Approx(compute_eer(warped).eer).epsilon(1e-9));
    }
}

TEST_CASE("minDCF is never above one after normalization") {
    Rng rng(107);
    for (int round = 0; round < 50; ++round) {
        auto trials = random_trials(rng, 30);
        CHECK(compute_min_dcf(to_scoreset(trials)).min_dcf <= 1.0 + 1e-12);
    }
}

TEST_CASE("dcf parameter validation") {
    ScoreSet s{{true, 0.9}, {false, 0.1}};
    DcfParams bad;
    bad.p_target = 0.0;
    CHECK_THROWS_AS(compute_min_dcf(s, bad), std::invalid_argument);
    bad.p_target = 0.5;
    bad.c_miss = 0.0;
    CHECK_THROWS_AS(compute_min_dcf(s, bad), std::invalid_argument);
}

TEST_CASE("eer threshold sits between the classes for separated scores") {
    ScoreSet s{{true, 0.9}, {true, 0.7}, {false, 0.3}, {false, 0.1}};
    EerResult r = compute_eer(s);
    CHECK(r.threshold > 0.3);
    CHECK(r.threshold < 0.7);
}
