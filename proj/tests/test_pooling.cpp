#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "svkit/pooling.hpp"

using namespace svkit;

namespace {

template <class S>
AttentivePoolingT<S> make_pooling(std::size_t dim, std::size_t heads, std::size_t attn,
                                  std::uint64_t seed) {
    Rng rng(seed);
    return AttentivePoolingT<S>(dim, heads, attn, rng);
}

}  // namespace

TEST_CASE("single frame passes through unchanged") {
    auto pool = make_pooling<float>(8, 4, 5, 1);
    Rng rng(2);
    Tensor frame = oracles::random_tensor<float>({1, 8}, rng);
    Tensor out = pool.forward(frame);
    REQUIRE(out.shape() == Shape{1, 8});
    for (std::size_t d = 0; d < 8; ++d)
        CHECK(out.at({0, d}) == doctest::Approx(frame.at({0, d})).epsilon(1e-6));
}

TEST_CASE("constant frames are a fixed point for any weights") {
    auto pool = make_pooling<float>(6, 16, 4, 3);
    Tensor frames = Tensor::zeros({7, 6});
    for (std::size_t t = 0; t < 7; ++t)
        for (std::size_t d = 0; d < 6; ++d) frames.data()[t * 6 + d] = 0.5f + 0.25f * d;
    Tensor out = pool.forward(frames);
    for (std::size_t d = 0; d < 6; ++d)
        CHECK(out.at({0, d}) == doctest::Approx(0.5f + 0.25f * d).epsilon(1e-5));
}

TEST_CASE("three-frame case matches the direct per-head formula") {
    auto pool = make_pooling<double>(5, 3, 4, 7);
    Rng rng(8);
    TensorT<double> frames = oracles::random_tensor<double>({3, 5}, rng, -1, 1);
    TensorT<double> out = pool.forward(frames);

    std::vector<double> expect(5, 0.0);
    for (std::size_t h = 0; h < 3; ++h) {
        auto w = pool.projections()[h].data();
        auto v = pool.score_vectors()[h].data();
        double scores[3];
        for (std::size_t t = 0; t < 3; ++t) {
            double e = 0;
            for (std::size_t a = 0; a < 4; ++a) {
                double p = 0;
                for (std::size_t d = 0; d < 5; ++d) p += frames.at({t, d}) * w[d * 4 + a];
                e += std::tanh(p) * v[a];
            }
            scores[t] = e;
        }
        double m = std::max({scores[0], scores[1], scores[2]});
        double z = 0;
        for (double& s : scores) {
            s = std::exp(s - m);
            z += s;
        }
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t d = 0; d < 5; ++d)
                expect[d] += (scores[t] / z) * frames.at({t, d}) / 3.0;
    }
    for (std::size_t d = 0; d < 5; ++d)
        CHECK(out.at({0, d}) == doctest::Approx(expect[d]).epsilon(1e-10));
}

TEST_CASE("attention weights are a distribution on 100 random inputs") {
    auto pool = make_pooling<float>(8, 16, 6, 11);
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t t_len = 1 + rng.integer(12);
        Tensor frames = oracles::random_tensor<float>({t_len, 8}, rng, -2, 2);
        auto weights = pool.attention_weights(frames);
        REQUIRE(weights.size() == 16);
        for (const auto& alpha : weights) {
            double sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
            CHECK(std::fabs(sum - 1.0) < 1e-6);
            for (float a : alpha) CHECK(a >= 0.0f);
        }
    }
}

TEST_CASE("pooled output is invariant to frame permutations") {
    auto pool = make_pooling<float>(8, 16, 6, 13);
    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor frames = oracles::random_tensor<float>({6, 8}, rng, -1, 1);
        // rotate rows by a random amount
        const std::size_t shift = rng.integer(6);
        Tensor rotated = Tensor::zeros({6, 8});
        for (std::size_t t = 0; t < 6; ++t)
            for (std::size_t d = 0; d < 8; ++d)
                rotated.data()[((t + shift) % 6) * 8 + d] = frames.at({t, d});
        Tensor a = pool.forward(frames);
        Tensor b = pool.forward(rotated);
        for (std::size_t d = 0; d < 8; ++d)
            CHECK(a.at({0, d}) == doctest::Approx(b.at({0, d})).epsilon(1e-5));
    }
}

TEST_CASE("pooled output stays in the per-coordinate convex hull") {
    auto pool = make_pooling<float>(4, 16, 8, 15);
    Rng rng(16);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor frames = oracles::random_tensor<float>({5, 4}, rng, -3, 3);
        Tensor out = pool.forward(frames);
        for (std::size_t d = 0; d < 4; ++d) {
            float lo = frames.at({0, d}), hi = lo;
            for (std::size_t t = 1; t < 5; ++t) {
                lo = std::min(lo, frames.at({t, d}));
                hi = std::max(hi, frames.at({t, d}));
            }
            CHECK(out.at({0, d}) >= lo - 1e-5f);
            CHECK(out.at({0, d}) <= hi + 1e-5f);
        }
    }
}

TEST_CASE("gradients reach every head at initialization") {
    auto pool = make_pooling<float>(6, 16, 4, 17);
    Rng rng(18);
    Tensor frames = oracles::random_tensor<float>({4, 6}, rng, -1, 1, true);
    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor loss = sum(pool.forward(frames));
        tape.backward(loss);
    }
    for (std::size_t h = 0; h < 16; ++h) {
        REQUIRE(pool.projections()[h].has_grad());
        REQUIRE(pool.score_vectors()[h].has_grad());
        float pw = 0, pv = 0;
        for (float g : pool.projections()[h].grad()) pw = std::max(pw, std::fabs(g));
        for (float g : pool.score_vectors()[h].grad()) pv = std::max(pv, std::fabs(g));
        CHECK(pw > 0.0f);
        CHECK(pv > 0.0f);
    }
}

TEST_CASE("pooling gradients pass finite differences") {
    Rng rng(19);
    AttentivePoolingT<double> pool(4, 2, 3, rng);
    Rng drng(20);
    TensorT<double> frames = oracles::random_tensor<double>({3, 4}, drng, -1, 1, true);
    std::vector<TensorT<double>> params{frames};
    for (auto& w : pool.projections()) params.push_back(w);
    for (auto& v : pool.score_vectors()) params.push_back(v);
    auto forward = [&] { return sum(pool.forward(frames)); };
    CHECK(oracles::check_gradients<double>(params, forward) < 1e-4);
}

TEST_CASE("attention entropy: uniform, single-frame, and saturated cases") {
    auto pool = make_pooling<float>(4, 3, 4, 23);
    // constant frames give every frame the same score, so uniform alphas
    Tensor constant = Tensor::full({4, 4}, 0.7f);
    for (float e : pool.attention_entropy(constant))
        CHECK(e == doctest::Approx(std::log(4.0)).epsilon(1e-5));

    Tensor single = Tensor::full({1, 4}, 0.3f);
    for (float e : pool.attention_entropy(single)) CHECK(e == doctest::Approx(0.0));

    // blowing up the score vectors saturates the softmax to one frame
    for (auto& v : pool.score_vectors())
        for (auto& x : v.data()) x *= 1e5f;
    Rng rng(24);
    Tensor frames = oracles::random_tensor<float>({5, 4}, rng, -2, 2);
    for (float e : pool.attention_entropy(frames)) CHECK(e < 1e-3f);
}

TEST_CASE("pooling rejects mismatched frame width") {
    auto pool = make_pooling<float>(8, 2, 4, 25);
    CHECK_THROWS_AS(pool.forward(Tensor::zeros({3, 7})), std::invalid_argument);
}
