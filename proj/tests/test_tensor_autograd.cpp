#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "svkit/ops.hpp"

using namespace svkit;

TEST_CASE("tensor creation") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.size() == 6);
    for (float v : z.data()) CHECK(v == 0.0f);

    Tensor s = Tensor::full({1}, 5.0f);
    CHECK(s.scalar() == doctest::Approx(5.0f));

    Tensor feat = Tensor::zeros({80, 200, 1});
    CHECK(feat.shape() == Shape{80, 200, 1});
    CHECK(feat.size() == 16000);

    CHECK_THROWS_AS(Tensor::zeros({2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::zeros({}), std::invalid_argument);
}

TEST_CASE("he_uniform stays within the fan-in bound and is seeded") {
    Rng rng_a(42), rng_b(42);
    Tensor a = Tensor::he_uniform({16, 9}, 9, rng_a);
    Tensor b = Tensor::he_uniform({16, 9}, 9, rng_b);
    const float bound = std::sqrt(6.0f / 9.0f);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.data()[i] == b.data()[i]);
        CHECK(std::fabs(a.data()[i]) <= bound);
    }
}

TEST_CASE("elementwise forward") {
    Tensor r = relu(Tensor::from_vector({3}, {-1.0f, 0.0f, 2.0f}));
    CHECK(r.data()[0] == 0.0f);
    CHECK(r.data()[1] == 0.0f);
    CHECK(r.data()[2] == 2.0f);

    Tensor s = add(Tensor::from_vector({2}, {1.0f, 2.0f}),
                   Tensor::from_vector({2}, {3.0f, 4.0f}));
    CHECK(s.data()[0] == 4.0f);
    CHECK(s.data()[1] == 6.0f);

    CHECK_THROWS_WITH_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})),
                         doctest::Contains("[2, 3]"), std::invalid_argument);
}

TEST_CASE("mul backward follows the product rule") {
    Tensor a = Tensor::from_vector({1}, {2.0f}, true);
    Tensor b = Tensor::from_vector({1}, {3.0f}, true);
    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor loss = sum(mul(a, b));
        tape.backward(loss);
    }
    CHECK(a.grad()[0] == doctest::Approx(3.0f));
    CHECK(b.grad()[0] == doctest::Approx(2.0f));
}

TEST_CASE("matmul") {
    Tensor eye = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from_vector({2, 2}, {5, 6, 7, 8});
    Tensor out = matmul(eye, m);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.data()[i] == m.data()[i]);

    Tensor e = Tensor::zeros({1, 128});
    Tensor w = Tensor::zeros({128, 5994});
    CHECK(matmul(e, w).shape() == Shape{1, 5994});

    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})),
                    std::invalid_argument);

    Rng rng(7);
    Tensor a = oracles::random_tensor<float>({3, 3}, rng);
    Tensor b = oracles::random_tensor<float>({3, 3}, rng);
    auto expect = oracles::naive_matmul<float>(
        {a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}, 3, 3, 3);
    Tensor got = matmul(a, b);
    for (std::size_t i = 0; i < 9; ++i)
        CHECK(got.data()[i] == doctest::Approx(expect[i]).epsilon(1e-6));
}

TEST_CASE("reductions") {
    Tensor m = Tensor::from_vector({2, 2}, {1, 3, 5, 7});
    Tensor row_means = mean(m, 1);
    CHECK(row_means.shape() == Shape{2});
    CHECK(row_means.data()[0] == doctest::Approx(2.0f));
    CHECK(row_means.data()[1] == doctest::Approx(6.0f));

    CHECK(sum(Tensor::zeros({4})).scalar() == 0.0f);
    CHECK_THROWS_AS(sum(Tensor::zeros({2, 2}), 2), std::invalid_argument);

    // mean over the temporal axis of an [80, T] feature matrix matches a
    // hand-rolled per-dimension average
    Rng rng(3);
    Tensor feat = oracles::random_tensor<float>({80, 11}, rng);
    Tensor mu = mean(feat, 1);
    for (std::size_t d = 0; d < 80; ++d) {
        float acc = 0.0f;
        for (std::size_t t = 0; t < 11; ++t) acc += feat.at({d, t});
        CHECK(mu.data()[d] == doctest::Approx(acc / 11.0f).epsilon(1e-5));
    }
}

TEST_CASE("backward basics") {
    Tensor x = Tensor::from_vector({3}, {1.0f, -2.0f, 0.5f}, true);
    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor loss = sum(x);
        tape.backward(loss);
    }
    for (float g : x.grad()) CHECK(g == 1.0f);

    Tensor y = Tensor::from_vector({2}, {-1.0f, 2.0f}, true);
    Tape tape2;
    {
        Tape::Scope scope(tape2);
        Tensor loss = sum(relu(y));
        tape2.backward(loss);
    }
    CHECK(y.grad()[0] == 0.0f);
    CHECK(y.grad()[1] == 1.0f);

    Tape tape3;
    {
        Tape::Scope scope(tape3);
        Tensor v = add(Tensor::zeros({3}, true), Tensor::zeros({3}));
        CHECK_THROWS_AS(tape3.backward(v), std::invalid_argument);
    }
}

TEST_CASE("backward requires the loss to be on the tape") {
    Tensor lone = Tensor::full({1}, 1.0f, true);
    Tape tape;
    CHECK_THROWS_AS(tape.backward(lone), std::invalid_argument);
}

TEST_CASE("gradient linearity: d(sum of losses) = sum of separate grads") {
    Rng rng(11);
    TensorT<double> x = oracles::random_tensor<double>({4}, rng, -1, 1, true);

    auto loss_a = [&] { return sum(mul(x, x)); };
    auto loss_b = [&] { return sum(tanh(x)); };

    TapeT<double> tape;
    {
        TapeT<double>::Scope scope(tape);
        TensorT<double> combined = add(loss_a(), loss_b());
        tape.backward(combined);
    }
    std::vector<double> combined_grad(x.grad().begin(), x.grad().end());

    x.zero_grad();
    TapeT<double> ta;
    {
        TapeT<double>::Scope scope(ta);
        TensorT<double> la = loss_a();
        ta.backward(la);
    }
    std::vector<double> grad_a(x.grad().begin(), x.grad().end());
    x.zero_grad();
    TapeT<double> tb;
    {
        TapeT<double>::Scope scope(tb);
        TensorT<double> lb = loss_b();
        tb.backward(lb);
    }
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(combined_grad[i] ==
              doctest::Approx(grad_a[i] + x.grad()[i]).epsilon(1e-12));
}

TEST_CASE("finite differences on a composed network") {
    for (std::uint64_t seed : {1, 2, 3}) {
        Rng rng(seed);
        TensorT<double> x = oracles::random_tensor<double>({3, 4}, rng, -1, 1, true);
        TensorT<double> w = oracles::random_tensor<double>({4, 2}, rng, -1, 1, true);
        auto forward = [&]() {
            TensorT<double> h = tanh(matmul(x, w));
            TensorT<double> e = svkit::exp(scale(h, -0.5));
            return mean(mul(e, e));
        };
        double err = oracles::check_gradients<double>({x, w}, forward);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("softmax rows sum to one and differentiate") {
    Rng rng(5);
    TensorT<double> z = oracles::random_tensor<double>({2, 5}, rng, -2, 2, true);
    TensorT<double> probs = softmax(z, 1);
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 5; ++c) s += probs.at({r, c});
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    TensorT<double> weights = oracles::random_tensor<double>({2, 5}, rng, -1, 1);
    auto forward = [&] { return sum(mul(softmax(z, 1), weights)); };
    CHECK(oracles::check_gradients<double>({z}, forward) < 1e-4);
}

TEST_CASE("shape ops differentiate") {
    Rng rng(9);
    TensorT<double> x = oracles::random_tensor<double>({2, 6}, rng, -1, 1, true);
    auto forward = [&] {
        TensorT<double> t = transpose(reshape(x, {3, 4}));
        return sum(mul(t, t));
    };
    CHECK(oracles::check_gradients<double>({x}, forward) < 1e-4);
}

TEST_CASE("channel slice/concat round-trip and gradients") {
    Rng rng(13);
    TensorT<double> x = oracles::random_tensor<double>({6, 2, 3}, rng, -1, 1, true);
    TensorT<double> lo = slice_channels(x, 0, 3);
    TensorT<double> hi = slice_channels(x, 3, 3);
    TensorT<double> back = concat_channels<double>({lo, hi});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back.data()[i] == x.data()[i]);

    auto forward = [&] {
        TensorT<double> a = slice_channels(x, 1, 2);
        TensorT<double> b = slice_channels(x, 3, 2);
        return sum(mul(a, b));
    };
    CHECK(oracles::check_gradients<double>({x}, forward) < 1e-4);
}

TEST_CASE("max reductions route gradients to the argmax") {
    TensorT<double> x = TensorT<double>::from_vector({2, 3}, {1, 5, 2, 7, 0, 3}, true);
    TapeT<double> tape;
    {
        TapeT<double>::Scope scope(tape);
        TensorT<double> m = sum(max(x, 1));
        tape.backward(m);
    }
    std::vector<double> expect{0, 1, 0, 1, 0, 0};
    for (std::size_t i = 0; i < 6; ++i) CHECK(x.grad()[i] == expect[i]);
}

TEST_CASE("forward determinism under a fixed seed") {
    auto run = [] {
        Rng rng(1234);
        Tensor a = oracles::random_tensor<float>({4, 4}, rng);
        Tensor b = oracles::random_tensor<float>({4, 4}, rng);
        return matmul(tanh(a), relu(b));
    };
    Tensor first = run();
    Tensor second = run();
    for (std::size_t i = 0; i < first.size(); ++i)
        CHECK(first.data()[i] == second.data()[i]);
}

TEST_CASE("batch stack/select round-trip with gradients") {
    Rng rng(21);
    TensorT<double> a = oracles::random_tensor<double>({2, 3, 4}, rng, -1, 1, true);
    TensorT<double> b = oracles::random_tensor<double>({2, 3, 4}, rng, -1, 1, true);
    TensorT<double> stacked = stack_batch<double>({a, b});
    CHECK(stacked.shape() == Shape{2, 2, 3, 4});
    TensorT<double> back = select_batch(stacked, 1);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(back.data()[i] == b.data()[i]);

    auto forward = [&] {
        TensorT<double> s = stack_batch<double>({a, b});
        return sum(mul(select_batch(s, 0), select_batch(s, 1)));
    };
    CHECK(oracles::check_gradients<double>({a, b}, forward) < 1e-4);
}
