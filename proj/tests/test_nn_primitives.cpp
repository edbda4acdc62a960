#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "svkit/batchnorm.hpp"
#include "svkit/conv2d.hpp"
#include "svkit/linear.hpp"
#include "svkit/ops.hpp"
#include "svkit/sgd.hpp"

using namespace svkit;

namespace {

template <class S>
Conv2dLayerT<S> make_conv(Conv2dOptions opts, std::uint64_t seed = 1) {
    Rng rng(seed);
    return Conv2dLayerT<S>(opts, rng);
}

}  // namespace

TEST_CASE("1x1 identity kernel passes the input through") {
    Conv2dOptions opts;
    opts.in_channels = 3;
    opts.out_channels = 3;
    opts.kernel = {1, 1};
    auto conv = make_conv<float>(opts);
    // identity weight: out c <- in c
    auto w = conv.weight().data();
    std::fill(w.begin(), w.end(), 0.0f);
    for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
    Rng rng(2);
    Tensor x = oracles::random_tensor<float>({3, 5, 7}, rng);
    Tensor y = conv.forward(x);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv1 reproduces the 80x200 -> 39x100 stage geometry") {
    Conv2dOptions opts;
    opts.in_channels = 1;
    opts.out_channels = 64;
    opts.kernel = {3, 3};
    opts.stride = {2, 2};
    opts.padding = {0, 1};
    auto conv = make_conv<float>(opts);
    Tensor x = Tensor::zeros({1, 80, 200});
    Tensor y = conv.forward(x);
    CHECK(y.shape() == Shape{64, 39, 100});
}

TEST_CASE("output extents follow floor((in+2p-k)/s)+1 down the frequency chain") {
    std::size_t f = 80;
    for (int stage = 0; stage < 5; ++stage) {
        f = conv_output_extent(f, 3, 2, 0);
    }
    CHECK(f == 1);
    CHECK(conv_output_extent(80, 3, 2, 0) == 39);
    CHECK(conv_output_extent(39, 3, 2, 0) == 19);
    CHECK(conv_output_extent(19, 3, 2, 0) == 9);
    CHECK(conv_output_extent(9, 3, 2, 0) == 4);
    CHECK(conv_output_extent(4, 3, 2, 0) == 1);
    CHECK_THROWS_AS(conv_output_extent(2, 3, 1, 0), std::invalid_argument);
}

TEST_CASE("conv matches the direct six-loop reference") {
    Rng rng(31);
    for (auto [stride, pad] : std::vector<std::pair<std::size_t, std::size_t>>{
             {1, 1}, {2, 1}, {2, 0}, {1, 0}}) {
        Conv2dOptions opts;
        opts.in_channels = 4;
        opts.out_channels = 6;
        opts.kernel = {3, 3};
        opts.stride = {stride, stride};
        opts.padding = {pad, pad};
        auto conv = make_conv<float>(opts, 100 + stride * 10 + pad);
        Tensor x = oracles::random_tensor<float>({4, 9, 11}, rng);
        Tensor y = conv.forward(x);
        auto expect = oracles::naive_conv2d<float>(
            {x.data().begin(), x.data().end()},
            {conv.weight().data().begin(), conv.weight().data().end()}, 4, 9, 11, 6, 3, 3,
            stride, stride, pad, pad, 1);
        REQUIRE(y.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(std::fabs(y.data()[i] - expect[i]) < 1e-5f);
    }
}

TEST_CASE("grouped conv equals independent per-slice convolutions") {
    Rng rng(41);
    for (std::size_t groups : {2ul, 4ul}) {
        Conv2dOptions opts;
        opts.in_channels = 8;
        opts.out_channels = 8;
        opts.kernel = {3, 3};
        opts.padding = {1, 1};
        opts.groups = groups;
        auto conv = make_conv<float>(opts, 50 + groups);
        Tensor x = oracles::random_tensor<float>({8, 6, 7}, rng);
        Tensor y = conv.forward(x);

        // oracle: split input channels, run each slice through a plain conv
        // with the matching weight slice, concatenate the outputs
        const std::size_t cin_g = 8 / groups, cout_g = 8 / groups;
        const std::size_t wslice = cout_g * cin_g * 9;
        for (std::size_t g = 0; g < groups; ++g) {
            std::vector<float> xs(cin_g * 6 * 7);
            for (std::size_t c = 0; c < cin_g; ++c)
                for (std::size_t i = 0; i < 42; ++i)
                    xs[c * 42 + i] = x.data()[(g * cin_g + c) * 42 + i];
            std::vector<float> ws(conv.weight().data().begin() + g * wslice,
                                  conv.weight().data().begin() + (g + 1) * wslice);
            auto ys = oracles::naive_conv2d<float>(xs, ws, cin_g, 6, 7, cout_g, 3, 3, 1, 1,
                                                   1, 1, 1);
            for (std::size_t c = 0; c < cout_g; ++c)
                for (std::size_t i = 0; i < 42; ++i)
                    CHECK(std::fabs(y.data()[(g * cout_g + c) * 42 + i] - ys[c * 42 + i]) <
                          1e-5f);
        }
    }
}

TEST_CASE("conv validates channels and extents") {
    Conv2dOptions opts;
    opts.in_channels = 4;
    opts.out_channels = 8;
    auto conv = make_conv<float>(opts);
    CHECK_THROWS_AS(conv.forward(Tensor::zeros({3, 9, 9})), std::invalid_argument);
    CHECK_THROWS_AS(conv.forward(Tensor::zeros({4, 2, 9})), std::invalid_argument);

    Conv2dOptions bad;
    bad.in_channels = 4;
    bad.out_channels = 6;
    bad.groups = 4;  // out_channels not divisible
    Rng rng(1);
    CHECK_THROWS_AS(Conv2dLayerT<float>(bad, rng), std::invalid_argument);
}

TEST_CASE("conv gradients pass finite differences, including groups and stride") {
    for (std::uint64_t seed : {1, 2}) {
        Rng rng(seed);
        Conv2dOptions opts;
        opts.in_channels = 4;
        opts.out_channels = 4;
        opts.kernel = {3, 3};
        opts.stride = {2, 1};
        opts.padding = {0, 1};
        opts.groups = 2;
        Rng lrng(seed + 70);
        Conv2dLayerT<double> conv(opts, lrng);
        TensorT<double> x = oracles::random_tensor<double>({4, 7, 6}, rng, -1, 1, true);
        TensorT<double> target = oracles::random_tensor<double>({4, 3, 6}, rng);
        auto forward = [&] {
            TensorT<double> d = sub(conv.forward(x), target);
            return mean(mul(d, d));
        };
        CHECK(oracles::check_gradients<double>({x, conv.weight()}, forward) < 1e-4);
    }
}

TEST_CASE("conv with bias differentiates") {
    Rng rng(77);
    Conv2dOptions opts;
    opts.in_channels = 2;
    opts.out_channels = 3;
    opts.kernel = {1, 1};
    opts.bias = true;
    Rng lrng(78);
    Conv2dLayerT<double> conv(opts, lrng);
    TensorT<double> x = oracles::random_tensor<double>({2, 4, 5}, rng, -1, 1, true);
    auto forward = [&] { return mean(mul(conv.forward(x), conv.forward(x))); };
    CHECK(oracles::check_gradients<double>({x, conv.weight(), conv.bias()}, forward) < 1e-4);
}

TEST_CASE("batchnorm training mode normalizes per channel") {
    BatchNormLayerT<float> bn(2);
    // batch with per-channel mean 5, variance 4
    std::vector<float> values;
    for (std::size_t c = 0; c < 2; ++c) {
        (void)c;
    }
    Tensor x = Tensor::zeros({4, 2, 1, 2});
    {
        Rng rng(5);
        auto xd = x.data();
        for (std::size_t i = 0; i < xd.size(); ++i)
            xd[i] = 5.0f + 2.0f * (i % 2 == 0 ? 1.0f : -1.0f);
    }
    Tensor y = bn.forward(x, true);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0, var = 0;
        std::size_t count = 0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t s = 0; s < 2; ++s) {
                mean += y.at({n, c, 0, s});
                ++count;
            }
        mean /= count;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t s = 0; s < 2; ++s) {
                double d = y.at({n, c, 0, s}) - mean;
                var += d * d;
            }
        var /= count;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batchnorm gain and bias shift the normalized output") {
    BatchNormLayerT<float> bn(1);
    bn.gain().data()[0] = 2.0f;
    bn.bias().data()[0] = 3.0f;
    // already zero-mean unit-var input
    Tensor x = Tensor::from_vector({4, 1, 1, 1}, {-1.0f, 1.0f, -1.0f, 1.0f});
    Tensor y = bn.forward(x, true);
    double mean = 0;
    for (std::size_t n = 0; n < 4; ++n) mean += y.at({n, 0, 0, 0});
    mean /= 4;
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-5));
    double var = 0;
    for (std::size_t n = 0; n < 4; ++n) {
        double d = y.at({n, 0, 0, 0}) - mean;
        var += d * d;
    }
    CHECK(std::sqrt(var / 4) == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("batchnorm inference is independent of batch composition") {
    BatchNormLayerT<float> bn(2);
    // freeze nontrivial running statistics
    bn.running_mean().data()[0] = 0.5f;
    bn.running_mean().data()[1] = -0.25f;
    bn.running_var().data()[0] = 2.0f;
    bn.running_var().data()[1] = 0.5f;

    Rng rng(8);
    Tensor shared = oracles::random_tensor<float>({2, 3, 3}, rng);
    Tensor other1 = oracles::random_tensor<float>({2, 3, 3}, rng);
    Tensor other2 = oracles::random_tensor<float>({2, 3, 3}, rng);

    Tensor batch_a = stack_batch<float>({shared, other1});
    Tensor batch_b = stack_batch<float>({shared, other2});
    Tensor ya = bn.forward(batch_a, false);
    Tensor yb = bn.forward(batch_b, false);
    const std::size_t stride = shared.size();
    for (std::size_t i = 0; i < stride; ++i) CHECK(ya.data()[i] == yb.data()[i]);
}

TEST_CASE("batchnorm updates running statistics with momentum") {
    BatchNormLayerT<float> bn(1, 1e-5f, 0.1f);
    Tensor x = Tensor::from_vector({2, 1, 1, 1}, {1.0f, 3.0f});  // mean 2, var 1
    bn.forward(x, true);
    CHECK(bn.running_mean().data()[0] == doctest::Approx(0.9f * 0.0f + 0.1f * 2.0f));
    CHECK(bn.running_var().data()[0] == doctest::Approx(0.9f * 1.0f + 0.1f * 1.0f));
}

TEST_CASE("batchnorm gradients pass finite differences in both modes") {
    for (bool training : {true, false}) {
        Rng rng(17);
        BatchNormLayerT<double> bn(3);
        bn.running_mean().data()[1] = 0.3;
        bn.running_var().data()[2] = 1.7;
        TensorT<double> x = oracles::random_tensor<double>({2, 3, 2, 3}, rng, -1, 1, true);
        TensorT<double> w = oracles::random_tensor<double>({2, 3, 2, 3}, rng);
        auto forward = [&] { return sum(mul(bn.forward(x, training), w)); };
        CHECK(oracles::check_gradients<double>({x, bn.gain(), bn.bias()}, forward) < 1e-4);
    }
}

TEST_CASE("batchnorm rejects channel mismatch") {
    BatchNormLayerT<float> bn(4);
    CHECK_THROWS_AS(bn.forward(Tensor::zeros({3, 2, 2}), true), std::invalid_argument);
}

TEST_CASE("softmax cross entropy hits ln(K) on uniform logits") {
    Tensor logits = Tensor::zeros({1, 5994});
    Tensor loss = softmax_cross_entropy(logits, {17});
    CHECK(loss.scalar() == doctest::Approx(std::log(5994.0)).epsilon(1e-5));

    Tensor confident = Tensor::zeros({1, 10});
    confident.data()[3] = 1000.0f;
    CHECK(softmax_cross_entropy(confident, {3}).scalar() == doctest::Approx(0.0).epsilon(1e-6));

    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({1, 4}), {4}),
                    std::invalid_argument);
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({1, 4}), {-1}),
                    std::invalid_argument);
}

TEST_CASE("softmax cross entropy matches the direct formula") {
    Rng rng(23);
    TensorT<double> logits = oracles::random_tensor<double>({3, 4}, rng, -2, 2, true);
    std::vector<int> labels{2, 0, 3};
    double expect = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        double z = 0;
        for (std::size_t j = 0; j < 4; ++j) z += std::exp(logits.at({i, j}));
        expect += -std::log(std::exp(logits.at({i, static_cast<std::size_t>(labels[i])})) / z);
    }
    expect /= 3;
    CHECK(softmax_cross_entropy(logits, labels).scalar() ==
          doctest::Approx(expect).epsilon(1e-10));

    auto forward = [&] { return softmax_cross_entropy(logits, labels); };
    CHECK(oracles::check_gradients<double>({logits}, forward) < 1e-4);
}

TEST_CASE("linear layer differentiates") {
    Rng rng(29);
    Rng lrng(30);
    LinearLayerT<double> lin(5, 3, true, lrng);
    TensorT<double> x = oracles::random_tensor<double>({4, 5}, rng, -1, 1, true);
    auto forward = [&] {
        TensorT<double> y = lin.forward(x);
        return mean(mul(y, y));
    };
    CHECK(oracles::check_gradients<double>({x, lin.weight(), lin.bias()}, forward) < 1e-4);
}

TEST_CASE("sgd step without momentum") {
    Tensor p = Tensor::from_vector({1}, {1.0f}, true);
    p.ensure_grad();
    p.grad()[0] = 2.0f;
    SgdOptimizer opt({p}, 0.1f);
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(0.8f));
}

TEST_CASE("sgd momentum unrolls as v = m*v + g") {
    Tensor p = Tensor::from_vector({1}, {0.0f}, true);
    SgdOptimizer opt({p}, 0.1f, 0.9f);
    p.ensure_grad();
    p.grad()[0] = 1.0f;
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(-0.1f));
    p.zero_grad();
    p.grad()[0] = 1.0f;
    opt.step();
    CHECK(p.data()[0] == doctest::Approx(-0.29f));
}

TEST_CASE("sgd reduces a convex quadratic") {
    TensorT<double> p = TensorT<double>::from_vector({2}, {3.0, -2.0}, true);
    auto loss_value = [&] {
        return p.data()[0] * p.data()[0] + 2.0 * p.data()[1] * p.data()[1];
    };
    const double before = loss_value();
    TapeT<double> tape;
    {
        TapeT<double>::Scope scope(tape);
        TensorT<double> l = sum(mul(p, mul(p, TensorT<double>::from_vector({2}, {1.0, 2.0}))));
        tape.backward(l);
    }
    SgdOptimizerT<double> opt({p}, 0.05);
    opt.step();
    CHECK(loss_value() < before);
}

TEST_CASE("sgd requires populated gradients") {
    Tensor p = Tensor::from_vector({2}, {1.0f, 2.0f}, true);
    SgdOptimizer opt({p}, 0.1f);
    CHECK_THROWS_AS(opt.step(), std::runtime_error);
}

TEST_CASE("sgd applies weight decay before the velocity update") {
    Tensor p = Tensor::from_vector({1}, {2.0f}, true);
    p.ensure_grad();
    p.grad()[0] = 0.0f;
    SgdOptimizer opt({p}, 0.1f, 0.0f, 0.5f);
    opt.step();
    // g_eff = 0 + 0.5*2 = 1; p = 2 - 0.1*1
    CHECK(p.data()[0] == doctest::Approx(1.9f));
}
