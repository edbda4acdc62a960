#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "svkit/gradcam.hpp"

using namespace svkit;

namespace {

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "svkit_gradcam_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

ModelVariant tiny_variant(std::size_t classes) {
    ModelVariant v = ModelVariant::parse("resnet", classes);
    v.stage_channels = {4, 6, 8};
    v.embedding_dim = 8;
    v.attn_heads = 2;
    v.attn_dim = 4;
    return v;
}

}  // namespace

TEST_CASE("map shape matches the traced layer and upsamples to the input plane") {
    SpeakerModel model(ModelVariant::parse("resnet", 16), 3);
    Rng rng(4);
    Tensor features = oracles::random_tensor<float>({80, 200}, rng);
    ActivationMap map = grad_cam(model, features, "block3");
    CHECK(map.rows == 9);
    CHECK(map.cols == 25);
    CHECK(map.up_rows == 80);
    CHECK(map.up_cols == 200);
    CHECK(map.values.size() == 9 * 25);
    CHECK(map.upsampled.size() == 80 * 200);
    for (float v : map.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    float peak = 0;
    for (float v : map.values) peak = std::max(peak, v);
    CHECK(peak == doctest::Approx(1.0f));
}

TEST_CASE("zero classifier column for the target gives an identically zero map") {
    SpeakerModelT<double> model(tiny_variant(5), 7);
    // zero the target class column
    auto w = model.classifier_weight().data();
    for (std::size_t d = 0; d < model.variant().embedding_dim; ++d) w[d * 5 + 2] = 0.0;
    Rng rng(8);
    TensorT<double> features = oracles::random_tensor<double>({80, 40}, rng);
    ActivationMapT<double> map = grad_cam(model, features, "block3", 2);
    CHECK(map.peak == doctest::Approx(0.0));
    for (double v : map.values) CHECK(v == 0.0);
    for (double v : map.upsampled) CHECK(v == 0.0);
}

TEST_CASE("scaling the target's classifier column scales the peak, not the map") {
    SpeakerModelT<double> model(tiny_variant(4), 9);
    Rng rng(10);
    TensorT<double> features = oracles::random_tensor<double>({80, 32}, rng);
    ActivationMapT<double> before = grad_cam(model, features, "block3", 1);
    REQUIRE(before.peak > 0.0);

    auto w = model.classifier_weight().data();
    for (std::size_t d = 0; d < model.variant().embedding_dim; ++d) w[d * 4 + 1] *= 2.0;
    ActivationMapT<double> after = grad_cam(model, features, "block3", 1);
    CHECK(after.peak == doctest::Approx(2.0 * before.peak).epsilon(1e-9));
    for (std::size_t i = 0; i < before.values.size(); ++i)
        CHECK(after.values[i] == doctest::Approx(before.values[i]).epsilon(1e-9));
}

TEST_CASE("channel weights equal finite-difference channel-bump sensitivity") {
    SpeakerModelT<double> model(tiny_variant(4), 11);
    Rng rng(12);
    TensorT<double> features = oracles::random_tensor<double>({80, 24}, rng);
    const std::size_t target = 1;
    auto weights = grad_cam_channel_weights(model, features, "block3", target);
    REQUIRE(weights.size() == 8);

    ActivationTrace<double> trace;
    model.forward_logits(features, false, &trace);
    TensorT<double> act;
    for (auto& [name, tensor] : trace)
        if (name == "block3") act = tensor;
    REQUIRE(act.defined());

    // oracle: bump one channel uniformly by +/- h, rerun the network tail
    // from the bumped activation, and difference the target logit
    const double h = 1e-4;
    const std::size_t plane = act.dim(1) * act.dim(2);
    auto tail_logit = [&](std::size_t channel, double bump) {
        TensorT<double> shifted = act.clone();
        for (std::size_t p = 0; p < plane; ++p)
            shifted.data()[channel * plane + p] += bump;
        TensorT<double> logits = model.forward_logits_from("block3", shifted);
        return logits.at({0, target});
    };
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double fd =
            (tail_logit(c, h) - tail_logit(c, -h)) / (2.0 * h * static_cast<double>(plane));
        CHECK(std::fabs(weights[c] - fd) < 1e-3);
    }
}

TEST_CASE("pgm export quantizes with round-half-up") {
    ActivationMap map;
    map.rows = 2;
    map.cols = 2;
    map.values = {0.0f, 1.0f, 0.5f, 0.25f};
    map.peak = 1.0f;
    map.up_rows = 2;
    map.up_cols = 2;
    map.upsampled = map.values;
    const std::string path = temp_path("map.pgm");
    export_pgm(map, path, false);

    std::ifstream is(path, std::ios::binary);
    std::string header;
    std::getline(is, header);
    CHECK(header == "P5");
    std::string dims, maxval;
    std::getline(is, dims);
    std::getline(is, maxval);
    CHECK(dims == "2 2");
    CHECK(maxval == "255");
    unsigned char px[4];
    is.read(reinterpret_cast<char*>(px), 4);
    CHECK(px[0] == 0);
    CHECK(px[1] == 255);
    CHECK(px[2] == 128);  // 127.5 rounds half up
    CHECK(px[3] == 64);   // 63.75 rounds to 64
}

TEST_CASE("all-zero maps export as all-zero pixels") {
    ActivationMap map;
    map.rows = 1;
    map.cols = 3;
    map.values = {0.0f, 0.0f, 0.0f};
    map.up_rows = 1;
    map.up_cols = 3;
    map.upsampled = map.values;
    const std::string path = temp_path("zero.pgm");
    export_pgm(map, path, false);
    std::ifstream is(path, std::ios::binary);
    std::string line;
    for (int i = 0; i < 3; ++i) std::getline(is, line);
    unsigned char px[3];
    is.read(reinterpret_cast<char*>(px), 3);
    for (unsigned char p : px) CHECK(p == 0);
}

TEST_CASE("csv export round-trips within 1e-6") {
    ActivationMap map;
    map.rows = 2;
    map.cols = 3;
    map.values = {0.123456f, 0.9999f, 0.0f, 0.5f, 0.333333f, 0.00001f};
    map.up_rows = 2;
    map.up_cols = 3;
    map.upsampled = map.values;
    const std::string path = temp_path("map.csv");
    export_csv(map, path, false);

    std::ifstream is(path);
    std::vector<float> back;
    std::string line;
    while (std::getline(is, line)) {
        std::size_t pos = 0;
        while (pos < line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            back.push_back(std::stof(line.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    REQUIRE(back.size() == map.values.size());
    for (std::size_t i = 0; i < back.size(); ++i)
        CHECK(std::fabs(back[i] - map.values[i]) < 1e-6f);
}

TEST_CASE("unknown layers and out-of-range classes are rejected") {
    SpeakerModel model(tiny_variant(4), 13);
    Rng rng(14);
    Tensor features = oracles::random_tensor<float>({80, 16}, rng);
    CHECK_THROWS_AS(grad_cam(model, features, "block9"), DataError);
    CHECK_THROWS_AS(grad_cam(model, features, "block3", 4), std::invalid_argument);
    ActivationMap map = grad_cam(model, features, "block3");
    CHECK_THROWS_AS(export_pgm(map, "/nonexistent-dir/x.pgm"), DataError);
}

TEST_CASE("default target is the argmax class") {
    SpeakerModel model(tiny_variant(6), 15);
    Rng rng(16);
    Tensor features = oracles::random_tensor<float>({80, 20}, rng);
    Tensor logits = model.forward_logits(features, false);
    std::size_t best = 0;
    for (std::size_t k = 1; k < 6; ++k)
        if (logits.at({0, k}) > logits.at({0, best})) best = k;
    ActivationMap map = grad_cam(model, features, "block3", -1);
    CHECK(map.target_class == best);
}
