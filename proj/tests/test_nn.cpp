// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fhedge/nn.hpp"

using namespace fhedge;
using namespace fhedge::nn;
using ring::u64;

namespace {

ModelSpec tiny_model(ActivationKind act = ActivationKind::none) {
    ModelSpec m;
    m.input_dim = 2;
    m.class_count = 2;
    DenseLayer l1;
    l1.in_dim = 2;
    l1.out_dim = 3;
    l1.weights = {0.5, -0.25, 1.0, 0.75, -0.5, 0.125};
    l1.bias = {0.1, -0.2, 0.0};
    l1.activation = act;
    DenseLayer l2;
    l2.in_dim = 3;
    l2.out_dim = 2;
    l2.weights = {0.25, 0.5, -0.75, 1.0, -0.125, 0.375};
    l2.bias = {0.05, -0.05};
    l2.activation = ActivationKind::none;
    m.layers = {l1, l2};
    m.name = "tiny";
    return m;
}

ModelSpec random_model(std::size_t in, std::size_t hid, std::size_t out,
                       ActivationKind act, ring::Rng& rng) {
    auto rnd = [&] { return double(rng() % 2001) / 1000.0 - 1.0; };
    ModelSpec m;
    m.input_dim = in;
    m.class_count = out;
    DenseLayer l1{in, hid, {}, {}, act};
    for (std::size_t i = 0; i < in * hid; ++i) l1.weights.push_back(rnd() * 0.5);
    for (std::size_t i = 0; i < hid; ++i) l1.bias.push_back(rnd() * 0.25);
    DenseLayer l2{hid, out, {}, {}, ActivationKind::none};
    for (std::size_t i = 0; i < hid * out; ++i) l2.weights.push_back(rnd() * 0.5);
    for (std::size_t i = 0; i < out; ++i) l2.bias.push_back(rnd() * 0.25);
    m.layers = {l1, l2};
    m.name = "rand";
    return m;
}

Dataset two_blob_dataset(std::size_t per_class, u64 seed) {
    ring::Rng rng(seed);
    auto noise = [&] { return double(rng() % 1000) / 5000.0; };
    Dataset d;
    d.feature_dim = 2;
    for (std::size_t i = 0; i < per_class; ++i) {
        d.features.push_back(0.2 + noise());
        d.features.push_back(0.2 + noise());
        d.labels.push_back(0);
        d.features.push_back(0.8 + noise());
        d.features.push_back(0.8 + noise());
        d.labels.push_back(1);
    }
    return d;
}

}  // namespace

TEST_CASE("forward: identity layer returns input") {
    ModelSpec m;
    m.input_dim = 3;
    m.class_count = 3;
    DenseLayer l{3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}, ActivationKind::none};
    m.layers = {l};
    std::array<double, 3> x{0.3, -0.7, 2.5};
    auto y = forward(m, x);
    CHECK(y[0] == doctest::Approx(0.3));
    CHECK(y[1] == doctest::Approx(-0.7));
    CHECK(y[2] == doctest::Approx(2.5));
}

TEST_CASE("activations: relu and the modified square") {
    CHECK(apply_activation(ActivationKind::relu, -1.0) == 0.0);
    CHECK(apply_activation(ActivationKind::relu, 2.0) == 2.0);
    CHECK(square_plus_two(1.0) == 3.0);
    CHECK(square_plus_two(-1.0) == -1.0);
    // x^2 + 2x >= -1 everywhere, equality at the minimum x = -1
    for (double x = -4.0; x <= 4.0; x += 0.01)
        CHECK(square_plus_two(x) >= -1.0);
}

TEST_CASE("forward is linear when all activations are none") {
    ring::Rng rng(3);
    ModelSpec m = random_model(4, 5, 3, ActivationKind::none, rng);
    // strip biases so superposition holds exactly
    for (auto& l : m.layers) std::fill(l.bias.begin(), l.bias.end(), 0.0);
    std::vector<double> a{0.1, -0.2, 0.3, 0.4}, b{-0.5, 0.25, 0.1, -0.1}, s(4);
    for (int i = 0; i < 4; ++i) s[i] = a[i] + b[i];
    auto fa = forward(m, a), fb = forward(m, b), fs = forward(m, s);
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(fs[k] == doctest::Approx(fa[k] + fb[k]).epsilon(1e-9));
}

TEST_CASE("training separates a linearly separable toy set, all activations") {
    Dataset d = two_blob_dataset(60, 9);
    for (ActivationKind act :
         {ActivationKind::relu, ActivationKind::square_plus_two, ActivationKind::none}) {
        TrainConfig cfg;
        cfg.epochs = 50;
        cfg.learning_rate = 0.5;
        cfg.seed = 4;
        auto res = train_sgd(d, Architecture{{2, 6, 2}, act}, cfg);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < d.size(); ++i)
            hit += argmax(forward(res.model, d.row(i))) == std::size_t(d.labels[i]);
        double acc = double(hit) / double(d.size());
        INFO("activation ", to_string(act), " accuracy ", acc);
        CHECK(acc >= 0.99);
        CHECK(res.val_accuracy.size() == 50);
    }
}

TEST_CASE("training is deterministic under a fixed seed") {
    Dataset d = two_blob_dataset(40, 10);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.seed = 123;
    auto r1 = train_sgd(d, Architecture{{2, 4, 2}, ActivationKind::relu}, cfg);
    auto r2 = train_sgd(d, Architecture{{2, 4, 2}, ActivationKind::relu}, cfg);
    CHECK(r1.model.layers[0].weights == r2.model.layers[0].weights);
    CHECK(r1.model.layers[1].bias == r2.model.layers[1].bias);
    CHECK(r1.val_accuracy == r2.val_accuracy);
}

TEST_CASE("digits: relu and square2x reach comparable validation accuracy") {
    auto path = std::filesystem::path(__FILE__).parent_path().parent_path() / "data" /
                "digits8x8.csv";
    Dataset d = load_csv(path.string(), 16.0);
    REQUIRE(d.feature_dim == 64);
    REQUIRE(d.size() == 1797);

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.learning_rate = 0.2;
    cfg.seed = 7;
    auto relu = train_sgd(d, Architecture{{64, 32, 10}, ActivationKind::relu}, cfg);
    auto sq = train_sgd(d, Architecture{{64, 32, 10}, ActivationKind::square_plus_two}, cfg);
    double racc = relu.val_accuracy.back();
    double sacc = sq.val_accuracy.back();
    INFO("relu ", racc, " square2x ", sacc);
    CHECK(racc > 0.9);
    CHECK(sacc > 0.9);
    CHECK(std::abs(racc - sacc) <= 0.03);
}

TEST_CASE("scale plan: bias rides at the z-power, squares double the power") {
    ModelSpec m = tiny_model(ActivationKind::square_plus_two);
    ScalePlan plan = make_scale_plan(m);
    CHECK(plan[0].input_power == 1);
    CHECK(plan[0].bias_power == 2);
    CHECK(plan[0].output_power == 4);  // square doubles the z-power
    CHECK(plan[1].input_power == 4);
    CHECK(plan[1].bias_power == 5);
    CHECK(plan[1].output_power == 5);

    ModelSpec lin = tiny_model(ActivationKind::none);
    ScalePlan plan2 = make_scale_plan(lin);
    CHECK(plan2[1].bias_power == 3);
    CHECK(plan2[1].output_power == 3);
}

TEST_CASE("quantize: direct values and zero weights") {
    ModelSpec m = tiny_model();
    FixedPointCodec codec{1024, ring::find_ntt_prime(40, 2 * 1024, u64(1) << 40)};
    QuantizedModel qm = quantize(m, codec);
    CHECK(qm.layers[0].weights[0] == 512);  // 0.5 * 1024 at power 1
    CHECK(qm.layers[0].bias[0] == i64(0.1 * 1024 * 1024 + 0.5));

    ModelSpec z = tiny_model();
    for (auto& l : z.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    QuantizedModel qz = quantize(z, codec);
    for (const auto& l : qz.layers) {
        for (i64 w : l.weights) CHECK(w == 0);
        for (i64 b : l.bias) CHECK(b == 0);
    }
}

TEST_CASE("oracle matches float forward within 1% at Delta=2^10") {
    ring::Rng rng(21);
    // power-5 logits at Delta=2^10 sit near 2^56; t must clear that
    u64 t = ring::find_ntt_prime(58, 2 * 1024, u64(1) << 58);
    FixedPointCodec codec{1024, t};
    int agree = 0, total = 0;
    for (int trial = 0; trial < 30; ++trial) {
        ModelSpec m = random_model(6, 5, 4, ActivationKind::square_plus_two, rng);
        QuantizedModel qm = quantize(m, codec);
        std::vector<double> x(6);
        for (auto& v : x) v = double(rng() % 2001) / 1000.0 - 1.0;
        auto logits_f = forward(m, x);
        auto slots = quantize_input(qm, x, t);
        auto logits_i = decode_logits(qm, oracle_forward_int(qm, slots, t), t);
        double scale = 0;
        for (double v : logits_f) scale = std::max(scale, std::abs(v));
        for (std::size_t k = 0; k < logits_f.size(); ++k)
            CHECK(std::abs(logits_i[k] - logits_f[k]) <= 0.01 * std::max(scale, 1.0));
        agree += argmax(logits_i) == argmax(logits_f);
        ++total;
    }
    CHECK(agree == total);
}

TEST_CASE("oracle is exact when every quantity is a multiple of 1/Delta") {
    u64 t = ring::find_ntt_prime(40, 2 * 1024, u64(1) << 40);
    FixedPointCodec codec{16, t};
    ModelSpec m = tiny_model(ActivationKind::none);
    for (auto& l : m.layers)  // snap everything to /16 grid
        for (auto* vec : {&l.weights, &l.bias})
            for (auto& v : *vec) v = std::round(v * 16.0) / 16.0;
    QuantizedModel qm = quantize(m, codec);
    std::vector<double> x{0.5, -0.25};
    auto logits_f = forward(m, x);
    auto slots = quantize_input(qm, x, t);
    auto logits_i = decode_logits(qm, oracle_forward_int(qm, slots, t), t);
    for (std::size_t k = 0; k < logits_f.size(); ++k)
        CHECK(logits_i[k] == doctest::Approx(logits_f[k]).epsilon(1e-12));
}

TEST_CASE("oracle relative error halves when Delta doubles") {
    ring::Rng rng(31);
    u64 t = ring::find_ntt_prime(50, 2 * 1024, u64(1) << 50);
    double prev_err = -1;
    ModelSpec m = random_model(8, 6, 3, ActivationKind::none, rng);
    std::vector<double> x(8);
    for (auto& v : x) v = double(rng() % 2001) / 1000.0 - 1.0;
    auto want = forward(m, x);
    for (u64 delta : {u64(64), u64(128), u64(256), u64(512)}) {
        QuantizedModel qm = quantize(m, FixedPointCodec{delta, t});
        auto got = decode_logits(qm, oracle_forward_int(qm, quantize_input(qm, x, t), t), t);
        double err = 0;
        for (std::size_t k = 0; k < want.size(); ++k)
            err = std::max(err, std::abs(got[k] - want[k]));
        if (prev_err >= 0) CHECK(err <= prev_err * 0.75 + 1e-9);
        prev_err = err;
    }
}

TEST_CASE("required_plain_bits bounds the actual pipeline magnitudes") {
    ring::Rng rng(41);
    u64 t_big = ring::find_ntt_prime(58, 2 * 1024, u64(1) << 58);
    for (int trial = 0; trial < 20; ++trial) {
        ModelSpec m = random_model(5, 4, 3, ActivationKind::square_plus_two, rng);
        QuantizedModel qm = quantize(m, FixedPointCodec{16, t_big});
        int bits = required_plain_bits(qm, 1.0);
        CHECK(bits < 58);  // sanity for this size
        // run the oracle with a t far above the bound: values must stay
        // below 2^(bits-1) in centered form, i.e. no wraparound happened
        std::vector<double> x(5);
        for (auto& v : x) v = double(rng() % 2001) / 1000.0 - 1.0;
        auto logits = oracle_forward_int(qm, quantize_input(qm, x, t_big), t_big);
        for (u64 v : logits) {
            i64 c = encode::from_slot(v, t_big);
            CHECK(std::abs((double)c) <= std::pow(2.0, bits));
        }
    }
}

TEST_CASE("model save/load roundtrip and error paths") {
    ModelSpec m = tiny_model(ActivationKind::square_plus_two);
    std::string path = "/tmp/fhedge_test_model.json";
    save_model(m, path);
    ModelSpec r = load_model(path);
    CHECK(r.layers.size() == m.layers.size());
    CHECK(r.layers[0].weights == m.layers[0].weights);
    CHECK(r.layers[1].bias == m.layers[1].bias);
    CHECK(r.layers[0].activation == m.layers[0].activation);
    CHECK(r.input_dim == m.input_dim);

    // truncated file names the problem
    {
        std::ofstream f(path, std::ios::trunc);
        f << "{\"format\": \"fhedge-model\", \"version\": 1";
    }
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("malformed"),
                         std::runtime_error);

    // a conv layer tag is rejected as unsupported
    {
        std::ofstream f(path, std::ios::trunc);
        f << R"({"format":"fhedge-model","version":1,"name":"x","input_dim":4,
             "class_count":2,"delta":1024,
             "layers":[{"type":"conv2d","rows":2,"cols":4,"weights":[],"bias":[],
             "activation":"relu"}]})";
    }
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("unsupported layer"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("csv loader: labels last, ragged rows rejected") {
    std::string path = "/tmp/fhedge_test_data.csv";
    {
        std::ofstream f(path, std::ios::trunc);
        f << "1,2,0\n3,4,1\n";
    }
    Dataset d = load_csv(path, 2.0);
    CHECK(d.feature_dim == 2);
    CHECK(d.size() == 2);
    CHECK(d.row(0)[0] == doctest::Approx(0.5));
    CHECK(d.labels[1] == 1);
    {
        std::ofstream f(path, std::ios::trunc);
        f << "1,2,0\n3,1\n";
    }
    CHECK_THROWS(load_csv(path));
    std::remove(path.c_str());
}
