#include <catch_amalgamated.hpp>

#include "support.hpp"

using namespace csigwgan;
using Catch::Approx;

TEST_CASE("forward pass examples", "[nn]")
{
    Mlp id;
    id.layers.push_back({Matrix{{1.0, 0.0}, {0.0, 1.0}}, Matrix(1, 2, 0.0), Activation::identity});
    std::vector<double> in{0.3, -2.0};
    CHECK(id.forward(in) == in);

    Mlp r;
    r.layers.push_back({Matrix{{-1.0}}, Matrix(1, 1, 0.0), Activation::relu});
    std::vector<double> two{2.0};
    CHECK(r.forward(two) == std::vector<double>{0.0});

    Mlp t;
    t.layers.push_back({Matrix(3, 2, 0.7), Matrix(1, 3, 0.0), Activation::tanh});
    std::vector<double> zero{0.0, 0.0};
    CHECK(t.forward(zero) == std::vector<double>{0.0, 0.0, 0.0});

    std::vector<double> wrong{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(t.forward(wrong), std::invalid_argument);
}

TEST_CASE("tape forward agrees with the plain forward pass", "[nn]")
{
    auto rng = substream(51, {});
    auto net = init_mlp({3, 7, 2}, {Activation::tanh, Activation::identity}, rng);
    for (auto& l : net.layers) {
        for (auto& b : l.bias.values()) b = standard_normal(rng);
    }
    Matrix batch(4, 3, testing_support::uniform_vector(12, rng));
    ad::Tape tape;
    auto out = tape.value(forward(bind(tape, net, false), tape.constant(batch)));
    for (std::size_t r = 0; r < 4; ++r) {
        auto plain = net.forward(batch.row_span(r));
        CHECK(testing_support::max_abs_diff(out.row_span(r), plain) < 1e-14);
    }
}

TEST_CASE("init_mlp", "[nn]")
{
    auto rng = substream(52, {});
    auto big = init_mlp({1000, 1000}, {Activation::relu}, rng);
    double sq = 0.0;
    for (double w : big.layers[0].weight.values()) sq += w * w;
    const double var = sq / double(big.layers[0].weight.size());
    CHECK(std::abs(var / (2.0 / 1000.0) - 1.0) < 0.2);
    for (double b : big.layers[0].bias.values()) CHECK(b == 0.0);

    auto glorot = init_mlp({300, 100}, {Activation::tanh}, rng);
    sq = 0.0;
    for (double w : glorot.layers[0].weight.values()) sq += w * w;
    CHECK(std::abs(sq / double(glorot.layers[0].weight.size()) / (2.0 / 400.0) - 1.0) < 0.2);

    auto r1 = substream(53, {});
    auto r2 = substream(53, {});
    CHECK(init_mlp({2, 5, 1}, {Activation::relu, Activation::identity}, r1) ==
          init_mlp({2, 5, 1}, {Activation::relu, Activation::identity}, r2));

    CHECK_THROWS_AS(init_mlp(std::span<const std::size_t>{}, std::span<const Activation>{}, rng), std::invalid_argument);
    CHECK_THROWS_AS(init_mlp({3}, {}, rng), std::invalid_argument);
    CHECK_THROWS_AS(init_mlp({3, 0}, {Activation::relu}, rng), std::invalid_argument);
    CHECK_THROWS_AS(init_mlp({3, 2}, {Activation::relu, Activation::relu}, rng), std::invalid_argument);
}

TEST_CASE("Adam", "[nn]")
{
    Matrix p(1, 2, 0.5);
    Matrix* params[] = {&p};
    AdamState st;
    std::vector<Matrix> zero{Matrix(1, 2, 0.0)};
    adam_step(params, zero, st);
    CHECK(p == Matrix(1, 2, 0.5));

    // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    Matrix q(1, 1, 0.0);
    Matrix* qp[] = {&q};
    AdamState st2;
    std::vector<Matrix> one{Matrix(1, 1, 1.0)};
    adam_step(qp, one, st2);
    CHECK(q(0, 0) == Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));

    Matrix r(1, 1, 0.0);
    Matrix* rp[] = {&r};
    AdamState st3;
    std::vector<Matrix> neg{Matrix(1, 1, -0.3)};
    for (int i = 0; i < 100; ++i) adam_step(rp, neg, st3);
    CHECK(r(0, 0) > 0.09);

    std::vector<Matrix> wrong{Matrix(2, 1, 0.0)};
    CHECK_THROWS_AS(adam_step(rp, wrong, st3), std::invalid_argument);
    std::vector<Matrix> two{Matrix(1, 1), Matrix(1, 1)};
    CHECK_THROWS_AS(adam_step(rp, two, st3), std::invalid_argument);
}

TEST_CASE("SGD", "[nn]")
{
    Matrix p{{1.0, 2.0}};
    Matrix* params[] = {&p};
    std::vector<Matrix> g{Matrix{{0.5, -1.0}}};
    sgd_step(params, g, 0.1);
    CHECK(p(0, 0) == Approx(0.95));
    CHECK(p(0, 1) == Approx(2.1));
}

TEST_CASE("Mlp JSON round trip", "[nn][io]")
{
    auto rng = substream(54, {});
    auto net = init_mlp({2, 4, 3}, {Activation::relu, Activation::tanh}, rng);
    auto back = mlp_from_json(nlohmann::json::parse(to_json(net).dump()));
    CHECK(back == net);
    auto j = to_json(net);
    j["layers"][1]["in"] = 5;
    CHECK_THROWS(mlp_from_json(j));
}

TEST_CASE("activation names", "[nn]")
{
    for (auto a : {Activation::identity, Activation::relu, Activation::tanh}) CHECK(activation_from_string(to_string(a)) == a);
    CHECK_THROWS_AS(activation_from_string("sigmoid"), std::invalid_argument);
}
