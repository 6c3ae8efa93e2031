#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "rissec/common.hpp"
#include "rissec/qnetwork.hpp"

using namespace rissec;

namespace {

oracle::Mlp to_oracle(const QNetwork& net) {
    oracle::Mlp m;
    for (const auto& L : net.layers()) {
        std::vector<std::vector<double>> w(L.outputs, std::vector<double>(L.inputs));
        for (int r = 0; r < L.outputs; ++r)
            for (int c = 0; c < L.inputs; ++c) w[r][c] = L.weights[r * L.inputs + c];
        m.w.push_back(w);
        m.b.push_back(L.bias);
    }
    return m;
}

std::vector<double> random_state(std::mt19937_64& rng, int n) {
    std::vector<double> s(n);
    for (auto& x : s) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    return s;
}

}  // namespace

TEST_CASE("forward examples") {
    SUBCASE("zero network outputs zeros") {
        const QNetwork net({3, 5, 2});
        CHECK(net.forward(std::vector<double>{1, 2, 3}) == std::vector<double>{0, 0});
    }
    SUBCASE("identity output layer passes the state through") {
        QNetwork net({3, 3});
        auto& L = net.layers()[0];
        for (int i = 0; i < 3; ++i) L.weights[i * 3 + i] = 1.0;
        const std::vector<double> s{-1.5, 0.25, 7};
        CHECK(net.forward(s) == s);
    }
    SUBCASE("random 4-8-3 network matches the matrix-multiply oracle") {
        std::mt19937_64 rng(1);
        const auto net = QNetwork::initialized({4, 8, 3}, rng);
        const auto m = to_oracle(net);
        for (int t = 0; t < 20; ++t) {
            const auto s = random_state(rng, 4);
            const auto got = net.forward(s);
            const auto want = m.forward(s);
            for (int a = 0; a < 3; ++a) CHECK(got[a] == doctest::Approx(want[a]).epsilon(1e-12));
        }
    }
    SUBCASE("wide layers (parallel path) match the oracle") {
        std::mt19937_64 rng(2);
        const auto net = QNetwork::initialized({300, 400, 5}, rng);
        const auto s = random_state(rng, 300);
        const auto got = net.forward(s);
        const auto want = to_oracle(net).forward(s);
        for (int a = 0; a < 5; ++a) CHECK(got[a] == doctest::Approx(want[a]).epsilon(1e-12));
    }
    SUBCASE("dimension mismatch") {
        const QNetwork net({3, 2});
        CHECK_THROWS(net.forward(std::vector<double>{1, 2}));
    }
}

TEST_CASE("initialization range and shapes") {
    std::mt19937_64 rng(3);
    const auto net = QNetwork::initialized({16, 9, 4}, rng);
    CHECK(net.dims() == std::vector<int>{16, 9, 4});
    CHECK(net.parameter_count() == 16 * 9 + 9 + 9 * 4 + 4);
    for (const auto& L : net.layers()) {
        const double bound = 1.0 / std::sqrt(L.inputs);
        for (double w : L.weights) CHECK(std::abs(w) <= bound);
        for (double b : L.bias) CHECK(std::abs(b) <= bound);
    }
    CHECK(net.finite());
    CHECK_THROWS(QNetwork(std::vector<int>{4}));
}

TEST_CASE("loss is zero when targets equal predictions") {
    std::mt19937_64 rng(4);
    const auto net = QNetwork::initialized({5, 7, 3}, rng);
    std::vector<std::vector<double>> states;
    std::vector<TrainingSample> batch;
    for (int t = 0; t < 4; ++t) states.push_back(random_state(rng, 5));
    for (int t = 0; t < 4; ++t) batch.push_back({states[t], t % 3, net.forward(states[t])[t % 3]});
    auto g = Gradients::zeros_like(net);
    CHECK(compute_gradients(net, batch, g) == 0.0);
    CHECK(g.norm() == 0.0);
}

TEST_CASE("single-parameter network: gradient is 2 (q - t) dq/dw") {
    QNetwork net({1, 1});
    net.layers()[0].weights[0] = 0.7;
    const std::vector<double> s{2.0};
    const TrainingSample sample{s, 0, 3.0};
    auto g = Gradients::zeros_like(net);
    const double loss = compute_gradients(net, std::span(&sample, 1), g);
    CHECK(loss == doctest::Approx((1.4 - 3.0) * (1.4 - 3.0)));
    CHECK(g.weights[0][0] == doctest::Approx(2 * (1.4 - 3.0) * 2.0));
    CHECK(g.bias[0][0] == doctest::Approx(2 * (1.4 - 3.0)));
}

TEST_CASE("backprop matches central finite differences on 6-12-8-4") {
    std::mt19937_64 rng(5);
    auto net = QNetwork::initialized({6, 12, 8, 4}, rng);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const auto s = random_state(rng, 6);
        const TrainingSample sample{s, t % 4, std::uniform_real_distribution<double>(-2, 2)(rng)};
        auto g = Gradients::zeros_like(net);
        compute_gradients(net, std::span(&sample, 1), g);
        auto loss_at = [&] {
            auto tmp = Gradients::zeros_like(net);
            return compute_gradients(net, std::span(&sample, 1), tmp);
        };
        const double h = 1e-6;
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            auto check_param = [&](double& p, double analytic) {
                const double keep = p;
                p = keep + h;
                const double up = loss_at();
                p = keep - h;
                const double down = loss_at();
                p = keep;
                const double numeric = (up - down) / (2 * h);
                const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                worst = std::max(worst, std::abs(analytic - numeric) / denom);
            };
            auto& L = net.layers()[l];
            for (std::size_t j = 0; j < L.weights.size(); ++j) check_param(L.weights[j], g.weights[l][j]);
            for (std::size_t j = 0; j < L.bias.size(); ++j) check_param(L.bias[j], g.bias[l][j]);
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("RMSProp step matches the update rule") {
    std::mt19937_64 rng(6);
    auto net = QNetwork::initialized({3, 4, 2}, rng);
    const auto before = net;
    RmsProp opt(net, 0.01, 0.9, 1e-8);
    const auto s = random_state(rng, 3);
    const TrainingSample sample{s, 1, 5.0};
    auto g = Gradients::zeros_like(net);
    compute_gradients(net, std::span(&sample, 1), g);
    backward_step(net, opt, std::span(&sample, 1));
    for (std::size_t l = 0; l < net.layers().size(); ++l)
        for (std::size_t j = 0; j < g.weights[l].size(); ++j) {
            const double gj = g.weights[l][j];
            const double cache = 0.1 * gj * gj;
            CHECK(opt.cache().weights[l][j] == doctest::Approx(cache));
            CHECK(net.layers()[l].weights[j] ==
                  doctest::Approx(before.layers()[l].weights[j] - 0.01 * gj / (std::sqrt(cache) + 1e-8)));
        }
}

TEST_CASE("zero learning rate leaves the parameters bit-identical") {
    std::mt19937_64 rng(7);
    auto net = QNetwork::initialized({4, 6, 3}, rng);
    const auto before = net;
    RmsProp opt(net, 0.0, 0.9, 1e-8);
    for (int t = 0; t < 10; ++t) {
        const auto s = random_state(rng, 4);
        const TrainingSample sample{s, t % 3, 1.0};
        backward_step(net, opt, std::span(&sample, 1));
    }
    CHECK(net == before);
}

TEST_CASE("regression toy: 2 states, 2 actions, constant targets") {
    std::mt19937_64 rng(8);
    auto net = QNetwork::initialized({2, 8, 2}, rng);
    RmsProp opt(net, 1e-2, 0.9, 1e-8);
    const std::vector<double> s0{1, 0}, s1{0, 1};
    const double targets[2][2] = {{1.0, -0.5}, {0.25, 2.0}};
    double loss = 1.0;
    for (int step = 0; step < 10000 && loss >= 1e-3; ++step) {
        std::vector<TrainingSample> batch;
        for (int a = 0; a < 2; ++a) {
            batch.push_back({s0, a, targets[0][a]});
            batch.push_back({s1, a, targets[1][a]});
        }
        loss = backward_step(net, opt, batch);
    }
    CHECK(loss < 1e-3);
}

TEST_CASE("non-finite loss aborts the step") {
    QNetwork net({1, 1});
    RmsProp opt(net, 0.1, 0.9, 1e-8);
    const std::vector<double> s{1.0};
    const TrainingSample sample{s, 0, std::numeric_limits<double>::infinity()};
    const auto before = net;
    CHECK_THROWS_AS(backward_step(net, opt, std::span(&sample, 1)), NumericError);
    CHECK(net == before);
}

TEST_CASE("gradient clipping caps the global norm") {
    std::mt19937_64 rng(9);
    auto net = QNetwork::initialized({3, 5, 2}, rng);
    auto clipped = net;
    RmsProp a(net, 0.0, 0.9, 1e-8), b(clipped, 0.0, 0.9, 1e-8);
    const auto s = random_state(rng, 3);
    const TrainingSample sample{s, 0, 100.0};
    backward_step(net, a, std::span(&sample, 1));
    backward_step(clipped, b, std::span(&sample, 1), 0.5);
    // cache = 0.1 g^2, so the cache norm tracks the squared gradient
    double ca = 0, cb = 0;
    for (std::size_t l = 0; l < a.cache().weights.size(); ++l)
        for (std::size_t j = 0; j < a.cache().weights[l].size(); ++j) {
            ca += a.cache().weights[l][j];
            cb += b.cache().weights[l][j];
        }
    for (std::size_t l = 0; l < a.cache().bias.size(); ++l)
        for (std::size_t j = 0; j < a.cache().bias[l].size(); ++j) {
            ca += a.cache().bias[l][j];
            cb += b.cache().bias[l][j];
        }
    CHECK(std::sqrt(cb / 0.1) == doctest::Approx(0.5));
    CHECK(ca > cb);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    std::mt19937_64 rng(10);
    auto net = QNetwork::initialized({5, 7, 3}, rng);
    RmsProp opt(net, 0.003, 0.95, 1e-7);
    const auto s = random_state(rng, 5);
    const TrainingSample sample{s, 2, 1.0};
    backward_step(net, opt, std::span(&sample, 1));

    std::stringstream plain, with_opt;
    write_checkpoint(plain, net);
    write_checkpoint(with_opt, net, &opt);
    const auto a = read_checkpoint(plain);
    CHECK(a.net == net);
    CHECK_FALSE(a.optimizer.has_value());
    const auto b = read_checkpoint(with_opt);
    CHECK(b.net == net);
    REQUIRE(b.optimizer.has_value());
    CHECK(*b.optimizer == opt);

    const std::string bytes = with_opt.str();
    CHECK(bytes.substr(0, 4) == "RSQN");

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS(read_checkpoint(truncated));
    std::stringstream wrong_magic("XXXX" + bytes.substr(4));
    CHECK_THROWS(read_checkpoint(wrong_magic));

    const auto path = std::filesystem::temp_directory_path() / "rissec_test_ckpt.bin";
    save_checkpoint(path, net, &opt);
    CHECK(load_checkpoint(path).net == net);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), PrerequisiteError);
}