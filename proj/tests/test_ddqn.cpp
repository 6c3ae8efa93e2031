#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "rissec/ddqn.hpp"

using namespace rissec;

namespace {

Transition tagged(double r) { return {{r}, 0, r, {r}, false}; }

/// Single-input linear network with the given per-action weights and zero bias.
QNetwork linear(std::vector<double> w) {
    QNetwork net({1, static_cast<int>(w.size())});
    net.layers()[0].weights = std::move(w);
    return net;
}

TrainConfig small_config() {
    TrainConfig c;
    c.batch_size = 1;
    c.buffer_capacity = 100;
    c.target_sync = 3;
    c.learning_rate = 1e-2;
    return c;
}

}  // namespace

TEST_CASE("replay buffer is a FIFO of fixed capacity") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) buf.push(tagged(i));
    CHECK(buf.size() == 3);
    CHECK(buf.capacity() == 3);
    CHECK(buf[0].reward == 2);
    CHECK(buf[1].reward == 3);
    CHECK(buf[2].reward == 4);
    CHECK_THROWS(ReplayBuffer(0));
}

TEST_CASE("replay sampling") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) buf.push(tagged(i));
    std::mt19937_64 rng(1);

    SUBCASE("a full-size sample is a permutation") {
        const auto s = buf.sample(10, rng);
        std::vector<double> seen;
        for (const auto* t : s) seen.push_back(t->reward);
        std::sort(seen.begin(), seen.end());
        for (int i = 0; i < 10; ++i) CHECK(seen[i] == i);
    }
    SUBCASE("no duplicates within a draw and uniform inclusion") {
        std::vector<int> counts(10, 0);
        const int trials = 30000;
        for (int t = 0; t < trials; ++t) {
            const auto s = buf.sample(3, rng);
            CHECK(s[0] != s[1]);
            CHECK(s[0] != s[2]);
            CHECK(s[1] != s[2]);
            for (const auto* p : s) ++counts[static_cast<int>(p->reward)];
        }
        const double expected = trials * 3 / 10.0;
        double chi2 = 0;
        for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
        CHECK(chi2 < 27.88);  // chi-square, 9 dof, p = 0.001
    }
    SUBCASE("asking for more than is stored throws") {
        ReplayBuffer small(10);
        small.push(tagged(0));
        CHECK_THROWS_AS(small.sample(2, rng), std::invalid_argument);
    }
}

TEST_CASE("argmax ties go to the lowest index") {
    CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
    CHECK(argmax(std::vector<double>{5}) == 0);
    CHECK(argmax(std::vector<double>{0, 0, 0}) == 0);
    CHECK_THROWS(argmax(std::vector<double>{}));
}

TEST_CASE("bootstrap targets") {
    const auto eval = linear({1.0, 0.0});
    const auto target = linear({2.0, 5.0});
    Transition t{{1.0}, 0, 0.5, {1.0}, false};

    SUBCASE("zero discount gives the reward") {
        CHECK(ddqn_target(t, eval, target, 0.0) == 0.5);
        CHECK(dqn_target(t, target, 0.0) == 0.5);
    }
    SUBCASE("decoupled selection and evaluation") {
        // eval prefers action 0, target prefers action 1
        CHECK(ddqn_target(t, eval, target, 0.9) == doctest::Approx(0.5 + 0.9 * 2.0));
        CHECK(dqn_target(t, target, 0.9) == doctest::Approx(0.5 + 0.9 * 5.0));
    }
    SUBCASE("identical networks give identical targets") {
        std::mt19937_64 rng(2);
        const auto net = QNetwork::initialized({4, 6, 3}, rng);
        for (int i = 0; i < 50; ++i) {
            Transition u{{}, 0, 0.1 * i, {}, false};
            for (int j = 0; j < 4; ++j) u.next_state.push_back(std::normal_distribution<double>()(rng));
            CHECK(ddqn_target(u, net, net, 0.9) == dqn_target(u, net, 0.9));
        }
    }
    SUBCASE("terminal transitions do not bootstrap") {
        t.terminal = true;
        CHECK(ddqn_target(t, eval, target, 0.9) == 0.5);
        CHECK(dqn_target(t, target, 0.9) == 0.5);
    }
}

TEST_CASE("epsilon-greedy selection") {
    std::mt19937_64 rng(3);
    const auto net = linear({0.1, 0.7, 0.7, -1.0, 0.2});
    const std::vector<double> s{1.0};

    SUBCASE("epsilon 0 is greedy with the low-index tie rule") {
        for (int i = 0; i < 100; ++i) CHECK(select_action(net, s, 0.0, rng) == 1);
    }
    SUBCASE("epsilon 1 is uniform") {
        std::vector<int> counts(5, 0);
        const int trials = 50000;
        for (int i = 0; i < trials; ++i) ++counts[select_action(net, s, 1.0, rng)];
        double chi2 = 0;
        for (int c : counts) chi2 += (c - trials / 5.0) * (c - trials / 5.0) / (trials / 5.0);
        CHECK(chi2 < 18.47);  // 4 dof, p = 0.001
    }
    SUBCASE("epsilon outside [0, 1] is rejected") {
        CHECK_THROWS(select_action(net, s, -0.1, rng));
        CHECK_THROWS(select_action(net, s, 1.5, rng));
    }
}

TEST_CASE("target sync happens every target_sync updates") {
    auto cfg = small_config();
    DqnLearner agent({1, 2}, cfg, TargetKind::ddqn, 11, 12);
    const auto initial = agent.network();
    CHECK(agent.target_network() == initial);
    CHECK_FALSE(agent.update().has_value());
    agent.remember({{1.0}, 1, 1.0, {1.0}, false});
    for (int u = 1; u <= 6; ++u) {
        REQUIRE(agent.update().has_value());
        CHECK(agent.updates() == u);
        if (u % 3 == 0) {
            CHECK(agent.target_network() == agent.network());
        } else {
            CHECK(agent.target_network() != agent.network());
        }
        if (u < 3) CHECK(agent.target_network() == initial);
    }
    CHECK_THROWS(agent.remember({{1.0}, 2, 0.0, {1.0}, false}));
}

TEST_CASE("learner is deterministic for fixed seeds") {
    auto cfg = small_config();
    cfg.batch_size = 4;
    auto run = [&] {
        DqnLearner agent({2, 8, 3}, cfg, TargetKind::ddqn, 5, 6);
        for (int i = 0; i < 40; ++i) {
            const std::vector<double> s{0.1 * (i % 7), -0.2 * (i % 3)};
            const int a = agent.act(s, 0.5);
            agent.remember({s, a, 0.3 * a, s, i % 5 == 0});
            agent.update();
        }
        return agent.network();
    };
    CHECK(run() == run());
}

TEST_CASE("three-step chain converges to dynamic-programming values") {
    // states s0 -> s1 -> s2 -> end; action 0 pays 1, action 1 pays 0, both advance
    const double gamma = 0.5;
    const double want[3][2] = {{1.75, 0.75}, {1.5, 0.5}, {1.0, 0.0}};
    for (auto kind : {TargetKind::ddqn, TargetKind::dqn}) {
        TrainConfig cfg;
        cfg.discount = gamma;
        cfg.batch_size = 6;
        cfg.buffer_capacity = 6;
        cfg.target_sync = 10;
        cfg.learning_rate = 3e-3;
        DqnLearner agent({3, 2}, cfg, kind, 21, 22);
        auto one_hot = [](int j) {
            std::vector<double> v(3, 0.0);
            if (j < 3) v[j] = 1.0;
            return v;
        };
        for (int j = 0; j < 3; ++j)
            for (int a = 0; a < 2; ++a) agent.remember({one_hot(j), a, a == 0 ? 1.0 : 0.0, one_hot(j + 1), j == 2});
        for (int u = 0; u < 20000; ++u) agent.update();
        for (int j = 0; j < 3; ++j) {
            const auto q = agent.network().forward(one_hot(j));
            for (int a = 0; a < 2; ++a) CHECK(q[a] == doctest::Approx(want[j][a]).epsilon(0.02));
            CHECK(agent.greedy(one_hot(j)) == 0);
        }
    }
}