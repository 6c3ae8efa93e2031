#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rissec/agents.hpp"
#include "rissec/common.hpp"

using namespace rissec;

namespace {

SimulationConfig small_config() {
    SimulationConfig cfg;
    cfg.network.cellular_users = 2;
    cfg.network.d2d_pairs = 2;
    cfg.network.eavesdroppers = 1;
    cfg.ris.elements = 4;
    cfg.ris.phase_bits = 1;
    cfg.radio.power_levels = 2;
    cfg.secrecy.fading_draws = 8;
    cfg.secrecy.sinr_min_d2d_db = -10.0;
    cfg.secrecy.sinr_min_cu_db = -10.0;
    cfg.train.hidden_layers = {16};
    cfg.train.batch_size = 8;
    cfg.train.buffer_capacity = 500;
    cfg.train.epochs = 3;
    cfg.train.steps_per_epoch = 5;
    return cfg;
}

std::string csv_of(const std::vector<StepRecord>& log) {
    std::ostringstream out;
    write_metrics_csv(out, log);
    return out.str();
}

double max_abs_diff(const QNetwork& a, const QNetwork& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        for (std::size_t j = 0; j < a.layers()[l].weights.size(); ++j)
            worst = std::max(worst, std::abs(a.layers()[l].weights[j] - b.layers()[l].weights[j]));
        for (std::size_t j = 0; j < a.layers()[l].bias.size(); ++j)
            worst = std::max(worst, std::abs(a.layers()[l].bias[j] - b.layers()[l].bias[j]));
    }
    return worst;
}

}  // namespace

TEST_CASE("D2D action codec is a bijection") {
    for (auto [K, L] : {std::pair{4, 8}, std::pair{1, 1}, std::pair{2, 2}, std::pair{3, 5}}) {
        const D2DActionCodec codec(K, L);
        CHECK(codec.size() == K * L + 1);
        CHECK(codec.decode(0).idle);
        std::vector<int> seen(codec.size(), 0);
        for (int i = 0; i < codec.size(); ++i) {
            const auto a = codec.decode(i);
            CHECK(codec.encode(a) == i);
            if (!a.idle) {
                CHECK(a.rb >= 0);
                CHECK(a.rb < K);
                CHECK(a.level >= 0);
                CHECK(a.level < L);
            }
            ++seen[codec.encode(a)];
        }
        for (int c : seen) CHECK(c == 1);
        CHECK_THROWS_AS(codec.decode(codec.size()), std::out_of_range);
        CHECK_THROWS_AS(codec.decode(-1), std::out_of_range);
    }
    const D2DActionCodec codec(4, 8);
    CHECK(codec.decode(1) == D2DAction{false, 0, 0});
    CHECK(codec.decode(9) == D2DAction{false, 1, 0});
    CHECK(codec.decode(32) == D2DAction{false, 3, 7});
}

TEST_CASE("RIS action codec is a bijection") {
    const RisActionCodec codec(16, 8, 4);
    CHECK(codec.size() == 48);
    for (int i = 0; i < codec.size(); ++i) CHECK(codec.encode(codec.decode(i)) == i);
    CHECK(codec.decode(5) == RisAction{RisAction::Kind::set_location, 5, 0, 0});
    CHECK(codec.decode(16) == RisAction{RisAction::Kind::set_phase, 0, 0, 0});
    CHECK(codec.decode(47) == RisAction{RisAction::Kind::set_phase, 0, 7, 3});
    CHECK_THROWS_AS(codec.decode(48), std::out_of_range);

    SimulationConfig cfg;
    auto ris = RisConfiguration::zeros(cfg.ris);
    ris = codec.apply(ris, codec.decode(11));
    CHECK(ris.location_index == 11);
    ris = codec.apply(ris, codec.decode(16 + 2 * 4 + 3));
    CHECK(ris.phase_levels[2] == 3);
    const AllocationState alloc = AllocationState::idle(4, 4, 23.0);
    const auto s = observe_ris(alloc, ris, 16);
    CHECK(s.size() == 4 * 4 + 16 + 8);
    int ones = 0;
    for (int j = 0; j < 16; ++j) ones += s[16 + j] == 1.0;
    CHECK(ones == 1);
    CHECK(s[16 + 11] == 1.0);
    CHECK(s[32 + 2] == 1.0);
}

TEST_CASE("power levels span the configured range") {
    RadioParams r;
    CHECK(power_level_dbm(r, 0) == 0.0);
    CHECK(power_level_dbm(r, 7) == 24.0);
    CHECK(power_level_dbm(r, 1) == doctest::Approx(24.0 / 7));
    r.power_levels = 1;
    CHECK(power_level_dbm(r, 0) == 24.0);
    CHECK_THROWS(power_level_dbm(r, 1));
}

TEST_CASE("decoded actions never violate the structural constraints") {
    SimulationConfig cfg;
    const int K = 4, M = 4;
    const D2DActionCodec d2d(K, cfg.radio.power_levels);
    const RisActionCodec ris_codec(16, cfg.ris.elements, cfg.ris.phase_levels());
    std::mt19937_64 rng(17);
    auto ris = RisConfiguration::zeros(cfg.ris);
    for (int t = 0; t < 10000; ++t) {
        std::vector<D2DAction> actions(M);
        for (auto& a : actions) a = d2d.decode(std::uniform_int_distribution<int>(0, d2d.size() - 1)(rng));
        const auto alloc = assemble_allocation(actions, K, cfg.radio);
        bool ok = true;
        for (auto r : alloc.rho) ok = ok && (r == 0 || r == 1);
        for (int i = 0; i < M; ++i) {
            int used = 0;
            for (int k = 0; k < K; ++k) used += alloc.reuse(k, i);
            ok = ok && used <= 1 && alloc.d2d_power_dbm[i] <= cfg.radio.d2d_power_max_dbm;
        }
        const SecrecyReport empty{{}, {}, 0.0, std::vector<double>(K, 1e9), std::vector<double>(M, 1e9),
                                  std::vector<double>(K, 1e9), std::vector<double>(M, 1e9), {}};
        const auto flags = check_constraints(alloc, ris, empty, cfg, 16);
        ok = ok && flags.c1 && flags.c4 && flags.c5;

        ris = ris_codec.apply(ris, ris_codec.decode(std::uniform_int_distribution<int>(0, ris_codec.size() - 1)(rng)));
        ok = ok && ris.phases_valid() && ris.location_valid(16) && flags.c6 && flags.c7;
        REQUIRE(ok);
    }
}

TEST_CASE("rewards follow the constraint rule") {
    SecrecyReport rep;
    rep.ssc = 5.2;
    CHECK(d2d_reward(rep, 1.0) == 5.2);
    CHECK(d2d_reward(rep, 0.1) == doctest::Approx(0.52));
    CHECK(ris_reward(rep, 0.1) == doctest::Approx(0.52));
    rep.flags.c2 = false;
    CHECK(d2d_reward(rep, 1.0) == 0.0);
    CHECK(ris_reward(rep, 1.0) == 0.0);
    rep.flags.c2 = true;
    rep.flags.c6 = false;
    CHECK(d2d_reward(rep, 1.0) == 5.2);
    CHECK(ris_reward(rep, 1.0) == 0.0);
    rep.flags.c6 = true;
    rep.flags.c5 = false;
    CHECK(d2d_reward(rep, 1.0) == 0.0);
    CHECK(ris_reward(rep, 1.0) == 5.2);
}

TEST_CASE("a failed SINR floor always yields zero reward") {
    std::mt19937_64 rng(23);
    int failures = 0;
    for (int t = 0; t < 200; ++t) {
        auto cfg = small_config();
        cfg.network.cellular_users = 1 + t % 4;
        cfg.network.d2d_pairs = 1 + (t / 4) % 4;
        cfg.secrecy.sinr_min_d2d_db = std::uniform_real_distribution<double>(-20, 40)(rng);
        cfg.secrecy.sinr_min_cu_db = std::uniform_real_distribution<double>(-20, 40)(rng);
        const auto topo = generate_topology(cfg, t + 1);
        const auto ris = RisConfiguration::random(cfg.ris, 16, rng);
        const auto ch = realize_ensemble(topo, ris, cfg, t + 100);
        RandomAllocationPolicy policy(cfg, t);
        const auto report = evaluate(ch, policy.decide(ch), ris, cfg, 16);
        if (!report.flags.c2 || !report.flags.c3) {
            ++failures;
            CHECK(d2d_reward(report, 1.0) == 0.0);
            CHECK(ris_reward(report, 1.0) == 0.0);
        } else {
            CHECK(d2d_reward(report, 1.0) == report.ssc);
        }
    }
    CHECK(failures > 20);
}

TEST_CASE("D2D observation layout") {
    auto cfg = small_config();
    cfg.network.cellular_users = 4;
    cfg.radio.power_levels = 8;
    const auto topo = generate_topology(cfg, 5);
    const auto ch = realize_ensemble(topo, RisConfiguration::zeros(cfg.ris), cfg, 6);
    std::vector<D2DAction> prev{{false, 1, 3}, {true, 0, 0}};
    const auto alloc = assemble_allocation(prev, 4, cfg.radio);
    const auto z0 = observe_d2d(ch, alloc, 0, prev[0], cfg);
    const auto z1 = observe_d2d(ch, alloc, 1, prev[1], cfg);
    REQUIRE(z0.size() == 10);
    for (double v : z0) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(z0[8] == 0.5);
    CHECK(z0[9] == 0.5);
    CHECK(z1[8] == 0.0);
    CHECK(z1[9] == 0.0);
    // pair 0 transmits on RB 1, so pair 1 sees more interference there than with pair 0 idle
    const auto quiet = assemble_allocation(std::vector<D2DAction>(2), 4, cfg.radio);
    const auto z1q = observe_d2d(ch, quiet, 1, prev[1], cfg);
    CHECK(z1[4 + 1] >= z1q[4 + 1]);
    CHECK(z1[4 + 0] == z1q[4 + 0]);
}

TEST_CASE("metrics CSV") {
    std::vector<StepRecord> rows{{0, 0, 1, std::nullopt, 0.5, 5e5, 1.0, true}, {0, 1, 1, 0.25, 0.0, 0.0, 1.0, false}};
    const auto text = csv_of(rows);
    CHECK(text == "epoch,step,agent_id,loss,reward,ssc,epsilon,constraints_ok\n"
                  "0,0,1,nan,0.5,500000,1,1\n"
                  "0,1,1,0.25,0,0,1,0\n");
}

TEST_CASE("training is reproducible for fixed seeds") {
    const auto cfg = small_config();
    const auto topo = generate_topology(cfg, cfg.seeds.topology);
    const auto a = train_d2d(topo, cfg);
    const auto b = train_d2d(topo, cfg);
    CHECK(a.log.size() == 3 * 5 * 2);
    CHECK(csv_of(a.log) == csv_of(b.log));
    for (int i = 0; i < 2; ++i) CHECK(a.agents[i].network() == b.agents[i].network());

    FixedAllocationPolicy fixed(AllocationState::idle(2, 2, cfg.radio.cu_power_dbm));
    const auto r1 = train_ris(topo, fixed, cfg);
    const auto r2 = train_ris(topo, fixed, cfg);
    CHECK(r1.log.size() == 15);
    CHECK(csv_of(r1.log) == csv_of(r2.log));
    int visits = 0;
    for (const auto& l : r1.locations) visits += l.visits;
    CHECK(visits == 15);
}

TEST_CASE("zero learning rate leaves every network bit-identical") {
    auto cfg = small_config();
    cfg.train.learning_rate = 0.0;
    const auto topo = generate_topology(cfg, cfg.seeds.topology);
    const auto trained = train_d2d(topo, cfg);
    const std::vector<int> dims{6, 16, 5};
    for (int i = 0; i < 2; ++i) {
        std::mt19937_64 init(mix_seed(cfg.seeds.init, pair_seed_tag(topo, i)));
        CHECK(trained.agents[i].updates() > 0);
        CHECK(trained.agents[i].network() == QNetwork::initialized(dims, init));
    }
}

TEST_CASE("pinned full exploration matches the random baseline") {
    auto cfg = small_config();
    cfg.train.epsilon_start = 1.0;
    cfg.train.epsilon_min = 1.0;
    cfg.train.epochs = 300;
    cfg.train.steps_per_epoch = 4;
    cfg.train.reward_scale = 1e-6;
    cfg.train.refresh_fading = false;
    const auto topo = generate_topology(cfg, 9);
    const auto trained = train_d2d(topo, cfg);

    std::vector<double> train_means(cfg.train.epochs, 0.0);
    for (const auto& r : trained.log)
        if (r.agent_id == 0) train_means[r.epoch] += r.reward / cfg.train.steps_per_epoch;

    RandomAllocationPolicy random(cfg, 77);
    EvalOptions opt;
    opt.episodes = cfg.train.epochs;
    opt.seed = 78;
    opt.refresh_fading = false;
    const auto base = evaluate_allocation(random, topo, cfg, opt);

    auto stats = [](const std::vector<double>& v) {
        double m = 0, s = 0;
        for (double x : v) m += x;
        m /= v.size();
        for (double x : v) s += (x - m) * (x - m);
        return std::pair{m, s / (v.size() - 1)};
    };
    std::vector<double> base_means;
    for (const auto& e : base.episodes) base_means.push_back(e.reward);
    const auto [m1, v1] = stats(train_means);
    const auto [m2, v2] = stats(base_means);
    REQUIRE(m2 > 0.0);
    const double se = std::sqrt(v1 / train_means.size() + v2 / base_means.size());
    CHECK(std::abs(m1 - m2) < 4.0 * se);
}

TEST_CASE("single pair on one RB learns the better power level") {
    SimulationConfig cfg;
    cfg.network.cellular_users = 1;
    cfg.network.d2d_pairs = 1;
    cfg.network.eavesdroppers = 1;
    cfg.ris.elements = 2;
    cfg.ris.phase_bits = 1;
    cfg.ris.reflection = ReflectionMask::none;
    cfg.radio.power_levels = 2;
    cfg.secrecy.fading_draws = 8;
    cfg.secrecy.sinr_min_d2d_db = -30.0;
    cfg.secrecy.sinr_min_cu_db = -30.0;
    cfg.train.hidden_layers = {16};
    cfg.train.batch_size = 16;
    cfg.train.buffer_capacity = 2000;
    cfg.train.epochs = 150;
    cfg.train.steps_per_epoch = 10;
    cfg.train.discount = 0.5;
    cfg.train.learning_rate = 3e-3;
    cfg.train.epsilon_decay = 0.97;
    cfg.train.target_sync = 50;
    cfg.train.refresh_fading = false;
    const auto topo = generate_topology(cfg, 4);

    // enumerate the three actions directly
    const auto ris = RisConfiguration::zeros(cfg.ris);
    const auto ch = realize_ensemble(topo, ris, cfg, cfg.seeds.fading);
    const D2DActionCodec codec(1, 2);
    std::vector<double> value(codec.size());
    for (int a = 0; a < codec.size(); ++a) {
        const std::vector<D2DAction> act{codec.decode(a)};
        value[a] = d2d_reward(evaluate(ch, assemble_allocation(act, 1, cfg.radio), ris, cfg, 16), cfg.train.reward_scale);
    }
    const int best = argmax(value);
    auto sorted = value;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted[2] - sorted[1] > 0.05 * sorted[2]);

    const auto trained = train_d2d(topo, cfg);
    for (int prev = 0; prev < codec.size(); ++prev) {
        const std::vector<D2DAction> p{codec.decode(prev)};
        const auto z = observe_d2d(ch, assemble_allocation(p, 1, cfg.radio), 0, p[0], cfg);
        CHECK(trained.agents[0].greedy(z) == best);
    }
}

TEST_CASE("relabeling pairs permutes the training trace") {
    const auto cfg = small_config();
    const auto topo = generate_topology(cfg, cfg.seeds.topology);
    auto swapped = topo;
    std::swap(swapped.d2d_tx[0], swapped.d2d_tx[1]);
    std::swap(swapped.d2d_rx[0], swapped.d2d_rx[1]);
    const auto a = train_d2d(topo, cfg);
    const auto b = train_d2d(swapped, cfg);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t r = 0; r < a.log.size(); ++r) {
        const auto& x = a.log[r];
        const auto& y = b.log[r ^ 1];  // agent ids 0 and 1 trade places
        CHECK(x.agent_id == 1 - y.agent_id);
        CHECK(x.reward == doctest::Approx(y.reward).epsilon(1e-9));
        CHECK(x.ssc == doctest::Approx(y.ssc).epsilon(1e-9));
        CHECK(x.loss.has_value() == y.loss.has_value());
        if (x.loss && y.loss) CHECK(*x.loss == doctest::Approx(*y.loss).epsilon(1e-6));
    }
    CHECK(max_abs_diff(a.agents[0].network(), b.agents[1].network()) < 1e-9);
    CHECK(max_abs_diff(a.agents[1].network(), b.agents[0].network()) < 1e-9);
}

TEST_CASE("evaluation preconditions") {
    const auto cfg = small_config();
    const auto topo = generate_topology(cfg, 1);
    RandomAllocationPolicy policy(cfg, 1);
    EvalOptions opt;
    opt.episodes = 0;
    CHECK_THROWS_AS(evaluate_allocation(policy, topo, cfg, opt), ConfigError);
    CHECK_THROWS_AS(evaluate_ris(nullptr, policy, topo, cfg, opt), ConfigError);
    opt.episodes = 2;
    const QNetwork wrong({3, 4});
    CHECK_THROWS_AS(evaluate_ris(&wrong, policy, topo, cfg, opt), PrerequisiteError);
    CHECK_THROWS_AS(GreedyD2DPolicy({QNetwork({6, 3})}, cfg), PrerequisiteError);
    CHECK_THROWS_AS(GreedyD2DPolicy({QNetwork({6, 3}), QNetwork({5, 3})}, cfg), PrerequisiteError);
    const auto res = evaluate_allocation(policy, topo, cfg, opt);
    CHECK(res.episodes.size() == 2);
    CHECK(res.constraint_rate >= 0.0);
    CHECK(res.constraint_rate <= 1.0);
}

TEST_CASE("one-element RIS agent picks the better phase level") {
    SimulationConfig cfg;
    cfg.network.cellular_users = 2;
    cfg.network.d2d_pairs = 2;
    cfg.network.eavesdroppers = 1;
    cfg.ris.elements = 1;
    cfg.ris.phase_bits = 1;
    cfg.ris.grid_sections = 1;
    cfg.radio.power_levels = 2;
    cfg.secrecy.fading_draws = 8;
    cfg.secrecy.sinr_min_d2d_db = -30.0;
    cfg.secrecy.sinr_min_cu_db = -30.0;
    cfg.train.hidden_layers = {16};
    cfg.train.batch_size = 16;
    cfg.train.buffer_capacity = 2000;
    cfg.train.epochs = 150;
    cfg.train.steps_per_epoch = 10;
    cfg.train.discount = 0.5;
    cfg.train.learning_rate = 3e-3;
    cfg.train.epsilon_decay = 0.97;
    cfg.train.target_sync = 50;
    cfg.train.refresh_fading = false;
    const auto topo = generate_topology(cfg, 2);

    auto alloc = AllocationState::idle(2, 2, cfg.radio.cu_power_dbm);
    alloc.set_reuse(0, 0, true);
    alloc.set_reuse(1, 1, true);
    alloc.d2d_power_dbm = {24.0, 24.0};

    double ssc[2];
    for (int q = 0; q < 2; ++q) {
        auto ris = RisConfiguration::zeros(cfg.ris);
        ris.phase_levels[0] = q;
        ssc[q] = evaluate(realize_ensemble(topo, ris, cfg, cfg.seeds.fading), alloc, ris, cfg, 1).ssc;
    }
    const int best = ssc[1] > ssc[0] ? 1 : 0;
    REQUIRE(std::abs(ssc[1] - ssc[0]) > 1e-3 * std::max(ssc[0], ssc[1]));

    FixedAllocationPolicy fixed(alloc);
    const auto trained = train_ris(topo, fixed, cfg);
    const RisActionCodec codec(1, 1, 2);
    for (int q = 0; q < 2; ++q) {
        auto ris = RisConfiguration::zeros(cfg.ris);
        ris.phase_levels[0] = q;
        const auto next = codec.apply(ris, codec.decode(trained.agent.greedy(observe_ris(alloc, ris, 1))));
        CHECK(next.phase_levels[0] == best);
    }
}