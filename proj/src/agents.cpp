#include "rissec/agents.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "rissec/common.hpp"

namespace rissec {

namespace {

constexpr std::uint64_t kRisStreamTag = 0x5249535f5354524dULL;   // "RIS_STRM"
constexpr std::uint64_t kRisAgentTag = 0x5249535f4147454eULL;    // "RIS_AGEN"
constexpr std::uint64_t kEvalStreamTag = 0x4556414c5f535452ULL;  // "EVAL_STR"

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::vector<int> network_dims(int inputs, const std::vector<int>& hidden, int outputs) {
    std::vector<int> dims{inputs};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(outputs);
    return dims;
}

// Fading draws fixed for one epoch or episode; only the RIS-dependent
// large-scale part is recomputed when the configuration changes.
class Environment {
public:
    Environment(const Topology& topo, const SimulationConfig& cfg) : topo_(topo), cfg_(cfg) {
        for (const auto& link : enumerate_links(topo)) keys_.push_back(link.key());
    }

    void redraw(std::uint64_t fading_seed) {
        if (fading_.draws.empty() || fading_.seed != fading_seed)
            fading_ = draw_fading_set(keys_, cfg_.secrecy.fading_draws, fading_seed);
    }

    ChannelEnsemble channels(const RisConfiguration& ris) const {
        return compose_ensemble(compute_large_scale(topo_, ris, cfg_), fading_);
    }

private:
    const Topology& topo_;
    const SimulationConfig& cfg_;
    std::vector<std::uint64_t> keys_;
    FadingSet fading_;
};

std::uint64_t epoch_fading_seed(const SimulationConfig& cfg, bool refresh, std::uint64_t base, int epoch) {
    return refresh ? mix_seed(base, static_cast<std::uint64_t>(epoch)) : cfg.seeds.fading;
}

}  // namespace

// ---------------------------------------------------------------- codecs

D2DActionCodec::D2DActionCodec(int cus, int power_levels) : cus_(cus), levels_(power_levels) {
    if (cus < 1 || power_levels < 1) throw std::invalid_argument("D2DActionCodec: sizes must be >= 1");
}

D2DAction D2DActionCodec::decode(int index) const {
    if (index < 0 || index >= size()) throw std::out_of_range(fmt::format("D2D action index {} out of range", index));
    if (index == 0) return {};
    return {false, (index - 1) / levels_, (index - 1) % levels_};
}

int D2DActionCodec::encode(const D2DAction& a) const {
    if (a.idle) return 0;
    if (a.rb < 0 || a.rb >= cus_ || a.level < 0 || a.level >= levels_)
        throw std::out_of_range("D2D action outside the codec range");
    return 1 + a.rb * levels_ + a.level;
}

RisActionCodec::RisActionCodec(int grid_points, int elements, int levels)
    : grid_(grid_points), elements_(elements), levels_(levels) {
    if (grid_points < 1 || elements < 1 || levels < 1) throw std::invalid_argument("RisActionCodec: sizes must be >= 1");
}

RisAction RisActionCodec::decode(int index) const {
    if (index < 0 || index >= size()) throw std::out_of_range(fmt::format("RIS action index {} out of range", index));
    if (index < grid_) return {RisAction::Kind::set_location, index, 0, 0};
    const int j = index - grid_;
    return {RisAction::Kind::set_phase, 0, j / levels_, j % levels_};
}

int RisActionCodec::encode(const RisAction& a) const {
    if (a.kind == RisAction::Kind::set_location) {
        if (a.location < 0 || a.location >= grid_) throw std::out_of_range("RIS location outside the codec range");
        return a.location;
    }
    if (a.element < 0 || a.element >= elements_ || a.level < 0 || a.level >= levels_)
        throw std::out_of_range("RIS phase action outside the codec range");
    return grid_ + a.element * levels_ + a.level;
}

RisConfiguration RisActionCodec::apply(RisConfiguration ris, const RisAction& a) const {
    if (a.kind == RisAction::Kind::set_location)
        ris.location_index = a.location;
    else
        ris.phase_levels.at(a.element) = a.level;
    return ris;
}

double power_level_dbm(const RadioParams& radio, int level) {
    if (level < 0 || level >= radio.power_levels) throw std::out_of_range("power level out of range");
    if (radio.power_levels == 1) return radio.d2d_power_max_dbm;
    const double step = (radio.d2d_power_max_dbm - radio.d2d_power_min_dbm) / (radio.power_levels - 1);
    return radio.d2d_power_min_dbm + step * level;
}

AllocationState assemble_allocation(std::span<const D2DAction> actions, int cus, const RadioParams& radio) {
    auto alloc = AllocationState::idle(cus, static_cast<int>(actions.size()), radio.cu_power_dbm);
    for (int i = 0; i < alloc.pairs; ++i) {
        const auto& a = actions[i];
        if (a.idle) continue;
        alloc.set_reuse(a.rb, i, true);
        alloc.d2d_power_dbm[i] = power_level_dbm(radio, a.level);
    }
    return alloc;
}

// ----------------------------------------------------------- observations

std::vector<double> observe_d2d(const ChannelEnsemble& channels, const AllocationState& previous, int i,
                                const D2DAction& previous_action, const SimulationConfig& cfg) {
    if (channels.empty()) throw std::invalid_argument("observe_d2d: empty channel ensemble");
    const int K = previous.cus;
    const int M = previous.pairs;
    const double draws = static_cast<double>(channels.size());
    const double noise_w = dbm_to_watts(cfg.radio.noise_dbm);

    std::vector<double> z(2 * static_cast<std::size_t>(K) + 2, 0.0);
    for (int k = 0; k < K; ++k) {
        double own = 0.0;
        double interference = 0.0;
        for (const auto& ch : channels) {
            own += std::norm(ch.h_d2d(k, i));
            interference += previous.cu_power_w() * std::norm(ch.h_cu_d2d(k, i));
            for (int l = 0; l < M; ++l)
                if (l != i && previous.reuse(k, l))
                    interference += previous.d2d_power_w(l) * std::norm(ch.h_d2d_d2d(k, l, i));
        }
        own /= draws;
        interference = interference / draws + noise_w;
        z[k] = clamp01((linear_to_db(own) + 130.0) / 100.0);
        z[K + k] = clamp01((linear_to_db(interference) + 30.0 + 120.0) / 90.0);
    }
    if (!previous_action.idle) {
        z[2 * K] = static_cast<double>(previous_action.rb + 1) / K;
        z[2 * K + 1] = static_cast<double>(previous_action.level + 1) / cfg.radio.power_levels;
    }
    return z;
}

std::vector<double> observe_ris(const AllocationState& alloc, const RisConfiguration& ris, int grid_points) {
    std::vector<double> s;
    s.reserve(alloc.rho.size() + grid_points + ris.phase_levels.size());
    for (auto r : alloc.rho) s.push_back(r);
    for (int j = 0; j < grid_points; ++j) s.push_back(j == ris.location_index ? 1.0 : 0.0);
    const double top = std::max(ris.levels() - 1, 1);
    for (int q : ris.phase_levels) s.push_back(q / top);
    return s;
}

// ---------------------------------------------------------------- rewards

double d2d_reward(const SecrecyReport& report, double reward_scale) {
    return report.flags.allocation_ok() ? reward_scale * report.ssc : 0.0;
}

double ris_reward(const SecrecyReport& report, double reward_scale) {
    return report.flags.ris_ok() ? reward_scale * report.ssc : 0.0;
}

void write_metrics_csv(std::ostream& out, std::span<const StepRecord> rows) {
    out << "epoch,step,agent_id,loss,reward,ssc,epsilon,constraints_ok\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{:d}\n", r.epoch, r.step, r.agent_id,
                           r.loss ? fmt::format("{}", *r.loss) : std::string("nan"), r.reward, r.ssc, r.epsilon,
                           r.constraints_ok);
    }
}

// --------------------------------------------------------------- policies

GreedyD2DPolicy::GreedyD2DPolicy(std::vector<QNetwork> nets, const SimulationConfig& cfg)
    : nets_(std::move(nets)), cfg_(cfg), codec_(cfg.network.cellular_users, cfg.radio.power_levels) {
    if (static_cast<int>(nets_.size()) != cfg.network.d2d_pairs)
        throw PrerequisiteError(fmt::format("expected {} allocation networks, got {}", cfg.network.d2d_pairs,
                                            nets_.size()));
    const int inputs = 2 * cfg.network.cellular_users + 2;
    for (const auto& net : nets_)
        if (net.input_size() != inputs || net.output_size() != codec_.size())
            throw PrerequisiteError("allocation network shape does not match the configuration");
    reset();
}

void GreedyD2DPolicy::reset() { previous_.assign(nets_.size(), D2DAction{}); }

AllocationState GreedyD2DPolicy::decide(const ChannelEnsemble& channels) {
    const int K = cfg_.network.cellular_users;
    const auto prev_alloc = assemble_allocation(previous_, K, cfg_.radio);
    std::vector<D2DAction> next(nets_.size());
    for (std::size_t i = 0; i < nets_.size(); ++i) {
        const auto z = observe_d2d(channels, prev_alloc, static_cast<int>(i), previous_[i], cfg_);
        next[i] = codec_.decode(argmax(nets_[i].forward(z)));
    }
    previous_ = next;
    return assemble_allocation(next, K, cfg_.radio);
}

RandomAllocationPolicy::RandomAllocationPolicy(const SimulationConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), codec_(cfg.network.cellular_users, cfg.radio.power_levels), rng_(seed) {}

AllocationState RandomAllocationPolicy::decide(const ChannelEnsemble&) {
    std::vector<D2DAction> actions(cfg_.network.d2d_pairs);
    std::uniform_int_distribution<int> pick(0, codec_.size() - 1);
    for (auto& a : actions) a = codec_.decode(pick(rng_));
    return assemble_allocation(actions, cfg_.network.cellular_users, cfg_.radio);
}

// --------------------------------------------------------------- training

std::uint64_t pair_seed_tag(const Topology& topo, int i) {
    std::uint64_t h = 0x50414952ULL;  // "PAIR"
    for (const auto* p : {&topo.d2d_tx.at(i), &topo.d2d_rx.at(i)})
        for (double c : {p->x, p->y, p->z}) h = mix_seed(h, std::bit_cast<std::uint64_t>(c));
    return h;
}

D2DTrainResult train_d2d(const Topology& topo, const SimulationConfig& cfg, TargetKind kind) {
    const int K = cfg.network.cellular_users;
    const int M = topo.num_pairs();
    const int grid = cfg.ris.grid_sections;
    const D2DActionCodec codec(K, cfg.radio.power_levels);
    const auto dims = network_dims(2 * K + 2, cfg.train.hidden_layers, codec.size());

    D2DTrainResult result;
    result.agents.reserve(M);
    for (int i = 0; i < M; ++i) {
        const auto tag = pair_seed_tag(topo, i);
        result.agents.emplace_back(dims, cfg.train, kind, mix_seed(cfg.seeds.init, tag),
                                   mix_seed(cfg.seeds.exploration, tag));
    }
    result.log.reserve(static_cast<std::size_t>(cfg.train.epochs) * cfg.train.steps_per_epoch * M);

    std::mt19937_64 ris_rng(mix_seed(cfg.seeds.exploration, kRisStreamTag));
    Environment env(topo, cfg);
    std::vector<std::optional<double>> losses(M);

    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const double eps = cfg.train.epsilon_at(epoch);
        const auto ris = RisConfiguration::random(cfg.ris, grid, ris_rng);
        env.redraw(epoch_fading_seed(cfg, cfg.train.refresh_fading, cfg.seeds.fading, epoch));
        const auto channels = env.channels(ris);

        std::vector<D2DAction> actions(M);
        auto alloc = assemble_allocation(actions, K, cfg.radio);
        std::vector<std::vector<double>> obs(M);
        for (int i = 0; i < M; ++i) obs[i] = observe_d2d(channels, alloc, i, actions[i], cfg);

        for (int step = 0; step < cfg.train.steps_per_epoch; ++step) {
            std::vector<int> chosen(M);
            for (int i = 0; i < M; ++i) {
                chosen[i] = result.agents[i].act(obs[i], eps);
                actions[i] = codec.decode(chosen[i]);
            }
            alloc = assemble_allocation(actions, K, cfg.radio);
            const auto report = evaluate(channels, alloc, ris, cfg, grid);
            const double reward = d2d_reward(report, cfg.train.reward_scale);

            for (int i = 0; i < M; ++i) {
                auto next = observe_d2d(channels, alloc, i, actions[i], cfg);
                result.agents[i].remember({obs[i], chosen[i], reward, next, false});
                obs[i] = std::move(next);
            }

            std::vector<std::exception_ptr> errors(M);
#pragma omp parallel for schedule(static) if (M > 1)
            for (int i = 0; i < M; ++i) {
                try {
                    losses[i] = result.agents[i].update();
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
            for (const auto& e : errors)
                if (e) std::rethrow_exception(e);

            for (int i = 0; i < M; ++i)
                result.log.push_back({epoch, step, i, losses[i], reward, report.ssc, eps, report.flags.allocation_ok()});
        }
    }
    return result;
}

RisTrainResult train_ris(const Topology& topo, AllocationPolicy& allocation, const SimulationConfig& cfg,
                         TargetKind kind) {
    const int K = cfg.network.cellular_users;
    const int M = topo.num_pairs();
    const int grid = cfg.ris.grid_sections;
    const RisActionCodec codec(grid, cfg.ris.elements, cfg.ris.phase_levels());
    const auto dims = network_dims(K * M + grid + cfg.ris.elements, cfg.train.hidden_layers, codec.size());

    RisTrainResult result{DqnLearner(dims, cfg.train, kind, mix_seed(cfg.seeds.init, kRisAgentTag),
                                     mix_seed(cfg.seeds.exploration, kRisAgentTag)),
                          {},
                          {}};
    result.log.reserve(static_cast<std::size_t>(cfg.train.epochs) * cfg.train.steps_per_epoch);
    std::vector<double> reward_sum(grid, 0.0);
    std::vector<int> visits(grid, 0);

    std::mt19937_64 ris_rng(mix_seed(cfg.seeds.exploration, kRisStreamTag));
    Environment env(topo, cfg);

    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const double eps = cfg.train.epsilon_at(epoch);
        auto ris = RisConfiguration::random(cfg.ris, grid, ris_rng);
        env.redraw(epoch_fading_seed(cfg, cfg.train.refresh_fading, cfg.seeds.fading, epoch));
        allocation.reset();
        auto alloc = allocation.decide(env.channels(ris));
        auto state = observe_ris(alloc, ris, grid);

        for (int step = 0; step < cfg.train.steps_per_epoch; ++step) {
            const int a = result.agent.act(state, eps);
            ris = codec.apply(std::move(ris), codec.decode(a));
            const auto channels = env.channels(ris);
            alloc = allocation.decide(channels);
            const auto report = evaluate(channels, alloc, ris, cfg, grid);
            const double reward = ris_reward(report, cfg.train.reward_scale);
            auto next = observe_ris(alloc, ris, grid);
            result.agent.remember({state, a, reward, next, false});
            const auto loss = result.agent.update();
            state = std::move(next);

            reward_sum[ris.location_index] += reward;
            ++visits[ris.location_index];
            result.log.push_back({epoch, step, 0, loss, reward, report.ssc, eps, report.flags.ris_ok()});
        }
    }
    for (int j = 0; j < grid; ++j)
        result.locations.push_back({j, visits[j], visits[j] > 0 ? reward_sum[j] / visits[j] : 0.0});
    return result;
}

// ------------------------------------------------------------- evaluation

namespace {

void check_eval_options(const EvalOptions& opt) {
    if (opt.episodes < 1) throw ConfigError(fmt::format("episodes must be >= 1, got {}", opt.episodes));
    if (opt.steps < 0) throw ConfigError(fmt::format("steps must be >= 0, got {}", opt.steps));
}

void summarize(EvalResult& out) {
    double ssc = 0.0, reward = 0.0, rate = 0.0;
    for (const auto& e : out.episodes) {
        ssc += e.ssc;
        reward += e.reward;
        rate += e.constraint_rate;
    }
    const double n = static_cast<double>(out.episodes.size());
    out.mean_ssc = ssc / n;
    out.mean_reward = reward / n;
    out.constraint_rate = rate / n;
}

}  // namespace

EvalResult evaluate_allocation(AllocationPolicy& policy, const Topology& topo, const SimulationConfig& cfg,
                               const EvalOptions& opt) {
    check_eval_options(opt);
    const int steps = opt.steps > 0 ? opt.steps : cfg.train.steps_per_epoch;
    const int grid = cfg.ris.grid_sections;
    std::mt19937_64 rng(mix_seed(opt.seed, kEvalStreamTag));
    Environment env(topo, cfg);

    EvalResult out;
    for (int ep = 0; ep < opt.episodes; ++ep) {
        EpisodeResult r;
        r.episode = ep;
        r.ris = opt.fixed_ris ? *opt.fixed_ris : RisConfiguration::random(cfg.ris, grid, rng);
        env.redraw(epoch_fading_seed(cfg, opt.refresh_fading, opt.seed, ep));
        const auto channels = env.channels(r.ris);
        policy.reset();
        for (int s = 0; s < steps; ++s) {
            const auto alloc = policy.decide(channels);
            const auto report = evaluate(channels, alloc, r.ris, cfg, grid);
            r.ssc += report.ssc;
            r.reward += d2d_reward(report, cfg.train.reward_scale);
            r.constraint_rate += report.flags.allocation_ok() ? 1.0 : 0.0;
        }
        r.ssc /= steps;
        r.reward /= steps;
        r.constraint_rate /= steps;
        out.episodes.push_back(std::move(r));
    }
    summarize(out);
    return out;
}

EvalResult evaluate_ris(const QNetwork* ris_net, AllocationPolicy& allocation, const Topology& topo,
                        const SimulationConfig& cfg, const EvalOptions& opt) {
    check_eval_options(opt);
    const int steps = opt.steps > 0 ? opt.steps : cfg.train.steps_per_epoch;
    const int grid = cfg.ris.grid_sections;
    const RisActionCodec codec(grid, cfg.ris.elements, cfg.ris.phase_levels());
    if (ris_net && (ris_net->output_size() != codec.size() ||
                    ris_net->input_size() != topo.num_cus() * topo.num_pairs() + grid + cfg.ris.elements))
        throw PrerequisiteError("RIS network shape does not match the configuration");
    std::mt19937_64 rng(mix_seed(opt.seed, kEvalStreamTag));
    Environment env(topo, cfg);

    EvalResult out;
    for (int ep = 0; ep < opt.episodes; ++ep) {
        EpisodeResult r;
        r.episode = ep;
        auto ris = opt.fixed_ris ? *opt.fixed_ris : RisConfiguration::random(cfg.ris, grid, rng);
        env.redraw(epoch_fading_seed(cfg, opt.refresh_fading, opt.seed, ep));
        allocation.reset();
        auto alloc = allocation.decide(env.channels(ris));
        for (int s = 0; s < steps; ++s) {
            const int a = ris_net ? argmax(ris_net->forward(observe_ris(alloc, ris, grid)))
                                  : std::uniform_int_distribution<int>(0, codec.size() - 1)(rng);
            ris = codec.apply(std::move(ris), codec.decode(a));
            const auto channels = env.channels(ris);
            alloc = allocation.decide(channels);
            const auto report = evaluate(channels, alloc, ris, cfg, grid);
            r.ssc += report.ssc;
            r.reward += ris_reward(report, cfg.train.reward_scale);
            r.constraint_rate += report.flags.ris_ok() ? 1.0 : 0.0;
        }
        r.ssc /= steps;
        r.reward /= steps;
        r.constraint_rate /= steps;
        r.ris = std::move(ris);
        out.episodes.push_back(std::move(r));
    }
    summarize(out);
    return out;
}

}  // namespace rissec
