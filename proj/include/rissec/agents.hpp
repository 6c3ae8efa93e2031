#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rissec/channel.hpp"
#include "rissec/config.hpp"
#include "rissec/ddqn.hpp"
#include "rissec/geometry.hpp"
#include "rissec/secrecy.hpp"

namespace rissec {

// ---------------------------------------------------------------- actions

struct D2DAction {
    bool idle = true;
    int rb = 0;
    int level = 0;  // 0-based power level

    friend bool operator==(const D2DAction&, const D2DAction&) = default;
};

/// Index 0 is idle; index 1 + rb * levels + level otherwise.
class D2DActionCodec {
public:
    D2DActionCodec(int cus, int power_levels);
    int size() const { return cus_ * levels_ + 1; }
    D2DAction decode(int index) const;
    int encode(const D2DAction& a) const;

private:
    int cus_;
    int levels_;
};

struct RisAction {
    enum class Kind { set_location, set_phase } kind = Kind::set_location;
    int location = 0;
    int element = 0;
    int level = 0;

    friend bool operator==(const RisAction&, const RisAction&) = default;
};

/// Indices [0, x) set the location; x + n * 2^b + q sets element n to level q.
class RisActionCodec {
public:
    RisActionCodec(int grid_points, int elements, int levels);
    int size() const { return grid_ + elements_ * levels_; }
    RisAction decode(int index) const;
    int encode(const RisAction& a) const;
    RisConfiguration apply(RisConfiguration ris, const RisAction& a) const;

private:
    int grid_;
    int elements_;
    int levels_;
};

/// Uniform grid over [d2d_power_min_dbm, d2d_power_max_dbm]; a single level
/// sits at the maximum.
double power_level_dbm(const RadioParams& radio, int level);

AllocationState assemble_allocation(std::span<const D2DAction> actions, int cus, const RadioParams& radio);

// ----------------------------------------------------------- observations

/// Local observation of pair i, 2K + 2 features in [0, 1]: mean own-link
/// gain per RB, mean interference-plus-noise at the receiver per RB under
/// the previous joint allocation, and the pair's previous RB and power level.
std::vector<double> observe_d2d(const ChannelEnsemble& channels, const AllocationState& previous, int i,
                                const D2DAction& previous_action, const SimulationConfig& cfg);

/// [rho (K*M) | one-hot location (x) | phase level / (2^b - 1) (N)].
std::vector<double> observe_ris(const AllocationState& alloc, const RisConfiguration& ris, int grid_points);

// ---------------------------------------------------------------- rewards

/// xi * SSC when C1-C5 hold, else 0.
double d2d_reward(const SecrecyReport& report, double reward_scale);
/// xi * SSC when C1, C2, C3, C6 and C7 hold, else 0.
double ris_reward(const SecrecyReport& report, double reward_scale);

// ------------------------------------------------------------ metrics log

struct StepRecord {
    int epoch = 0;
    int step = 0;
    int agent_id = 0;
    std::optional<double> loss;
    double reward = 0.0;
    double ssc = 0.0;
    double epsilon = 0.0;
    bool constraints_ok = false;
};

struct LocationStat {
    int location = 0;
    int visits = 0;
    double mean_reward = 0.0;
};

/// CSV: epoch,step,agent_id,loss,reward,ssc,epsilon,constraints_ok
/// (loss is "nan" before the first minibatch update).
void write_metrics_csv(std::ostream& out, std::span<const StepRecord> rows);

// --------------------------------------------------------------- policies

/// Maps the current channels to a joint allocation. Stateful policies keep
/// their previous decision between calls; reset() starts a new episode.
class AllocationPolicy {
public:
    virtual ~AllocationPolicy() = default;
    virtual void reset() {}
    virtual AllocationState decide(const ChannelEnsemble& channels) = 0;
};

/// Greedy rollout of per-pair networks (one per D2D pair).
class GreedyD2DPolicy : public AllocationPolicy {
public:
    GreedyD2DPolicy(std::vector<QNetwork> nets, const SimulationConfig& cfg);
    void reset() override;
    AllocationState decide(const ChannelEnsemble& channels) override;

private:
    std::vector<QNetwork> nets_;
    SimulationConfig cfg_;
    D2DActionCodec codec_;
    std::vector<D2DAction> previous_;
};

/// Each pair draws a uniform action, independently per call.
class RandomAllocationPolicy : public AllocationPolicy {
public:
    RandomAllocationPolicy(const SimulationConfig& cfg, std::uint64_t seed);
    AllocationState decide(const ChannelEnsemble& channels) override;

private:
    SimulationConfig cfg_;
    D2DActionCodec codec_;
    std::mt19937_64 rng_;
};

class FixedAllocationPolicy : public AllocationPolicy {
public:
    explicit FixedAllocationPolicy(AllocationState alloc) : alloc_(std::move(alloc)) {}
    AllocationState decide(const ChannelEnsemble&) override { return alloc_; }

private:
    AllocationState alloc_;
};

// --------------------------------------------------------------- training

/// Seed tag of pair i: a hash of its endpoints, so that agent streams follow
/// the physical pair rather than its label.
std::uint64_t pair_seed_tag(const Topology& topo, int i);

struct D2DTrainResult {
    std::vector<DqnLearner> agents;
    std::vector<StepRecord> log;
};

/// Decentralized training, one learner per pair. Each epoch draws a random
/// RIS configuration and fresh channels; each step every pair acts
/// epsilon-greedily on its local observation, the shared reward of the joint
/// allocation is stored in every agent's buffer, and every agent performs
/// one minibatch update.
D2DTrainResult train_d2d(const Topology& topo, const SimulationConfig& cfg, TargetKind kind = TargetKind::ddqn);

struct RisTrainResult {
    DqnLearner agent;
    std::vector<StepRecord> log;
    std::vector<LocationStat> locations;
};

/// Centralized RIS training against a frozen allocation policy. Each epoch
/// redraws the fading ensemble and starts from a random RIS configuration;
/// each step applies one location or element-phase action.
RisTrainResult train_ris(const Topology& topo, AllocationPolicy& allocation, const SimulationConfig& cfg,
                         TargetKind kind = TargetKind::ddqn);

// ------------------------------------------------------------- evaluation

struct EvalOptions {
    int episodes = 10;
    int steps = 0;                 // 0 means train.steps_per_epoch
    std::uint64_t seed = 0;
    std::optional<RisConfiguration> fixed_ris;
    bool refresh_fading = true;    // per-episode fading draws, else seeds.fading
};

struct EpisodeResult {
    int episode = 0;
    double ssc = 0.0;              // mean over steps, bit/s
    double reward = 0.0;           // mean over steps
    double constraint_rate = 0.0;  // fraction of steps with all relevant constraints met
    RisConfiguration ris;          // final configuration
};

struct EvalResult {
    double mean_ssc = 0.0;
    double mean_reward = 0.0;
    double constraint_rate = 0.0;
    std::vector<EpisodeResult> episodes;
};

/// Allocation evaluation: each episode draws a RIS configuration (or uses the
/// fixed one) and rolls the policy out for `steps` steps.
EvalResult evaluate_allocation(AllocationPolicy& policy, const Topology& topo, const SimulationConfig& cfg,
                               const EvalOptions& opt);

/// RIS evaluation: greedy rollout of the central network from a random
/// configuration, with the allocation policy reacting each step. A null
/// network gives the uniform-random RIS baseline.
EvalResult evaluate_ris(const QNetwork* ris_net, AllocationPolicy& allocation, const Topology& topo,
                        const SimulationConfig& cfg, const EvalOptions& opt);

}  // namespace rissec
