#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rissec/config.hpp"
#include "rissec/qnetwork.hpp"

namespace rissec {

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool terminal = false;
};

/// Fixed-capacity FIFO of transitions; the oldest entry is evicted first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    /// i = 0 is the oldest stored transition.
    const Transition& operator[](std::size_t i) const;

    /// Uniform sample without replacement (Floyd's algorithm). Throws
    /// std::invalid_argument when fewer than batch_size transitions are held.
    std::vector<const Transition*> sample(std::size_t batch_size, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // index of the oldest item once full
    std::vector<Transition> items_;
};

enum class TargetKind { ddqn, dqn };

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

/// r + gamma * Q(s', argmax_a Q(s', a; eval); target); r when terminal.
double ddqn_target(const Transition& t, const QNetwork& eval, const QNetwork& target, double gamma);

/// r + gamma * max_a Q(s', a; target); r when terminal.
double dqn_target(const Transition& t, const QNetwork& target, double gamma);

/// With probability epsilon a uniform action, otherwise the greedy one.
int select_action(const QNetwork& net, std::span<const double> state, double epsilon, std::mt19937_64& rng);

/// Hard copy of the evaluation parameters into the target network.
void sync_target(const QNetwork& eval, QNetwork& target);

/// One learning agent: evaluation and target networks, RMSProp state, a
/// replay buffer, and its own exploration and sampling streams.
class DqnLearner {
public:
    DqnLearner(const std::vector<int>& layer_dims, const TrainConfig& cfg, TargetKind kind,
               std::uint64_t init_seed, std::uint64_t stream_seed);
    /// Wraps an existing network (e.g. a loaded checkpoint).
    DqnLearner(QNetwork net, const TrainConfig& cfg, TargetKind kind, std::uint64_t stream_seed);

    int act(std::span<const double> state, double epsilon);
    int greedy(std::span<const double> state) const;
    void remember(Transition t);

    /// One minibatch step once the buffer holds a full batch; returns the loss.
    std::optional<double> update();

    const QNetwork& network() const { return eval_; }
    const QNetwork& target_network() const { return target_; }
    const RmsProp& optimizer() const { return opt_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    std::int64_t updates() const { return updates_; }
    TargetKind kind() const { return kind_; }

private:
    TrainConfig cfg_;
    TargetKind kind_;
    QNetwork eval_;
    QNetwork target_;
    RmsProp opt_;
    ReplayBuffer buffer_;
    std::mt19937_64 explore_rng_;
    std::mt19937_64 sample_rng_;
    std::int64_t updates_ = 0;
};

}  // namespace rissec
