#include "rissec/ddqn.hpp"

#include <algorithm>
#include <stdexcept>

#include "rissec/common.hpp"

namespace rissec {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
    return items_.at((head_ + i) % items_.size());
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
    const std::size_t n = items_.size();
    if (batch_size > n) throw std::invalid_argument("ReplayBuffer::sample: not enough transitions stored");
    std::vector<std::size_t> picked;
    picked.reserve(batch_size);
    for (std::size_t j = n - batch_size; j < n; ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        const bool seen = std::find(picked.begin(), picked.end(), t) != picked.end();
        picked.push_back(seen ? j : t);
    }
    std::vector<const Transition*> out;
    out.reserve(batch_size);
    for (std::size_t idx : picked) out.push_back(&(*this)[idx]);
    return out;
}

int argmax(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax of an empty range");
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

double ddqn_target(const Transition& t, const QNetwork& eval, const QNetwork& target, double gamma) {
    if (t.terminal) return t.reward;
    const int a = argmax(eval.forward(t.next_state));
    return t.reward + gamma * target.forward(t.next_state)[a];
}

double dqn_target(const Transition& t, const QNetwork& target, double gamma) {
    if (t.terminal) return t.reward;
    const auto q = target.forward(t.next_state);
    return t.reward + gamma * *std::max_element(q.begin(), q.end());
}

int select_action(const QNetwork& net, std::span<const double> state, double epsilon, std::mt19937_64& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("select_action: epsilon must be in [0, 1]");
    // consume the coin even when epsilon is 0 or 1 so streams stay aligned
    const double coin = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (coin < epsilon) return std::uniform_int_distribution<int>(0, net.output_size() - 1)(rng);
    return argmax(net.forward(state));
}

void sync_target(const QNetwork& eval, QNetwork& target) {
    if (!eval.same_shape(target)) throw std::invalid_argument("sync_target: network shapes differ");
    target = eval;
}

DqnLearner::DqnLearner(const std::vector<int>& layer_dims, const TrainConfig& cfg, TargetKind kind,
                       std::uint64_t init_seed, std::uint64_t stream_seed)
    : DqnLearner(
          [&] {
              std::mt19937_64 init(init_seed);
              return QNetwork::initialized(layer_dims, init);
          }(),
          cfg, kind, stream_seed) {}

DqnLearner::DqnLearner(QNetwork net, const TrainConfig& cfg, TargetKind kind, std::uint64_t stream_seed)
    : cfg_(cfg),
      kind_(kind),
      eval_(std::move(net)),
      target_(eval_),
      opt_(eval_, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon),
      buffer_(static_cast<std::size_t>(cfg.buffer_capacity)),
      explore_rng_(mix_seed(stream_seed, 0)),
      sample_rng_(mix_seed(stream_seed, 1)) {}

int DqnLearner::act(std::span<const double> state, double epsilon) {
    return select_action(eval_, state, epsilon, explore_rng_);
}

int DqnLearner::greedy(std::span<const double> state) const { return argmax(eval_.forward(state)); }

void DqnLearner::remember(Transition t) {
    if (t.action < 0 || t.action >= eval_.output_size()) throw std::invalid_argument("transition action out of range");
    buffer_.push(std::move(t));
}

std::optional<double> DqnLearner::update() {
    const auto batch_size = static_cast<std::size_t>(cfg_.batch_size);
    if (buffer_.size() < batch_size) return std::nullopt;
    const auto batch = buffer_.sample(batch_size, sample_rng_);
    std::vector<TrainingSample> samples;
    samples.reserve(batch.size());
    for (const Transition* t : batch) {
        const double y = kind_ == TargetKind::ddqn ? ddqn_target(*t, eval_, target_, cfg_.discount)
                                                   : dqn_target(*t, target_, cfg_.discount);
        samples.push_back({t->state, t->action, y});
    }
    const double loss = backward_step(eval_, opt_, samples, cfg_.grad_clip);
    ++updates_;
    if (updates_ % cfg_.target_sync == 0) sync_target(eval_, target_);
    return loss;
}

}  // namespace rissec
