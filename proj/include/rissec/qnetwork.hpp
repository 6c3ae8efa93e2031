#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace rissec {

struct DenseLayer {
    int inputs = 0;
    int outputs = 0;
    std::vector<double> weights;  // outputs x inputs, row-major
    std::vector<double> bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Fully connected value network: rectifier on hidden layers, identity on
/// the output layer (one output per action).
class QNetwork {
public:
    QNetwork() = default;
    /// All parameters zero.
    explicit QNetwork(const std::vector<int>& layer_dims);
    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    static QNetwork initialized(const std::vector<int>& layer_dims, std::mt19937_64& rng);

    std::vector<double> forward(std::span<const double> state) const;

    std::vector<int> dims() const;
    int input_size() const { return layers_.front().inputs; }
    int output_size() const { return layers_.back().outputs; }
    std::size_t parameter_count() const;
    bool same_shape(const QNetwork& other) const;
    bool finite() const;

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    friend bool operator==(const QNetwork&, const QNetwork&) = default;

private:
    std::vector<DenseLayer> layers_;
};

/// Same shapes as the network's parameters.
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;

    static Gradients zeros_like(const QNetwork& net);
    double norm() const;
    void scale(double factor);

    friend bool operator==(const Gradients&, const Gradients&) = default;
};

struct TrainingSample {
    std::span<const double> state;
    int action;
    double target;
};

/// Loss = mean over the batch of (target - q(state, action))^2; only the
/// taken action's output contributes. Returns the loss and fills `grads`.
double compute_gradients(const QNetwork& net, std::span<const TrainingSample> batch, Gradients& grads);

class RmsProp {
public:
    RmsProp() = default;
    RmsProp(const QNetwork& net, double learning_rate, double decay, double epsilon);

    /// cache = decay * cache + (1 - decay) * g^2;  w -= lr * g / (sqrt(cache) + eps)
    void apply(QNetwork& net, const Gradients& grads);

    double learning_rate() const { return lr_; }
    double decay() const { return decay_; }
    double epsilon() const { return eps_; }
    const Gradients& cache() const { return cache_; }
    Gradients& cache() { return cache_; }

    friend bool operator==(const RmsProp&, const RmsProp&) = default;

private:
    double lr_ = 1e-3;
    double decay_ = 0.9;
    double eps_ = 1e-8;
    Gradients cache_;
};

/// One optimizer step on the batch. `grad_clip` > 0 rescales the gradient to
/// that global norm when exceeded. Throws NumericError on a non-finite loss,
/// leaving the network untouched.
double backward_step(QNetwork& net, RmsProp& opt, std::span<const TrainingSample> batch, double grad_clip = 0.0);

/// Binary checkpoint, little-endian:
///   "RSQN" | u32 version(1) | u32 n_dims | u32 dims[n_dims] | u32 flags
///   per layer: f64 weights[out*in] (row-major), f64 bias[out]
///   if flags & 1: f64 lr, decay, epsilon, then the RMSProp cache in the
///   same per-layer layout as the parameters.
struct Checkpoint {
    QNetwork net;
    std::optional<RmsProp> optimizer;
};

void write_checkpoint(std::ostream& out, const QNetwork& net, const RmsProp* opt = nullptr);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const QNetwork& net, const RmsProp* opt = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rissec
