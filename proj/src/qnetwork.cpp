#include "rissec/qnetwork.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "rissec/common.hpp"

namespace rissec {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

// y = W x + b for one layer. Rows are independent, so the parallel split
// does not change any result.
void dense_forward(const DenseLayer& layer, const double* x, double* y) {
    const int rows = layer.outputs, cols = layer.inputs;
#pragma omp parallel for schedule(static) if (rows * cols > 65536)
    for (int o = 0; o < rows; ++o) {
        const double* w = layer.weights.data() + static_cast<std::size_t>(o) * cols;
        double acc = layer.bias[o];
        for (int i = 0; i < cols; ++i) acc += w[i] * x[i];
        y[o] = acc;
    }
}

}  // namespace

QNetwork::QNetwork(const std::vector<int>& layer_dims) {
    if (layer_dims.size() < 2) throw std::invalid_argument("QNetwork needs at least input and output sizes");
    for (int d : layer_dims)
        if (d < 1) throw std::invalid_argument("QNetwork layer sizes must be >= 1");
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        DenseLayer layer;
        layer.inputs = layer_dims[l];
        layer.outputs = layer_dims[l + 1];
        layer.weights.assign(static_cast<std::size_t>(layer.inputs) * layer.outputs, 0.0);
        layer.bias.assign(layer.outputs, 0.0);
        layers_.push_back(std::move(layer));
    }
}

QNetwork QNetwork::initialized(const std::vector<int>& layer_dims, std::mt19937_64& rng) {
    QNetwork net(layer_dims);
    for (auto& layer : net.layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& w : layer.weights) w = u(rng);
        for (double& b : layer.bias) b = u(rng);
    }
    return net;
}

std::vector<double> QNetwork::forward(std::span<const double> state) const {
    if (layers_.empty()) throw std::logic_error("forward on an empty network");
    if (static_cast<int>(state.size()) != input_size())
        throw std::invalid_argument(fmt::format("forward: state has {} entries, network expects {}", state.size(),
                                                input_size()));
    std::vector<double> x(state.begin(), state.end()), y;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        y.assign(layers_[l].outputs, 0.0);
        dense_forward(layers_[l], x.data(), y.data());
        if (l + 1 < layers_.size())
            for (double& v : y) v = v > 0.0 ? v : 0.0;
        x.swap(y);
    }
    return x;
}

std::vector<int> QNetwork::dims() const {
    std::vector<int> d;
    if (layers_.empty()) return d;
    d.push_back(layers_.front().inputs);
    for (const auto& l : layers_) d.push_back(l.outputs);
    return d;
}

std::size_t QNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

bool QNetwork::same_shape(const QNetwork& other) const { return dims() == other.dims(); }

bool QNetwork::finite() const {
    for (const auto& l : layers_) {
        for (double w : l.weights)
            if (!std::isfinite(w)) return false;
        for (double b : l.bias)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

Gradients Gradients::zeros_like(const QNetwork& net) {
    Gradients g;
    for (const auto& l : net.layers()) {
        g.weights.emplace_back(l.weights.size(), 0.0);
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

double Gradients::norm() const {
    double s = 0.0;
    for (const auto& v : weights)
        for (double x : v) s += x * x;
    for (const auto& v : bias)
        for (double x : v) s += x * x;
    return std::sqrt(s);
}

void Gradients::scale(double factor) {
    for (auto& v : weights)
        for (double& x : v) x *= factor;
    for (auto& v : bias)
        for (double& x : v) x *= factor;
}

double compute_gradients(const QNetwork& net, std::span<const TrainingSample> batch, Gradients& grads) {
    if (batch.empty()) throw std::invalid_argument("compute_gradients: empty batch");
    grads = Gradients::zeros_like(net);
    const auto& layers = net.layers();
    const std::size_t L = layers.size();
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    // activations[0] is the input, activations[l + 1] the output of layer l
    std::vector<std::vector<double>> act(L + 1);
    std::vector<double> delta, prev_delta;
    double loss = 0.0;
    for (const auto& sample : batch) {
        if (static_cast<int>(sample.state.size()) != net.input_size())
            throw std::invalid_argument("compute_gradients: state dimension mismatch");
        if (sample.action < 0 || sample.action >= net.output_size())
            throw std::invalid_argument("compute_gradients: action out of range");
        act[0].assign(sample.state.begin(), sample.state.end());
        for (std::size_t l = 0; l < L; ++l) {
            act[l + 1].assign(layers[l].outputs, 0.0);
            dense_forward(layers[l], act[l].data(), act[l + 1].data());
            if (l + 1 < L)
                for (double& v : act[l + 1]) v = v > 0.0 ? v : 0.0;
        }
        const double err = act[L][sample.action] - sample.target;
        loss += err * err * inv_n;

        delta.assign(layers[L - 1].outputs, 0.0);
        delta[sample.action] = 2.0 * err * inv_n;
        for (std::size_t l = L; l-- > 0;) {
            const auto& layer = layers[l];
            const auto& input = act[l];
            auto& gw = grads.weights[l];
            auto& gb = grads.bias[l];
            for (int o = 0; o < layer.outputs; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                gb[o] += d;
                double* row = gw.data() + static_cast<std::size_t>(o) * layer.inputs;
                for (int i = 0; i < layer.inputs; ++i) row[i] += d * input[i];
            }
            if (l == 0) break;
            prev_delta.assign(layer.inputs, 0.0);
            for (int o = 0; o < layer.outputs; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
                for (int i = 0; i < layer.inputs; ++i) prev_delta[i] += d * w[i];
            }
            // rectifier derivative of the previous layer's output
            for (int i = 0; i < layer.inputs; ++i)
                if (input[i] <= 0.0) prev_delta[i] = 0.0;
            delta.swap(prev_delta);
        }
    }
    return loss;
}

RmsProp::RmsProp(const QNetwork& net, double learning_rate, double decay, double epsilon)
    : lr_(learning_rate), decay_(decay), eps_(epsilon), cache_(Gradients::zeros_like(net)) {}

void RmsProp::apply(QNetwork& net, const Gradients& grads) {
    auto step = [&](std::vector<double>& params, const std::vector<double>& g, std::vector<double>& cache) {
        for (std::size_t j = 0; j < params.size(); ++j) {
            cache[j] = decay_ * cache[j] + (1.0 - decay_) * g[j] * g[j];
            params[j] -= lr_ * g[j] / (std::sqrt(cache[j]) + eps_);
        }
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        step(layers[l].weights, grads.weights[l], cache_.weights[l]);
        step(layers[l].bias, grads.bias[l], cache_.bias[l]);
    }
}

double backward_step(QNetwork& net, RmsProp& opt, std::span<const TrainingSample> batch, double grad_clip) {
    Gradients grads;
    const double loss = compute_gradients(net, batch, grads);
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
    if (grad_clip > 0.0) {
        const double n = grads.norm();
        if (n > grad_clip) grads.scale(grad_clip / n);
    }
    opt.apply(net, grads);
    return loss;
}

namespace {

constexpr char kMagic[4] = {'R', 'S', 'Q', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_f64s(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint truncated");
    return v;
}
void get_f64s(std::istream& in, std::vector<double>& v) {
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double))))
        throw std::runtime_error("checkpoint truncated");
}
double get_f64(std::istream& in) {
    std::vector<double> v(1);
    get_f64s(in, v);
    return v[0];
}

}  // namespace

void write_checkpoint(std::ostream& out, const QNetwork& net, const RmsProp* opt) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    const auto dims = net.dims();
    put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) put_u32(out, static_cast<std::uint32_t>(d));
    put_u32(out, opt ? 1u : 0u);
    for (const auto& l : net.layers()) {
        put_f64s(out, l.weights);
        put_f64s(out, l.bias);
    }
    if (opt) {
        put_f64s(out, {opt->learning_rate(), opt->decay(), opt->epsilon()});
        const auto& c = opt->cache();
        for (std::size_t l = 0; l < c.weights.size(); ++l) {
            put_f64s(out, c.weights[l]);
            put_f64s(out, c.bias[l]);
        }
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a checkpoint file");
    if (get_u32(in) != kVersion) throw std::runtime_error("unsupported checkpoint version");
    const std::uint32_t n = get_u32(in);
    if (n < 2 || n > 64) throw std::runtime_error("corrupt checkpoint header");
    std::vector<int> dims(n);
    for (auto& d : dims) d = static_cast<int>(get_u32(in));
    const std::uint32_t flags = get_u32(in);

    Checkpoint ck{QNetwork(dims), std::nullopt};
    for (auto& l : ck.net.layers()) {
        get_f64s(in, l.weights);
        get_f64s(in, l.bias);
    }
    if (flags & 1u) {
        const double lr = get_f64(in), decay = get_f64(in), eps = get_f64(in);
        RmsProp opt(ck.net, lr, decay, eps);
        auto& c = opt.cache();
        for (std::size_t l = 0; l < c.weights.size(); ++l) {
            get_f64s(in, c.weights[l]);
            get_f64s(in, c.bias[l]);
        }
        ck.optimizer = std::move(opt);
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const QNetwork& net, const RmsProp* opt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    write_checkpoint(out, net, opt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PrerequisiteError(fmt::format("cannot read checkpoint '{}'", path.string()));
    return read_checkpoint(in);
}

}  // namespace rissec
