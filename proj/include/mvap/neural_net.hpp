#pragma once

// Dense feed-forward Q-network: affine layers with ReLU between them and an
// identity output. Training fits only the output unit of the action taken in
// each sample (mean-squared error), as in DQN.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvap/error.hpp"
#include "mvap/random.hpp"

namespace mvap::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
};

class QNetwork {
public:
    QNetwork() = default;

    /// All-zero parameters.
    explicit QNetwork(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
        require(sizes_.size() >= 2, Errc::ShapeMismatch, "network needs an input and an output layer");
        for (int s : sizes_) require(s >= 1, Errc::ShapeMismatch, "layer width must be >= 1");
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
            layers_.push_back({Matrix::Zero(sizes_[l + 1], sizes_[l]), Vector::Zero(sizes_[l + 1])});
    }

    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    static QNetwork glorot(std::vector<int> layer_sizes, Rng& rng) {
        QNetwork net(std::move(layer_sizes));
        for (auto& layer : net.layers_) {
            const double bound = init_bound(layer.weights.cols(), layer.weights.rows());
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                    layer.weights(r, c) = uniform(rng, -bound, bound);
        }
        return net;
    }

    static double init_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
        return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    }

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t layer_count() const { return layers_.size(); }
    DenseLayer& layer(std::size_t i) { return layers_[i]; }
    const DenseLayer& layer(std::size_t i) const { return layers_[i]; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    bool same_shape(const QNetwork& other) const { return sizes_ == other.sizes_; }

    bool all_finite() const {
        for (const auto& l : layers_)
            if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
        return true;
    }

    Vector forward(std::span<const double> input) const {
        require(static_cast<int>(input.size()) == input_size(), Errc::ShapeMismatch, "input width mismatch");
        Vector x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
        require(x.allFinite(), Errc::NonFiniteInput, "network input contains NaN or infinity");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Vector z = layers_[l].weights * x + layers_[l].bias;
            if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
            x = std::move(z);
        }
        return x;
    }

    /// Columns of `inputs` are samples; returns one column of outputs per sample.
    Matrix forward_batch(const Matrix& inputs) const {
        require(inputs.rows() == input_size(), Errc::ShapeMismatch, "input width mismatch");
        require(inputs.allFinite(), Errc::NonFiniteInput, "network input contains NaN or infinity");
        Matrix x = inputs;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Matrix z = layers_[l].weights * x;
            z.colwise() += layers_[l].bias;
            if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
            x = std::move(z);
        }
        return x;
    }

    /// Forward pass that keeps every layer's post-activation output (index 0 is the input).
    std::vector<Matrix> forward_trace(const Matrix& inputs) const {
        require(inputs.rows() == input_size(), Errc::ShapeMismatch, "input width mismatch");
        require(inputs.allFinite(), Errc::NonFiniteInput, "network input contains NaN or infinity");
        std::vector<Matrix> acts;
        acts.reserve(layers_.size() + 1);
        acts.push_back(inputs);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Matrix z = layers_[l].weights * acts.back();
            z.colwise() += layers_[l].bias;
            if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
            acts.push_back(std::move(z));
        }
        return acts;
    }

private:
    std::vector<int> sizes_;
    std::vector<DenseLayer> layers_;
};

/// Partial derivatives with the same layout as the network parameters.
struct GradientSet {
    std::vector<DenseLayer> layers;

    static GradientSet zeros_like(const QNetwork& net) {
        GradientSet g;
        for (std::size_t l = 0; l < net.layer_count(); ++l)
            g.layers.push_back({Matrix::Zero(net.layer(l).weights.rows(), net.layer(l).weights.cols()),
                                Vector::Zero(net.layer(l).bias.size())});
        return g;
    }
};

struct TrainingSample {
    std::vector<double> state;
    int action = 0;
    double target = 0.0;
};

struct Minibatch {
    Matrix states;             // input_size x batch
    std::vector<int> actions;  // batch
    Vector targets;            // batch

    Eigen::Index size() const { return states.cols(); }

    static Minibatch from_samples(std::span<const TrainingSample> samples, int input_size) {
        Minibatch mb;
        mb.states.resize(input_size, static_cast<Eigen::Index>(samples.size()));
        mb.targets.resize(static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i) {
            require(static_cast<int>(samples[i].state.size()) == input_size, Errc::ShapeMismatch,
                    "sample state width mismatch");
            for (int r = 0; r < input_size; ++r) mb.states(r, static_cast<Eigen::Index>(i)) = samples[i].state[r];
            mb.actions.push_back(samples[i].action);
            mb.targets(static_cast<Eigen::Index>(i)) = samples[i].target;
        }
        return mb;
    }
};

/// (1/B) * sum_i (Q(s_i, a_i) - y_i)^2.
inline double loss(const QNetwork& net, const Minibatch& mb) {
    require(mb.size() > 0, Errc::EmptyBatch, "minibatch is empty");
    const Matrix q = net.forward_batch(mb.states);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < mb.size(); ++i) {
        const double d = q(mb.actions[static_cast<std::size_t>(i)], i) - mb.targets(i);
        sum += d * d;
    }
    return sum / static_cast<double>(mb.size());
}

inline GradientSet backward(const QNetwork& net, const Minibatch& mb) {
    require(mb.size() > 0, Errc::EmptyBatch, "minibatch is empty");
    require(static_cast<Eigen::Index>(mb.actions.size()) == mb.size() && mb.targets.size() == mb.size(),
            Errc::ShapeMismatch, "minibatch fields disagree in length");
    require(mb.targets.allFinite(), Errc::NonFiniteInput, "minibatch target is not finite");
    for (int a : mb.actions)
        require(a >= 0 && a < net.output_size(), Errc::ShapeMismatch, "sample action outside output layer");

    const auto acts = net.forward_trace(mb.states);
    const std::size_t L = net.layer_count();
    const double scale = 2.0 / static_cast<double>(mb.size());
    GradientSet g = GradientSet::zeros_like(net);

    // Output layer: only the taken action's unit carries error.
    const Matrix& h_last = acts[L - 1];
    const Matrix& w_out = net.layer(L - 1).weights;
    Matrix delta(h_last.rows(), mb.size());
    for (Eigen::Index i = 0; i < mb.size(); ++i) {
        const int a = mb.actions[static_cast<std::size_t>(i)];
        const double err = scale * (acts[L](a, i) - mb.targets(i));
        g.layers[L - 1].weights.row(a) += err * h_last.col(i).transpose();
        g.layers[L - 1].bias(a) += err;
        delta.col(i) = err * w_out.row(a).transpose();
    }

    for (std::size_t l = L - 1; l-- > 0;) {
        // ReLU derivative taken on the post-activation (zero where inactive).
        delta = delta.array() * (acts[l + 1].array() > 0.0).cast<double>();
        g.layers[l].weights.noalias() = delta * acts[l].transpose();
        g.layers[l].bias = delta.rowwise().sum();
        if (l > 0) delta = net.layer(l).weights.transpose() * delta;
    }
    return g;
}

inline double gradient_norm(const GradientSet& grads) {
    double sq = 0.0;
    for (const auto& l : grads.layers) sq += l.weights.squaredNorm() + l.bias.squaredNorm();
    return std::sqrt(sq);
}

/// Rescales all gradients together so their global L2 norm is at most max_norm.
inline void clip_by_norm(GradientSet& grads, double max_norm) {
    require(max_norm > 0.0, Errc::InvalidParameter, "clip norm must be positive");
    const double n = gradient_norm(grads);
    if (!(n > max_norm)) return;
    const double f = max_norm / n;
    for (auto& l : grads.layers) {
        l.weights *= f;
        l.bias *= f;
    }
}

inline void sgd_update(QNetwork& net, const GradientSet& grads, double learning_rate) {
    require(grads.layers.size() == net.layer_count(), Errc::ShapeMismatch, "gradient layer count mismatch");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto& p = net.layer(l);
        const auto& d = grads.layers[l];
        require(d.weights.rows() == p.weights.rows() && d.weights.cols() == p.weights.cols() &&
                    d.bias.size() == p.bias.size(),
                Errc::ShapeMismatch, "gradient shape mismatch at layer " + std::to_string(l));
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        net.layer(l).weights.noalias() -= learning_rate * grads.layers[l].weights;
        net.layer(l).bias.noalias() -= learning_rate * grads.layers[l].bias;
    }
}

/// target <- tau * primary + (1 - tau) * target
inline void soft_update(QNetwork& target, const QNetwork& primary, double tau) {
    require(target.same_shape(primary), Errc::ShapeMismatch, "soft update between different architectures");
    require(tau >= 0.0 && tau <= 1.0, Errc::InvalidParameter, "tau must lie in [0, 1]");
    for (std::size_t l = 0; l < target.layer_count(); ++l) {
        auto& t = target.layer(l);
        const auto& p = primary.layer(l);
        t.weights = tau * p.weights + (1.0 - tau) * t.weights;
        t.bias = tau * p.bias + (1.0 - tau) * t.bias;
    }
}

// Checkpoint layout (little-endian on the build host):
//   8 bytes magic "MVAPQNT1", u32 layer-size count, u32 sizes...,
//   then per layer: weights row-major as f64, biases as f64.
inline void save_checkpoint(const QNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::IoError, "cannot open " + path + " for writing");
    out.write("MVAPQNT1", 8);
    const auto count = static_cast<std::uint32_t>(net.layer_sizes().size());
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (int s : net.layer_sizes()) {
        const auto v = static_cast<std::uint32_t>(s);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto& layer = net.layer(l);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                const double v = layer.weights(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(layer.bias.size())));
    }
    require(static_cast<bool>(out), Errc::IoError, "write failed for " + path);
}

inline QNetwork load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), Errc::IoError, "cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    require(in && std::string(magic, 8) == "MVAPQNT1", Errc::IoError, path + " is not a Q-network checkpoint");
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    require(in && count >= 2 && count < 64, Errc::IoError, "corrupt layer count in " + path);
    std::vector<int> sizes(count);
    for (auto& s : sizes) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        s = static_cast<int>(v);
    }
    require(static_cast<bool>(in), Errc::IoError, "truncated header in " + path);
    QNetwork net(sizes);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto& layer = net.layer(l);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                in.read(reinterpret_cast<char*>(&layer.weights(r, c)), sizeof(double));
        in.read(reinterpret_cast<char*>(layer.bias.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(layer.bias.size())));
    }
    require(static_cast<bool>(in), Errc::IoError, "truncated parameters in " + path);
    return net;
}

}  // namespace mvap::nn
