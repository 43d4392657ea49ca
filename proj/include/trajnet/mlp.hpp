// Fully connected regression network: swish activations, pre-norm batch
// normalization, mean squared error, SGD with heavy-ball momentum.
//
// Layout: samples are columns. A batch is an (input_dim x B) matrix.
//
// Layer stack for layer_dims = [d0, d1, ..., dk] and block_repeat = r:
//
//   linear(input -> d0), swish
//   r x [batchnorm, linear(-> d1), swish]
//   ...
//   r x [batchnorm, linear(-> dk), swish]
//   linear(dk -> output)
//
// The first and the final linear layers are not normalized and the final
// layer has no activation.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trajnet/error.hpp"

namespace trajnet::mlp {

struct MlpConfig {
    std::vector<std::uint32_t> layer_dims{32, 64, 128, 256};
    std::uint32_t block_repeat = 2;
    /// Appends an 8192-wide block when the angular density exceeds 4096.
    bool append_8192_when_density_exceeds_4096 = true;
    std::uint32_t input_dim = 6;
    std::uint32_t output_dim = 1;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.99;

    static MlpConfig full_size() {
        MlpConfig c;
        c.layer_dims = {32, 64, 128, 256, 512, 864, 1024, 2048, 4096};
        c.block_repeat = 6;
        return c;
    }

    void validate() const {
        require(!layer_dims.empty(), "layer_dims must not be empty");
        for (auto d : layer_dims) require(d >= 1, "layer dims must be >= 1");
        require(block_repeat >= 1, "block_repeat must be >= 1");
        require(input_dim >= 1 && output_dim >= 1, "input/output dims must be >= 1");
        require(bn_epsilon > 0.0, "bn_epsilon must be positive");
        require(bn_momentum > 0.0 && bn_momentum < 1.0, "bn_momentum must lie in (0, 1)");
    }

    /// Layer dims after applying the density rule.
    std::vector<std::uint32_t> effective_dims(std::uint32_t density) const {
        auto dims = layer_dims;
        if (append_8192_when_density_exceeds_4096 && density > 4096) dims.push_back(8192);
        return dims;
    }

    friend bool operator==(const MlpConfig &, const MlpConfig &) = default;
};

enum class Mode { train, eval };

template <typename Scalar>
struct Layer {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    bool normalized = false;  // batchnorm on the input
    bool activated = true;    // swish on the output

    Matrix weight;  // out x in
    Vector bias;
    // Batchnorm state, sized `in` when normalized, empty otherwise.
    Vector gamma, beta, running_mean, running_var;
    // Momentum buffers.
    Matrix weight_velocity;
    Vector bias_velocity, gamma_velocity, beta_velocity;

    Eigen::Index in() const { return weight.cols(); }
    Eigen::Index out() const { return weight.rows(); }
};

template <typename Scalar = double>
struct Network {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    MlpConfig config;
    std::uint32_t density = 0;  // angular density the network was built for
    std::vector<Layer<Scalar>> layers;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto &l : layers)
            n += static_cast<std::size_t>(l.weight.size() + l.bias.size() + l.gamma.size() + l.beta.size());
        return n;
    }
};

/// Gradients with the same shapes as the trainable parameters.
template <typename Scalar = double>
struct Gradients {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    struct LayerGrad {
        Matrix weight;
        Vector bias, gamma, beta;
    };
    std::vector<LayerGrad> layers;
};

/// Per-layer values saved by a forward pass for backpropagation.
template <typename Scalar = double>
struct Tape {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    struct LayerTape {
        Matrix input;       // layer input (in x B)
        Matrix normalized;  // x_hat, when normalized
        Matrix linear_in;   // gamma * x_hat + beta, or the input itself
        Matrix pre_act;     // W * linear_in + b
        Vector mean, var, inv_std;
    };
    std::vector<LayerTape> layers;
    Mode mode = Mode::train;
};

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    return Scalar(1) / (Scalar(1) + std::exp(-z));
}

template <typename Scalar>
Scalar swish(Scalar z) {
    return z * sigmoid(z);
}

/// d/dz [z * sigmoid(z)] = s + z * s * (1 - s)
template <typename Scalar>
Scalar swish_derivative(Scalar z) {
    const Scalar s = sigmoid(z);
    return s + z * s * (Scalar(1) - s);
}

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; platform independent.
inline double unit_uniform(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename Scalar>
Layer<Scalar> make_layer(Eigen::Index in, Eigen::Index out, bool normalized, bool activated, std::mt19937_64 &rng) {
    Layer<Scalar> l;
    l.normalized = normalized;
    l.activated = activated;
    l.weight.resize(out, in);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    // Column-major fill order keeps the draw sequence fixed for a given shape.
    for (Eigen::Index c = 0; c < in; ++c)
        for (Eigen::Index r = 0; r < out; ++r) l.weight(r, c) = static_cast<Scalar>((2.0 * unit_uniform(rng) - 1.0) * bound);
    l.bias = Layer<Scalar>::Vector::Zero(out);
    l.weight_velocity = Layer<Scalar>::Matrix::Zero(out, in);
    l.bias_velocity = Layer<Scalar>::Vector::Zero(out);
    if (normalized) {
        l.gamma = Layer<Scalar>::Vector::Ones(in);
        l.beta = Layer<Scalar>::Vector::Zero(in);
        l.running_mean = Layer<Scalar>::Vector::Zero(in);
        l.running_var = Layer<Scalar>::Vector::Ones(in);
        l.gamma_velocity = Layer<Scalar>::Vector::Zero(in);
        l.beta_velocity = Layer<Scalar>::Vector::Zero(in);
    }
    return l;
}

/// Elementwise sigmoid over a matrix; uses Eigen's vectorized exp.
template <typename Derived>
auto sigmoid_array(const Eigen::MatrixBase<Derived> &z) {
    using Scalar = typename Derived::Scalar;
    return (Scalar(1) + (-z.array()).exp()).inverse();
}

} // namespace detail

/// Glorot-uniform weights, zero biases, identity batchnorm.
template <typename Scalar = double>
Network<Scalar> init_network(const MlpConfig &cfg, std::uint64_t seed, std::uint32_t density = 0) {
    cfg.validate();
    Network<Scalar> net;
    net.config = cfg;
    net.density = density;
    std::mt19937_64 rng(seed);
    const auto dims = cfg.effective_dims(density);
    Eigen::Index prev = cfg.input_dim;
    net.layers.push_back(detail::make_layer<Scalar>(prev, dims[0], false, true, rng));
    prev = dims[0];
    for (std::size_t i = 1; i < dims.size(); ++i) {
        for (std::uint32_t r = 0; r < cfg.block_repeat; ++r) {
            net.layers.push_back(detail::make_layer<Scalar>(prev, dims[i], true, true, rng));
            prev = dims[i];
        }
    }
    net.layers.push_back(detail::make_layer<Scalar>(prev, cfg.output_dim, false, false, rng));
    return net;
}

/// Forward pass. In train mode batchnorm uses batch statistics (B >= 2);
/// in eval mode it uses the running statistics. Running statistics are not
/// touched here; see `update_running_stats`.
template <typename Scalar>
typename Network<Scalar>::Matrix forward(const Network<Scalar> &net,
                                         const typename Network<Scalar>::Matrix &batch, Mode mode,
                                         Tape<Scalar> *tape = nullptr) {
    using Matrix = typename Network<Scalar>::Matrix;
    using Vector = typename Network<Scalar>::Vector;
    if (batch.rows() != static_cast<Eigen::Index>(net.config.input_dim))
        throw ConfigError("batch has " + std::to_string(batch.rows()) + " features, network expects " +
                          std::to_string(net.config.input_dim));
    const Eigen::Index B = batch.cols();
    require(B >= 1, "empty batch");
    if (mode == Mode::train) require(B >= 2, "train-mode batchnorm needs a batch of at least 2");
    if (tape) {
        tape->layers.assign(net.layers.size(), {});
        tape->mode = mode;
    }
    const Scalar eps = static_cast<Scalar>(net.config.bn_epsilon);

    Matrix x = batch;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto &layer = net.layers[li];
        Matrix lin_in;
        Matrix x_hat;
        Vector mean, var, inv_std;
        if (layer.normalized) {
            if (mode == Mode::train) {
                mean = x.rowwise().mean();
                var = (x.colwise() - mean).array().square().rowwise().mean().matrix();
            } else {
                mean = layer.running_mean;
                var = layer.running_var;
            }
            inv_std = (var.array() + eps).rsqrt().matrix();
            x_hat = ((x.colwise() - mean).array().colwise() * inv_std.array()).matrix();
            lin_in = ((x_hat.array().colwise() * layer.gamma.array()).colwise() + layer.beta.array()).matrix();
        } else {
            lin_in = x;
        }
        Matrix z(layer.out(), B);
        z.noalias() = layer.weight * lin_in;
        z.colwise() += layer.bias;
        Matrix a = layer.activated ? Matrix((z.array() * detail::sigmoid_array(z)).matrix()) : z;
        if (tape) {
            auto &t = tape->layers[li];
            t.input = std::move(x);
            t.normalized = std::move(x_hat);
            t.linear_in = std::move(lin_in);
            t.pre_act = std::move(z);
            t.mean = std::move(mean);
            t.var = std::move(var);
            t.inv_std = std::move(inv_std);
        }
        x = std::move(a);
    }
    return x;
}

/// Eval-mode forward over an arbitrarily large input, in chunks.
template <typename Scalar>
typename Network<Scalar>::Matrix predict(const Network<Scalar> &net, const typename Network<Scalar>::Matrix &inputs,
                                         Eigen::Index chunk = 4096) {
    typename Network<Scalar>::Matrix out(net.config.output_dim, inputs.cols());
    for (Eigen::Index c = 0; c < inputs.cols(); c += chunk) {
        const Eigen::Index n = std::min(chunk, inputs.cols() - c);
        out.middleCols(c, n) = forward(net, typename Network<Scalar>::Matrix(inputs.middleCols(c, n)), Mode::eval);
    }
    return out;
}

/// Exponential moving average of the batch statistics recorded on a train-mode tape.
template <typename Scalar>
void update_running_stats(Network<Scalar> &net, const Tape<Scalar> &tape) {
    require(tape.mode == Mode::train && tape.layers.size() == net.layers.size(), "tape does not match network");
    const Scalar m = static_cast<Scalar>(net.config.bn_momentum);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto &l = net.layers[li];
        if (!l.normalized) continue;
        l.running_mean = m * l.running_mean + (Scalar(1) - m) * tape.layers[li].mean;
        l.running_var = m * l.running_var + (Scalar(1) - m) * tape.layers[li].var;
    }
}

template <typename Scalar>
Scalar loss_mse(const typename Network<Scalar>::Matrix &pred, const typename Network<Scalar>::Matrix &labels) {
    if (pred.rows() != labels.rows() || pred.cols() != labels.cols())
        throw ConfigError("prediction and label shapes differ");
    require(pred.size() > 0, "empty batch");
    return (pred - labels).squaredNorm() / static_cast<Scalar>(pred.size());
}

/// Reverse pass for `loss_mse(forward(net, batch, mode), labels)`.
template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar> &net, const Tape<Scalar> &tape,
                           const typename Network<Scalar>::Matrix &pred,
                           const typename Network<Scalar>::Matrix &labels) {
    using Matrix = typename Network<Scalar>::Matrix;
    using Vector = typename Network<Scalar>::Vector;
    if (pred.rows() != labels.rows() || pred.cols() != labels.cols())
        throw ConfigError("prediction and label shapes differ");
    require(tape.layers.size() == net.layers.size(), "tape does not match network");
    const Eigen::Index B = pred.cols();
    const Scalar batch = static_cast<Scalar>(B);

    Gradients<Scalar> g;
    g.layers.resize(net.layers.size());
    Matrix upstream = (Scalar(2) / static_cast<Scalar>(pred.size())) * (pred - labels);
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto &layer = net.layers[li];
        const auto &t = tape.layers[li];
        auto &lg = g.layers[li];
        Matrix dz;
        if (layer.activated) {
            const auto sig = detail::sigmoid_array(t.pre_act).eval();
            dz = (upstream.array() * (sig + t.pre_act.array() * sig * (Scalar(1) - sig))).matrix();
        } else {
            dz = std::move(upstream);
        }
        lg.weight.noalias() = dz * t.linear_in.transpose();
        lg.bias = dz.rowwise().sum();
        if (li == 0) break;
        Matrix d_lin(layer.in(), B);
        d_lin.noalias() = layer.weight.transpose() * dz;
        if (!layer.normalized) {
            upstream = std::move(d_lin);
            continue;
        }
        lg.gamma = d_lin.cwiseProduct(t.normalized).rowwise().sum();
        lg.beta = d_lin.rowwise().sum();
        const Matrix d_hat = (d_lin.array().colwise() * layer.gamma.array()).matrix();
        if (tape.mode == Mode::eval) {
            upstream = (d_hat.array().colwise() * t.inv_std.array()).matrix();
            continue;
        }
        // dx = inv_std / B * (B * d_hat - sum(d_hat) - x_hat * sum(d_hat * x_hat))
        const Vector sum_d = d_hat.rowwise().sum();
        const Vector sum_dx = d_hat.cwiseProduct(t.normalized).rowwise().sum();
        Matrix dx = batch * d_hat;
        dx.colwise() -= sum_d;
        dx -= (t.normalized.array().colwise() * sum_dx.array()).matrix();
        upstream = (dx.array().colwise() * (t.inv_std.array() / batch)).matrix();
    }
    return g;
}

/// Visits each trainable parameter block with its gradient and momentum buffer.
template <typename Scalar, typename Fn>
void for_each_parameter(Network<Scalar> &net, Gradients<Scalar> &grads, Fn &&fn) {
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto &l = net.layers[li];
        auto &g = grads.layers[li];
        fn(std::span<Scalar>(l.weight.data(), static_cast<std::size_t>(l.weight.size())),
           std::span<Scalar>(g.weight.data(), static_cast<std::size_t>(g.weight.size())),
           std::span<Scalar>(l.weight_velocity.data(), static_cast<std::size_t>(l.weight_velocity.size())));
        fn(std::span<Scalar>(l.bias.data(), static_cast<std::size_t>(l.bias.size())),
           std::span<Scalar>(g.bias.data(), static_cast<std::size_t>(g.bias.size())),
           std::span<Scalar>(l.bias_velocity.data(), static_cast<std::size_t>(l.bias_velocity.size())));
        if (!l.normalized) continue;
        fn(std::span<Scalar>(l.gamma.data(), static_cast<std::size_t>(l.gamma.size())),
           std::span<Scalar>(g.gamma.data(), static_cast<std::size_t>(g.gamma.size())),
           std::span<Scalar>(l.gamma_velocity.data(), static_cast<std::size_t>(l.gamma_velocity.size())));
        fn(std::span<Scalar>(l.beta.data(), static_cast<std::size_t>(l.beta.size())),
           std::span<Scalar>(g.beta.data(), static_cast<std::size_t>(g.beta.size())),
           std::span<Scalar>(l.beta_velocity.data(), static_cast<std::size_t>(l.beta_velocity.size())));
    }
}

/// Heavy-ball momentum: v <- momentum * v + g; p <- p - lr * v.
template <typename Scalar>
void sgd_momentum_update(Network<Scalar> &net, Gradients<Scalar> &grads, Scalar lr, Scalar momentum) {
    require(grads.layers.size() == net.layers.size(), "gradient shapes do not match network");
    for_each_parameter(net, grads, [&](std::span<Scalar> p, std::span<Scalar> g, std::span<Scalar> v) {
        require(p.size() == g.size() && p.size() == v.size(), "gradient shapes do not match network");
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = momentum * v[i] + g[i];
            p[i] -= lr * v[i];
        }
    });
}

/// Worst relative error between backprop and central finite differences
/// over every trainable parameter. Denominators are floored at `floor`.
template <typename Scalar>
Scalar gradient_check(const Network<Scalar> &net, const typename Network<Scalar>::Matrix &batch,
                      const typename Network<Scalar>::Matrix &labels, Scalar h, Mode mode = Mode::train,
                      Scalar floor = Scalar(1e-6)) {
    Tape<Scalar> tape;
    const auto pred = forward(net, batch, mode, &tape);
    auto analytic = backward(net, tape, pred, labels);

    Network<Scalar> probe = net;
    Gradients<Scalar> numeric = analytic;
    std::vector<std::pair<std::span<Scalar>, std::span<Scalar>>> blocks;
    for_each_parameter(probe, numeric, [&](std::span<Scalar> p, std::span<Scalar> g, std::span<Scalar>) {
        blocks.emplace_back(p, g);
    });
    for (auto &[params, grad] : blocks) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Scalar saved = params[i];
            params[i] = saved + h;
            const Scalar up = loss_mse<Scalar>(forward(probe, batch, mode), labels);
            params[i] = saved - h;
            const Scalar down = loss_mse<Scalar>(forward(probe, batch, mode), labels);
            params[i] = saved;
            grad[i] = (up - down) / (Scalar(2) * h);
        }
    }

    Scalar worst = 0;
    Network<Scalar> scratch = net;
    std::vector<std::span<Scalar>> analytic_blocks, numeric_blocks;
    for_each_parameter(scratch, analytic,
                       [&](std::span<Scalar>, std::span<Scalar> g, std::span<Scalar>) { analytic_blocks.push_back(g); });
    for_each_parameter(scratch, numeric,
                       [&](std::span<Scalar>, std::span<Scalar> g, std::span<Scalar>) { numeric_blocks.push_back(g); });
    for (std::size_t b = 0; b < analytic_blocks.size(); ++b) {
        for (std::size_t i = 0; i < analytic_blocks[b].size(); ++i) {
            const Scalar a = analytic_blocks[b][i];
            const Scalar n = numeric_blocks[b][i];
            const Scalar denom = std::max({std::abs(a), std::abs(n), floor});
            worst = std::max(worst, std::abs(a - n) / denom);
        }
    }
    return worst;
}

} // namespace trajnet::mlp
