#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "trajnet/mlp.hpp"
#include "trajnet/model_io.hpp"

using namespace trajnet;
using namespace trajnet::mlp;
using Matrix = Network<double>::Matrix;

namespace {

MlpConfig small_config(std::vector<std::uint32_t> dims, std::uint32_t repeat) {
    MlpConfig c;
    c.layer_dims = std::move(dims);
    c.block_repeat = repeat;
    return c;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    return m;
}

// Perturbs batchnorm parameters away from identity so gradients reach them.
void jitter(Network<double> &net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto &l : net.layers) {
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = u(rng);
        if (!l.normalized) continue;
        for (Eigen::Index i = 0; i < l.gamma.size(); ++i) {
            l.gamma(i) = 1.0 + u(rng);
            l.beta(i) = u(rng);
            l.running_mean(i) = u(rng);
            l.running_var(i) = 1.0 + u(rng);
        }
    }
}

double swish_ref(double z) { return z / (1.0 + std::exp(-z)); }

} // namespace

TEST(Activation, SwishValues) {
    EXPECT_EQ(swish(0.0), 0.0);
    EXPECT_NEAR(swish(1.0), 0.7310585786300049, 1e-15);
    EXPECT_NEAR(swish(-2.0), -0.23840584404423515, 1e-15);
    for (double z : {-5.0, -1.0, -0.1, 0.0, 0.3, 2.0, 7.0}) {
        const double h = 1e-6;
        const double fd = (swish(z + h) - swish(z - h)) / (2 * h);
        EXPECT_NEAR(swish_derivative(z), fd, 1e-8) << z;
    }
}

TEST(Init, ShapeChainMinimal) {
    const auto net = init_network<double>(small_config({4}, 1), 1);
    ASSERT_EQ(net.layers.size(), 2u);
    EXPECT_EQ(net.layers[0].in(), 6);
    EXPECT_EQ(net.layers[0].out(), 4);
    EXPECT_EQ(net.layers[1].in(), 4);
    EXPECT_EQ(net.layers[1].out(), 1);
    EXPECT_FALSE(net.layers[0].normalized);
    EXPECT_FALSE(net.layers[1].normalized);
    EXPECT_TRUE(net.layers[0].activated);
    EXPECT_FALSE(net.layers[1].activated);
}

TEST(Init, ShapeChainWithRepeats) {
    const auto net = init_network<double>(small_config({8, 16, 4}, 2), 1);
    // linear 6->8, 2x[bn, 8->16 / 16->16], 2x[bn, 16->4 / 4->4], linear 4->1
    ASSERT_EQ(net.layers.size(), 6u);
    const std::vector<std::pair<int, int>> shapes{{6, 8}, {8, 16}, {16, 16}, {16, 4}, {4, 4}, {4, 1}};
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        EXPECT_EQ(net.layers[i].in(), shapes[i].first) << i;
        EXPECT_EQ(net.layers[i].out(), shapes[i].second) << i;
        const bool bn = i > 0 && i + 1 < shapes.size();
        EXPECT_EQ(net.layers[i].normalized, bn) << i;
        if (bn) {
            EXPECT_EQ(net.layers[i].gamma.size(), shapes[i].first);
        }
    }
    EXPECT_EQ(net.parameter_count(), std::size_t{6 * 8 + 8 + (8 * 16 + 16 + 16) + (16 * 16 + 16 + 32) + (16 * 4 + 4 + 32) +
                                                 (4 * 4 + 4 + 8) + 4 + 1});
}

TEST(Init, DensityRuleAppendsWideBlock) {
    auto cfg = small_config({4}, 1);
    EXPECT_EQ(cfg.effective_dims(4096), (std::vector<std::uint32_t>{4}));
    EXPECT_EQ(cfg.effective_dims(4097), (std::vector<std::uint32_t>{4, 8192}));
    cfg.append_8192_when_density_exceeds_4096 = false;
    EXPECT_EQ(cfg.effective_dims(8000), (std::vector<std::uint32_t>{4}));
    const auto big = MlpConfig::full_size();
    EXPECT_EQ(big.layer_dims.size(), 9u);
    EXPECT_EQ(big.block_repeat, 6u);
}

TEST(Init, DeterministicGivenSeed) {
    const auto a = init_network<double>(MlpConfig{}, 99);
    const auto b = init_network<double>(MlpConfig{}, 99);
    const auto c = init_network<double>(MlpConfig{}, 100);
    ASSERT_EQ(a.layers.size(), b.layers.size());
    for (std::size_t i = 0; i < a.layers.size(); ++i) EXPECT_EQ(a.layers[i].weight, b.layers[i].weight);
    EXPECT_NE(a.layers[0].weight, c.layers[0].weight);
}

TEST(Init, GlorotStatistics) {
    const auto net = init_network<double>(small_config({8, 256, 256}, 1), 5);
    const auto &w = net.layers[2].weight;  // 256 x 256
    const double bound = std::sqrt(6.0 / 512.0);
    const double n = static_cast<double>(w.size());
    EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
    const double mean = w.mean();
    const double sigma = bound / std::sqrt(3.0);
    EXPECT_LT(std::abs(mean), 3.0 * sigma / std::sqrt(n));
    const double var = (w.array() - mean).square().mean();
    EXPECT_NEAR(var, sigma * sigma, 0.05 * sigma * sigma);
    for (const auto &l : net.layers) {
        EXPECT_TRUE(l.bias.isZero());
        if (l.normalized) {
            EXPECT_TRUE(l.gamma.isOnes());
            EXPECT_TRUE(l.beta.isZero());
            EXPECT_TRUE(l.running_mean.isZero());
            EXPECT_TRUE(l.running_var.isOnes());
        }
    }
}

TEST(Init, RejectsInvalidConfig) {
    EXPECT_THROW(init_network<double>(small_config({}, 1), 0), ConfigError);
    EXPECT_THROW(init_network<double>(small_config({0}, 1), 0), ConfigError);
    EXPECT_THROW(init_network<double>(small_config({4}, 0), 0), ConfigError);
}

TEST(Forward, HandComputedTinyNetwork) {
    auto net = init_network<double>(small_config({2, 2}, 1), 0);
    ASSERT_EQ(net.layers.size(), 3u);
    net.layers[0].weight.setZero();
    net.layers[0].weight(0, 0) = 1.0;
    net.layers[0].weight(1, 1) = 1.0;
    net.layers[0].bias << 0.5, -0.25;
    net.layers[1].weight = Matrix::Identity(2, 2);
    net.layers[2].weight << 1.0, 1.0;
    Matrix batch = Matrix::Zero(6, 2);
    batch.col(0).head(2) << 1.0, 2.0;
    batch.col(1).head(2) << -1.0, 0.5;

    const double eps = net.config.bn_epsilon;
    const double s = 1.0 / std::sqrt(1.0 + eps);
    Matrix expected(1, 2);
    for (int c = 0; c < 2; ++c) {
        const double a0 = swish_ref(batch(0, c) + 0.5);
        const double a1 = swish_ref(batch(1, c) - 0.25);
        expected(0, c) = swish_ref(a0 * s) + swish_ref(a1 * s);
    }
    const auto out = forward(net, batch, Mode::eval);
    EXPECT_NEAR(out(0, 0), expected(0, 0), 1e-14);
    EXPECT_NEAR(out(0, 1), expected(0, 1), 1e-14);

    // Train mode with two samples: each feature normalizes to -1/+1 (up to eps).
    const auto train_out = forward(net, batch, Mode::train);
    for (int c = 0; c < 2; ++c) {
        double v = 0.0;
        for (int f = 0; f < 2; ++f) {
            const double a = swish_ref(batch(f, 0) + (f ? -0.25 : 0.5));
            const double b = swish_ref(batch(f, 1) + (f ? -0.25 : 0.5));
            const double mean = 0.5 * (a + b);
            const double var = 0.25 * (a - b) * (a - b);
            v += swish_ref(((c ? b : a) - mean) / std::sqrt(var + eps));
        }
        EXPECT_NEAR(train_out(0, c), v, 1e-12);
    }
}

TEST(Forward, EvalModeIsPure) {
    auto net = init_network<double>(small_config({8, 8}, 2), 3);
    jitter(net, 4);
    const auto batch = random_matrix(6, 5, 1);
    EXPECT_EQ(forward(net, batch, Mode::eval), forward(net, batch, Mode::eval));
    // Per-sample in eval mode: a sub-batch gives the same values.
    EXPECT_NEAR(forward(net, batch.leftCols(1), Mode::eval)(0, 0), forward(net, batch, Mode::eval)(0, 0), 1e-14);
}

TEST(Forward, RejectsBadShapes) {
    const auto net = init_network<double>(small_config({4, 4}, 1), 3);
    EXPECT_THROW(forward(net, random_matrix(5, 3, 1), Mode::eval), ConfigError);
    EXPECT_THROW(forward(net, random_matrix(6, 1, 1), Mode::train), ConfigError);
    EXPECT_NO_THROW(forward(net, random_matrix(6, 1, 1), Mode::eval));
}

TEST(Forward, FrozenStatisticsMakeModesAgreeBitwise) {
    auto net = init_network<double>(small_config({8, 16, 8}, 2), 11);
    jitter(net, 12);
    const auto batch = random_matrix(6, 32, 13);
    Tape<double> tape;
    const auto train_out = forward(net, batch, Mode::train, &tape);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].normalized) continue;
        net.layers[i].running_mean = tape.layers[i].mean;
        net.layers[i].running_var = tape.layers[i].var;
    }
    EXPECT_EQ(forward(net, batch, Mode::eval), train_out);
}

TEST(RunningStats, ExponentialMovingAverage) {
    auto net = init_network<double>(small_config({4, 4}, 1), 1);
    const auto batch = random_matrix(6, 16, 2);
    Tape<double> tape;
    forward(net, batch, Mode::train, &tape);
    update_running_stats(net, tape);
    const auto &l = net.layers[1];
    for (Eigen::Index i = 0; i < 4; ++i) {
        EXPECT_EQ(l.running_mean(i), (1.0 - 0.99) * tape.layers[1].mean(i));
        EXPECT_EQ(l.running_var(i), 0.99 + (1.0 - 0.99) * tape.layers[1].var(i));
        EXPECT_GE(l.running_var(i), 0.0);
    }
    Tape<double> eval_tape;
    forward(net, batch, Mode::eval, &eval_tape);
    EXPECT_THROW(update_running_stats(net, eval_tape), ConfigError);
}

TEST(Loss, Examples) {
    Matrix a(1, 2), b(1, 2);
    a << 0.0, 1.0;
    b << 1.0, 1.0;
    EXPECT_DOUBLE_EQ(loss_mse<double>(a, b), 0.5);
    EXPECT_EQ(loss_mse<double>(a, a), 0.0);
    Matrix c = a.array() + 0.3;
    EXPECT_NEAR(loss_mse<double>(c, a), 0.09, 1e-15);
    EXPECT_THROW(loss_mse<double>(a, Matrix(1, 3)), ConfigError);
}

TEST(Backward, PerfectFitHasZeroOutputBiasGradient) {
    auto net = init_network<double>(small_config({4, 4}, 1), 2);
    const auto batch = random_matrix(6, 8, 3);
    Tape<double> tape;
    const auto pred = forward(net, batch, Mode::train, &tape);
    const auto g = backward(net, tape, pred, pred);
    EXPECT_EQ(g.layers.back().bias(0), 0.0);
    for (const auto &lg : g.layers) EXPECT_TRUE(lg.weight.isZero());
}

TEST(Backward, SingleLinearLayerClosedForm) {
    Network<double> net;
    net.config = small_config({1}, 1);
    std::mt19937_64 rng(1);
    net.layers.push_back(detail::make_layer<double>(6, 1, false, false, rng));
    const auto batch = random_matrix(6, 5, 4);
    const auto labels = random_matrix(1, 5, 5);
    Tape<double> tape;
    const auto pred = forward(net, batch, Mode::train, &tape);
    const auto g = backward(net, tape, pred, labels);
    const Matrix expected = 2.0 * (pred - labels) * batch.transpose() / 5.0;
    EXPECT_LT((g.layers[0].weight - expected).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(g.layers[0].bias(0), 2.0 * (pred - labels).sum() / 5.0, 1e-10);
    EXPECT_LT(gradient_check(net, batch, labels, 1e-5), 1e-8);
}

TEST(Backward, ZeroInputGivesZeroFirstLayerWeightGradient) {
    auto net = init_network<double>(small_config({4, 4}, 1), 2);
    const Matrix batch = Matrix::Zero(6, 4);
    const Matrix labels = Matrix::Zero(1, 4);
    Tape<double> tape;
    const auto pred = forward(net, batch, Mode::eval, &tape);
    const auto g = backward(net, tape, pred, labels);
    EXPECT_TRUE(g.layers[0].weight.isZero());
}

TEST(Backward, GradientCheckTrainMode) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto net = init_network<double>(small_config({6, 8, 5}, 2), seed);
        jitter(net, seed + 100);
        const auto batch = random_matrix(6, 16, seed + 200);
        const auto labels = random_matrix(1, 16, seed + 300, 0.5);
        EXPECT_LT(gradient_check(net, batch, labels, 1e-5), 1e-4) << seed;
    }
}

TEST(Backward, GradientCheckEvalMode) {
    auto net = init_network<double>(small_config({6, 8, 5}, 2), 7);
    jitter(net, 8);
    const auto batch = random_matrix(6, 9, 9);
    const auto labels = random_matrix(1, 9, 10);
    EXPECT_LT(gradient_check(net, batch, labels, 1e-5, Mode::eval), 1e-4);
}

TEST(Backward, DuplicatedBatchGivesSameGradients) {
    auto net = init_network<double>(small_config({6, 8}, 2), 21);
    jitter(net, 22);
    const auto batch = random_matrix(6, 10, 23);
    const auto labels = random_matrix(1, 10, 24);
    Matrix batch2(6, 20), labels2(1, 20);
    batch2 << batch, batch;
    labels2 << labels, labels;
    Tape<double> t1, t2;
    const auto p1 = forward(net, batch, Mode::train, &t1);
    const auto p2 = forward(net, batch2, Mode::train, &t2);
    const auto g1 = backward(net, t1, p1, labels);
    const auto g2 = backward(net, t2, p2, labels2);
    for (std::size_t i = 0; i < g1.layers.size(); ++i) {
        EXPECT_LT((g1.layers[i].weight - g2.layers[i].weight).cwiseAbs().maxCoeff(), 1e-12) << i;
        EXPECT_LT((g1.layers[i].bias - g2.layers[i].bias).cwiseAbs().maxCoeff(), 1e-12) << i;
        if (net.layers[i].normalized) {
            EXPECT_LT((g1.layers[i].gamma - g2.layers[i].gamma).cwiseAbs().maxCoeff(), 1e-12) << i;
            EXPECT_LT((g1.layers[i].beta - g2.layers[i].beta).cwiseAbs().maxCoeff(), 1e-12) << i;
        }
    }
}

namespace {

Gradients<double> constant_gradients(const Network<double> &net, double value) {
    Gradients<double> g;
    for (const auto &l : net.layers) {
        typename Gradients<double>::LayerGrad lg;
        lg.weight = Matrix::Constant(l.weight.rows(), l.weight.cols(), value);
        lg.bias = Network<double>::Vector::Constant(l.bias.size(), value);
        lg.gamma = Network<double>::Vector::Constant(l.gamma.size(), value);
        lg.beta = Network<double>::Vector::Constant(l.beta.size(), value);
        g.layers.push_back(lg);
    }
    return g;
}

} // namespace

TEST(Optimizer, TwoStepMomentumDisplacement) {
    const auto start = init_network<double>(small_config({4, 4}, 1), 3);
    auto net = start;
    const double g = 0.37;
    auto grads = constant_gradients(net, g);
    sgd_momentum_update(net, grads, 1e-2, 0.9);
    sgd_momentum_update(net, grads, 1e-2, 0.9);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Matrix d = net.layers[i].weight - start.layers[i].weight;
        EXPECT_LT((d.array() + 0.029 * g).abs().maxCoeff(), 1e-12) << i;
        if (net.layers[i].normalized) {
            EXPECT_LT((net.layers[i].gamma.array() - 1.0 + 0.029 * g).abs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Optimizer, ZeroMomentumIsPlainDescent) {
    const auto start = init_network<double>(small_config({4}, 1), 3);
    auto net = start;
    auto grads = constant_gradients(net, 2.0);
    sgd_momentum_update(net, grads, 0.5, 0.0);
    sgd_momentum_update(net, grads, 0.5, 0.0);
    EXPECT_LT((net.layers[0].weight.array() - start.layers[0].weight.array() + 2.0).abs().maxCoeff(), 1e-12);
}

TEST(Optimizer, BufferDecaysWithZeroGradient) {
    auto net = init_network<double>(small_config({4}, 1), 3);
    auto push = constant_gradients(net, 1.0);
    sgd_momentum_update(net, push, 1e-2, 0.9);
    auto zero = constant_gradients(net, 0.0);
    double prev = net.layers[0].weight_velocity(0, 0);
    for (int i = 0; i < 50; ++i) {
        const double before = net.layers[0].weight(0, 0);
        sgd_momentum_update(net, zero, 1e-2, 0.9);
        const double v = net.layers[0].weight_velocity(0, 0);
        EXPECT_NEAR(v, 0.9 * prev, 1e-15);
        EXPECT_NEAR(net.layers[0].weight(0, 0), before - 1e-2 * v, 1e-15);
        prev = v;
    }
}

TEST(Optimizer, ShapeMismatchRejected) {
    auto net = init_network<double>(small_config({4}, 1), 3);
    Gradients<double> empty;
    EXPECT_THROW(sgd_momentum_update(net, empty, 1e-2, 0.9), ConfigError);
}

TEST(ModelIo, RoundTripIsExact) {
    auto net = init_network<double>(small_config({4, 8}, 2), 31, 500);
    jitter(net, 32);
    std::stringstream ss;
    write_model(ss, net, 31);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "TMLP");
    const auto loaded = read_model<double>(ss);
    EXPECT_EQ(loaded.seed, 31u);
    EXPECT_EQ(loaded.net.density, 500u);
    EXPECT_EQ(loaded.net.config, net.config);
    const auto batch = random_matrix(6, 7, 33);
    EXPECT_EQ(forward(loaded.net, batch, Mode::eval), forward(net, batch, Mode::eval));
    std::stringstream again;
    write_model(again, loaded.net, 31);
    EXPECT_EQ(again.str(), bytes);
}

TEST(ModelIo, FloatNetworkRoundTrip) {
    const auto net = init_network<float>(small_config({4, 8}, 1), 1, 200);
    std::stringstream ss;
    write_model(ss, net, 1);
    const auto loaded = read_model<float>(ss);
    for (std::size_t i = 0; i < net.layers.size(); ++i) EXPECT_EQ(loaded.net.layers[i].weight, net.layers[i].weight);
}

TEST(ModelIo, RejectsCorruptInput) {
    const auto net = init_network<double>(small_config({4}, 1), 1);
    std::stringstream ss;
    write_model(ss, net, 1);
    const std::string bytes = ss.str();
    std::stringstream truncated(bytes.substr(0, bytes.size() - 1));
    EXPECT_THROW(read_model<double>(truncated), FormatError);
    std::stringstream wrong("TDST\x01\0\0\0");
    EXPECT_THROW(read_model<double>(wrong), FormatError);
}
