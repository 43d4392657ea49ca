// Minibatch training loop with learning-rate reduction on plateaus and
// early stopping, both keyed to the epoch training loss.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "trajnet/dataset.hpp"
#include "trajnet/mlp.hpp"

namespace trajnet::mlp {

struct TrainingConfig {
    std::uint32_t batch_size = 1024;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    /// Relative improvement an epoch loss needs over the best so far to
    /// count as progress, for both callbacks.
    double plateau_min_delta = 1e-2;
    std::uint32_t plateau_patience = 5;
    double lr_reduce_factor = 0.1;
    double min_learning_rate = 1e-7;
    std::uint32_t early_stop_patience = 15;
    std::uint32_t max_epochs = 200;
    std::uint64_t seed = 0;
    bool record_wall_time = true;

    void validate() const {
        require(batch_size >= 2, "batch_size must be >= 2");
        require(learning_rate > 0.0, "learning_rate must be positive");
        require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
        require(plateau_min_delta >= 0.0, "plateau_min_delta must be non-negative");
        require(plateau_patience >= 1 && early_stop_patience >= 1, "patience must be >= 1");
        require(lr_reduce_factor > 0.0 && lr_reduce_factor < 1.0, "lr_reduce_factor must lie in (0, 1)");
        require(max_epochs >= 1, "max_epochs must be >= 1");
    }
};

struct EpochRecord {
    std::uint32_t epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double wall_seconds = 0.0;
};

enum class StopReason { early_stopping, max_epochs };

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    StopReason stop_reason = StopReason::max_epochs;
    bool parallel = false;  // bitwise reproducibility holds only when false
};

/// Plateau and early-stopping bookkeeping, separated from the loop for testing.
class PlateauSchedule {
  public:
    explicit PlateauSchedule(const TrainingConfig &tc) : tc_(tc), lr_(tc.learning_rate) {}

    /// Feeds one epoch loss. Returns false when training should stop.
    bool observe(double loss) {
        if (loss < best_ * (1.0 - tc_.plateau_min_delta)) {
            best_ = loss;
            plateau_wait_ = 0;
            stop_wait_ = 0;
            return true;
        }
        ++stop_wait_;
        if (++plateau_wait_ >= tc_.plateau_patience) {
            plateau_wait_ = 0;
            if (lr_ * tc_.lr_reduce_factor >= tc_.min_learning_rate) lr_ *= tc_.lr_reduce_factor;
        }
        return stop_wait_ < tc_.early_stop_patience;
    }

    double learning_rate() const { return lr_; }
    double best() const { return best_; }

  private:
    TrainingConfig tc_;
    double lr_;
    double best_ = std::numeric_limits<double>::infinity();
    std::uint32_t plateau_wait_ = 0;
    std::uint32_t stop_wait_ = 0;
};

template <typename Scalar = double>
struct DatasetMatrices {
    typename Network<Scalar>::Matrix features;  // 6 x N
    typename Network<Scalar>::Matrix labels;    // 1 x N
};

template <typename Scalar = double>
DatasetMatrices<Scalar> to_matrices(const Dataset &ds) {
    DatasetMatrices<Scalar> m;
    const auto n = static_cast<Eigen::Index>(ds.size());
    m.features.resize(kFeatureCount, n);
    m.labels.resize(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &s = ds.samples[static_cast<std::size_t>(i)];
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            m.features(static_cast<Eigen::Index>(f), i) = static_cast<Scalar>(s.features[f]);
        m.labels(0, i) = static_cast<Scalar>(s.label);
    }
    return m;
}

/// One optimizer step on a batch; returns the batch loss.
template <typename Scalar>
Scalar train_step(Network<Scalar> &net, const typename Network<Scalar>::Matrix &batch,
                  const typename Network<Scalar>::Matrix &labels, Scalar lr, Scalar momentum) {
    Tape<Scalar> tape;
    const auto pred = forward(net, batch, Mode::train, &tape);
    const Scalar loss = loss_mse<Scalar>(pred, labels);
    auto grads = backward(net, tape, pred, labels);
    update_running_stats(net, tape);
    sgd_momentum_update(net, grads, lr, momentum);
    return loss;
}

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Trains in place. Each epoch visits a fresh seeded permutation of the
/// samples; a trailing batch smaller than 2 is folded into the previous one.
template <typename Scalar>
TrainingHistory train(Network<Scalar> &net, const Dataset &ds, const TrainingConfig &tc,
                      const EpochCallback &on_epoch = {}) {
    tc.validate();
    require(!ds.empty(), "cannot train on an empty dataset");
    require(tc.batch_size <= ds.size(), "batch_size exceeds dataset size");
    const auto data = to_matrices<Scalar>(ds);
    const std::size_t n = ds.size();

    TrainingHistory history;
    PlateauSchedule schedule(tc);
    std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    typename Network<Scalar>::Matrix batch, labels;
    const auto start = std::chrono::steady_clock::now();

    for (std::uint32_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        seeded_shuffle(order, rng());
        const double lr = schedule.learning_rate();
        double weighted = 0.0;
        for (std::size_t begin = 0; begin < n;) {
            std::size_t end = std::min(n, begin + tc.batch_size);
            if (n - end < 2) end = n;
            const auto b = static_cast<Eigen::Index>(end - begin);
            batch.resize(data.features.rows(), b);
            labels.resize(1, b);
            for (Eigen::Index j = 0; j < b; ++j) {
                const Eigen::Index src = order[begin + static_cast<std::size_t>(j)];
                batch.col(j) = data.features.col(src);
                labels(0, j) = data.labels(0, src);
            }
            const Scalar loss = train_step(net, batch, labels, static_cast<Scalar>(lr), static_cast<Scalar>(tc.momentum));
            if (!std::isfinite(static_cast<double>(loss)))
                throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + " at lr " + std::to_string(lr));
            weighted += static_cast<double>(loss) * static_cast<double>(b);
            begin = end;
        }
        EpochRecord rec{epoch, weighted / static_cast<double>(n), lr, 0.0};
        if (tc.record_wall_time)
            rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (!schedule.observe(rec.loss)) {
            history.stop_reason = StopReason::early_stopping;
            break;
        }
    }
    return history;
}

inline void write_history_csv(std::ostream &os, const TrainingHistory &h) {
    os << "epoch,loss,lr,wall_seconds\n";
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto &e : h.epochs) os << e.epoch << ',' << e.loss << ',' << e.lr << ',' << e.wall_seconds << '\n';
}

} // namespace trajnet::mlp
