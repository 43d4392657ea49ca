// Metrics for angle predictions on a baked grid.
//
// The Percentage Angular Error expresses an angle error in units of the
// uniform grid step e_d = pi / s; reports multiply it by 100.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "trajnet/dataset.hpp"
#include "trajnet/grid.hpp"
#include "trajnet/mlp.hpp"
#include "trajnet/train.hpp"

namespace trajnet {

/// e_d = pi / s.
inline double pairwise_error(std::uint32_t density) {
    require(density >= 1, "density must be >= 1");
    return std::numbers::pi / static_cast<double>(density);
}

inline double percentage_angular_error(double y_true, double y_pred, double e_d) {
    require(e_d > 0.0, "e_d must be positive");
    return std::abs(y_true - y_pred) / e_d;
}

struct GridQuantization {
    std::uint32_t index = 0;
    double angle = 0.0;
};

/// Nearest baked angle (endpoint-inclusive grid). Exact midpoints go to the
/// lower index; predictions outside [0, pi] clamp to the ends.
inline GridQuantization quantize_to_grid(double y_pred, std::uint32_t density) {
    require(density >= 2, "density must be >= 2");
    require(std::isfinite(y_pred), "prediction must be finite");
    const std::uint32_t last = density - 1;
    std::uint32_t k = 0;
    if (y_pred >= std::numbers::pi) {
        k = last;
    } else if (y_pred > 0.0) {
        const double pos = y_pred * static_cast<double>(last) / std::numbers::pi;
        k = static_cast<std::uint32_t>(std::min<double>(std::floor(pos), last));
        // Compare against the neighbours' actual angles so ties use the same
        // values grid_angle produces.
        if (k < last) {
            const double lo = y_pred - grid_angle(k, density);
            const double hi = grid_angle(k + 1, density) - y_pred;
            if (hi < lo) ++k;
        }
    }
    return {k, grid_angle(k, density)};
}

struct ClosedLoopResult {
    Vec2 target;
    double predicted_angle = 0.0;  // radians, after optional quantization
    double miss_distance = std::numeric_limits<double>::quiet_NaN();
    std::string error;  // empty on success

    bool ok() const { return error.empty(); }
};

struct MetricsReport {
    std::uint32_t density = 0;
    double e_d = 0.0;
    std::size_t samples = 0;
    double mse = 0.0;  // normalized label units, as in training
    double pae_mean = 0.0;  // percent of e_d
    double pae_median = 0.0;
    double pae_p95 = 0.0;
    double quantization_accuracy = 0.0;
    std::vector<ClosedLoopResult> closed_loop;
};

namespace detail {

/// Nearest-rank percentile of an ascending-sorted vector.
inline double percentile_sorted(const std::vector<double> &sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

inline double median_sorted(const std::vector<double> &sorted) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = sorted.size();
    return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

} // namespace detail

/// Metrics from normalized predictions (angle / pi) against a dataset.
inline MetricsReport evaluate_predictions(std::span<const double> predicted_labels, const Dataset &ds,
                                          std::uint32_t density) {
    require(ds.density == density, "dataset density " + std::to_string(ds.density) +
                                       " does not match requested density " + std::to_string(density));
    require(predicted_labels.size() == ds.size(), "prediction count does not match dataset");
    require(!ds.empty(), "cannot evaluate on an empty dataset");
    MetricsReport r;
    r.density = density;
    r.e_d = pairwise_error(density);
    r.samples = ds.size();
    std::vector<double> pae(ds.size());
    double sq = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto &s = ds.samples[i];
        const double diff = predicted_labels[i] - s.label;
        sq += diff * diff;
        const double y_true = s.label * std::numbers::pi;
        const double y_pred = predicted_labels[i] * std::numbers::pi;
        pae[i] = percentage_angular_error(y_true, y_pred, r.e_d);
        if (quantize_to_grid(y_pred, density).index == s.angle_index) ++correct;
    }
    r.mse = sq / static_cast<double>(ds.size());
    double total = 0.0;
    for (double v : pae) total += v;
    r.pae_mean = 100.0 * total / static_cast<double>(pae.size());
    std::ranges::sort(pae);
    r.pae_median = 100.0 * detail::median_sorted(pae);
    r.pae_p95 = 100.0 * detail::percentile_sorted(pae, 0.95);
    r.quantization_accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    return r;
}

template <typename Scalar>
std::vector<double> predict_labels(const mlp::Network<Scalar> &net, const Dataset &ds) {
    const auto m = mlp::to_matrices<Scalar>(ds);
    const auto out = mlp::predict(net, m.features);
    std::vector<double> labels(ds.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<double>(out(0, static_cast<Eigen::Index>(i)));
    return labels;
}

/// Eval-mode metrics of a network over a dataset baked at `density`.
template <typename Scalar>
MetricsReport evaluate_model(const mlp::Network<Scalar> &net, const Dataset &ds, std::uint32_t density) {
    require(net.density == 0 || net.density == density,
            "model was trained at density " + std::to_string(net.density) + ", requested " + std::to_string(density));
    return evaluate_predictions(predict_labels(net, ds), ds, density);
}

/// Shortest distance from `target` to the polyline through `traj`.
inline double polyline_distance(const Trajectory &traj, const Vec2 &target) {
    const auto &p = traj.points;
    if (p.size() == 1) return distance(p[0], target);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < p.size(); ++i) best = std::min(best, point_segment_distance(target, p[i], p[i + 1]));
    return best;
}

/// Re-simulates predicted launch angles and measures how close each
/// trajectory passes to its target. Failures are recorded per target.
inline std::vector<ClosedLoopResult> closed_loop_from_angles(std::span<const Vec2> targets,
                                                             std::span<const double> angles,
                                                             const SimConfig &cfg, const Profile &profile,
                                                             unsigned threads = 1) {
    require(targets.size() == angles.size(), "one angle per target is required");
    std::vector<ClosedLoopResult> out(targets.size());
    parallel_for(targets.size(), threads, [&](std::size_t i) {
        auto &r = out[i];
        r.target = targets[i];
        r.predicted_angle = angles[i];
        try {
            r.miss_distance = polyline_distance(simulate(angles[i], cfg, profile), targets[i]);
        } catch (const std::exception &err) {
            r.error = err.what();
        }
    });
    return out;
}

template <typename Scalar>
std::vector<ClosedLoopResult> closed_loop_miss(const mlp::Network<Scalar> &net, std::span<const Vec2> targets,
                                               double r_max, const SimConfig &cfg, const Profile &profile,
                                               bool quantize = true, unsigned threads = 1) {
    typename mlp::Network<Scalar>::Matrix inputs(kFeatureCount, static_cast<Eigen::Index>(targets.size()));
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto f = features_for_point(targets[i], r_max);
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            inputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = static_cast<Scalar>(f[k]);
    }
    const auto out = targets.empty() ? inputs : mlp::predict(net, inputs);
    std::vector<double> angles(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double raw = std::clamp(static_cast<double>(out(0, static_cast<Eigen::Index>(i))) * std::numbers::pi, 0.0,
                                      std::numbers::pi);
        angles[i] = quantize ? quantize_to_grid(raw, cfg.angular_density).angle : raw;
    }
    return closed_loop_from_angles(targets, angles, cfg, profile, threads);
}

/// Fraction of successful closed-loop results with miss <= bound.
inline double closed_loop_fraction_within(const std::vector<ClosedLoopResult> &results, double bound) {
    if (results.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto &r : results) n += (r.ok() && r.miss_distance <= bound) ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(results.size());
}

inline void write_report_table(std::ostream &os, const MetricsReport &r) {
    os << std::setprecision(6);
    os << "density               " << r.density << '\n'
       << "e_d (rad)             " << r.e_d << '\n'
       << "samples               " << r.samples << '\n'
       << "mse                   " << r.mse << '\n'
       << "pae mean (%)          " << r.pae_mean << '\n'
       << "pae median (%)        " << r.pae_median << '\n'
       << "pae p95 (%)           " << r.pae_p95 << '\n'
       << "quantization accuracy " << r.quantization_accuracy << '\n';
    if (!r.closed_loop.empty()) {
        std::vector<double> misses;
        for (const auto &c : r.closed_loop)
            if (c.ok()) misses.push_back(c.miss_distance);
        std::ranges::sort(misses);
        os << "closed-loop targets   " << r.closed_loop.size() << '\n'
           << "closed-loop median m  " << detail::median_sorted(misses) << '\n'
           << "closed-loop p95 m     " << detail::percentile_sorted(misses, 0.95) << '\n';
    }
}

/// JSON lines: one object per metric, then one per closed-loop target.
inline void write_report_jsonl(std::ostream &os, const MetricsReport &r) {
    using nlohmann::json;
    const std::pair<const char *, json> metrics[] = {
        {"density", r.density}, {"e_d", r.e_d}, {"samples", r.samples}, {"mse", r.mse},
        {"pae_mean", r.pae_mean}, {"pae_median", r.pae_median}, {"pae_p95", r.pae_p95},
        {"quantization_accuracy", r.quantization_accuracy},
    };
    for (const auto &[name, value] : metrics) os << json{{"metric", name}, {"value", value}}.dump() << '\n';
    for (const auto &c : r.closed_loop) {
        json row{{"target_x", c.target.x}, {"target_y", c.target.y}, {"angle", c.predicted_angle}};
        if (c.ok()) row["miss"] = c.miss_distance;
        else row["error"] = c.error;
        os << row.dump() << '\n';
    }
}

inline void write_report_csv(std::ostream &os, const MetricsReport &r) {
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "kind,name,value\n";
    os << "metric,density," << r.density << '\n'
       << "metric,e_d," << r.e_d << '\n'
       << "metric,samples," << r.samples << '\n'
       << "metric,mse," << r.mse << '\n'
       << "metric,pae_mean," << r.pae_mean << '\n'
       << "metric,pae_median," << r.pae_median << '\n'
       << "metric,pae_p95," << r.pae_p95 << '\n'
       << "metric,quantization_accuracy," << r.quantization_accuracy << '\n';
    if (r.closed_loop.empty()) return;
    os << "closed_loop,target_x,target_y,angle,miss\n";
    for (const auto &c : r.closed_loop)
        os << "closed_loop," << c.target.x << ',' << c.target.y << ',' << c.predicted_angle << ','
           << (c.ok() ? c.miss_distance : std::numeric_limits<double>::quiet_NaN()) << '\n';
}

} // namespace trajnet
