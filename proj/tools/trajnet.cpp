// trajnet: bake trajectory grids, build datasets, train and evaluate the
// angle network, and query the lookup baseline.
//
// Exit codes: 0 success, 1 domain failure (miss / out of envelope),
// 2 usage or configuration error, 3 I/O or format error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"

#include "trajnet/dataset.hpp"
#include "trajnet/eval.hpp"
#include "trajnet/grid.hpp"
#include "trajnet/grid_io.hpp"
#include "trajnet/model_io.hpp"
#include "trajnet/run_config.hpp"
#include "trajnet/solver.hpp"
#include "trajnet/train.hpp"

namespace {

using namespace trajnet;

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

const std::vector<std::pair<std::string, std::string>> kPhysicsKeys = {
    {"profile", "paper-verbatim | plausible-rifle | vacuum"},
    {"mass", "projectile mass override (kg)"},
    {"drag_coeff", "drag coefficient override"},
    {"ref_area", "reference area override (m^2)"},
    {"muzzle_speed", "muzzle speed override (m/s)"},
    {"gravity", "gravity override (m/s^2)"},
    {"air_density", "air density override (kg/m^3)"},
    {"density", "angular density s (number of launch angles)"},
    {"radius", "maximum simulation radius (m)"},
    {"dt", "integration step (s)"},
    {"max_steps", "step cap per trajectory"},
    {"integrator", "euler | semi-implicit"},
};

const std::vector<std::pair<std::string, std::string>> kTrainKeys = {
    {"layer_dims", "comma-separated hidden widths"},
    {"block_repeat", "repeats per hidden width"},
    {"append_8192", "append an 8192 block when density > 4096"},
    {"bn_epsilon", "batchnorm epsilon"},
    {"bn_momentum", "batchnorm running-stat momentum"},
    {"batch_size", "minibatch size"},
    {"learning_rate", "initial learning rate"},
    {"momentum", "SGD momentum"},
    {"plateau_min_delta", "relative improvement threshold"},
    {"plateau_patience", "epochs before reducing the learning rate"},
    {"lr_reduce_factor", "learning-rate reduction factor"},
    {"min_learning_rate", "learning-rate floor"},
    {"early_stop_patience", "epochs without improvement before stopping"},
    {"max_epochs", "epoch cap"},
    {"record_wall_time", "write wall-clock seconds into the history"},
    {"precision", "network arithmetic: f32 (default) or f64"},
};

RunConfig resolve(const std::string &config_path, const KeyValues &flags) {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply(read_key_values_file(config_path));
    cfg.apply(flags);
    return cfg;
}

void print_grid_summary(const GridBundle &g, bool csv) {
    std::size_t min_n = SIZE_MAX, max_n = 0, total = 0;
    std::map<Termination, std::size_t> causes;
    for (const auto &t : g.trajectories) {
        min_n = std::min(min_n, t.size());
        max_n = std::max(max_n, t.size());
        total += t.size();
        ++causes[t.termination];
    }
    std::ostringstream os;
    os << std::setprecision(10);
    if (csv) {
        os << "density,spacing_mean,spacing_variance,points_total,points_min,points_max,radius,ground,step_cap,subsampled\n"
           << g.density() << ',' << g.spacing_mean << ',' << g.spacing_variance << ',' << total << ',' << min_n << ','
           << max_n << ',' << causes[Termination::radius] << ',' << causes[Termination::ground] << ','
           << causes[Termination::step_cap] << ',' << (g.subsampled ? 1 : 0) << '\n';
    } else {
        os << "density " << g.density() << " | spacing mean " << g.spacing_mean << " m, variance "
           << g.spacing_variance << " m^2 | points total " << total << " (min " << min_n << ", max " << max_n
           << ") | terminations radius " << causes[Termination::radius] << ", ground " << causes[Termination::ground]
           << ", step_cap " << causes[Termination::step_cap] << (g.subsampled ? " | subsampled" : "") << '\n';
    }
    std::cout << os.str();
}

int cmd_bake(const RunConfig &cfg) {
    if (cfg.out.empty()) throw ConfigError("bake requires --out");
    const auto profile = cfg.resolved_profile();
    const auto sim = cfg.resolved_sim();
    const auto grid = bake_grid(sim, profile, cfg.threads);
    save_grid(cfg.out, grid);
    if (!cfg.export_csv.empty()) {
        std::ofstream os(cfg.export_csv);
        if (!os) throw IoError("cannot open " + cfg.export_csv);
        write_grid_csv(os, grid);
    }
    print_grid_summary(grid, cfg.csv);
    return kExitOk;
}

int cmd_subsample(const RunConfig &cfg) {
    if (cfg.grid.empty() || cfg.out.empty()) throw ConfigError("subsample requires --grid and --out");
    const auto grid = load_grid(cfg.grid);
    SubsampleSummary summary;
    const auto sub = subsample_grid(grid, &summary, cfg.threads);
    save_grid(cfg.out, sub);
    if (!cfg.export_csv.empty()) {
        std::ofstream os(cfg.export_csv);
        if (!os) throw IoError("cannot open " + cfg.export_csv);
        write_grid_csv(os, sub);
    }
    std::cout << std::setprecision(10);
    if (cfg.csv)
        std::cout << "points_before,points_after,unsatisfiable,max_spacing\n"
                  << summary.points_before << ',' << summary.points_after << ',' << summary.unsatisfiable << ','
                  << sub.spacing_mean << '\n';
    else
        std::cout << "subsampled: points " << summary.points_before << " -> " << summary.points_after
                  << " | unsatisfiable trajectories " << summary.unsatisfiable << " | max spacing "
                  << sub.spacing_mean << " m\n";
    return kExitOk;
}

int cmd_dataset(const RunConfig &cfg) {
    if (cfg.grid.empty() || cfg.out.empty()) throw ConfigError("dataset requires --grid and --out");
    const auto grid = load_grid(cfg.grid);
    const double r_max = cfg.r_max > 0.0 ? cfg.r_max : grid.sim_config.max_radius;
    const auto ds = build_dataset(grid, r_max);
    save_dataset(cfg.out, ds);
    if (!cfg.export_csv.empty()) {
        std::ofstream os(cfg.export_csv);
        if (!os) throw IoError("cannot open " + cfg.export_csv);
        write_dataset_csv(os, ds);
    }
    if (cfg.csv) std::cout << "density,samples,r_max\n" << ds.density << ',' << ds.size() << ',' << r_max << '\n';
    else std::cout << "dataset: density " << ds.density << " | samples " << ds.size() << " | r_max " << r_max << " m\n";
    return kExitOk;
}

template <typename Scalar>
int cmd_train(const RunConfig &cfg) {
    if (cfg.dataset.empty() || cfg.out.empty()) throw ConfigError("train requires --dataset and --out");
    const auto ds = load_dataset(cfg.dataset);
    auto net = mlp::init_network<Scalar>(cfg.mlp, cfg.seed, ds.density);
    const auto tc = cfg.resolved_training();
    const auto history = mlp::train(net, ds, tc, [&](const mlp::EpochRecord &e) {
        std::cerr << "epoch " << e.epoch << " loss " << std::setprecision(6) << e.loss << " lr " << e.lr << '\n';
    });
    mlp::save_model(cfg.out, net, cfg.seed);
    if (!cfg.history.empty()) {
        std::ofstream os(cfg.history);
        if (!os) throw IoError("cannot open " + cfg.history);
        mlp::write_history_csv(os, history);
    }
    const auto &last = history.epochs.back();
    const char *reason = history.stop_reason == mlp::StopReason::early_stopping ? "early_stopping" : "max_epochs";
    if (cfg.csv)
        std::cout << "epochs,final_loss,final_lr,stop,parameters\n"
                  << last.epoch << ',' << std::setprecision(10) << last.loss << ',' << last.lr << ',' << reason << ','
                  << net.parameter_count() << '\n';
    else
        std::cout << "trained: epochs " << last.epoch << " | loss " << std::setprecision(6) << last.loss << " | lr "
                  << last.lr << " | stop " << reason << " | parameters " << net.parameter_count() << '\n';
    return kExitOk;
}

template <typename Scalar>
int cmd_eval(const RunConfig &cfg, bool density_given) {
    if (cfg.model.empty() || cfg.dataset.empty()) throw ConfigError("eval requires --model and --dataset");
    const auto model = mlp::load_model<Scalar>(cfg.model);
    const auto ds = load_dataset(cfg.dataset);
    const std::uint32_t density = density_given ? cfg.sim.angular_density : ds.density;
    if (model.net.density != ds.density)
        throw ConfigError("density mismatch: model trained at " + std::to_string(model.net.density) +
                          ", dataset has " + std::to_string(ds.density));
    auto report = evaluate_model(model.net, ds, density);
    if (cfg.closed_loop_targets > 0) {
        if (cfg.grid.empty()) throw ConfigError("closed-loop evaluation requires --grid");
        const auto grid = load_grid(cfg.grid);
        if (grid.density() != ds.density) throw ConfigError("grid density does not match dataset");
        std::vector<std::size_t> idx(ds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        seeded_shuffle(idx, cfg.seed);
        idx.resize(std::min<std::size_t>(idx.size(), cfg.closed_loop_targets));
        std::vector<Vec2> targets;
        for (auto i : idx)
            targets.push_back({ds.samples[i].features[0] * ds.r_max, ds.samples[i].features[1] * ds.r_max});
        report.closed_loop = closed_loop_miss(model.net, targets, ds.r_max, grid.sim_config, grid.profile,
                                              cfg.quantize, cfg.threads);
    }
    if (!cfg.report.empty()) {
        std::ofstream os(cfg.report);
        if (!os) throw IoError("cannot open " + cfg.report);
        if (cfg.csv) write_report_csv(os, report);
        else write_report_jsonl(os, report);
    }
    if (cfg.csv) write_report_csv(std::cout, report);
    else write_report_table(std::cout, report);
    return kExitOk;
}

Vec3 parse_target(const std::string &text) {
    std::vector<double> v;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception &) {
            throw ConfigError("invalid target component: '" + item + "'");
        }
    }
    if (v.size() != 3) throw ConfigError("--target expects X,Y,Z");
    return {v[0], v[1], v[2]};
}

int cmd_solve(const RunConfig &cfg, const std::string &target_text, std::optional<double> threshold) {
    if (cfg.grid.empty()) throw ConfigError("solve requires --grid");
    const auto target = parse_target(target_text);
    const auto grid = load_grid(cfg.grid);
    const auto index = build_index(grid);
    const auto ic = solve_initial_conditions(index, grid, target, threshold);
    const double deg = ic.elevation_angle * 180.0 / std::numbers::pi;
    std::cout << std::setprecision(10);
    if (cfg.csv) {
        std::cout << "angle_deg,angle_rad,azimuth_rad,speed,miss,status\n"
                  << deg << ',' << ic.elevation_angle << ',' << ic.azimuth << ',' << ic.speed << ','
                  << ic.miss_distance << ',' << to_string(ic.status) << '\n';
    } else {
        std::cout << "elevation " << deg << " deg (" << ic.elevation_angle << " rad)\n"
                  << "azimuth   " << ic.azimuth << " rad\n"
                  << "speed     " << ic.speed << " m/s\n"
                  << "miss      " << ic.miss_distance << " m\n"
                  << "status    " << to_string(ic.status) << '\n';
    }
    return ic.status == SolveStatus::hit ? kExitOk : kExitDomain;
}

int cmd_stats(const RunConfig &cfg) {
    if (cfg.grid.empty() && cfg.dataset.empty()) throw ConfigError("stats requires --grid and/or --dataset");
    if (!cfg.grid.empty()) {
        const auto grid = load_grid(cfg.grid);
        if (cfg.csv)
            std::cout << "angular_density,euclidean_distance_mean_m,variance_m2,mean_over_variance\n"
                      << grid.density() << ',' << std::setprecision(10) << grid.spacing_mean << ','
                      << grid.spacing_variance << ',' << grid.spacing_mean / grid.spacing_variance << '\n';
        else
            std::cout << "Angular Density | Euclidean Distance Mean (m) | Variance (m^2)\n"
                      << grid.density() << " | " << std::setprecision(6) << grid.spacing_mean << " | "
                      << grid.spacing_variance << '\n';
    }
    if (!cfg.dataset.empty()) {
        const auto ds = load_dataset(cfg.dataset);
        if (cfg.csv) std::cout << "angular_density,dataset_samples\n" << ds.density << ',' << ds.size() << '\n';
        else std::cout << "Angular Density | Dataset Samples #\n" << ds.density << " | " << ds.size() << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
#if defined(__GLIBC__)
    // Keep per-batch matrix buffers in the heap instead of mmap/munmap on every allocation.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
    CLI::App app{"trajnet: trajectory grids, angle regression network and lookup baseline"};
    app.require_subcommand(1);
    std::string config_path;
    std::string seed, threads;
    bool csv = false;
    app.add_option("--config", config_path, "flat key=value config file");
    auto *seed_opt = app.add_option("--seed", seed, "seed for every random choice");
    auto *threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_flag("--csv", csv, "print summaries as CSV");

    auto *bake = app.add_subcommand("bake", "simulate the launch-angle grid");
    auto *subsample = app.add_subcommand("subsample", "thin trajectories to the grid spacing");
    auto *dataset = app.add_subcommand("dataset", "build training samples from a subsampled grid");
    auto *train = app.add_subcommand("train", "train the angle network");
    auto *eval = app.add_subcommand("eval", "evaluate a trained network");
    auto *solve = app.add_subcommand("solve", "lookup-baseline firing solution for a 3D target");
    auto *stats = app.add_subcommand("stats", "spacing statistics and sample counts");

    auto with = [](std::vector<std::pair<std::string, std::string>> a,
                   std::initializer_list<std::pair<std::string, std::string>> b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    auto register_keys = [](CLI::App *sub, const std::vector<std::pair<std::string, std::string>> &keys) {
        auto flags = std::make_shared<std::pair<std::map<std::string, std::string>,
                                                std::vector<std::pair<std::string, CLI::Option *>>>>();
        for (const auto &[key, help] : keys) {
            std::string flag = key;
            std::ranges::replace(flag, '_', '-');
            auto *opt = sub->add_option("--" + flag, flags->first[key], help);
            flags->second.emplace_back(key, opt);
        }
        return flags;
    };

    auto bake_flags = register_keys(bake, with(kPhysicsKeys, {{"out", "output grid file"},
                                                              {"export_csv", "also write a CSV export"}}));
    auto sub_flags = register_keys(subsample, {{"grid", "input grid"}, {"out", "output grid"},
                                               {"export_csv", "also write a CSV export"}});
    auto ds_flags = register_keys(dataset, {{"grid", "subsampled grid"}, {"out", "output dataset"},
                                            {"r_max", "normalization radius (default: grid radius)"},
                                            {"export_csv", "also write a CSV export"}});
    auto train_flags = register_keys(train, with(kTrainKeys, {{"dataset", "training dataset"},
                                                              {"out", "output model"},
                                                              {"history", "training history CSV"}}));
    auto eval_flags = register_keys(eval, {{"model", "trained model"}, {"dataset", "dataset"},
                                           {"density", "expected angular density"},
                                           {"grid", "grid for closed-loop re-simulation"},
                                           {"closed_loop_targets", "number of sampled closed-loop targets"},
                                           {"quantize", "snap predictions to the grid (default true)"},
                                           {"precision", "network arithmetic: f32 (default) or f64"},
                                           {"report", "metrics file (JSON lines, or CSV with --csv)"}});
    std::string target_text;
    double threshold_value = 0.0;
    auto solve_flags = register_keys(solve, {{"grid", "grid file"}});
    solve->add_option("--target", target_text, "target point X,Y,Z in meters")->required();
    auto *threshold_opt = solve->add_option("--threshold", threshold_value, "hit threshold in meters");
    auto stats_flags = register_keys(stats, {{"grid", "grid file"}, {"dataset", "dataset file"}});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    auto given = [&](const auto &flags) {
        KeyValues out;
        for (const auto &[key, opt] : flags->second)
            if (opt->count() > 0) out.emplace_back(key, flags->first.at(key));
        if (seed_opt->count() > 0) out.emplace_back("seed", seed);
        if (threads_opt->count() > 0) out.emplace_back("threads", threads);
        if (csv) out.emplace_back("csv", "true");
        return out;
    };

    try {
        if (bake->parsed()) return cmd_bake(resolve(config_path, given(bake_flags)));
        if (subsample->parsed()) return cmd_subsample(resolve(config_path, given(sub_flags)));
        if (dataset->parsed()) return cmd_dataset(resolve(config_path, given(ds_flags)));
        if (train->parsed()) {
            const auto cfg = resolve(config_path, given(train_flags));
            return cfg.single_precision ? cmd_train<float>(cfg) : cmd_train<double>(cfg);
        }
        if (eval->parsed()) {
            const auto flags = given(eval_flags);
            const bool density_given = std::ranges::any_of(flags, [](const auto &kv) { return kv.first == "density"; });
            const auto cfg = resolve(config_path, flags);
            return cfg.single_precision ? cmd_eval<float>(cfg, density_given) : cmd_eval<double>(cfg, density_given);
        }
        if (solve->parsed()) {
            std::optional<double> threshold;
            if (threshold_opt->count() > 0) threshold = threshold_value;
            return cmd_solve(resolve(config_path, given(solve_flags)), target_text, threshold);
        }
        if (stats->parsed()) return cmd_stats(resolve(config_path, given(stats_flags)));
    } catch (const ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const FormatError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDomain;
    }
    return kExitUsage;
}
