// Command-line front end: train / eval / export.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "quadrl/config.hpp"
#include "quadrl/harness.hpp"

namespace fs = std::filesystem;
using namespace quadrl;

namespace {

// Relative output paths are anchored at QUADRL_OUTPUT_ROOT when set.
fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_absolute()) {
    return p;
  }
  if (const char* root = std::getenv("QUADRL_OUTPUT_ROOT")) {
    return fs::path(root) / p;
  }
  return p;
}

// Reads a config snapshot written by a training run; the per-seed "seed"
// key is dropped before schema validation.
RunConfig load_run_config(const fs::path& run_dir) {
  std::ifstream is(run_dir / "config.json");
  if (!is) {
    throw std::runtime_error("no config.json in " + run_dir.string());
  }
  json j;
  is >> j;
  j.erase("seed");
  return RunConfig::from_json(j);
}

fs::path normalize_run_dir(const fs::path& p) {
  if (fs::is_regular_file(p) && p.filename() == "manifest.json") {
    return p.parent_path();
  }
  return p;
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      seeds.push_back(std::stoull(item));
    }
  }
  return seeds;
}

void print_metrics(const std::string& name, const FlightMetrics& m) {
  std::cout << name << ": " << (m.crashed ? "CRASHED" : "completed") << " after "
            << m.steps << " steps, return " << m.episode_return << "\n"
            << "  e_x_avg [cm] = (" << m.e_x_avg_cm.transpose() << ")\n"
            << "  e_x_ss  [cm] = (" << m.e_x_ss_cm.transpose() << ")\n"
            << "  e_R_avg      = (" << m.e_R_avg.transpose() << ")\n"
            << "  e_R_ss       = (" << m.e_R_ss.transpose() << ")\n";
}

int cmd_train(const std::string& config_path, const std::string& seeds_csv,
              long steps_override, bool dry_run, bool resume) {
  RunConfig cfg = RunConfig::load_file(config_path);
  if (!seeds_csv.empty()) {
    cfg.seeds = parse_seeds(seeds_csv);
  }
  if (steps_override > 0) {
    cfg.total_steps = steps_override;
  }
  cfg.validate();

  if (dry_run) {
    std::cout << cfg.to_json().dump(2) << "\n";
    return 0;
  }

  fs::path out_root = resolve_output_dir(cfg.output_dir);
  Trainer trainer(cfg);
  for (uint64_t seed : cfg.seeds) {
    fs::path run_dir = out_root / ("seed_" + std::to_string(seed));
    SeedRunResult res = trainer.train_seed(seed, run_dir, resume);
    std::cout << "seed " << seed << ": " << res.curve.size()
              << " eval points, final return " << res.final_return << " -> "
              << run_dir.string() << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, long step,
             const std::string& scenario, uint64_t scenario_seed,
             const std::string& out_dir, const std::string& cross) {
  fs::path run_dir = normalize_run_dir(checkpoint);
  RunConfig cfg = load_run_config(run_dir);
  PolicyBundle policy = PolicyBundle::load(run_dir, step);

  EvalScenario sc = fs::exists(scenario)
                        ? EvalScenario::from_file(scenario, cfg.env)
                        : EvalScenario::named(scenario, cfg.env, scenario_seed);

  fs::path out = out_dir.empty() ? run_dir / "eval" : fs::path(out_dir);
  fs::create_directories(out);

  std::vector<TrajectoryRecord> traj;
  FlightMetrics m =
      evaluate_policy(policy.fn(), policy.framework(), cfg.env, sc, &traj);
  write_trajectory_csv(out / ("trajectory_" + sc.name + ".csv"), traj);
  write_metrics_csv(out / ("metrics_" + sc.name + ".csv"), {{sc.name, m}});
  print_metrics(sc.name, m);

  if (!cross.empty()) {
    std::vector<Perturbation> perts =
        cross == "default" ? default_perturbations()
                           : perturbations_from_file(cross);
    auto rows = cross_condition_eval(policy.fn(), policy.framework(), cfg.env,
                                     sc, perts);
    write_metrics_csv(out / ("cross_" + sc.name + ".csv"), rows);
    std::cout << "\ncross-condition metrics (deltas vs " << rows[0].first
              << "):\n";
    for (const auto& [name, cm] : rows) {
      std::cout << "  " << name << ": "
                << (cm.crashed ? "CRASHED" : "completed")
                << ", e_x_ss delta [cm] = ("
                << (cm.e_x_ss_cm - rows[0].second.e_x_ss_cm).transpose()
                << ")\n";
    }
  }
  return 0;
}

int cmd_export(const std::string& run, const std::string& what,
               const std::string& scenario, const std::string& out_path) {
  fs::path run_dir(run);
  if (what == "curves") {
    // Accept either a group directory of seed_* runs or a single run.
    std::vector<fs::path> seed_dirs;
    if (fs::exists(run_dir / "curves.csv")) {
      seed_dirs.push_back(run_dir);
    } else {
      for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "curves.csv")) {
          seed_dirs.push_back(entry.path());
        }
      }
      std::sort(seed_dirs.begin(), seed_dirs.end());
    }
    if (seed_dirs.empty()) {
      throw std::runtime_error("no curves.csv found under " + run_dir.string());
    }
    std::vector<long> steps;
    std::vector<std::vector<double>> series;
    std::vector<std::string> labels;
    for (const auto& dir : seed_dirs) {
      auto curve = read_curves_csv(dir / "curves.csv");
      if (steps.empty()) {
        for (const auto& p : curve) steps.push_back(p.step);
      }
      std::vector<double> vals;
      for (const auto& p : curve) vals.push_back(p.eval_return);
      vals.resize(steps.size(), vals.empty() ? 0.0 : vals.back());
      series.push_back(vals);
      labels.push_back(dir.filename().string());
    }
    CurveSummary summary = summarize_curves(steps, series);
    fs::path out = out_path.empty() ? run_dir / "curves_summary.csv"
                                    : fs::path(out_path);
    std::ofstream os(out);
    os << "step";
    for (const auto& l : labels) os << ',' << l;
    os << ",mean,lo_2sigma,hi_2sigma\n";
    for (size_t i = 0; i < steps.size(); ++i) {
      os << steps[i];
      for (const auto& s : summary.per_seed) os << ',' << format_double(s[i]);
      os << ',' << format_double(summary.mean[i]) << ','
         << format_double(summary.lo[i]) << ',' << format_double(summary.hi[i])
         << '\n';
    }
    std::cout << "wrote " << out.string() << " (" << labels.size()
              << " seeds)\n";
    return 0;
  }
  if (what == "trajectory") {
    RunConfig cfg = load_run_config(run_dir);
    PolicyBundle policy = PolicyBundle::load(run_dir);
    EvalScenario sc = EvalScenario::named(scenario, cfg.env);
    std::vector<TrajectoryRecord> traj;
    FlightMetrics m =
        evaluate_policy(policy.fn(), policy.framework(), cfg.env, sc, &traj);
    fs::path out = out_path.empty()
                       ? run_dir / "eval" / ("trajectory_" + sc.name + ".csv")
                       : fs::path(out_path);
    fs::create_directories(out.parent_path());
    write_trajectory_csv(out, traj);
    print_metrics(sc.name, m);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
  }
  throw std::runtime_error("--what must be curves or trajectory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadrotor low-level control RL lab"};
  app.require_subcommand(1);

  std::string config_path, seeds_csv, checkpoint, scenario = "yaw140";
  std::string out_dir, cross, run, what = "curves";
  long steps_override = 0, step = -1;
  uint64_t scenario_seed = 0;
  bool dry_run = false, resume = false;

  auto* train = app.add_subcommand("train", "train policies across seeds");
  train->add_option("--config", config_path, "run config (JSON)")->required();
  train->add_option("--seeds", seeds_csv, "comma-separated seed list override");
  train->add_option("--steps", steps_override, "total steps override");
  train->add_flag("--dry-run", dry_run, "echo the effective config and exit");
  train->add_flag("--resume", resume, "continue from the latest checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a trained policy");
  eval->add_option("--checkpoint", checkpoint,
                   "run directory (or its manifest.json)")->required();
  eval->add_option("--step", step, "checkpoint step (default: latest)");
  eval->add_option("--scenario", scenario,
                   "hover | yaw140 | random | scenario file");
  eval->add_option("--seed", scenario_seed, "seed for the random scenario");
  eval->add_option("--out", out_dir, "output directory (default: <run>/eval)");
  eval->add_option("--cross", cross,
                   "cross-condition evaluation: 'default' or a spec file");

  auto* exp = app.add_subcommand("export", "export curves or trajectories");
  exp->add_option("--run", run, "run or run-group directory")->required();
  exp->add_option("--what", what, "curves | trajectory")->required();
  exp->add_option("--scenario", scenario, "scenario for trajectory export");
  exp->add_option("--out", out_dir, "output file path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      return cmd_train(config_path, seeds_csv, steps_override, dry_run, resume);
    }
    if (*eval) {
      return cmd_eval(checkpoint, step, scenario, scenario_seed, out_dir, cross);
    }
    if (*exp) {
      return cmd_export(run, what, scenario, out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
