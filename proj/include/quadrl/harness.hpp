#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "quadrl/config.hpp"
#include "quadrl/env.hpp"
#include "quadrl/nn.hpp"
#include "quadrl/rl.hpp"
#include "quadrl/rng.hpp"

namespace quadrl {

namespace fs = std::filesystem;

// Shortest representation that round-trips the double exactly; keeps CSV
// output bit-reproducible.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// evaluation scenarios and flight metrics

struct EvalScenario {
  std::string name = "hover";
  QuadrotorState initial;
  QuadrotorParams params;

  // Built-in scenarios:
  //   hover   - at the goal, level, heading aligned
  //   yaw140  - at the goal, level, heading rotated 140 degrees about e3
  //   random  - one draw from the reset distribution (seeded)
  static EvalScenario named(const std::string& name, const EnvConfig& cfg,
                            uint64_t seed = 0) {
    EvalScenario sc;
    sc.name = name;
    sc.params = cfg.params;
    Mat3 Rd = goal_attitude(cfg.goal);
    sc.initial.x = cfg.goal.x_d;
    sc.initial.R = Rd;
    if (name == "hover") {
      return sc;
    }
    if (name == "yaw140") {
      sc.initial.R = exp_hat(Vec3(0, 0, 140.0 * M_PI / 180.0)) * Rd;
      return sc;
    }
    if (name == "random") {
      QuadrotorEnv env(cfg);
      Rng rng(Rng::derive(seed, 7001));
      env.reset(rng);
      sc.initial = env.state().q;
      sc.params = env.state().active;
      return sc;
    }
    throw std::invalid_argument("unknown scenario: " + name);
  }

  // Scenario file: {"x": [..], "v": [..], "omega": [..], "yaw_deg": a,
  // "pitch": b, "roll": c} - all optional, defaults are the hover start.
  static EvalScenario from_file(const fs::path& path, const EnvConfig& cfg) {
    std::ifstream is(path);
    if (!is) {
      throw std::runtime_error("cannot open scenario file: " + path.string());
    }
    json j;
    is >> j;
    EvalScenario sc = named("hover", cfg);
    sc.name = path.stem().string();
    Vec3 tmp;
    auto get_vec = [&](const char* key, Vec3& out) {
      if (j.contains(key)) {
        auto a = j.at(key);
        for (int i = 0; i < 3; ++i) out(i) = a.at(i).get<double>();
      }
    };
    get_vec("x", sc.initial.x);
    get_vec("v", sc.initial.v);
    tmp.setZero();
    get_vec("omega", sc.initial.W);
    double yaw_deg = 0.0, pitch = 0.0, roll = 0.0;
    if (j.contains("yaw_deg")) yaw_deg = j.at("yaw_deg").get<double>();
    if (j.contains("pitch")) pitch = j.at("pitch").get<double>();
    if (j.contains("roll")) roll = j.at("roll").get<double>();
    sc.initial.R = exp_hat(Vec3(0, 0, yaw_deg * M_PI / 180.0)) *
                   exp_hat(Vec3(0, pitch, 0)) * exp_hat(Vec3(roll, 0, 0)) *
                   goal_attitude(cfg.goal);
    return sc;
  }
};

struct TrajectoryRecord {
  double t = 0.0;
  QuadrotorState q;
  Vec3 e_x = Vec3::Zero();
  Vec3 e_R = Vec3::Zero();
  Eigen::Vector4d thrusts = Eigen::Vector4d::Zero();
};

struct FlightMetrics {
  Vec3 e_x_avg_cm = Vec3::Zero();  // mean |e_x| per axis [cm]
  Vec3 e_x_ss_cm = Vec3::Zero();   // signed mean over the final window [cm]
  Vec3 e_R_avg = Vec3::Zero();
  Vec3 e_R_ss = Vec3::Zero();
  bool crashed = false;
  double episode_return = 0.0;
  int steps = 0;
};

// Steady state is measured over the final 20% of the recorded trajectory.
constexpr double kSteadyStateWindow = 0.2;

inline FlightMetrics compute_flight_metrics(
    const std::vector<TrajectoryRecord>& traj, bool crashed,
    double episode_return) {
  FlightMetrics m;
  m.crashed = crashed;
  m.episode_return = episode_return;
  m.steps = static_cast<int>(traj.size());
  if (traj.empty()) {
    return m;
  }
  size_t n = traj.size();
  size_t win = std::max<size_t>(1, static_cast<size_t>(kSteadyStateWindow * n));
  Vec3 ex_abs = Vec3::Zero(), er_abs = Vec3::Zero();
  Vec3 ex_ss = Vec3::Zero(), er_ss = Vec3::Zero();
  for (size_t i = 0; i < n; ++i) {
    ex_abs += traj[i].e_x.cwiseAbs();
    er_abs += traj[i].e_R.cwiseAbs();
    if (i >= n - win) {
      ex_ss += traj[i].e_x;
      er_ss += traj[i].e_R;
    }
  }
  m.e_x_avg_cm = 100.0 * ex_abs / static_cast<double>(n);
  m.e_x_ss_cm = 100.0 * ex_ss / static_cast<double>(win);
  m.e_R_avg = er_abs / static_cast<double>(n);
  m.e_R_ss = er_ss / static_cast<double>(win);
  return m;
}

// Joint normalized action from the current observations.
using PolicyFn = std::function<Vector(const ObservationSet&)>;

// Deterministic noise-free rollout from a scenario start. Records the
// trajectory if requested; the crash flag marks any termination other than
// the step cap.
inline FlightMetrics evaluate_policy(const PolicyFn& policy, Framework fw,
                                     const EnvConfig& cfg,
                                     const EvalScenario& sc,
                                     std::vector<TrajectoryRecord>* traj_out =
                                         nullptr) {
  QuadrotorEnv env(cfg);
  ObservationSet obs = env.reset_to(sc.initial, sc.params);
  Mat3 Rd = goal_attitude(cfg.goal);
  std::vector<TrajectoryRecord> traj;
  traj.reserve(cfg.episode_steps);
  double ret = 0.0;
  bool crashed = false;
  for (int k = 0; k < cfg.episode_steps; ++k) {
    StepResult res = env.step(policy(obs), fw);
    ret += res.rewards.r;
    TrajectoryRecord rec;
    rec.t = (k + 1) * cfg.dt;
    rec.q = env.state().q;
    rec.e_x = env.state().q.x - cfg.goal.x_d;
    rec.e_R = attitude_error(env.state().q.R, Rd);
    rec.thrusts = res.info.thrusts;
    traj.push_back(rec);
    obs = res.obs;
    if (res.done) {
      crashed = res.info.diverged || res.info.out_of_bounds;
      break;
    }
  }
  if (traj_out) {
    *traj_out = traj;
  }
  return compute_flight_metrics(traj, crashed, ret);
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_trajectory_csv(const fs::path& path,
                                 const std::vector<TrajectoryRecord>& traj) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot write: " + path.string());
  }
  os << "t,x1,x2,x3,v1,v2,v3,"
        "R11,R12,R13,R21,R22,R23,R31,R32,R33,"
        "W1,W2,W3,ex1,ex2,ex3,eR1,eR2,eR3,T1,T2,T3,T4\n";
  for (const auto& r : traj) {
    os << format_double(r.t);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.q.x(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.q.v(i));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) os << ',' << format_double(r.q.R(i, j));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.q.W(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.e_x(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(r.e_R(i));
    for (int i = 0; i < 4; ++i) os << ',' << format_double(r.thrusts(i));
    os << '\n';
  }
}

inline void write_metrics_csv(const fs::path& path,
                              const std::vector<std::pair<std::string,
                                                          FlightMetrics>>& rows) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot write: " + path.string());
  }
  os << "condition,crashed,steps,episode_return,"
        "ex_avg1_cm,ex_avg2_cm,ex_avg3_cm,ex_ss1_cm,ex_ss2_cm,ex_ss3_cm,"
        "eR_avg1,eR_avg2,eR_avg3,eR_ss1,eR_ss2,eR_ss3\n";
  for (const auto& [name, m] : rows) {
    os << name << ',' << (m.crashed ? 1 : 0) << ',' << m.steps << ','
       << format_double(m.episode_return);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(m.e_x_avg_cm(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(m.e_x_ss_cm(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(m.e_R_avg(i));
    for (int i = 0; i < 3; ++i) os << ',' << format_double(m.e_R_ss(i));
    os << '\n';
  }
}

struct EvalPoint {
  long step = 0;
  double eval_return = 0.0;
};

inline void write_curves_csv(const fs::path& path,
                             const std::vector<EvalPoint>& curve) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot write: " + path.string());
  }
  os << "step,eval_return\n";
  for (const auto& p : curve) {
    os << p.step << ',' << format_double(p.eval_return) << '\n';
  }
}

inline std::vector<EvalPoint> read_curves_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot read: " + path.string());
  }
  std::vector<EvalPoint> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out.push_back(
        {std::stol(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// learning-curve smoothing and cross-seed aggregation

// Exponential moving average, s_0 = v_0, s_k = w s_{k-1} + (1-w) v_k.
inline std::vector<double> ema_smooth(const std::vector<double>& v,
                                      double weight = 0.8) {
  if (v.empty()) {
    throw std::invalid_argument("ema_smooth: empty series");
  }
  std::vector<double> s(v.size());
  s[0] = v[0];
  for (size_t i = 1; i < v.size(); ++i) {
    s[i] = weight * s[i - 1] + (1.0 - weight) * v[i];
  }
  return s;
}

struct CurveSummary {
  std::vector<long> steps;
  std::vector<std::vector<double>> per_seed;  // smoothed
  std::vector<double> mean;
  std::vector<double> lo;  // mean - 2 sigma
  std::vector<double> hi;  // mean + 2 sigma
};

// Smooths each seed's series then reports the cross-seed mean and 2-sigma
// band (population sigma, so a single seed yields a zero-width band).
inline CurveSummary summarize_curves(
    const std::vector<long>& steps,
    const std::vector<std::vector<double>>& series, double weight = 0.8) {
  CurveSummary out;
  out.steps = steps;
  for (const auto& s : series) {
    if (s.size() != steps.size()) {
      throw std::invalid_argument("summarize_curves: ragged series");
    }
    out.per_seed.push_back(ema_smooth(s, weight));
  }
  size_t n = steps.size();
  size_t k = series.size();
  out.mean.resize(n);
  out.lo.resize(n);
  out.hi.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (size_t j = 0; j < k; ++j) mu += out.per_seed[j][i];
    mu /= static_cast<double>(k);
    double var = 0.0;
    for (size_t j = 0; j < k; ++j) {
      double d = out.per_seed[j][i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(k);
    double band = 2.0 * std::sqrt(var);
    out.mean[i] = mu;
    out.lo[i] = mu - band;
    out.hi[i] = mu + band;
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpoints and manifests

inline const std::vector<std::string>& net_names() {
  static const std::vector<std::string> names{"actor", "qa", "qb", "actor_t",
                                              "qa_t", "qb_t"};
  return names;
}

inline std::string ckpt_filename(long step, size_t agent,
                                 const std::string& net) {
  return "checkpoints/step_" + std::to_string(step) + "_agent" +
         std::to_string(agent) + "_" + net + ".bin";
}

inline void save_session_checkpoint(const Td3Session& session,
                                    const fs::path& run_dir, long step) {
  const auto& agents = session.agents();
  for (size_t i = 0; i < agents.size(); ++i) {
    const Mlp* nets[6] = {&agents[i].actor,        &agents[i].q_a,
                          &agents[i].q_b,          &agents[i].actor_target,
                          &agents[i].q_a_target,   &agents[i].q_b_target};
    for (size_t n = 0; n < 6; ++n) {
      nets[n]->save_file(run_dir / ckpt_filename(step, i, net_names()[n]));
    }
  }
}

inline void load_session_checkpoint(Td3Session& session,
                                    const fs::path& run_dir, long step) {
  auto& agents = session.agents();
  for (size_t i = 0; i < agents.size(); ++i) {
    Mlp* nets[6] = {&agents[i].actor,      &agents[i].q_a,
                    &agents[i].q_b,        &agents[i].actor_target,
                    &agents[i].q_a_target, &agents[i].q_b_target};
    for (size_t n = 0; n < 6; ++n) {
      *nets[n] = Mlp::load_file(run_dir / ckpt_filename(step, i, net_names()[n]));
    }
  }
}

// Execution-time policy: the actors of a trained session, loaded from a run
// directory. Routes each agent's observation slice per the framework wiring.
class PolicyBundle {
 public:
  PolicyBundle(Framework fw, std::vector<Mlp> actors)
      : fw_(fw), actors_(std::move(actors)), specs_(agent_specs(fw)) {}

  Framework framework() const { return fw_; }

  Vector act(const ObservationSet& obs) const {
    Vector a(joint_action_dim(fw_));
    for (size_t i = 0; i < specs_.size(); ++i) {
      const Vector& o = specs_[i].obs == ObsField::kState
                            ? obs.s_flat
                            : (specs_[i].obs == ObsField::kO1 ? obs.o1 : obs.o2);
      a.segment(specs_[i].act_offset, specs_[i].act_dim) =
          actors_[i].forward1(o);
    }
    return a;
  }

  PolicyFn fn() const {
    return [this](const ObservationSet& o) { return act(o); };
  }

  // Loads the actors recorded in a run manifest; step < 0 means latest.
  static PolicyBundle load(const fs::path& run_dir, long step = -1);

 private:
  Framework fw_;
  std::vector<Mlp> actors_;
  std::vector<AgentSpec> specs_;
};

struct Manifest {
  std::string framework;
  uint64_t seed = 0;
  std::string config_hash;
  long final_step = 0;
  long critic_updates = 0;
  std::vector<long> checkpoint_steps;

  json to_json() const {
    json j;
    j["framework"] = framework;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["final_step"] = final_step;
    j["critic_updates"] = critic_updates;
    j["checkpoint_steps"] = checkpoint_steps;
    return j;
  }

  static Manifest from_json(const json& j) {
    Manifest m;
    m.framework = j.at("framework").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.final_step = j.at("final_step").get<long>();
    m.critic_updates = j.value("critic_updates", 0L);
    m.checkpoint_steps = j.at("checkpoint_steps").get<std::vector<long>>();
    return m;
  }

  static Manifest load(const fs::path& run_dir) {
    std::ifstream is(run_dir / "manifest.json");
    if (!is) {
      throw std::runtime_error("no manifest.json in " + run_dir.string());
    }
    json j;
    is >> j;
    return from_json(j);
  }

  void save(const fs::path& run_dir) const {
    std::ofstream os(run_dir / "manifest.json");
    os << to_json().dump(2) << '\n';
  }
};

inline PolicyBundle PolicyBundle::load(const fs::path& run_dir, long step) {
  Manifest m = Manifest::load(run_dir);
  if (m.checkpoint_steps.empty()) {
    throw std::runtime_error("manifest has no checkpoints: " + run_dir.string());
  }
  if (step < 0) {
    step = m.checkpoint_steps.back();
  }
  Framework fw = framework_from_string(m.framework);
  std::vector<Mlp> actors;
  for (size_t i = 0; i < agent_specs(fw).size(); ++i) {
    actors.push_back(Mlp::load_file(run_dir / ckpt_filename(step, i, "actor")));
  }
  return PolicyBundle(fw, std::move(actors));
}

// ---------------------------------------------------------------------------
// training

struct SeedRunResult {
  uint64_t seed = 0;
  fs::path run_dir;
  std::vector<EvalPoint> curve;
  double final_return = 0.0;
};

struct TrainingDivergedError : std::runtime_error {
  explicit TrainingDivergedError(const std::string& what)
      : std::runtime_error(what) {}
};

class Trainer {
 public:
  explicit Trainer(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
  }

  const RunConfig& config() const { return cfg_; }

  // Mean noise-free return of the current policy over the fixed evaluation
  // episodes. Episode starts are derived from the seed only, so every
  // evaluation point scores the policy on the same initial conditions.
  double evaluate(const Td3Session& session, uint64_t seed) const {
    Framework fw = cfg_.framework_tag();
    double total = 0.0;
    for (int ep = 0; ep < cfg_.eval_episodes; ++ep) {
      QuadrotorEnv env(cfg_.env);
      Rng rng(Rng::derive(seed, 1000 + ep));
      ObservationSet obs = env.reset(rng);
      for (int k = 0; k < cfg_.env.episode_steps; ++k) {
        auto views = obs_views(obs);
        StepResult res = env.step(session.act_deterministic(views), fw);
        total += res.rewards.r;
        obs = res.obs;
        if (res.done) break;
      }
    }
    return total / cfg_.eval_episodes;
  }

  SeedRunResult train_seed(uint64_t seed, const fs::path& run_dir,
                           bool resume = false) const {
    Framework fw = cfg_.framework_tag();
    fs::create_directories(run_dir / "checkpoints");

    {
      json snapshot = cfg_.to_json();
      snapshot["seed"] = seed;
      std::ofstream os(run_dir / "config.json");
      os << snapshot.dump(2) << '\n';
    }

    TransitionDims dims{kStateDim, kObs1Dim, kObs2Dim, joint_action_dim(fw)};
    Rng rng_init(Rng::derive(seed, 1));
    Td3Session session(agent_specs(fw), dims, cfg_.train_hp(),
                       cfg_.nn.actor_hidden, cfg_.nn.critic_hidden,
                       QuadrotorEnv::nominal_action(fw, cfg_.env), rng_init);

    Manifest manifest;
    manifest.framework = cfg_.framework;
    manifest.seed = seed;
    {
      std::ostringstream h;
      h << std::hex << cfg_.hash();
      manifest.config_hash = h.str();
    }

    long start_step = 0;
    std::vector<EvalPoint> curve;
    if (resume) {
      Manifest prev = Manifest::load(run_dir);
      load_session_checkpoint(session, run_dir, prev.final_step);
      start_step = prev.final_step;
      manifest.checkpoint_steps = prev.checkpoint_steps;
      session.set_critic_updates(prev.critic_updates);
      for (const auto& p : read_curves_csv(run_dir / "curves.csv")) {
        curve.push_back(p);
      }
    }

    Rng rng(Rng::derive(seed, 0));
    QuadrotorEnv env(cfg_.env);
    ObservationSet obs = env.reset(rng);
    ReplayBuffer buffer(dims, cfg_.rl.buffer_capacity);
    SgdrSchedule sched{cfg_.nn.lr_base, cfg_.nn.lr_min, cfg_.sgdr_cycle()};
    Batch batch;
    const TrainHp hp = cfg_.train_hp();

    for (long t = start_step + 1; t <= cfg_.total_steps; ++t) {
      Vector action;
      if (t <= cfg_.rl.warmup_steps + start_step) {
        action.resize(dims.action);
        for (int i = 0; i < dims.action; ++i) {
          action(i) = rng.uniform(-1.0, 1.0);
        }
      } else {
        double sigma = hp.noise.exploration_sigma(t, cfg_.total_steps);
        action = session.act(obs_views(obs), sigma, rng);
      }

      StepResult res = env.step(action, fw);
      Transition tr;
      tr.s = obs.s_flat;
      tr.o1 = obs.o1;
      tr.o2 = obs.o2;
      tr.a = action;
      tr.r = res.rewards.r;
      tr.r1 = res.rewards.r1;
      tr.r2 = res.rewards.r2;
      tr.s_next = res.obs.s_flat;
      tr.o1_next = res.obs.o1;
      tr.o2_next = res.obs.o2;
      // Time-limit terminations keep the bootstrap; true failures cut it.
      tr.done = res.info.diverged || res.info.out_of_bounds;
      buffer.push(tr);
      obs = res.done ? env.reset(rng) : res.obs;

      if (t > cfg_.rl.warmup_steps + start_step &&
          buffer.size() >= static_cast<size_t>(cfg_.rl.batch_size)) {
        buffer.sample(rng, cfg_.rl.batch_size, &batch);
        UpdateStats stats = session.update(batch, sgdr_lr(sched, t), rng);
        if (!stats.finite()) {
          std::ostringstream msg;
          msg << "training diverged (non-finite loss) at step " << t
              << ", framework " << cfg_.framework << ", seed " << seed;
          throw TrainingDivergedError(msg.str());
        }
      }

      if (t % cfg_.eval_interval == 0) {
        double ret = evaluate(session, seed);
        curve.push_back({t, ret});
        save_session_checkpoint(session, run_dir, t);
        manifest.checkpoint_steps.push_back(t);
        manifest.final_step = t;
        manifest.critic_updates = session.critic_updates();
        manifest.save(run_dir);
        write_curves_csv(run_dir / "curves.csv", curve);
      }
    }

    if (manifest.final_step < cfg_.total_steps) {
      // total_steps not divisible by eval_interval: checkpoint the tail.
      double ret = evaluate(session, seed);
      curve.push_back({cfg_.total_steps, ret});
      save_session_checkpoint(session, run_dir, cfg_.total_steps);
      manifest.checkpoint_steps.push_back(cfg_.total_steps);
      manifest.final_step = cfg_.total_steps;
      manifest.critic_updates = session.critic_updates();
      manifest.save(run_dir);
      write_curves_csv(run_dir / "curves.csv", curve);
    }

    SeedRunResult out;
    out.seed = seed;
    out.run_dir = run_dir;
    out.curve = curve;
    out.final_return = curve.empty() ? 0.0 : curve.back().eval_return;
    return out;
  }

  std::vector<const Vector*> obs_views(const ObservationSet& obs) const {
    std::vector<const Vector*> views;
    for (const auto& spec : agent_specs(cfg_.framework_tag())) {
      switch (spec.obs) {
        case ObsField::kState: views.push_back(&obs.s_flat); break;
        case ObsField::kO1: views.push_back(&obs.o1); break;
        case ObsField::kO2: views.push_back(&obs.o2); break;
      }
    }
    return views;
  }

 private:
  RunConfig cfg_;
};

// ---------------------------------------------------------------------------
// cross-condition evaluation

// Evaluates a frozen policy under parameter offsets beyond the training
// randomization and under the alternate integrator.
struct Perturbation {
  std::string name = "nominal";
  double mass_scale = 1.0;
  double inertia_scale = 1.0;
  bool semi_implicit_euler = false;
};

inline std::vector<Perturbation> default_perturbations() {
  return {{"nominal", 1.0, 1.0, false},
          {"mass+10", 1.1, 1.0, false},
          {"mass-10", 0.9, 1.0, false},
          {"inertia+10", 1.0, 1.1, false},
          {"inertia-10", 1.0, 0.9, false},
          {"mass+10_inertia+10", 1.1, 1.1, false},
          {"euler_integrator", 1.0, 1.0, true}};
}

inline std::vector<Perturbation> perturbations_from_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open perturbation spec: " + path.string());
  }
  json j;
  is >> j;
  std::vector<Perturbation> out;
  for (const auto& c : j.at("conditions")) {
    Perturbation p;
    p.name = c.at("name").get<std::string>();
    p.mass_scale = c.value("mass_scale", 1.0);
    p.inertia_scale = c.value("inertia_scale", 1.0);
    std::string integ = c.value("integrator", std::string("rk4"));
    p.semi_implicit_euler = integ == "semi_implicit_euler";
    out.push_back(p);
  }
  return out;
}

inline std::vector<std::pair<std::string, FlightMetrics>> cross_condition_eval(
    const PolicyFn& policy, Framework fw, const EnvConfig& base,
    const EvalScenario& scenario, const std::vector<Perturbation>& perts) {
  std::vector<std::pair<std::string, FlightMetrics>> rows;
  for (const auto& p : perts) {
    EnvConfig cfg = base;
    cfg.integrator =
        p.semi_implicit_euler ? Integrator::kSemiImplicitEuler : Integrator::kRk4;
    EvalScenario sc = scenario;
    sc.params.m *= p.mass_scale;
    sc.params.J *= p.inertia_scale;
    rows.emplace_back(p.name, evaluate_policy(policy, fw, cfg, sc));
  }
  return rows;
}

}  // namespace quadrl
