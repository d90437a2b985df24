#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrl/env.hpp"
#include "quadrl/nn.hpp"
#include "quadrl/rl.hpp"

namespace quadrl {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct NnConfig {
  std::vector<int> actor_hidden{16, 16};
  std::vector<int> critic_hidden{64, 64};
  double lr_base = 1e-4;
  double lr_min = 1e-6;
  long sgdr_cycle_steps = 0;  // 0 = scale with total steps (see sgdr_cycle)
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
};

struct RlConfig {
  double gamma = 0.99;
  long buffer_capacity = 1000000;
  int batch_size = 256;
  long warmup_steps = 10000;
  double expl_noise_start = 0.3;
  double expl_noise_end = 0.05;
  double expl_decay_fraction = 0.8;
  double target_noise = 0.2;
  double noise_clip = 0.5;
  int policy_delay = 3;
  double tau = 0.005;  // target smoothing coefficient
  double lambda_t = 0.1;
  double lambda_s = 0.1;
  double lambda_m = 0.1;
  double sigma_s = 0.05;
  double max_grad_norm = 100.0;
};

struct RunConfig {
  std::string framework = "ctde";
  long total_steps = 200000;
  long eval_interval = 10000;
  int eval_episodes = 5;
  std::vector<uint64_t> seeds{1, 2, 3};
  std::string output_dir = "runs/default";
  EnvConfig env;
  NnConfig nn;
  RlConfig rl;

  Framework framework_tag() const { return framework_from_string(framework); }

  // The full-scale schedule restarts every 500k of 3.5M steps; shorter runs
  // keep the same ratio unless the cycle is set explicitly.
  long sgdr_cycle() const {
    if (nn.sgdr_cycle_steps > 0) {
      return nn.sgdr_cycle_steps;
    }
    return std::max<long>(1, total_steps / 7);
  }

  TrainHp train_hp() const {
    TrainHp hp;
    hp.gamma = rl.gamma;
    hp.batch_size = rl.batch_size;
    hp.policy_delay = rl.policy_delay;
    hp.rho = rl.tau;
    hp.max_grad_norm = rl.max_grad_norm;
    hp.lambda_t = rl.lambda_t;
    hp.lambda_s = rl.lambda_s;
    hp.lambda_m = rl.lambda_m;
    hp.sigma_s = rl.sigma_s;
    hp.noise.expl_start = rl.expl_noise_start;
    hp.noise.expl_end = rl.expl_noise_end;
    hp.noise.decay_fraction = rl.expl_decay_fraction;
    hp.noise.target_sigma = rl.target_noise;
    hp.noise.target_clip = rl.noise_clip;
    hp.adam_beta1 = nn.adam_beta1;
    hp.adam_beta2 = nn.adam_beta2;
    hp.adam_eps = nn.adam_eps;
    hp.weight_decay = nn.weight_decay;
    return hp;
  }

  json to_json() const;
  static RunConfig from_json(const json& j);
  static RunConfig load_file(const std::filesystem::path& path);

  // Identifies the training-relevant configuration; the output directory is
  // excluded so relocated runs keep the same hash.
  uint64_t hash() const {
    json j = to_json();
    j.erase("output_dir");
    std::string dump = j.dump();
    uint64_t h = 14695981039346656037ULL;  // FNV-1a
    for (unsigned char c : dump) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  void validate() const {
    std::vector<std::string> problems;
    if (total_steps <= 0) problems.push_back("total_steps must be positive");
    if (eval_interval <= 0) problems.push_back("eval_interval must be positive");
    if (eval_episodes <= 0) problems.push_back("eval_episodes must be positive");
    if (seeds.empty()) problems.push_back("seeds must be non-empty");
    if (env.dt <= 0) problems.push_back("env.dt must be positive");
    if (env.episode_steps <= 0) problems.push_back("env.episode_steps must be positive");
    if (rl.batch_size <= 0) problems.push_back("rl.batch_size must be positive");
    if (rl.buffer_capacity < rl.batch_size)
      problems.push_back("rl.buffer_capacity must be >= rl.batch_size");
    if (rl.policy_delay <= 0) problems.push_back("rl.policy_delay must be positive");
    if (env.goal.b1_d.norm() < 1e-9)
      problems.push_back("env.goal.b1_d must be a nonzero direction");
    if (!problems.empty()) {
      std::string msg = "invalid config:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ConfigError(msg);
    }
  }
};

namespace detail {

// Strict reader: every key must be known and well-typed. Problems are
// collected (not thrown one at a time) so an error message can list every
// offending key at once.
class JsonScope {
 public:
  JsonScope(const json* j, std::string path, std::vector<std::string>* errors)
      : j_(j), path_(std::move(path)), errors_(errors) {}

  bool present() const { return j_ != nullptr; }

  template <typename T>
  void get(const char* key, T& out) {
    const json* v = fetch(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      errors_->push_back("wrong type for key: " + join(key));
    }
  }

  void get_vec3(const char* key, Vec3& out) {
    const json* v = fetch(key);
    if (!v) return;
    if (!v->is_array() || v->size() != 3 ||
        !std::all_of(v->begin(), v->end(),
                     [](const json& e) { return e.is_number(); })) {
      errors_->push_back("expected a 3-element number array for key: " + join(key));
      return;
    }
    for (int i = 0; i < 3; ++i) out(i) = (*v)[i].get<double>();
  }

  JsonScope child(const char* key) {
    const json* v = fetch(key);
    if (v && !v->is_object()) {
      errors_->push_back("expected an object for key: " + join(key));
      v = nullptr;
    }
    return JsonScope(v, join(key), errors_);
  }

  void finish() {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!consumed_.count(it.key())) {
        errors_->push_back("unknown key: " + join(it.key().c_str()));
      }
    }
  }

 private:
  const json* fetch(const char* key) {
    if (!j_) return nullptr;
    consumed_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  std::string join(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* j_;
  std::string path_;
  std::vector<std::string>* errors_;
  std::set<std::string> consumed_;
};

}  // namespace detail

inline json RunConfig::to_json() const {
  json j;
  j["framework"] = framework;
  j["total_steps"] = total_steps;
  j["eval_interval"] = eval_interval;
  j["eval_episodes"] = eval_episodes;
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;

  json je;
  je["dt"] = env.dt;
  je["episode_steps"] = env.episode_steps;
  je["bound_half_width"] = env.bound_half_width;
  je["alpha"] = env.alpha;
  je["integrator"] =
      env.integrator == Integrator::kRk4 ? "rk4" : "semi_implicit_euler";
  je["params"] = {{"m", env.params.m},
                  {"d", env.params.d},
                  {"J", {env.params.J.x(), env.params.J.y(), env.params.J.z()}},
                  {"c_tauf", env.params.c_tauf},
                  {"c_tw", env.params.c_tw},
                  {"g", env.params.g}};
  je["goal"] = {{"x_d", {env.goal.x_d.x(), env.goal.x_d.y(), env.goal.x_d.z()}},
                {"b1_d", {env.goal.b1_d.x(), env.goal.b1_d.y(), env.goal.b1_d.z()}}};
  je["gains"] = {{"k_x", env.gains.k_x},     {"k_b1", env.gains.k_b1},
                 {"k_Ix", env.gains.k_Ix},   {"k_Ib1", env.gains.k_Ib1},
                 {"k_v", env.gains.k_v},     {"k_W", env.gains.k_W},
                 {"k_b3", env.gains.k_b3},   {"k_w12", env.gains.k_w12},
                 {"k_W3", env.gains.k_W3}};
  je["obs_bounds"] = {{"pos", env.obs.pos},
                      {"vel", env.obs.vel},
                      {"omega", env.obs.omega},
                      {"integral", env.obs.integral}};
  je["reset"] = {{"pos_range", env.reset.pos_range},
                 {"vel_range", env.reset.vel_range},
                 {"omega_range", env.reset.omega_range},
                 {"yaw_range", env.reset.yaw_range},
                 {"tilt_range", env.reset.tilt_range},
                 {"randomize_params", env.reset.randomize_params},
                 {"param_range", env.reset.param_range}};
  j["env"] = je;

  j["nn"] = {{"actor_hidden", nn.actor_hidden},
             {"critic_hidden", nn.critic_hidden},
             {"lr_base", nn.lr_base},
             {"lr_min", nn.lr_min},
             {"sgdr_cycle_steps", nn.sgdr_cycle_steps},
             {"adam_beta1", nn.adam_beta1},
             {"adam_beta2", nn.adam_beta2},
             {"adam_eps", nn.adam_eps},
             {"weight_decay", nn.weight_decay}};

  j["rl"] = {{"gamma", rl.gamma},
             {"buffer_capacity", rl.buffer_capacity},
             {"batch_size", rl.batch_size},
             {"warmup_steps", rl.warmup_steps},
             {"expl_noise_start", rl.expl_noise_start},
             {"expl_noise_end", rl.expl_noise_end},
             {"expl_decay_fraction", rl.expl_decay_fraction},
             {"target_noise", rl.target_noise},
             {"noise_clip", rl.noise_clip},
             {"policy_delay", rl.policy_delay},
             {"tau", rl.tau},
             {"lambda_t", rl.lambda_t},
             {"lambda_s", rl.lambda_s},
             {"lambda_m", rl.lambda_m},
             {"sigma_s", rl.sigma_s},
             {"max_grad_norm", rl.max_grad_norm}};
  return j;
}

inline RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  std::vector<std::string> errors;
  detail::JsonScope root(&j, "", &errors);

  root.get("framework", cfg.framework);
  root.get("total_steps", cfg.total_steps);
  root.get("eval_interval", cfg.eval_interval);
  root.get("eval_episodes", cfg.eval_episodes);
  root.get("seeds", cfg.seeds);
  root.get("output_dir", cfg.output_dir);

  auto je = root.child("env");
  je.get("dt", cfg.env.dt);
  je.get("episode_steps", cfg.env.episode_steps);
  je.get("bound_half_width", cfg.env.bound_half_width);
  je.get("alpha", cfg.env.alpha);
  std::string integ = "rk4";
  je.get("integrator", integ);
  if (integ == "rk4") {
    cfg.env.integrator = Integrator::kRk4;
  } else if (integ == "semi_implicit_euler") {
    cfg.env.integrator = Integrator::kSemiImplicitEuler;
  } else {
    errors.push_back("env.integrator must be rk4 or semi_implicit_euler");
  }
  auto jp = je.child("params");
  jp.get("m", cfg.env.params.m);
  jp.get("d", cfg.env.params.d);
  jp.get_vec3("J", cfg.env.params.J);
  jp.get("c_tauf", cfg.env.params.c_tauf);
  jp.get("c_tw", cfg.env.params.c_tw);
  jp.get("g", cfg.env.params.g);
  jp.finish();
  auto jg = je.child("goal");
  jg.get_vec3("x_d", cfg.env.goal.x_d);
  jg.get_vec3("b1_d", cfg.env.goal.b1_d);
  jg.finish();
  auto jk = je.child("gains");
  jk.get("k_x", cfg.env.gains.k_x);
  jk.get("k_b1", cfg.env.gains.k_b1);
  jk.get("k_Ix", cfg.env.gains.k_Ix);
  jk.get("k_Ib1", cfg.env.gains.k_Ib1);
  jk.get("k_v", cfg.env.gains.k_v);
  jk.get("k_W", cfg.env.gains.k_W);
  jk.get("k_b3", cfg.env.gains.k_b3);
  jk.get("k_w12", cfg.env.gains.k_w12);
  jk.get("k_W3", cfg.env.gains.k_W3);
  jk.finish();
  auto jo = je.child("obs_bounds");
  jo.get("pos", cfg.env.obs.pos);
  jo.get("vel", cfg.env.obs.vel);
  jo.get("omega", cfg.env.obs.omega);
  jo.get("integral", cfg.env.obs.integral);
  jo.finish();
  auto jr = je.child("reset");
  jr.get("pos_range", cfg.env.reset.pos_range);
  jr.get("vel_range", cfg.env.reset.vel_range);
  jr.get("omega_range", cfg.env.reset.omega_range);
  jr.get("yaw_range", cfg.env.reset.yaw_range);
  jr.get("tilt_range", cfg.env.reset.tilt_range);
  jr.get("randomize_params", cfg.env.reset.randomize_params);
  jr.get("param_range", cfg.env.reset.param_range);
  jr.finish();
  je.finish();

  auto jn = root.child("nn");
  jn.get("actor_hidden", cfg.nn.actor_hidden);
  jn.get("critic_hidden", cfg.nn.critic_hidden);
  jn.get("lr_base", cfg.nn.lr_base);
  jn.get("lr_min", cfg.nn.lr_min);
  jn.get("sgdr_cycle_steps", cfg.nn.sgdr_cycle_steps);
  jn.get("adam_beta1", cfg.nn.adam_beta1);
  jn.get("adam_beta2", cfg.nn.adam_beta2);
  jn.get("adam_eps", cfg.nn.adam_eps);
  jn.get("weight_decay", cfg.nn.weight_decay);
  jn.finish();

  auto jl = root.child("rl");
  jl.get("gamma", cfg.rl.gamma);
  jl.get("buffer_capacity", cfg.rl.buffer_capacity);
  jl.get("batch_size", cfg.rl.batch_size);
  jl.get("warmup_steps", cfg.rl.warmup_steps);
  jl.get("expl_noise_start", cfg.rl.expl_noise_start);
  jl.get("expl_noise_end", cfg.rl.expl_noise_end);
  jl.get("expl_decay_fraction", cfg.rl.expl_decay_fraction);
  jl.get("target_noise", cfg.rl.target_noise);
  jl.get("noise_clip", cfg.rl.noise_clip);
  jl.get("policy_delay", cfg.rl.policy_delay);
  jl.get("tau", cfg.rl.tau);
  jl.get("lambda_t", cfg.rl.lambda_t);
  jl.get("lambda_s", cfg.rl.lambda_s);
  jl.get("lambda_m", cfg.rl.lambda_m);
  jl.get("sigma_s", cfg.rl.sigma_s);
  jl.get("max_grad_norm", cfg.rl.max_grad_norm);
  jl.finish();

  root.finish();

  try {
    framework_from_string(cfg.framework);
  } catch (const std::invalid_argument&) {
    errors.push_back("framework must be one of sarl, dtde, ctde");
  }

  if (!errors.empty()) {
    std::string msg = "config schema errors:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw ConfigError("cannot open config file: " + path.string());
  }
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace quadrl
