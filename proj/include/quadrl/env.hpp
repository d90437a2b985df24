#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "quadrl/dynamics.hpp"
#include "quadrl/geometry.hpp"
#include "quadrl/rng.hpp"

namespace quadrl {

enum class Framework { kSarl, kDtde, kCtde };

inline const char* framework_name(Framework fw) {
  switch (fw) {
    case Framework::kSarl: return "sarl";
    case Framework::kDtde: return "dtde";
    case Framework::kCtde: return "ctde";
  }
  return "?";
}

inline Framework framework_from_string(const std::string& s) {
  if (s == "sarl") return Framework::kSarl;
  if (s == "dtde") return Framework::kDtde;
  if (s == "ctde") return Framework::kCtde;
  throw std::invalid_argument("unknown framework: " + s);
}

// Observation and action dimensions. The joint decoupled action is
// a1 = (f, tau) in R^4 (tau an inertial vector, 2 effective DOF in the
// b1-b2 plane) plus a2 = M3 in R.
constexpr int kStateDim = 21;   // (e_x, e_Ix, e_v, R, e_W)
constexpr int kObs1Dim = 15;    // (e_x, e_Ix, e_v, b3, omega12)
constexpr int kObs2Dim = 6;     // (b1, e_b1, e_Ib1, e_W3)
constexpr int kActSarlDim = 4;  // per-rotor thrusts
constexpr int kAct1Dim = 4;     // (f, tau)
constexpr int kAct2Dim = 1;     // M3

inline int joint_action_dim(Framework fw) {
  return fw == Framework::kSarl ? kActSarlDim : kAct1Dim + kAct2Dim;
}

struct GoalSpec {
  Vec3 x_d = Vec3::Zero();
  Vec3 b1_d = Vec3(1.0, 0.0, 0.0);
  // v_d and W_d are identically zero for the fixed-setpoint task.
};

// Desired attitude for error metrics: level (b3 = e3) with the heading at
// the projected b1_d.
inline Mat3 goal_attitude(const GoalSpec& g) {
  Vec3 b3(0.0, 0.0, 1.0);
  Vec3 b1 = project_to_plane(g.b1_d.normalized(), b3).normalized();
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b3.cross(b1);
  R.col(2) = b3;
  return R;
}

enum class Integrator { kRk4, kSemiImplicitEuler };

struct RewardGains {
  double k_x = 7.0;
  double k_b1 = 2.0;
  double k_Ix = 0.04;
  double k_Ib1 = 0.06;
  double k_v = 0.25;
  double k_W = 0.25;      // full angular velocity penalty (single-agent)
  double k_b3 = 3.5;      // tilt penalty (agent 1)
  double k_w12 = 0.25;    // omega12 penalty (agent 1)
  double k_W3 = 0.2;      // yaw rate penalty (agent 2)
};

// Per-component magnitudes used both to normalize observations into [-1, 1]
// and as the worst-case error magnitudes for reward normalization.
struct ObsBounds {
  double pos = 3.0;       // m
  double vel = 5.0;       // m/s
  double omega = 10.0;    // rad/s
  double integral = 2.0;  // alpha-limited integral states
};

struct ResetConfig {
  double pos_range = 1.5;     // uniform cube half-width about x_d [m]
  double vel_range = 0.2;     // [m/s]
  double omega_range = 0.2;   // [rad/s]
  double yaw_range = M_PI;    // [rad]
  double tilt_range = 0.2;    // roll/pitch perturbation [rad]
  bool randomize_params = true;
  double param_range = 0.05;  // +-5% domain randomization
};

struct EnvConfig {
  double dt = 0.01;
  int episode_steps = 1000;
  double bound_half_width = 4.0;  // out-of-bounds box about x_d [m]
  double alpha = 0.01;            // integral leak rate
  Integrator integrator = Integrator::kRk4;
  QuadrotorParams params;         // nominal
  GoalSpec goal;
  RewardGains gains;
  ObsBounds obs;
  ResetConfig reset;
};

struct EnvState {
  QuadrotorState q;
  Vec3 e_Ix = Vec3::Zero();
  double e_Ib1 = 0.0;
  int step_count = 0;
  QuadrotorParams active;  // parameters drawn for this episode
};

struct ObservationSet {
  Eigen::VectorXd s_flat = Eigen::VectorXd::Zero(kStateDim);
  Eigen::VectorXd o1 = Eigen::VectorXd::Zero(kObs1Dim);
  Eigen::VectorXd o2 = Eigen::VectorXd::Zero(kObs2Dim);
};

struct RewardSet {
  double r = 0.0;   // single-agent reward, also the canonical return metric
  double r1 = 0.0;  // translational agent
  double r2 = 0.0;  // yaw agent
};

struct StepInfo {
  bool out_of_bounds = false;
  bool diverged = false;
  bool timeout = false;
  bool saturated = false;
  Eigen::Vector4d thrusts = Eigen::Vector4d::Zero();  // applied, post-clamp
  Wrench applied;
};

struct StepResult {
  ObservationSet obs;
  RewardSet rewards;
  bool done = false;
  StepInfo info;
};

inline double clamp_norm(double v, double bound) {
  return std::clamp(v / bound, -1.0, 1.0);
}

// Affine action denormalization onto [lo, hi]; input clamped to [-1, 1].
inline double denorm(double a, double lo, double hi) {
  a = std::clamp(a, -1.0, 1.0);
  return lo + 0.5 * (a + 1.0) * (hi - lo);
}

class QuadrotorEnv {
 public:
  explicit QuadrotorEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
    st_.active = cfg_.params;
  }

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return st_; }

  // Randomized episode start. Draw order is fixed: parameters, position,
  // yaw, pitch, roll, velocity, angular velocity.
  ObservationSet reset(Rng& rng) {
    const ResetConfig& rc = cfg_.reset;
    st_ = EnvState{};
    st_.active = rc.randomize_params
                     ? cfg_.params.randomized(rng, rc.param_range)
                     : cfg_.params;
    for (int i = 0; i < 3; ++i) {
      st_.q.x(i) = cfg_.goal.x_d(i) + rng.uniform(-rc.pos_range, rc.pos_range);
    }
    double yaw = rng.uniform(-rc.yaw_range, rc.yaw_range);
    double pitch = rng.uniform(-rc.tilt_range, rc.tilt_range);
    double roll = rng.uniform(-rc.tilt_range, rc.tilt_range);
    st_.q.R = exp_hat(Vec3(0, 0, yaw)) * exp_hat(Vec3(0, pitch, 0)) *
              exp_hat(Vec3(roll, 0, 0));
    for (int i = 0; i < 3; ++i) {
      st_.q.v(i) = rng.uniform(-rc.vel_range, rc.vel_range);
    }
    for (int i = 0; i < 3; ++i) {
      st_.q.W(i) = rng.uniform(-rc.omega_range, rc.omega_range);
    }
    return observe();
  }

  // Deterministic start for evaluation scenarios.
  ObservationSet reset_to(const QuadrotorState& q, const QuadrotorParams& p) {
    st_ = EnvState{};
    st_.q = q;
    st_.active = p;
    return observe();
  }

  StepResult step(const Eigen::VectorXd& action, Framework fw) {
    StepResult res;

    // Integral states advance by explicit Euler on the pre-step errors.
    Vec3 e_x = st_.q.x - cfg_.goal.x_d;
    st_.e_Ix += cfg_.dt * (-cfg_.alpha * st_.e_Ix + e_x);
    st_.e_Ib1 += cfg_.dt * (-cfg_.alpha * st_.e_Ib1 + heading_error(st_.q));

    Wrench w = action_to_wrench(action, fw, &res.info);
    try {
      st_.q = cfg_.integrator == Integrator::kRk4
                  ? step_rk4(st_.q, w, st_.active, cfg_.dt)
                  : step_semi_implicit_euler(st_.q, w, st_.active, cfg_.dt);
    } catch (const SimulationDivergedError&) {
      res.info.diverged = true;
    }
    st_.step_count += 1;

    if (!res.info.diverged) {
      Vec3 e = st_.q.x - cfg_.goal.x_d;
      res.info.out_of_bounds = e.cwiseAbs().maxCoeff() > cfg_.bound_half_width;
    }
    res.info.timeout = st_.step_count >= cfg_.episode_steps;
    res.done = res.info.diverged || res.info.out_of_bounds || res.info.timeout;

    if (res.info.diverged) {
      res.obs = ObservationSet{};     // zeroed placeholder
      res.rewards = RewardSet{};      // minimum reward on divergence
    } else {
      res.obs = observe();
      res.rewards = rewards();
    }
    return res;
  }

  ObservationSet observe() const {
    const ObsBounds& b = cfg_.obs;
    const QuadrotorState& q = st_.q;
    Vec3 e_x = q.x - cfg_.goal.x_d;
    Vec3 w12 = omega12(q);
    double e_b1 = heading_error(q);

    ObservationSet o;
    for (int i = 0; i < 3; ++i) {
      o.s_flat(i) = clamp_norm(e_x(i), b.pos);
      o.s_flat(3 + i) = clamp_norm(st_.e_Ix(i), b.integral);
      o.s_flat(6 + i) = clamp_norm(q.v(i), b.vel);
      o.s_flat(18 + i) = clamp_norm(q.W(i), b.omega);
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        o.s_flat(9 + 3 * r + c) = q.R(r, c);  // row-major
      }
    }
    for (int i = 0; i < 3; ++i) {
      o.o1(i) = o.s_flat(i);
      o.o1(3 + i) = o.s_flat(3 + i);
      o.o1(6 + i) = o.s_flat(6 + i);
      o.o1(9 + i) = q.R(i, 2);  // b3
      o.o1(12 + i) = clamp_norm(w12(i), b.omega);
    }
    for (int i = 0; i < 3; ++i) {
      o.o2(i) = q.R(i, 0);  // b1
    }
    o.o2(3) = clamp_norm(e_b1, M_PI);
    o.o2(4) = clamp_norm(st_.e_Ib1, b.integral);
    o.o2(5) = clamp_norm(q.W.z(), b.omega);
    return o;
  }

  // Step rewards, normalized into [0, 1]. Error terms are clamped at the
  // observation bounds so the configured worst case is a true bound.
  RewardSet rewards() const {
    const RewardGains& k = cfg_.gains;
    const ObsBounds& b = cfg_.obs;
    const QuadrotorState& q = st_.q;

    Vec3 e_x = clamp_vec(q.x - cfg_.goal.x_d, b.pos);
    Vec3 e_Ix = clamp_vec(st_.e_Ix, b.integral);
    Vec3 e_v = clamp_vec(q.v, b.vel);
    Vec3 e_W = clamp_vec(q.W, b.omega);
    Vec3 w12 = clamp_vec(omega12(q), b.omega);
    double e_Ib1 = std::clamp(st_.e_Ib1, -b.integral, b.integral);
    double e_b1 = heading_error(q);
    double e_b3 = angle_between(q.b3(), Vec3(0, 0, 1));  // tilt
    double e_W3 = std::clamp(q.W.z(), -b.omega, b.omega);

    RewardSet out;
    double raw = -k.k_x * e_x.squaredNorm() - k.k_b1 * e_b1 -
                 k.k_Ix * e_Ix.squaredNorm() - k.k_Ib1 * std::abs(e_Ib1) -
                 k.k_v * e_v.squaredNorm() - k.k_W * e_W.squaredNorm();
    out.r = normalize_reward(raw, sarl_reward_divisor());

    double raw1 = -k.k_x * e_x.squaredNorm() - k.k_Ix * e_Ix.squaredNorm() -
                  k.k_v * e_v.squaredNorm() - k.k_b3 * e_b3 -
                  k.k_w12 * w12.squaredNorm();
    out.r1 = normalize_reward(raw1, agent1_reward_divisor());

    double raw2 = -k.k_b1 * e_b1 - k.k_Ib1 * std::abs(e_Ib1) -
                  k.k_W3 * e_W3 * e_W3;
    out.r2 = normalize_reward(raw2, agent2_reward_divisor());
    return out;
  }

  // Raw (unnormalized, <= 0) rewards for the current state; test hook.
  Vec3 raw_rewards() const {
    const RewardGains& k = cfg_.gains;
    const ObsBounds& b = cfg_.obs;
    const QuadrotorState& q = st_.q;
    Vec3 e_x = clamp_vec(q.x - cfg_.goal.x_d, b.pos);
    Vec3 e_Ix = clamp_vec(st_.e_Ix, b.integral);
    Vec3 e_v = clamp_vec(q.v, b.vel);
    Vec3 e_W = clamp_vec(q.W, b.omega);
    Vec3 w12 = clamp_vec(omega12(q), b.omega);
    double e_Ib1 = std::clamp(st_.e_Ib1, -b.integral, b.integral);
    double e_b1 = heading_error(q);
    double e_b3 = angle_between(q.b3(), Vec3(0, 0, 1));
    double e_W3 = std::clamp(q.W.z(), -b.omega, b.omega);
    double raw = -k.k_x * e_x.squaredNorm() - k.k_b1 * e_b1 -
                 k.k_Ix * e_Ix.squaredNorm() - k.k_Ib1 * std::abs(e_Ib1) -
                 k.k_v * e_v.squaredNorm() - k.k_W * e_W.squaredNorm();
    double raw1 = -k.k_x * e_x.squaredNorm() - k.k_Ix * e_Ix.squaredNorm() -
                  k.k_v * e_v.squaredNorm() - k.k_b3 * e_b3 -
                  k.k_w12 * w12.squaredNorm();
    double raw2 = -k.k_b1 * e_b1 - k.k_Ib1 * std::abs(e_Ib1) -
                  k.k_W3 * e_W3 * e_W3;
    return Vec3(raw, raw1, raw2);
  }

  double sarl_reward_divisor() const {
    const RewardGains& k = cfg_.gains;
    const ObsBounds& b = cfg_.obs;
    return k.k_x * 3 * b.pos * b.pos + k.k_b1 * M_PI +
           k.k_Ix * 3 * b.integral * b.integral + k.k_Ib1 * b.integral +
           k.k_v * 3 * b.vel * b.vel + k.k_W * 3 * b.omega * b.omega;
  }

  double agent1_reward_divisor() const {
    const RewardGains& k = cfg_.gains;
    const ObsBounds& b = cfg_.obs;
    return k.k_x * 3 * b.pos * b.pos + k.k_Ix * 3 * b.integral * b.integral +
           k.k_v * 3 * b.vel * b.vel + k.k_b3 * M_PI +
           k.k_w12 * 3 * b.omega * b.omega;
  }

  double agent2_reward_divisor() const {
    const RewardGains& k = cfg_.gains;
    const ObsBounds& b = cfg_.obs;
    return k.k_b1 * M_PI + k.k_Ib1 * b.integral +
           k.k_W3 * b.omega * b.omega;
  }

  // Heading error angle with a fallback at the 90-degree-tilt singularity,
  // where the projected reference vanishes and no yaw error is defined.
  double heading_error(const QuadrotorState& q) const {
    try {
      return yaw_error(q, cfg_.goal.b1_d);
    } catch (const DegenerateHeadingError&) {
      return M_PI / 2.0;
    }
  }

  // Nominal (hover) action in normalized units, used by the magnitude
  // regularizer. Independent of the randomized episode parameters.
  static Eigen::VectorXd nominal_action(Framework fw, const EnvConfig& cfg) {
    double f_norm = 2.0 / cfg.params.c_tw - 1.0;  // mg over [0, c_tw mg]
    Eigen::VectorXd a(joint_action_dim(fw));
    if (fw == Framework::kSarl) {
      a.setConstant(f_norm);  // mg/4 per rotor over [0, T_max]
    } else {
      a.setZero();
      a(0) = f_norm;
    }
    return a;
  }

 private:
  static Vec3 clamp_vec(const Vec3& v, double bound) {
    return v.cwiseMax(-bound).cwiseMin(bound);
  }

  static double normalize_reward(double raw, double divisor) {
    return std::clamp(1.0 + raw / divisor, 0.0, 1.0);
  }

  Wrench action_to_wrench(const Eigen::VectorXd& action, Framework fw,
                          StepInfo* info) const {
    const QuadrotorParams& p = st_.active;
    double t_max = p.max_rotor_thrust();
    if (fw == Framework::kSarl) {
      if (action.size() != kActSarlDim) {
        throw std::invalid_argument("SARL action must have 4 components");
      }
      Eigen::Vector4d T;
      for (int i = 0; i < 4; ++i) {
        T(i) = denorm(action(i), 0.0, t_max);
      }
      info->thrusts = T;
      info->applied = wrench_from_rotor_thrusts(T, p);
      return info->applied;
    }
    if (action.size() != kAct1Dim + kAct2Dim) {
      throw std::invalid_argument("decoupled action must have 5 components");
    }
    double f = denorm(action(0), 0.0, p.max_total_thrust());
    double tau_max = p.d * t_max;
    double m3_max = 2.0 * p.c_tauf * t_max;
    Vec3 tau(denorm(action(1), -tau_max, tau_max),
             denorm(action(2), -tau_max, tau_max),
             denorm(action(3), -tau_max, tau_max));
    double M3 = denorm(action(4), -m3_max, m3_max);
    Wrench cmd{f, moments_from_decoupled(tau, M3, st_.q, p)};
    RotorThrusts t = rotor_thrusts_from_wrench(cmd, p);
    info->saturated = t.saturated;
    info->thrusts = t.T;
    info->applied = wrench_from_rotor_thrusts(t.T, p);
    return info->applied;
  }

  EnvConfig cfg_;
  EnvState st_;
};

}  // namespace quadrl
