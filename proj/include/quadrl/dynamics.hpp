#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "quadrl/geometry.hpp"
#include "quadrl/rng.hpp"

namespace quadrl {

struct SimulationDivergedError : std::runtime_error {
  SimulationDivergedError()
      : std::runtime_error("simulation diverged: non-finite state") {}
};

// Physical parameters. Frame convention: e3 points down, gravity acts along
// +e3 and the total thrust acts along -R e3.
struct QuadrotorParams {
  double m = 1.994;                    // mass [kg]
  double d = 0.23;                     // rotor arm length [m]
  Vec3 J = Vec3(0.022, 0.022, 0.035);  // diagonal inertia [kg m^2]
  double c_tauf = 0.0135;              // torque-to-thrust coefficient
  double c_tw = 2.2;                   // thrust-to-weight ratio
  double g = 9.81;                     // gravity [m/s^2]

  static QuadrotorParams nominal() { return QuadrotorParams{}; }

  double max_rotor_thrust() const { return c_tw * m * g / 4.0; }
  double max_total_thrust() const { return c_tw * m * g; }
  double hover_thrust() const { return m * g; }

  // Per-episode domain randomization: each parameter scaled by an
  // independent uniform factor in [1-range, 1+range]. J1 and J2 share one
  // factor so the vehicle stays inertially symmetric about b3, which the
  // yaw decoupling requires. Draw order is fixed for reproducibility.
  QuadrotorParams randomized(Rng& rng, double range) const {
    QuadrotorParams p = *this;
    p.m = m * rng.uniform(1.0 - range, 1.0 + range);
    p.d = d * rng.uniform(1.0 - range, 1.0 + range);
    double j12 = rng.uniform(1.0 - range, 1.0 + range);
    p.J.x() = J.x() * j12;
    p.J.y() = J.y() * j12;
    p.J.z() = J.z() * rng.uniform(1.0 - range, 1.0 + range);
    p.c_tauf = c_tauf * rng.uniform(1.0 - range, 1.0 + range);
    p.c_tw = c_tw * rng.uniform(1.0 - range, 1.0 + range);
    return p;
  }
};

struct QuadrotorState {
  Vec3 x = Vec3::Zero();       // position, inertial [m]
  Vec3 v = Vec3::Zero();       // velocity, inertial [m/s]
  Mat3 R = Mat3::Identity();   // body-to-inertial rotation
  Vec3 W = Vec3::Zero();       // angular velocity, body frame [rad/s]

  Vec3 b1() const { return R.col(0); }
  Vec3 b2() const { return R.col(1); }
  Vec3 b3() const { return R.col(2); }

  bool finite() const {
    return x.allFinite() && v.allFinite() && R.allFinite() && W.allFinite();
  }
};

struct Wrench {
  double f = 0.0;         // total thrust [N]
  Vec3 M = Vec3::Zero();  // body moments [N m]
};

struct RotorThrusts {
  Eigen::Vector4d T = Eigen::Vector4d::Zero();  // per-rotor thrust [N]
  bool saturated = false;
};

struct StateDerivative {
  Vec3 x_dot;
  Vec3 v_dot;
  Mat3 R_dot;
  Vec3 W_dot;
};

// Rigid-body equations of motion:
//   x_dot = v
//   m v_dot = m g e3 - f R e3
//   R_dot = R hat(W)
//   J W_dot = M - W x J W
inline StateDerivative derivative(const QuadrotorState& s, const Wrench& w,
                                  const QuadrotorParams& p) {
  StateDerivative d;
  d.x_dot = s.v;
  d.v_dot = Vec3(0.0, 0.0, p.g) - (w.f / p.m) * s.R.col(2);
  d.R_dot = s.R * hat(s.W);
  Vec3 JW = p.J.cwiseProduct(s.W);
  d.W_dot = (w.M - s.W.cross(JW)).cwiseQuotient(p.J);
  return d;
}

namespace detail {

// Re-orthonormalization policy: pull R back onto SO(3) whenever the drift
// exceeds this threshold after an integration step.
constexpr double kSo3DriftTol = 1e-6;

inline QuadrotorState advance(const QuadrotorState& s, const StateDerivative& k,
                              double h) {
  QuadrotorState out;
  out.x = s.x + h * k.x_dot;
  out.v = s.v + h * k.v_dot;
  out.R = s.R + h * k.R_dot;
  out.W = s.W + h * k.W_dot;
  return out;
}

template <typename Deriv>
QuadrotorState rk4(const QuadrotorState& s, double dt, Deriv&& f) {
  StateDerivative k1 = f(s);
  StateDerivative k2 = f(advance(s, k1, 0.5 * dt));
  StateDerivative k3 = f(advance(s, k2, 0.5 * dt));
  StateDerivative k4 = f(advance(s, k3, dt));

  QuadrotorState out;
  out.x = s.x + (dt / 6.0) * (k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot);
  out.v = s.v + (dt / 6.0) * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
  out.R = s.R + (dt / 6.0) * (k1.R_dot + 2.0 * k2.R_dot + 2.0 * k3.R_dot + k4.R_dot);
  out.W = s.W + (dt / 6.0) * (k1.W_dot + 2.0 * k2.W_dot + 2.0 * k3.W_dot + k4.W_dot);

  if (!out.finite()) {
    throw SimulationDivergedError();
  }
  if (so3_drift(out.R) > kSo3DriftTol) {
    out.R = orthonormalized(out.R);
  }
  return out;
}

}  // namespace detail

// Classical RK4 step with the wrench held constant over the step.
inline QuadrotorState step_rk4(const QuadrotorState& s, const Wrench& w,
                               const QuadrotorParams& p, double dt) {
  return detail::rk4(s, dt,
                     [&](const QuadrotorState& q) { return derivative(q, w, p); });
}

// Semi-implicit Euler variant used by cross-condition evaluation: velocities
// are updated first, then positions/attitude advance with the new rates.
inline QuadrotorState step_semi_implicit_euler(const QuadrotorState& s,
                                               const Wrench& w,
                                               const QuadrotorParams& p,
                                               double dt) {
  StateDerivative d = derivative(s, w, p);
  QuadrotorState out;
  out.v = s.v + dt * d.v_dot;
  out.W = s.W + dt * d.W_dot;
  out.x = s.x + dt * out.v;
  out.R = s.R + dt * s.R * hat(out.W);
  if (!out.finite()) {
    throw SimulationDivergedError();
  }
  if (so3_drift(out.R) > detail::kSo3DriftTol) {
    out.R = orthonormalized(out.R);
  }
  return out;
}

// Inverse mixer, T = (1/4) B [f, M1, M2, M3]^T. Raw linear map, no clamping.
inline Eigen::Vector4d mix_rotor_thrusts(const Wrench& w,
                                         const QuadrotorParams& p) {
  const double f = w.f, M1 = w.M.x(), M2 = w.M.y(), M3 = w.M.z();
  Eigen::Vector4d T;
  T(0) = 0.25 * (f + (2.0 / p.d) * M2 - M3 / p.c_tauf);
  T(1) = 0.25 * (f - (2.0 / p.d) * M1 + M3 / p.c_tauf);
  T(2) = 0.25 * (f - (2.0 / p.d) * M2 - M3 / p.c_tauf);
  T(3) = 0.25 * (f + (2.0 / p.d) * M1 + M3 / p.c_tauf);
  return T;
}

// Per-rotor thrusts for a commanded wrench, clamped to the physical range
// [0, T_max] with a saturation flag.
inline RotorThrusts rotor_thrusts_from_wrench(const Wrench& w,
                                              const QuadrotorParams& p) {
  Eigen::Vector4d raw = mix_rotor_thrusts(w, p);
  RotorThrusts out;
  double t_max = p.max_rotor_thrust();
  for (int i = 0; i < 4; ++i) {
    double t = std::clamp(raw(i), 0.0, t_max);
    out.saturated = out.saturated || t != raw(i);
    out.T(i) = t;
  }
  return out;
}

// Forward map, the exact inverse of mix_rotor_thrusts:
//   f  = T1 + T2 + T3 + T4
//   M1 = d (T4 - T2)
//   M2 = d (T1 - T3)
//   M3 = c_tauf (T2 + T4 - T1 - T3)
inline Wrench wrench_from_rotor_thrusts(const Eigen::Vector4d& T,
                                        const QuadrotorParams& p) {
  Wrench w;
  w.f = T.sum();
  w.M.x() = p.d * (T(3) - T(1));
  w.M.y() = p.d * (T(0) - T(2));
  w.M.z() = p.c_tauf * (T(1) + T(3) - T(0) - T(2));
  return w;
}

// Angular velocity of b3 resolved in the inertial frame.
inline Vec3 omega12(const QuadrotorState& s) {
  return s.W.x() * s.R.col(0) + s.W.y() * s.R.col(1);
}

// Complementary component, W2 b2 + W3 b3.
inline Vec3 omega23(const QuadrotorState& s) {
  return s.W.y() * s.R.col(1) + s.W.z() * s.R.col(2);
}

// Maps the decoupled control (tau, M3) to body moments. tau is an inertial
// vector expected in the b1-b2 plane; any component along b3 is annihilated
// by the projections onto b1 and b2.
//   M1 = b1^T tau + J3 W2 W3
//   M2 = b2^T tau - J3 W3 W1
inline Vec3 moments_from_decoupled(const Vec3& tau, double M3,
                                   const QuadrotorState& s,
                                   const QuadrotorParams& p) {
  double J3 = p.J.z();
  Vec3 M;
  M.x() = s.R.col(0).dot(tau) + J3 * s.W.y() * s.W.z();
  M.y() = s.R.col(1).dot(tau) - J3 * s.W.z() * s.W.x();
  M.z() = M3;
  return M;
}

// RK4 step driven by the decoupled inputs (f, tau, M3), with the tau-to-
// moment conversion applied inside every stage evaluation. This is the
// integrator used to check the yaw decoupling of the equations of motion:
// holding M1, M2 fixed across the step instead would leak the gyroscopic
// drift into the translational subsystem.
inline QuadrotorState step_rk4_decoupled(const QuadrotorState& s, double f,
                                         const Vec3& tau, double M3,
                                         const QuadrotorParams& p, double dt) {
  return detail::rk4(s, dt, [&](const QuadrotorState& q) {
    Wrench w{f, moments_from_decoupled(tau, M3, q, p)};
    return derivative(q, w, p);
  });
}

// Yaw angle error: angle between b1 and the desired heading projected into
// the plane normal to b3.
inline double yaw_error(const QuadrotorState& s, const Vec3& b1d) {
  Vec3 b1c = project_to_plane(b1d, s.R.col(2));
  return angle_between(s.R.col(0), b1c);
}

}  // namespace quadrl
