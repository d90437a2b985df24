#include <catch2/catch_amalgamated.hpp>

#include "quadrl/dynamics.hpp"
#include "quadrl/rng.hpp"

using namespace quadrl;

TEST_CASE("hover equilibrium has zero derivatives") {
  QuadrotorParams p;
  QuadrotorState s;
  Wrench w{p.hover_thrust(), Vec3::Zero()};
  StateDerivative d = derivative(s, w, p);
  REQUIRE(d.x_dot.norm() == 0.0);
  REQUIRE(d.v_dot.norm() < 1e-13);
  REQUIRE(d.R_dot.norm() == 0.0);
  REQUIRE(d.W_dot.norm() == 0.0);
}

TEST_CASE("free fall accelerates along +e3") {
  QuadrotorParams p;
  QuadrotorState s;
  StateDerivative d = derivative(s, Wrench{}, p);
  REQUIRE((d.v_dot - Vec3(0, 0, 9.81)).norm() == 0.0);
}

TEST_CASE("spin about the symmetry axis is torque-free steady") {
  QuadrotorParams p;  // J1 == J2, W aligned with principal axis e3
  QuadrotorState s;
  s.W = Vec3(0, 0, 1);
  StateDerivative d = derivative(s, Wrench{}, p);
  REQUIRE(d.W_dot.norm() == 0.0);
}

TEST_CASE("rk4 hover is a fixed point") {
  QuadrotorParams p;
  QuadrotorState s;
  Wrench w{p.hover_thrust(), Vec3::Zero()};
  QuadrotorState next = step_rk4(s, w, p, 0.01);
  REQUIRE((next.x - s.x).norm() <= 1e-12);
  REQUIRE((next.v - s.v).norm() <= 1e-12);
  REQUIRE((next.R - s.R).norm() <= 1e-12);
  REQUIRE((next.W - s.W).norm() <= 1e-12);
}

TEST_CASE("rk4 free fall from rest is exact") {
  QuadrotorParams p;
  QuadrotorState s;
  QuadrotorState next = step_rk4(s, Wrench{}, p, 0.01);
  REQUIRE(next.v.z() == Catch::Approx(0.0981).margin(1e-12));
  // constant acceleration: x = g t^2 / 2 exactly under RK4
  REQUIRE(next.x.z() == Catch::Approx(0.5 * 9.81 * 1e-4).margin(1e-15));
}

TEST_CASE("torque-free tumble conserves inertial angular momentum") {
  QuadrotorParams p;
  p.J = Vec3(0.022, 0.031, 0.035);  // fully triaxial for a genuine tumble
  QuadrotorState s;
  s.W = Vec3(0.7, -0.4, 0.9);
  Vec3 pi0 = s.R * p.J.cwiseProduct(s.W);
  double max_rel = 0.0;
  for (int k = 0; k < 1000; ++k) {  // 10 s
    s = step_rk4(s, Wrench{}, p, 0.01);
    Vec3 pi = s.R * p.J.cwiseProduct(s.W);
    max_rel = std::max(max_rel, (pi - pi0).norm() / pi0.norm());
  }
  REQUIRE(max_rel <= 1e-6);
}

TEST_CASE("so3 drift stays bounded under random wrenches") {
  QuadrotorParams p;
  QuadrotorState s;
  Rng rng(99);
  double max_drift = 0.0;
  for (int k = 0; k < 2000; ++k) {
    Wrench w{rng.uniform(0.0, p.max_total_thrust()),
             Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                  rng.uniform(-0.5, 0.5))};
    s = step_rk4(s, w, p, 0.01);
    max_drift = std::max(max_drift, so3_drift(s.R));
  }
  REQUIRE(max_drift <= 1e-6);
}

TEST_CASE("diverged integration is reported") {
  QuadrotorParams p;
  QuadrotorState s;
  REQUIRE_THROWS_AS(step_rk4(s, Wrench{1e308, Vec3::Zero()}, p, 0.01),
                    SimulationDivergedError);
}

TEST_CASE("mixer matrix composed with the forward map is the identity") {
  QuadrotorParams p;
  Eigen::Matrix4d inv, fwd;
  for (int j = 0; j < 4; ++j) {
    Wrench w;
    w.f = j == 0 ? 1.0 : 0.0;
    w.M = Vec3::Zero();
    if (j > 0) w.M(j - 1) = 1.0;
    inv.col(j) = mix_rotor_thrusts(w, p);

    Eigen::Vector4d T = Eigen::Vector4d::Zero();
    T(j) = 1.0;
    Wrench u = wrench_from_rotor_thrusts(T, p);
    fwd.col(j) = Eigen::Vector4d(u.f, u.M.x(), u.M.y(), u.M.z());
  }
  REQUIRE((fwd * inv - Eigen::Matrix4d::Identity()).norm() <= 1e-12);
  REQUIRE((inv * fwd - Eigen::Matrix4d::Identity()).norm() <= 1e-12);
}

TEST_CASE("mixer worked examples") {
  QuadrotorParams p;

  // pure thrust splits evenly; m g / 4 = 4.890 N
  Eigen::Vector4d t1 = mix_rotor_thrusts(Wrench{19.561, Vec3::Zero()}, p);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(t1(i) == Catch::Approx(19.561 / 4.0).margin(1e-12));
    REQUIRE(t1(i) == Catch::Approx(4.890).margin(1e-3));
  }

  // pitch moment d about b2
  Eigen::Vector4d t2 = mix_rotor_thrusts(Wrench{0.0, Vec3(0, p.d, 0)}, p);
  REQUIRE((t2 - Eigen::Vector4d(0.5, 0.0, -0.5, 0.0)).norm() <= 1e-12);

  // yaw moment c_tauf about b3
  Eigen::Vector4d t3 = mix_rotor_thrusts(Wrench{0.0, Vec3(0, 0, p.c_tauf)}, p);
  REQUIRE((t3 - Eigen::Vector4d(-0.25, 0.25, -0.25, 0.25)).norm() <= 1e-12);
}

TEST_CASE("rotor thrusts are clamped with a saturation flag") {
  QuadrotorParams p;
  RotorThrusts rt = rotor_thrusts_from_wrench(Wrench{0.0, Vec3(0, p.d, 0)}, p);
  REQUIRE(rt.saturated);
  REQUIRE(rt.T.minCoeff() >= 0.0);
  REQUIRE(rt.T.maxCoeff() <= p.max_rotor_thrust());

  RotorThrusts ok = rotor_thrusts_from_wrench(
      Wrench{p.hover_thrust(), Vec3(0.05, -0.03, 0.005)}, p);
  REQUIRE_FALSE(ok.saturated);
}

TEST_CASE("forward mixing examples and round trip") {
  QuadrotorParams p;
  Wrench w = wrench_from_rotor_thrusts(Eigen::Vector4d(1, 1, 1, 1), p);
  REQUIRE(w.f == Catch::Approx(4.0).margin(1e-15));
  REQUIRE(w.M.norm() == 0.0);

  Wrench in{20.0, Vec3(0.1, -0.2, 0.01)};
  Wrench back = wrench_from_rotor_thrusts(mix_rotor_thrusts(in, p), p);
  REQUIRE(std::abs(back.f - in.f) <= 1e-12);
  REQUIRE((back.M - in.M).norm() <= 1e-12);

  // Thrusts (1, 0, 1, 0) spin rotors 1 and 3 only; the reactive torque that
  // is consistent with the inverse-mixer matrix comes out as -2 c_tauf.
  Wrench odd = wrench_from_rotor_thrusts(Eigen::Vector4d(1, 0, 1, 0), p);
  REQUIRE(odd.M.z() == Catch::Approx(-2.0 * p.c_tauf).margin(1e-15));
  REQUIRE(std::abs(odd.M.z()) == Catch::Approx(0.027).margin(1e-12));
}

TEST_CASE("omega12 and omega23") {
  QuadrotorState s;
  s.W = Vec3(1, 2, 3);
  REQUIRE((omega12(s) - Vec3(1, 2, 0)).norm() == 0.0);
  REQUIRE((omega23(s) - Vec3(0, 2, 3)).norm() == 0.0);

  s.W = Vec3(0, 0, 5);
  REQUIRE(omega12(s).norm() == 0.0);

  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    QuadrotorState q;
    q.R = exp_hat(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3),
                       rng.uniform(-3, 3)));
    q.W = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    REQUIRE(std::abs(omega12(q).dot(q.b3())) <= 1e-12);
  }
}

TEST_CASE("decoupled moment map") {
  QuadrotorParams p;
  QuadrotorState s;

  Vec3 m0 = moments_from_decoupled(Vec3(0.1, 0.2, 0.0), 0.0, s, p);
  REQUIRE((m0 - Vec3(0.1, 0.2, 0.0)).norm() == 0.0);

  s.W = Vec3(1, 1, 1);
  Vec3 m1 = moments_from_decoupled(Vec3::Zero(), 0.4, s, p);
  REQUIRE(m1.x() == Catch::Approx(0.035).margin(1e-15));
  REQUIRE(m1.y() == Catch::Approx(-0.035).margin(1e-15));
  REQUIRE(m1.z() == 0.4);

  // round trip against tau_1 = M1 - J3 W2 W3, tau_2 = M2 + J3 W3 W1
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    QuadrotorState q;
    q.R = exp_hat(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3),
                       rng.uniform(-3, 3)));
    q.W = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    Vec3 tau(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Vec3 M = moments_from_decoupled(tau, 0.0, q, p);
    double J3 = p.J.z();
    double tau1 = M.x() - J3 * q.W.y() * q.W.z();
    double tau2 = M.y() + J3 * q.W.z() * q.W.x();
    REQUIRE(tau1 == Catch::Approx(q.b1().dot(tau)).margin(1e-12));
    REQUIRE(tau2 == Catch::Approx(q.b2().dot(tau)).margin(1e-12));
  }
}

TEST_CASE("yaw error") {
  QuadrotorState s;
  REQUIRE(yaw_error(s, Vec3(1, 0, 0)) == 0.0);

  s.R = exp_hat(Vec3(0, 0, M_PI / 2));
  REQUIRE(yaw_error(s, Vec3(1, 0, 0)) == Catch::Approx(M_PI / 2).margin(1e-12));

  // pure pitch does not register as yaw error
  s.R = exp_hat(Vec3(0, M_PI / 6, 0));
  REQUIRE(yaw_error(s, Vec3(1, 0, 0)) <= 1e-12);
}

TEST_CASE("translational subsystem is invariant to the yaw moment") {
  QuadrotorParams p;  // J1 == J2
  const double dt = 0.01;
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Rng rng(500 + trial);
    QuadrotorState a;
    a.R = exp_hat(Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                       rng.uniform(-3, 3)));
    a.W = Vec3(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
               rng.uniform(-0.25, 0.25));
    QuadrotorState b = a;
    for (int k = 0; k < 200; ++k) {
      double f = p.hover_thrust() + rng.uniform(-0.3, 0.3);
      Vec3 tau = 0.01 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(-1, 1));
      double m3a = rng.uniform(-0.02, 0.02);
      double m3b = rng.uniform(-0.02, 0.02);
      a = step_rk4_decoupled(a, f, tau, m3a, p, dt);
      b = step_rk4_decoupled(b, f, tau, m3b, p, dt);
      double dev = std::max(
          std::max((a.x - b.x).cwiseAbs().maxCoeff(),
                   (a.v - b.v).cwiseAbs().maxCoeff()),
          std::max((a.R.col(2) - b.R.col(2)).cwiseAbs().maxCoeff(),
                   (omega12(a) - omega12(b)).cwiseAbs().maxCoeff()));
      worst = std::max(worst, dev);
    }
  }
  REQUIRE(worst <= 1e-9);
}

TEST_CASE("parameter randomization keeps the inertia symmetric") {
  QuadrotorParams nominal;
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    QuadrotorParams p = nominal.randomized(rng, 0.05);
    REQUIRE(p.J.x() == p.J.y());
    REQUIRE(p.m >= 0.95 * nominal.m);
    REQUIRE(p.m <= 1.05 * nominal.m);
  }
}

TEST_CASE("semi-implicit euler shares the hover fixed point") {
  QuadrotorParams p;
  QuadrotorState s;
  Wrench w{p.hover_thrust(), Vec3::Zero()};
  QuadrotorState e = step_semi_implicit_euler(s, w, p, 0.01);
  QuadrotorState r = step_rk4(s, w, p, 0.01);
  REQUIRE((e.x - r.x).norm() <= 1e-14);
  REQUIRE((e.v - r.v).norm() <= 1e-14);
  REQUIRE((e.R - r.R).norm() <= 1e-14);
}
