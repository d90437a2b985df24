#include <catch2/catch_amalgamated.hpp>

#include "quadrl/geometry.hpp"
#include "quadrl/rng.hpp"

using namespace quadrl;

namespace {

Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-6) {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  }
  return v.normalized();
}

}  // namespace

TEST_CASE("hat map") {
  Mat3 expected;
  expected << 0, 0, 0,
              0, 0, -1,
              0, 1, 0;
  REQUIRE((hat(Vec3(1, 0, 0)) - expected).norm() == 0.0);

  Vec3 v(2, -1, 3);
  REQUIRE((hat(v) * v).norm() == 0.0);  // hat(v) v = v x v = 0

  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Vec3 a(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    Vec3 b(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    REQUIRE((hat(a) * b - a.cross(b)).norm() < 1e-15);
    REQUIRE((hat(a).transpose() + hat(a)).norm() == 0.0);
  }
}

TEST_CASE("vee map") {
  Mat3 S;
  S << 0, 0, 0,
       0, 0, -1,
       0, 1, 0;
  REQUIRE((vee(S) - Vec3(1, 0, 0)).norm() == 0.0);
  REQUIRE(vee(Mat3::Zero()).norm() == 0.0);

  Vec3 v(0.3, 0.5, -0.2);
  REQUIRE((vee(hat(v)) - v).norm() == 0.0);

  Mat3 not_skew = Mat3::Identity();
  REQUIRE_THROWS_AS(vee(not_skew), std::invalid_argument);
}

TEST_CASE("vee(hat(v)) round trip over random unit vectors") {
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    Vec3 v = random_unit(rng);
    REQUIRE((vee(hat(v)) - v).norm() <= 1e-12);
  }
}

TEST_CASE("plane projection") {
  REQUIRE((project_to_plane(Vec3(1, 0, 0), Vec3(0, 0, 1)) - Vec3(1, 0, 0))
              .norm() == 0.0);
  REQUIRE_THROWS_AS(project_to_plane(Vec3(0, 0, 1), Vec3(0, 0, 1)),
                    DegenerateHeadingError);

  double s = 1.0 / std::sqrt(2.0);
  Vec3 b1c = project_to_plane(Vec3(s, 0, s), Vec3(0, 0, 1));
  REQUIRE((b1c - Vec3(s, 0, 0)).norm() < 1e-15);

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Vec3 b1d = random_unit(rng);
    Vec3 b3 = random_unit(rng);
    if (std::abs(b1d.dot(b3)) > 0.99) continue;
    REQUIRE(std::abs(project_to_plane(b1d, b3).dot(b3)) <= 1e-12);
  }
}

TEST_CASE("angle between vectors") {
  REQUIRE(angle_between(Vec3(1, 0, 0), Vec3(0, 1, 0)) ==
          Catch::Approx(M_PI / 2).margin(1e-15));
  Vec3 v(0.2, 0.3, 0.9);
  REQUIRE(angle_between(v, v) == Catch::Approx(0.0).margin(1e-7));
  REQUIRE(angle_between(Vec3(1, 0, 0), Vec3(-1, 0, 0)) ==
          Catch::Approx(M_PI).margin(1e-15));
  REQUIRE_THROWS_AS(angle_between(Vec3::Zero(), Vec3(1, 0, 0)),
                    std::invalid_argument);
  // symmetry
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Vec3 u = random_unit(rng), w = random_unit(rng);
    REQUIRE(angle_between(u, w) == angle_between(w, u));
  }
}

TEST_CASE("attitude error") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    Mat3 R = exp_hat(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3),
                          rng.uniform(-3, 3)));
    REQUIRE(attitude_error(R, R).norm() == 0.0);
  }

  Mat3 R90 = exp_hat(Vec3(0, 0, M_PI / 2));
  REQUIRE((attitude_error(R90, Mat3::Identity()) - Vec3(0, 0, 1)).norm() <
          1e-14);

  // antipodal 180-degree yaw: the metric vanishes there
  Mat3 R180 = Vec3(-1, -1, 1).asDiagonal();
  REQUIRE(attitude_error(R180, Mat3::Identity()).norm() <= 1e-15);
}

TEST_CASE("orthonormalization recovers a nearby rotation") {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    Mat3 R = exp_hat(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3),
                          rng.uniform(-3, 3)));
    Mat3 noisy = R;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) noisy(r, c) += rng.uniform(-1e-4, 1e-4);
    Mat3 fixed = orthonormalized(noisy);
    REQUIRE(is_rotation(fixed, 1e-12));
    REQUIRE((fixed - R).norm() < 1e-3);
  }
}

TEST_CASE("exp_hat agrees with axis-angle") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    Vec3 w(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    Eigen::AngleAxisd aa(w.norm(), w.norm() > 0 ? Vec3(w.normalized())
                                                : Vec3(1, 0, 0));
    REQUIRE((exp_hat(w) - aa.toRotationMatrix()).norm() < 1e-13);
    REQUIRE(is_rotation(exp_hat(w), 1e-13));
  }
  // small-angle branch
  Vec3 tiny(1e-10, -2e-10, 5e-11);
  REQUIRE(is_rotation(exp_hat(tiny), 1e-15));
}
