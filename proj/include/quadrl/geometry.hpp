#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace quadrl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Thrown when a desired heading is (numerically) parallel to the thrust axis
// and no yaw reference can be projected.
struct DegenerateHeadingError : std::domain_error {
  DegenerateHeadingError()
      : std::domain_error("heading direction parallel to thrust axis") {}
};

// hat map R^3 -> so(3): hat(v) * y == v x y.
inline Mat3 hat(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return S;
}

// vee map so(3) -> R^3, inverse of hat. Input must be skew-symmetric.
inline Vec3 vee(const Mat3& S) {
  if ((S + S.transpose()).norm() > 1e-9) {
    throw std::invalid_argument("vee: matrix is not skew-symmetric");
  }
  return Vec3(S(2, 1), S(0, 2), S(1, 0));
}

// Projection of b1d into the plane normal to b3: (I - b3 b3^T) b1d.
// Both inputs are expected to be unit vectors.
inline Vec3 project_to_plane(const Vec3& b1d, const Vec3& b3) {
  Vec3 b1c = b1d - b3 * b3.dot(b1d);
  if (b1c.norm() < 1e-6) {
    throw DegenerateHeadingError();
  }
  return b1c;
}

// Angle between two nonzero vectors, in [0, pi]. The normalized dot product
// is clamped to [-1, 1] before acos.
inline double angle_between(const Vec3& u, const Vec3& v) {
  double nu = u.norm();
  double nv = v.norm();
  if (nu < 1e-9 || nv < 1e-9) {
    throw std::invalid_argument("angle_between: near-zero vector");
  }
  double c = u.dot(v) / (nu * nv);
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c);
}

// Attitude error e_R = 1/2 (Rd^T R - R^T Rd)^vee. Vanishes both at R == Rd
// and at the 180-degree antipode; near the antipode the yaw angle error is
// the informative metric.
inline Vec3 attitude_error(const Mat3& R, const Mat3& Rd) {
  Mat3 E = 0.5 * (Rd.transpose() * R - R.transpose() * Rd);
  return Vec3(E(2, 1), E(0, 2), E(1, 0));
}

// Nearest rotation matrix in the Frobenius sense (polar factor via SVD).
inline Mat3 orthonormalized(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  Mat3 V = svd.matrixV();
  Mat3 D = Mat3::Identity();
  D(2, 2) = (U * V.transpose()).determinant() > 0.0 ? 1.0 : -1.0;
  return U * D * V.transpose();
}

inline double so3_drift(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).norm();
}

inline bool is_rotation(const Mat3& R, double tol = 1e-9) {
  return so3_drift(R) <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

// Rodrigues formula, exp(hat(w)). Series fallback near zero angle.
inline Mat3 exp_hat(const Vec3& w) {
  double th = w.norm();
  Mat3 S = hat(w);
  double a, b;
  if (th < 1e-8) {
    a = 1.0 - th * th / 6.0;
    b = 0.5 - th * th / 24.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / (th * th);
  }
  return Mat3::Identity() + a * S + b * S * S;
}

}  // namespace quadrl
