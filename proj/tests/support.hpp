#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's own conversions, so agreement is meaningful.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "pfd/geometry.hpp"
#include "pfd/random.hpp"

namespace pfd::test {

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

/// Relative distance between a and b when either may be flipped or rescaled.
inline double rel_err_up_to_scale(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd an = a / a.norm();
  Eigen::MatrixXd bn = b / b.norm();
  return std::min((an - bn).norm(), (an + bn).norm());
}

inline Eigen::Matrix4d random_symmetric4(Rng& rng) {
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
  return m;
}

inline Eigen::Matrix3d random_symmetric3(Rng& rng) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
  return m;
}

/// Rotation from the QR factorization of a Gaussian matrix (Haar measure),
/// deliberately a different construction from the library's quaternions.
inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Matrix3d g;
  for (int i = 0; i < 9; ++i) g(i) = rng.normal();
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(g);
  Eigen::Matrix3d q = qr.householderQ();
  const Eigen::Matrix3d r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  if (q.determinant() < 0.0) q.col(2) = -q.col(2);
  return q;
}

inline Ellipsoid3D random_ellipsoid(Rng& rng, double spread = 10.0) {
  const Eigen::Vector3d center(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                               rng.uniform(-spread, spread));
  const Eigen::Vector3d semi(rng.uniform(0.5, 6.0), rng.uniform(0.5, 6.0), rng.uniform(0.5, 6.0));
  return Ellipsoid3D::make(center, semi, random_rotation(rng));
}

/// Primal quadric written out term by term: (x-c)^T R diag(1/s^2) R^T (x-c) - 1.
inline Eigen::Matrix4d quadric_oracle(const Eigen::Vector3d& c, const Eigen::Vector3d& semi,
                                      const Eigen::Matrix3d& R) {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) A += R.col(k) * R.col(k).transpose() / (semi(k) * semi(k));
  Eigen::Matrix4d Q;
  Q << A, -A * c, (-A * c).transpose(), c.dot(A * c) - 1.0;
  return Q;
}

inline Matrix34d random_camera(Rng& rng) {
  Matrix34d P;
  for (int i = 0; i < 12; ++i) P(i) = rng.uniform(-1.0, 1.0);
  return P;
}

/// Camera at `position` looking at `target` (world +z up), focal f, principal
/// point pp; built from explicit basis vectors.
inline Matrix34d camera_oracle(const Eigen::Vector3d& position, const Eigen::Vector3d& target, double f,
                               const Eigen::Vector2d& pp) {
  const Eigen::Vector3d fwd = (target - position).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(fwd.dot(up)) > 0.999) up = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d right = fwd.cross(up).normalized();
  const Eigen::Vector3d down = fwd.cross(right);
  Eigen::Matrix3d R;
  R.row(0) = right;
  R.row(1) = down;
  R.row(2) = fwd;
  Eigen::Matrix3d K;
  K << f, 0, pp.x(), 0, f, pp.y(), 0, 0, 1;
  Matrix34d Rt;
  Rt << R, -R * position;
  return K * Rt;
}

inline Eigen::Vector2d ellipse_point(const Ellipse2D& e, double phi) {
  const double c = std::cos(e.alpha), s = std::sin(e.alpha);
  const double x = e.l1 * std::cos(phi), y = e.l2 * std::sin(phi);
  return e.center + Eigen::Vector2d(c * x - s * y, s * x + c * y);
}

/// Discriminant of |x - c|_A = 1 along the ray o + s d; zero for tangent rays.
inline double tangency_discriminant(const Ellipsoid3D& e, const Eigen::Vector3d& o,
                                    const Eigen::Vector3d& d) {
  const auto& R = e.axes->rotation;
  const Eigen::Matrix3d A =
      R * e.axes->semi_axes.array().square().inverse().matrix().asDiagonal() * R.transpose();
  const Eigen::Vector3d oc = o - *e.center;
  const double a = d.dot(A * d), b = d.dot(A * oc), c = oc.dot(A * oc) - 1.0;
  return (b * b - a * c) / (a * std::max(1.0, std::abs(c)));
}

/// IoU of two equal spheres of radius r at center distance d (lens volume).
inline double sphere_pair_iou(double r, double d) {
  if (d >= 2.0 * r) return 0.0;
  const double lens = std::numbers::pi * (4.0 * r + d) * (2.0 * r - d) * (2.0 * r - d) / 12.0;
  const double ball = 4.0 / 3.0 * std::numbers::pi * r * r * r;
  return lens / (2.0 * ball - lens);
}

/// Smallest angle between the columns a and b as unoriented axes.
inline double axis_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::min(1.0, std::abs(a.normalized().dot(b.normalized()))));
}

}  // namespace pfd::test
