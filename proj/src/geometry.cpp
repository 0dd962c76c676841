#include "pfd/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace pfd {

namespace {

template <int N>
Eigen::Matrix<double, N, N> normalize_sign_impl(const Eigen::Matrix<double, N, N>& m) {
  const double trace = m.template topLeftCorner<N - 1, N - 1>().trace();
  if (trace > 0.0) return m;
  if (trace < 0.0) return -m;
  const auto v = vech<N>(m);
  for (int k = 0; k < v.size(); ++k) {
    if (v(k) > 0.0) return m;
    if (v(k) < 0.0) return -m;
  }
  return m;
}

template <int N>
Eigen::Matrix<double, N, N> adjugate_impl(const Eigen::Matrix<double, N, N>& m) {
  Eigen::Matrix<double, N, N> adj;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      Eigen::Matrix<double, N - 1, N - 1> minor;
      for (int r = 0, mr = 0; r < N; ++r) {
        if (r == i) continue;
        for (int c = 0, mc = 0; c < N; ++c) {
          if (c == j) continue;
          minor(mr, mc++) = m(r, c);
        }
        ++mr;
      }
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      adj(j, i) = sign * minor.determinant();
    }
  }
  // Cofactors of a symmetric matrix are symmetric in exact arithmetic.
  if (m == m.transpose()) adj = 0.5 * (adj + adj.transpose()).eval();
  return adj;
}

bool finite(const Eigen::Vector2d& v) { return v.allFinite(); }

EigenSignature signature_of(const Eigen::Matrix3d& m, double rel_tol) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m, Eigen::EigenvaluesOnly);
  const double scale = std::max(m.norm(), std::numeric_limits<double>::min());
  EigenSignature s;
  for (int k = 0; k < 3; ++k) {
    const double l = eig.eigenvalues()(k);
    if (std::abs(l) <= rel_tol * scale)
      ++s.zero;
    else if (l > 0.0)
      ++s.positive;
    else
      ++s.negative;
  }
  return s;
}

[[noreturn]] void throw_not_ellipse(const std::string& why, const Eigen::Matrix3d& c, double rel_tol) {
  const auto s = signature_of(c, rel_tol);
  throw NotAnEllipse("conic is not a real ellipse (" + why + "; signature +" +
                         std::to_string(s.positive) + "/-" + std::to_string(s.negative) + "/0:" +
                         std::to_string(s.zero) + ")",
                     s);
}

}  // namespace

// --- Ellipsoid3D --------------------------------------------------------------

Ellipsoid3D Ellipsoid3D::make(const Eigen::Vector3d& center, const Eigen::Vector3d& semi_axes,
                              const Eigen::Matrix3d& rotation) {
  if (!center.allFinite() || !semi_axes.allFinite() || !rotation.allFinite())
    throw InvalidInput("ellipsoid parameters must be finite");
  if ((semi_axes.array() <= 0.0).any()) throw InvalidInput("ellipsoid semi-axes must be positive");
  if (!(rotation.transpose() * rotation).isApprox(Eigen::Matrix3d::Identity(), 1e-9))
    throw InvalidInput("ellipsoid rotation must be orthonormal");

  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return semi_axes(a) > semi_axes(b); });
  EllipsoidAxes axes;
  for (int j = 0; j < 3; ++j) {
    axes.semi_axes(j) = semi_axes(order[j]);
    axes.rotation.col(j) = rotation.col(order[j]);
  }
  if (axes.rotation.determinant() < 0.0) axes.rotation.col(2) *= -1.0;

  Ellipsoid3D out;
  out.center = center;
  out.axes = axes;
  return out;
}

Ellipsoid3D Ellipsoid3D::invalid(std::optional<Eigen::Vector3d> center) {
  Ellipsoid3D out;
  out.center = std::move(center);
  return out;
}

// --- conventions --------------------------------------------------------------

Eigen::Matrix3d normalize_sign(const Eigen::Matrix3d& m) { return normalize_sign_impl<3>(m); }
Eigen::Matrix4d normalize_sign(const Eigen::Matrix4d& m) { return normalize_sign_impl<4>(m); }

double normalize_half_turn(double angle) {
  constexpr double pi = std::numbers::pi;
  return angle - pi * std::ceil((angle - pi / 2.0) / pi);
}

// --- vectorization ------------------------------------------------------------

Eigen::VectorXd vech(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InvalidInput("vech needs a square matrix");
  const auto n = m.rows();
  Eigen::VectorXd v(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) v(k++) = m(i, j);
  return v;
}

Eigen::MatrixXd vech_inv(const Eigen::VectorXd& v, int n) {
  if (n < 1 || v.size() != static_cast<Eigen::Index>(n) * (n + 1) / 2)
    throw InvalidInput("vech length " + std::to_string(v.size()) + " does not match n=" +
                       std::to_string(n));
  Eigen::MatrixXd m(n, n);
  Eigen::Index k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  return m;
}

DuplicationMatrices duplication_matrices(int n) {
  if (n < 1) throw InvalidInput("duplication matrices need n >= 1");
  const int g = n * (n + 1) / 2;
  DuplicationMatrices out{Eigen::MatrixXd::Zero(g, n * n), Eigen::MatrixXd::Zero(n * n, g)};
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      out.D(k, i + j * n) = 1.0;
      out.E(i + j * n, k) = 1.0;
      out.E(j + i * n, k) = 1.0;
      ++k;
    }
  }
  return out;
}

// --- algebra ------------------------------------------------------------------

Eigen::Matrix3d adjugate(const Eigen::Matrix3d& m) { return adjugate_impl<3>(m); }
Eigen::Matrix4d adjugate(const Eigen::Matrix4d& m) { return adjugate_impl<4>(m); }

GMatrix compute_G(const CameraProjection& camera) {
  static const DuplicationMatrices d3 = duplication_matrices(3);
  static const DuplicationMatrices d4 = duplication_matrices(4);
  const Matrix34d& P = camera.P;

  Eigen::Matrix<double, 9, 16> kron;
  for (int ia = 0; ia < 3; ++ia)
    for (int ja = 0; ja < 4; ++ja)
      kron.block<3, 4>(3 * ia, 4 * ja) = P(ia, ja) * P;

  return d3.D * kron * d4.E;
}

DualConic project_quadric(const DualQuadric& dual, const CameraProjection& camera) {
  DualConic out{camera.P * dual.m * camera.P.transpose()};
  const double scale = dual.m.norm();
  if (!(out.m.cwiseAbs().maxCoeff() > 1e-14 * scale))
    throw DegenerateProjection("projected dual conic is numerically zero");
  return out;
}

std::optional<Quadric> primal_from_dual(const DualQuadric& dual) {
  const double norm = vech<4>(dual.m).norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) return std::nullopt;
  const Eigen::Matrix4d unit = dual.m / norm;
  const double det = unit.determinant();
  if (!(std::abs(det) >= 1e-14)) return std::nullopt;
  Eigen::Matrix4d inv = unit.inverse();
  inv = 0.5 * (inv + inv.transpose()).eval();
  // |det(sQ*)|^(1/3) (sQ*)^-1 = s * |det Q*|^(1/3) (Q*)^-1 for s > 0, so the
  // unit scaling only fixes an overall positive factor.
  return Quadric{std::cbrt(std::abs(det)) * inv};
}

DualConic dual_of(const Conic& conic) { return DualConic{adjugate(conic.m)}; }
DualQuadric dual_of(const Quadric& quadric) { return DualQuadric{adjugate(quadric.m)}; }

// --- 2D -----------------------------------------------------------------------

Ellipse2D ellipse_from_bbox(const BoundingBox& box) {
  if (!std::isfinite(box.width) || !std::isfinite(box.height) || !finite(box.center))
    throw InvalidInput("bounding box values must be finite");
  if (box.width <= 0.0 || box.height <= 0.0)
    throw InvalidInput("bounding box dimensions must be positive");
  return Ellipse2D{box.center, box.width / 2.0, box.height / 2.0, 0.0};
}

Conic conic_from_ellipse(const Ellipse2D& e) {
  if (!finite(e.center) || !std::isfinite(e.l1) || !std::isfinite(e.l2) || !std::isfinite(e.alpha))
    throw InvalidInput("ellipse values must be finite");
  if (e.l1 <= 0.0 || e.l2 <= 0.0) throw InvalidInput("ellipse semi-axes must be positive");

  const double c = std::cos(e.alpha);
  const double s = std::sin(e.alpha);
  Eigen::Matrix2d R;
  R << c, -s, s, c;
  const Eigen::Matrix2d A =
      R * Eigen::Vector2d(1.0 / (e.l1 * e.l1), 1.0 / (e.l2 * e.l2)).asDiagonal() * R.transpose();
  const Eigen::Vector2d b = -A * e.center;

  Eigen::Matrix3d C;
  C.topLeftCorner<2, 2>() = 0.5 * (A + A.transpose());
  C.topRightCorner<2, 1>() = b;
  C.bottomLeftCorner<1, 2>() = b.transpose();
  C(2, 2) = e.center.dot(A * e.center) - 1.0;
  return Conic{C};
}

Ellipse2D ellipse_from_conic(const Conic& conic, double rel_tol) {
  if (!conic.m.allFinite()) throw InvalidInput("conic must be finite");
  const double scale = conic.m.norm();
  if (!(scale > 0.0)) throw_not_ellipse("zero matrix", conic.m, rel_tol);
  if (!conic.m.isApprox(conic.m.transpose(), rel_tol))
    throw InvalidInput("conic matrix is not symmetric");

  const Eigen::Matrix3d C = normalize_sign(Eigen::Matrix3d(conic.m / scale));
  const Eigen::Matrix2d A = C.topLeftCorner<2, 2>();
  const Eigen::Vector2d b = C.topRightCorner<2, 1>();

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(A);
  const Eigen::Vector2d mu = eig.eigenvalues();  // ascending
  if (!(mu(0) > rel_tol)) throw_not_ellipse("2x2 block not definite", C, rel_tol);

  const Eigen::Vector2d center = -A.ldlt().solve(b);
  const double cbar = C(2, 2) + b.dot(center);
  if (!(cbar < -rel_tol)) throw_not_ellipse("empty or degenerate real locus", C, rel_tol);

  // Smallest eigenvalue <-> longest axis.
  Ellipse2D out;
  out.center = center;
  out.l1 = std::sqrt(-cbar / mu(0));
  out.l2 = std::sqrt(-cbar / mu(1));
  const Eigen::Vector2d dir = eig.eigenvectors().col(0);
  out.alpha = (out.l1 - out.l2 <= rel_tol * out.l1) ? 0.0
                                                    : normalize_half_turn(std::atan2(dir.y(), dir.x()));
  return out;
}

// --- 3D -----------------------------------------------------------------------

QuadricShape analyze_quadric(const Quadric& quadric, double rel_tol) {
  if (!quadric.m.allFinite()) throw InvalidInput("quadric must be finite");
  const double scale = quadric.m.norm();
  if (!(scale > 0.0)) throw NoFiniteCenter("zero quadric");
  const Eigen::Matrix4d Q = quadric.m / scale;
  const Eigen::Matrix3d A = 0.5 * (Q.topLeftCorner<3, 3>() + Q.topLeftCorner<3, 3>().transpose());
  const Eigen::Vector3d b = Q.topRightCorner<3, 1>();

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(A);
  const Eigen::Vector3d lambda = eig.eigenvalues();
  const double largest = lambda.cwiseAbs().maxCoeff();
  if (!(lambda.cwiseAbs().minCoeff() > rel_tol * std::max(largest, rel_tol)))
    throw NoFiniteCenter("3x3 block of the quadric is singular");

  const Eigen::Matrix3d V = eig.eigenvectors();
  const Eigen::Vector3d center = -V * (V.transpose() * b).cwiseQuotient(lambda);

  QuadricShape shape;
  shape.center = center;
  shape.eigenvalues = lambda;
  shape.directions = V;
  shape.centered_constant = Q(3, 3) + b.dot(center);
  shape.e = lambda / (-shape.centered_constant);
  return shape;
}

Ellipsoid3D decompose_quadric(const Quadric& quadric, double rel_tol) {
  const QuadricShape shape = analyze_quadric(quadric, rel_tol);
  const bool real_ellipsoid = std::abs(shape.centered_constant) > rel_tol &&
                              (shape.e.array() > 0.0).all() && shape.e.allFinite();
  if (!real_ellipsoid) return Ellipsoid3D::invalid(shape.center);

  const Eigen::Vector3d semi = shape.e.cwiseInverse().cwiseSqrt();
  return Ellipsoid3D::make(shape.center, semi, shape.directions);
}

Quadric compose_quadric(const Ellipsoid3D& ellipsoid) {
  if (!ellipsoid.valid()) throw InvalidInput("cannot compose a quadric from an invalid ellipsoid");
  const auto& axes = *ellipsoid.axes;
  const Eigen::Vector3d& t = *ellipsoid.center;
  if ((axes.semi_axes.array() <= 0.0).any() || !axes.semi_axes.allFinite())
    throw InvalidInput("ellipsoid semi-axes must be positive and finite");

  const Eigen::Matrix3d A = axes.rotation *
                            axes.semi_axes.array().square().inverse().matrix().asDiagonal() *
                            axes.rotation.transpose();
  Eigen::Matrix4d Q;
  Q.topLeftCorner<3, 3>() = 0.5 * (A + A.transpose());
  Q.topRightCorner<3, 1>() = -A * t;
  Q.bottomLeftCorner<1, 3>() = (-A * t).transpose();
  Q(3, 3) = t.dot(A * t) - 1.0;
  return Quadric{normalize_sign(Q)};
}

}  // namespace pfd
