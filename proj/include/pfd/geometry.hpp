#pragma once

#include <Eigen/Dense>

#include <optional>

#include "pfd/errors.hpp"

namespace pfd {

using Matrix34d = Eigen::Matrix<double, 3, 4>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector10d = Eigen::Matrix<double, 10, 1>;
using GMatrix = Eigen::Matrix<double, 6, 10>;

/// Relative tolerance used for symmetry, rank and sign decisions.
inline constexpr double kDefaultRelTol = 1e-9;

/// Axis-aligned detection box in pixels.
struct BoundingBox {
  double width = 0.0;
  double height = 0.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
};

/// Image ellipse. `alpha` is the angle of the l1 axis with the image x-axis,
/// kept in (-pi/2, pi/2].
struct Ellipse2D {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double l1 = 1.0;
  double l2 = 1.0;
  double alpha = 0.0;
};

// Homogeneous symmetric forms. All are defined up to scale.
struct Conic {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};
struct DualConic {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};
struct Quadric {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
};
struct DualQuadric {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
};

struct CameraProjection {
  Matrix34d P = Matrix34d::Zero();
  int frame_id = 0;
};

struct EllipsoidAxes {
  Eigen::Vector3d semi_axes = Eigen::Vector3d::Ones();  // descending
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // column j <-> semi_axes[j]
};

/// Ellipsoid recovered from (or used to build) a quadric.
///
/// `center` is present whenever the quadric has a finite center, even when the
/// quadric is not a real ellipsoid. `axes` is present iff the quadric is a
/// real ellipsoid; an absent `axes` means zero enclosed volume.
struct Ellipsoid3D {
  std::optional<Eigen::Vector3d> center;
  std::optional<EllipsoidAxes> axes;

  [[nodiscard]] bool valid() const noexcept { return center.has_value() && axes.has_value(); }

  /// Builds a valid ellipsoid. Semi-axes may come in any order; they are
  /// sorted descending together with the rotation columns, and the rotation
  /// is made right-handed.
  static Ellipsoid3D make(const Eigen::Vector3d& center, const Eigen::Vector3d& semi_axes,
                          const Eigen::Matrix3d& rotation);
  static Ellipsoid3D invalid(std::optional<Eigen::Vector3d> center = std::nullopt);
};

/// Center, principal directions and normalized eigenvalues of a quadric
/// [[A, b], [b^T, c]]. `e` holds lambda_j(A) / (-cbar) with cbar the centered
/// constant, so that a real ellipsoid has semi-axes 1/sqrt(e_j). Eigenvalues
/// are sorted ascending, paired with the columns of `directions`.
struct QuadricShape {
  Eigen::Vector3d center;
  Eigen::Vector3d eigenvalues;
  Eigen::Matrix3d directions;
  double centered_constant = 0.0;
  Eigen::Vector3d e;
};

// --- sign / angle conventions -------------------------------------------------

/// Flips the sign so the trace of the leading (n-1)x(n-1) block is >= 0; a
/// zero trace keeps the first nonzero vech element positive.
Eigen::Matrix3d normalize_sign(const Eigen::Matrix3d& m);
Eigen::Matrix4d normalize_sign(const Eigen::Matrix4d& m);

/// Wraps an angle into (-pi/2, pi/2].
double normalize_half_turn(double angle);

// --- vectorization ------------------------------------------------------------

template <int N>
using VechVector = Eigen::Matrix<double, N*(N + 1) / 2, 1>;

/// Column-major lower triangle: (0,0),(1,0),...,(n-1,0),(1,1),(2,1),...
template <int N>
VechVector<N> vech(const Eigen::Matrix<double, N, N>& m) {
  VechVector<N> v;
  int k = 0;
  for (int j = 0; j < N; ++j)
    for (int i = j; i < N; ++i) v(k++) = m(i, j);
  return v;
}

template <int N>
Eigen::Matrix<double, N, N> vech_inv(const VechVector<N>& v) {
  Eigen::Matrix<double, N, N> m;
  int k = 0;
  for (int j = 0; j < N; ++j)
    for (int i = j; i < N; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  return m;
}

Eigen::VectorXd vech(const Eigen::MatrixXd& m);
/// Throws InvalidInput when v.size() != n(n+1)/2.
Eigen::MatrixXd vech_inv(const Eigen::VectorXd& v, int n);

/// D selects vech(X) from vec(X); E rebuilds vec(X) from vech(X).
struct DuplicationMatrices {
  Eigen::MatrixXd D;  // g x n^2
  Eigen::MatrixXd E;  // n^2 x g
};
DuplicationMatrices duplication_matrices(int n);

// --- algebra ------------------------------------------------------------------

/// Transposed cofactor matrix; defined for singular input as well.
Eigen::Matrix3d adjugate(const Eigen::Matrix3d& m);
Eigen::Matrix4d adjugate(const Eigen::Matrix4d& m);

/// Linear map with compute_G(P) * vech(Q*) == vech(P Q* P^T).
GMatrix compute_G(const CameraProjection& camera);

/// P Q* P^T. Throws DegenerateProjection when the result is numerically zero.
DualConic project_quadric(const DualQuadric& dual, const CameraProjection& camera);

/// |det(Q*)|^(1/3) (Q*)^-1, or nullopt when Q* is numerically singular
/// (|det| < 1e-14 after scaling vech(Q*) to unit norm).
std::optional<Quadric> primal_from_dual(const DualQuadric& dual);

DualConic dual_of(const Conic& conic);
DualQuadric dual_of(const Quadric& quadric);

// --- 2D -----------------------------------------------------------------------

/// Axis-aligned ellipse tangent to the four sides of the box.
Ellipse2D ellipse_from_bbox(const BoundingBox& box);

/// Conic through the ellipse boundary, negative inside, with the 2x2 block
/// trace equal to l1^-2 + l2^-2.
Conic conic_from_ellipse(const Ellipse2D& ellipse);

/// Inverse of conic_from_ellipse. The returned ellipse has l1 >= l2.
/// Throws NotAnEllipse for parabolas, hyperbolas, imaginary and degenerate
/// conics.
Ellipse2D ellipse_from_conic(const Conic& conic, double rel_tol = kDefaultRelTol);

// --- 3D -----------------------------------------------------------------------

/// Throws NoFiniteCenter when the 3x3 block is singular.
QuadricShape analyze_quadric(const Quadric& quadric, double rel_tol = kDefaultRelTol);

/// Throws NoFiniteCenter when the 3x3 block is singular; returns an invalid
/// ellipsoid (center kept) for non-ellipsoidal quadrics.
Ellipsoid3D decompose_quadric(const Quadric& quadric, double rel_tol = kDefaultRelTol);

/// Throws InvalidInput for invalid ellipsoids.
Quadric compose_quadric(const Ellipsoid3D& ellipsoid);

}  // namespace pfd
