#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "pfd/closed_form.hpp"
#include "pfd/geometry.hpp"

namespace pfd {

/// Sphere (t, a, b) whose dual is T diag(a, a, a, -b) T^T, with T the
/// homogeneous translation by t. a = radius^2 when b = 1.
struct SphereParams {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double a = 1.0;
  double b = 1.0;
};

DualQuadric sphere_dual(const SphereParams& s);

/// Divides a dual-quadric vech by minus its last element so it ends in -1.
/// Throws NormalizationError when the last element is numerically zero.
Vector10d normalize_dual(const Vector10d& v);

/// |v_hat - vech(S*(s))|^2. Throws NormalizationError unless v_hat(9) < -1e-12.
double regularizer(const Vector10d& v_hat, const SphereParams& s);

/// Gradient of regularizer() with respect to (v_hat[0..9], t, a, b).
Eigen::Matrix<double, 15, 1> regularizer_gradient(const Vector10d& v_hat, const SphereParams& s);

struct InitialGuess {
  Vector10d v_hat;
  Eigen::VectorXd betas;
  SphereParams sphere;
};

/// Volume- and center-matched sphere start from a closed-form solution.
/// Throws InitializationFailed when the closed-form quadric has no primal, no
/// finite center, a zero normalized eigenvalue, or a zero tenth dual element.
InitialGuess initialize(const ClosedFormSolution& cf);

struct RegularizedOptions {
  std::optional<double> lambda;  // nullopt: lambda_scale * sigma_max(M)^2
  double lambda_scale = 1e-6;
  int max_iters = 200;
  double tol_cost = 1e-10;
  double tol_step = 1e-12;
};

/// Least-squares form of |M w_hat|^2 + lambda R(v_hat, s).
///
/// Parameter vector x = [v_hat(0..8), betas (F), t (3), log a, log b]; the
/// tenth dual element is pinned to -1. Residual = [M w_hat; sqrt(lambda) *
/// (v_hat - vech(S*(s)))].
class RegularizedProblem {
 public:
  RegularizedProblem(StackedSystem system, double lambda);

  [[nodiscard]] int n_frames() const noexcept { return system_.n_frames(); }
  [[nodiscard]] int n_params() const noexcept { return 14 + n_frames(); }
  [[nodiscard]] int n_residuals() const noexcept { return 6 * n_frames() + 10; }
  [[nodiscard]] double lambda() const noexcept { return lambda_; }
  [[nodiscard]] const StackedSystem& system() const noexcept { return system_; }

  [[nodiscard]] Eigen::VectorXd pack(const InitialGuess& guess) const;
  [[nodiscard]] Vector10d v_hat(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::VectorXd betas(const Eigen::VectorXd& x) const;
  [[nodiscard]] SphereParams sphere(const Eigen::VectorXd& x) const;

  [[nodiscard]] Eigen::VectorXd residual(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  /// Objective value, i.e. the squared residual norm.
  [[nodiscard]] double cost(const Eigen::VectorXd& x) const { return residual(x).squaredNorm(); }
  [[nodiscard]] double data_term(const Eigen::VectorXd& x) const;

 private:
  StackedSystem system_;
  double lambda_;
};

enum class SolveStatus { Converged, MaxIterations, LineSearchFailure };

struct RegularizedSolution {
  DualQuadric dual_quadric;
  std::optional<Quadric> primal;
  Ellipsoid3D ellipsoid;
  Eigen::VectorXd betas;
  SphereParams sphere;
  std::vector<double> cost_history;  // initial cost, then one entry per accepted step
  bool converged = false;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  double lambda = 0.0;
};

RegularizedSolution solve_regularized(const RegularizedProblem& problem, const InitialGuess& init,
                                      const RegularizedOptions& options = {});

/// Two views leave a pencil of exact solutions spanned by the two smallest
/// right singular vectors, one member being the degenerate quadric through
/// both camera centers. Applies `initialize` to `samples` members of that span
/// and keeps the one with the lowest starting objective.
InitialGuess initialize_pencil(const ClosedFormSolution& cf, const RegularizedProblem& problem,
                               int samples = 360);

/// `initialize_pencil` for ill-posed (two-view) solutions, `initialize`
/// otherwise.
InitialGuess initial_guess(const ClosedFormSolution& cf, const RegularizedProblem& problem);

/// Closed-form solve, sphere initialization and refinement of one object.
/// Throws InitializationFailed when the closed-form result cannot seed the
/// refinement.
RegularizedSolution solve_pfd_reg(const ObjectObservations& obs, const CameraMap& cameras,
                                  const ImageConditioning& conditioning = {},
                                  const RegularizedOptions& options = {});

}  // namespace pfd
