#include "pfd/regularized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>

namespace pfd {

namespace {

// (row, col) of each vech element of a 4x4 symmetric matrix.
constexpr std::pair<int, int> kVech4[10] = {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {1, 1},
                                            {2, 1}, {3, 1}, {2, 2}, {3, 2}, {3, 3}};

/// d vech(S*(s)) / d(t1, t2, t3, a, b).
Eigen::Matrix<double, 10, 5> sphere_vech_jacobian(const SphereParams& s) {
  Eigen::Matrix<double, 10, 5> J = Eigen::Matrix<double, 10, 5>::Zero();
  const Eigen::Vector3d& t = s.t;
  for (int k = 0; k < 10; ++k) {
    const auto [i, j] = kVech4[k];
    if (i < 3 && j < 3) {
      for (int m = 0; m < 3; ++m)
        J(k, m) = -s.b * ((i == m ? t(j) : 0.0) + (j == m ? t(i) : 0.0));
      J(k, 3) = (i == j) ? 1.0 : 0.0;
      J(k, 4) = -t(i) * t(j);
    } else if (i == 3 && j < 3) {
      J(k, j) = -s.b;
      J(k, 4) = -t(j);
    } else {
      J(k, 4) = -1.0;
    }
  }
  return J;
}

void check_normalized(const Vector10d& v_hat) {
  if (!(v_hat(9) < -1e-12))
    throw NormalizationError("dual quadric vector is not normalized to a negative tenth element");
}

}  // namespace

DualQuadric sphere_dual(const SphereParams& s) {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topRightCorner<3, 1>() = s.t;
  const Eigen::Vector4d d(s.a, s.a, s.a, -s.b);
  return DualQuadric{T * d.asDiagonal() * T.transpose()};
}

Vector10d normalize_dual(const Vector10d& v) {
  if (!(std::abs(v(9)) > 1e-12 * v.norm()))
    throw NormalizationError("tenth element of the dual quadric vector is zero");
  return v / (-v(9));
}

double regularizer(const Vector10d& v_hat, const SphereParams& s) {
  check_normalized(v_hat);
  return (v_hat - vech<4>(sphere_dual(s).m)).squaredNorm();
}

Eigen::Matrix<double, 15, 1> regularizer_gradient(const Vector10d& v_hat, const SphereParams& s) {
  check_normalized(v_hat);
  const Vector10d diff = v_hat - vech<4>(sphere_dual(s).m);
  Eigen::Matrix<double, 15, 1> g;
  g.head<10>() = 2.0 * diff;
  g.tail<5>() = -2.0 * sphere_vech_jacobian(s).transpose() * diff;
  return g;
}

InitialGuess initialize(const ClosedFormSolution& cf) {
  if (!cf.primal) throw InitializationFailed("closed-form solution has no primal quadric");
  QuadricShape shape;
  try {
    shape = analyze_quadric(*cf.primal);
  } catch (const NoFiniteCenter& e) {
    throw InitializationFailed(std::string("closed-form quadric has no finite center: ") + e.what());
  }
  const double volume_term = std::abs(shape.e.prod());
  if (!(volume_term > 0.0) || !std::isfinite(volume_term))
    throw InitializationFailed("closed-form quadric has a zero or infinite normalized eigenvalue");

  const double v10 = cf.w(9);
  if (!(std::abs(v10) > 1e-12 * cf.w.head<10>().norm()))
    throw InitializationFailed("tenth element of the closed-form dual quadric is zero");

  InitialGuess guess;
  guess.sphere.t = shape.center;
  guess.sphere.a = std::pow(volume_term, -1.0 / 3.0);
  guess.sphere.b = 1.0;
  guess.v_hat = vech<4>(sphere_dual(guess.sphere).m);
  guess.betas = cf.betas / (-v10);
  return guess;
}

InitialGuess initialize_pencil(const ClosedFormSolution& cf, const RegularizedProblem& problem,
                               int samples) {
  if (cf.w_second.size() != cf.w.size()) return initialize(cf);
  std::optional<InitialGuess> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double theta = std::numbers::pi * k / samples;
    ClosedFormSolution member = cf;
    member.w = std::cos(theta) * cf.w + std::sin(theta) * cf.w_second;
    member.betas = member.w.tail(cf.betas.size());
    member.dual_quadric = DualQuadric{vech_inv<4>(Vector10d(member.w.head<10>()))};
    member.primal = primal_from_dual(member.dual_quadric);
    try {
      InitialGuess guess = initialize(member);
      const double c = problem.cost(problem.pack(guess));
      if (c < best_cost) {
        best_cost = c;
        best = std::move(guess);
      }
    } catch (const Error&) {
    }
  }
  if (!best) throw InitializationFailed("no member of the two-view solution pencil gives a start");
  return *best;
}

InitialGuess initial_guess(const ClosedFormSolution& cf, const RegularizedProblem& problem) {
  return cf.ill_posed ? initialize_pencil(cf, problem) : initialize(cf);
}

// --- problem ------------------------------------------------------------------

RegularizedProblem::RegularizedProblem(StackedSystem system, double lambda)
    : system_(std::move(system)), lambda_(lambda) {
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_))
    throw InvalidInput("regularization weight must be finite and nonnegative");
  if (system_.n_frames() < 2) throw InvalidInput("regularized solve needs at least two views");
}

Eigen::VectorXd RegularizedProblem::pack(const InitialGuess& guess) const {
  const int F = n_frames();
  if (guess.betas.size() != F) throw InvalidInput("initial guess has the wrong number of betas");
  if (!(guess.sphere.a > 0.0) || !(guess.sphere.b > 0.0))
    throw InvalidInput("sphere parameters a and b must be positive");
  const Vector10d v = normalize_dual(guess.v_hat);
  Eigen::VectorXd x(n_params());
  x.head<9>() = v.head<9>();
  x.segment(9, F) = guess.betas;
  x.segment<3>(9 + F) = guess.sphere.t;
  x(12 + F) = std::log(guess.sphere.a);
  x(13 + F) = std::log(guess.sphere.b);
  return x;
}

Vector10d RegularizedProblem::v_hat(const Eigen::VectorXd& x) const {
  Vector10d v;
  v.head<9>() = x.head<9>();
  v(9) = -1.0;
  return v;
}

Eigen::VectorXd RegularizedProblem::betas(const Eigen::VectorXd& x) const {
  return x.segment(9, n_frames());
}

SphereParams RegularizedProblem::sphere(const Eigen::VectorXd& x) const {
  const int F = n_frames();
  return SphereParams{x.segment<3>(9 + F), std::exp(x(12 + F)), std::exp(x(13 + F))};
}

double RegularizedProblem::data_term(const Eigen::VectorXd& x) const {
  return residual(x).head(6 * n_frames()).squaredNorm();
}

Eigen::VectorXd RegularizedProblem::residual(const Eigen::VectorXd& x) const {
  const int F = n_frames();
  const Eigen::MatrixXd& M = system_.M;
  Eigen::VectorXd w(10 + F);
  w.head<10>() = v_hat(x);
  w.tail(F) = betas(x);

  Eigen::VectorXd r(n_residuals());
  r.head(6 * F) = M * w;
  r.tail<10>() = std::sqrt(lambda_) * (w.head<10>() - vech<4>(sphere_dual(sphere(x)).m));
  return r;
}

Eigen::MatrixXd RegularizedProblem::jacobian(const Eigen::VectorXd& x) const {
  const int F = n_frames();
  const Eigen::MatrixXd& M = system_.M;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_residuals(), n_params());

  J.topLeftCorner(6 * F, 9) = M.leftCols(9);
  J.block(0, 9, 6 * F, F) = M.rightCols(F);

  const double root = std::sqrt(lambda_);
  const SphereParams s = sphere(x);
  J.block<9, 9>(6 * F, 0).diagonal().setConstant(root);
  Eigen::Matrix<double, 10, 5> dS = sphere_vech_jacobian(s);
  dS.col(3) *= s.a;  // d/d(log a)
  dS.col(4) *= s.b;  // d/d(log b)
  J.block<10, 5>(6 * F, 9 + F) = -root * dS;
  return J;
}

// --- solver -------------------------------------------------------------------

RegularizedSolution solve_regularized(const RegularizedProblem& problem, const InitialGuess& init,
                                      const RegularizedOptions& options) {
  Eigen::VectorXd x = problem.pack(init);
  Eigen::VectorXd r = problem.residual(x);
  double cost = r.squaredNorm();

  RegularizedSolution out;
  out.lambda = problem.lambda();
  out.cost_history.push_back(cost);

  double damping = 1e-3;
  constexpr double kMaxDamping = 1e16;
  int it = 0;
  bool done = false;
  while (!done && it < options.max_iters) {
    ++it;
    const Eigen::MatrixXd J = problem.jacobian(x);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    const double diag_floor = 1e-12 * std::max(JtJ.diagonal().maxCoeff(), 1e-300);
    const Eigen::VectorXd scaling = JtJ.diagonal().cwiseMax(diag_floor);

    bool accepted = false;
    double step_norm = 0.0;
    while (damping <= kMaxDamping) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += damping * scaling;
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      step_norm = step.norm();
      const Eigen::VectorXd candidate = x + step;
      const Eigen::VectorXd r_new = problem.residual(candidate);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        const double decrease = (cost - cost_new) / std::max(cost, 1e-300);
        x = candidate;
        r = r_new;
        cost = cost_new;
        out.cost_history.push_back(cost);
        damping = std::max(damping * 0.3, 1e-15);
        accepted = true;
        if (decrease < options.tol_cost || cost == 0.0) done = true;
        break;
      }
      if (step_norm < options.tol_step * (x.norm() + options.tol_step)) break;
      damping *= 10.0;
    }

    if (step_norm < options.tol_step * (x.norm() + options.tol_step)) {
      out.status = SolveStatus::Converged;
      done = true;
    } else if (!accepted) {
      out.status = SolveStatus::LineSearchFailure;
      break;
    } else if (done) {
      out.status = SolveStatus::Converged;
    }
  }
  if (!done && out.status != SolveStatus::LineSearchFailure) out.status = SolveStatus::MaxIterations;

  out.iterations = it;
  out.converged = out.status == SolveStatus::Converged;
  out.betas = problem.betas(x);
  out.sphere = problem.sphere(x);
  out.dual_quadric = DualQuadric{vech_inv<4>(problem.v_hat(x))};
  out.primal = primal_from_dual(out.dual_quadric);
  if (out.primal) {
    if (out.primal->m.topLeftCorner<3, 3>().trace() < 0.0) out.primal->m = -out.primal->m;
    try {
      out.ellipsoid = decompose_quadric(*out.primal);
    } catch (const NoFiniteCenter&) {
      out.ellipsoid = Ellipsoid3D::invalid();
    }
  }
  return out;
}

RegularizedSolution solve_pfd_reg(const ObjectObservations& obs, const CameraMap& cameras,
                                  const ImageConditioning& conditioning,
                                  const RegularizedOptions& options) {
  StackedSystem system = build_system(obs, cameras, conditioning);
  const ClosedFormSolution cf = solve_svd(system);
  const double lambda = options.lambda.value_or(options.lambda_scale * cf.sigma_max * cf.sigma_max);
  const RegularizedProblem problem(std::move(system), lambda);
  return solve_regularized(problem, initial_guess(cf, problem), options);
}

}  // namespace pfd
