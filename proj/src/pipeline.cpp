#include "pfd/pipeline.hpp"

#include <cmath>
#include <string>

namespace pfd {

std::string_view method_name(Method m) { return m == Method::PfD ? "pfd" : "pfd-reg"; }

std::string_view method_label(Method m) { return m == Method::PfD ? "PfD" : "PfD+REG"; }

Method parse_method(std::string_view name) {
  if (name == "pfd" || name == "PfD") return Method::PfD;
  if (name == "pfd-reg" || name == "PfD+REG") return Method::PfDReg;
  throw InvalidInput("unknown method '" + std::string(name) + "'");
}

int min_views(Method m) { return m == Method::PfD ? 3 : 2; }

std::string_view status_name(EstimateStatus s) {
  switch (s) {
    case EstimateStatus::Ok:
      return "ok";
    case EstimateStatus::InsufficientViews:
      return "insufficient_views";
    case EstimateStatus::PrimalRecoveryFailed:
      return "primal_recovery_failed";
    case EstimateStatus::InitializationFailed:
      return "initialization_failed";
  }
  return "unknown";
}

ObjectEstimate estimate_object(Method method, const ObjectObservations& obs, const CameraMap& cameras,
                               const ImageConditioning& conditioning,
                               const RegularizedOptions& options) {
  ObjectEstimate out;
  out.object_id = obs.object_id;
  out.method = method;
  out.n_views = static_cast<int>(obs.observations.size());
  if (out.n_views < min_views(method)) {
    out.status = EstimateStatus::InsufficientViews;
    return out;
  }

  StackedSystem system = build_system(obs, cameras, conditioning);
  const ClosedFormSolution cf = solve_svd(system);
  if (method == Method::PfD) {
    out.quadric = cf.primal;
    out.ellipsoid = cf.ellipsoid;
    out.residual = cf.residual;
    out.betas = cf.betas;
    if (cf.primal_recovery_failed) out.status = EstimateStatus::PrimalRecoveryFailed;
    return out;
  }

  const double lambda = options.lambda.value_or(options.lambda_scale * cf.sigma_max * cf.sigma_max);
  const RegularizedProblem problem(std::move(system), lambda);
  InitialGuess guess;
  try {
    guess = initial_guess(cf, problem);
  } catch (const InitializationFailed&) {
    out.status = EstimateStatus::InitializationFailed;
    return out;
  }
  const RegularizedSolution sol = solve_regularized(problem, guess, options);
  out.quadric = sol.primal;
  out.ellipsoid = sol.ellipsoid;
  out.residual = std::sqrt(sol.cost_history.back());
  out.betas = sol.betas;
  out.converged = sol.converged;
  if (!sol.primal) out.status = EstimateStatus::PrimalRecoveryFailed;
  return out;
}

}  // namespace pfd
