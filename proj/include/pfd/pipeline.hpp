#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pfd/closed_form.hpp"
#include "pfd/regularized.hpp"

namespace pfd {

enum class Method { PfD, PfDReg };

std::string_view method_name(Method m);  // "pfd" / "pfd-reg"
std::string_view method_label(Method m);  // "PfD" / "PfD+REG"
/// Accepts either spelling. Throws InvalidInput otherwise.
Method parse_method(std::string_view name);

/// Minimum number of views each method accepts.
int min_views(Method m);

enum class EstimateStatus { Ok, InsufficientViews, PrimalRecoveryFailed, InitializationFailed };

std::string_view status_name(EstimateStatus s);

struct ObjectEstimate {
  std::string object_id;
  Method method = Method::PfD;
  EstimateStatus status = EstimateStatus::Ok;
  std::optional<Quadric> quadric;
  Ellipsoid3D ellipsoid;
  double residual = 0.0;
  Eigen::VectorXd betas;
  int n_views = 0;
  bool converged = true;
};

/// Runs one method on one object. Solver-level failures are reported through
/// `status` rather than thrown; malformed input (missing cameras, duplicate
/// frames) still throws InvalidInput.
ObjectEstimate estimate_object(Method method, const ObjectObservations& obs, const CameraMap& cameras,
                               const ImageConditioning& conditioning = {},
                               const RegularizedOptions& options = {});

/// Dual conic of an image ellipse.
inline DualConic dual_conic_of(const Ellipse2D& e) { return dual_of(conic_from_ellipse(e)); }

}  // namespace pfd
