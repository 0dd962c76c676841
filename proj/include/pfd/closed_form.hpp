#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pfd/geometry.hpp"

namespace pfd {

using CameraMap = std::map<int, CameraProjection>;

struct Observation {
  int frame_id = 0;
  DualConic conic;
};

/// All detections of one object, one per frame.
struct ObjectObservations {
  std::string object_id;
  std::vector<Observation> observations;
};

/// Similarity transform applied to image coordinates before stacking.
/// Pixels u map to H u; cameras become H P and dual conics H C* H^T, so the
/// world-frame quadric is unaffected.
struct ImageConditioning {
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();

  /// Maps the image rectangle [0, width] x [0, height] into [-1, 1]^2.
  static ImageConditioning for_image(double width, double height);
  /// Maps the box spanned by the given dual conics into [-1, 1]^2.
  static ImageConditioning from_conics(const std::vector<DualConic>& conics);
};

/// M = [G_f | -c*_f on the f-th extra column] stacked over frames.
struct StackedSystem {
  Eigen::MatrixXd M;
  std::vector<int> frames;

  [[nodiscard]] int n_frames() const noexcept { return static_cast<int>(frames.size()); }
};

struct ClosedFormSolution {
  Eigen::VectorXd w;  // unit right singular vector, [vech(Q*); betas]
  Eigen::VectorXd w_second;  // right singular vector of the second smallest singular value
  DualQuadric dual_quadric;
  Eigen::VectorXd betas;
  std::optional<Quadric> primal;
  Ellipsoid3D ellipsoid;
  double residual = 0.0;  // smallest singular value of M
  double gap = 0.0;       // smallest / second smallest singular value
  double sigma_max = 0.0;

  bool ill_posed = false;               // fewer than three views
  bool ambiguous = false;               // gap > 0.99
  bool primal_recovery_failed = false;  // Q* numerically singular
};

/// Throws InvalidInput for fewer than two observations, duplicate frames or
/// frames without a camera. Each conditioned dual conic is sign-normalized
/// and scaled to a unit vech before insertion.
StackedSystem build_system(const ObjectObservations& obs, const CameraMap& cameras,
                           const ImageConditioning& conditioning = {});

/// Minimizes |M w| subject to |w| = 1 and recovers the primal quadric.
ClosedFormSolution solve_svd(const StackedSystem& system);

inline ClosedFormSolution solve_closed_form(const ObjectObservations& obs, const CameraMap& cameras,
                                            const ImageConditioning& conditioning = {}) {
  return solve_svd(build_system(obs, cameras, conditioning));
}

}  // namespace pfd
