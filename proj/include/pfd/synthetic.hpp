#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "pfd/closed_form.hpp"
#include "pfd/geometry.hpp"
#include "pfd/metrics.hpp"
#include "pfd/pipeline.hpp"
#include "pfd/random.hpp"
#include "pfd/regularized.hpp"

namespace pfd {

/// Synthetic world: random ellipsoids in a cube centered at the origin,
/// observed by look-at cameras on a sphere around it. Angles in degrees.
struct ScenarioConfig {
  int n_objects = 50;
  double cube_side = 20.0;
  double major_axis_min = 3.0;
  double major_axis_max = 12.0;
  double axis_ratio_min = 0.3;
  double axis_ratio_max = 1.0;
  int n_views = 20;
  double camera_distance = 200.0;
  double azimuth_min = 0.0;
  double azimuth_max = 60.0;
  double elevation_min = 0.0;
  double elevation_max = 70.0;
  double focal = 1000.0;
  Eigen::Vector2d principal_point{640.0, 480.0};
  double image_width = 1280.0;
  double image_height = 960.0;
  std::uint64_t seed = 0;

  /// Throws InvalidInput on empty ranges or nonpositive dimensions.
  void validate() const;
};

struct Scene {
  std::vector<Ellipsoid3D> objects;
  std::vector<CameraProjection> cameras;  // frame_id = view index

  [[nodiscard]] CameraMap camera_map() const;
};

Scene generate_scene(const ScenarioConfig& cfg);

/// K [R | -R c] looking from `position` at `target`, with world +z as up.
CameraProjection look_at_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                                double focal, const Eigen::Vector2d& principal_point, int frame_id);

/// Exact image outline of the ellipsoid. Throws DegenerateProjection when the
/// ellipsoid is not entirely in front of the camera or the outline is not a
/// real ellipse.
Ellipse2D project_gt_ellipse(const Ellipsoid3D& ellipsoid, const CameraProjection& camera);

enum class ErrorKind { TE, RE, SE };

std::string_view error_kind_name(ErrorKind k);
ErrorKind parse_error_kind(std::string_view name);

/// Boundary of the zero-mean uniform perturbation: fraction of the mean
/// semi-axis (TE), radians (RE) or relative scale (SE).
struct PerturbationSpec {
  ErrorKind kind = ErrorKind::TE;
  double magnitude = 0.0;
};

/// Applies one error kind. TE draws the two center offsets independently, SE
/// uses one shared scale draw for both axes. Throws InvalidInput for a
/// negative magnitude or an SE magnitude >= 1.
Ellipse2D perturb_ellipse(const Ellipse2D& e, const PerturbationSpec& spec, Rng& rng);

/// Default grids: RE 0..45 deg in 5 deg steps (radians), SE 0..0.5 in 0.05,
/// TE 0..0.3 in 0.03.
std::vector<double> default_grid(ErrorKind k);

struct SweepConfig {
  ScenarioConfig scenario;
  std::vector<ErrorKind> kinds{ErrorKind::RE, ErrorKind::SE, ErrorKind::TE};
  std::map<ErrorKind, std::vector<double>> grids;  // missing kinds use default_grid
  std::vector<Method> methods{Method::PfD, Method::PfDReg};
  int trials = 5;
  MonteCarloOptions mc;
  RegularizedOptions regularized;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepRow {
  ErrorKind kind = ErrorKind::TE;
  double magnitude = 0.0;
  Method method = Method::PfD;
  double mean_o3d = 0.0;
  std::optional<double> mean_theta_err;
  double pct_valid = 0.0;
  int n_trials = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by kind, magnitude, method
};

/// Trial t uses the scene seeded by (seed, t) for every grid point; the
/// perturbation stream is keyed by (seed, kind, magnitude index, trial), so
/// results do not depend on the thread count.
SweepResult run_sweep(const SweepConfig& cfg);

/// Per-object outcome of one solve on a synthetic scene.
struct SceneEvaluation {
  std::vector<ObjectEstimate> estimates;
  EvalReport report;
};

/// Projects every object into every camera, optionally perturbs the ellipses,
/// solves each object and evaluates against the ground truth.
SceneEvaluation evaluate_scene(const Scene& scene, Method method, const ImageConditioning& conditioning,
                               const RegularizedOptions& options, const MonteCarloOptions& mc,
                               const std::optional<PerturbationSpec>& perturbation = std::nullopt,
                               std::uint64_t perturbation_seed = 0);

}  // namespace pfd
