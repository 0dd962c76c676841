#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pfd/geometry.hpp"

namespace pfd {

struct MonteCarloOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

struct OverlapEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Intersection over union of the two ellipsoid volumes, by uniform sampling
/// of the union's axis-aligned bounding box. An invalid estimate scores 0.
/// Throws InvalidInput when `gt` is invalid.
OverlapEstimate volume_overlap(const Ellipsoid3D& gt, const Ellipsoid3D& est,
                               const MonteCarloOptions& mc = {});

/// Angle between major axes folded into [0, pi/2]; nullopt for an invalid
/// estimate. When the two largest semi-axes of an ellipsoid are within 1%,
/// both are tried as its major axis and the smallest angle is kept.
std::optional<double> orientation_error(const Ellipsoid3D& gt, const Ellipsoid3D& est);

/// Percentage (0-100) of distances <= each threshold. Missing distances
/// (no finite estimated center) never count as a success.
std::vector<double> centroid_success(const std::vector<std::optional<double>>& distances,
                                     const std::vector<double>& thresholds);

struct ObjectMetrics {
  std::string object_id;
  double o3d = 0.0;
  double o3d_std_error = 0.0;
  std::optional<double> theta_err;
  std::optional<double> center_dist;
  bool valid = false;
};

struct EvalReport {
  std::vector<ObjectMetrics> per_object;
  double mean_o3d = 0.0;
  std::optional<double> mean_theta_err;  // over valid estimates only
  std::vector<double> thresholds;
  std::vector<double> pct_within;
};

struct EvalPair {
  std::string object_id;
  Ellipsoid3D gt;
  Ellipsoid3D est;
};

/// Per-object metrics; object k samples with substream (mc.seed, k).
EvalReport evaluate(const std::vector<EvalPair>& pairs, const std::vector<double>& thresholds,
                    const MonteCarloOptions& mc = {});

}  // namespace pfd
