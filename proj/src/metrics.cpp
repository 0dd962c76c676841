#include "pfd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pfd/random.hpp"

namespace pfd {

namespace {

struct Membership {
  Eigen::Vector3d center;
  Eigen::Matrix3d shape;  // R diag(1/s^2) R^T
  Eigen::Vector3d half_extent;

  explicit Membership(const Ellipsoid3D& e) : center(*e.center) {
    const auto& ax = *e.axes;
    shape = ax.rotation * ax.semi_axes.array().square().inverse().matrix().asDiagonal() *
            ax.rotation.transpose();
    for (int k = 0; k < 3; ++k)
      half_extent(k) = (ax.rotation.row(k).transpose().cwiseProduct(ax.semi_axes)).norm();
  }

  [[nodiscard]] bool contains(const Eigen::Vector3d& x) const {
    const Eigen::Vector3d d = x - center;
    return d.dot(shape * d) <= 1.0;
  }
};

double axis_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c);
}

std::vector<Eigen::Vector3d> major_axis_candidates(const EllipsoidAxes& ax) {
  std::vector<Eigen::Vector3d> out{ax.rotation.col(0)};
  if (ax.semi_axes(0) - ax.semi_axes(1) < 0.01 * ax.semi_axes(0)) out.push_back(ax.rotation.col(1));
  return out;
}

}  // namespace

OverlapEstimate volume_overlap(const Ellipsoid3D& gt, const Ellipsoid3D& est,
                               const MonteCarloOptions& mc) {
  if (!gt.valid()) throw InvalidInput("ground-truth ellipsoid must be valid");
  if (!est.valid()) return {};

  const Membership a(gt);
  const Membership b(est);
  const Eigen::Vector3d lo_a = a.center - a.half_extent, hi_a = a.center + a.half_extent;
  const Eigen::Vector3d lo_b = b.center - b.half_extent, hi_b = b.center + b.half_extent;
  if ((hi_a.array() < lo_b.array()).any() || (hi_b.array() < lo_a.array()).any()) return {};

  const Eigen::Vector3d lo = lo_a.cwiseMin(lo_b);
  const Eigen::Vector3d span = hi_a.cwiseMax(hi_b) - lo;

  Rng rng(mc.seed);
  std::size_t both = 0, either = 0;
  for (std::size_t i = 0; i < mc.samples; ++i) {
    const double ux = rng.uniform();
    const double uy = rng.uniform();
    const double uz = rng.uniform();
    const Eigen::Vector3d x = lo + Eigen::Vector3d(ux, uy, uz).cwiseProduct(span);
    const bool in_a = a.contains(x);
    const bool in_b = b.contains(x);
    both += (in_a && in_b) ? 1 : 0;
    either += (in_a || in_b) ? 1 : 0;
  }
  if (either == 0) return {};
  const double p = static_cast<double>(both) / static_cast<double>(either);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(either))};
}

std::optional<double> orientation_error(const Ellipsoid3D& gt, const Ellipsoid3D& est) {
  if (!gt.valid()) throw InvalidInput("ground-truth ellipsoid must be valid");
  if (!est.valid()) return std::nullopt;
  double best = std::numbers::pi / 2.0;
  for (const auto& g : major_axis_candidates(*gt.axes))
    for (const auto& e : major_axis_candidates(*est.axes)) best = std::min(best, axis_angle(g, e));
  return best;
}

std::vector<double> centroid_success(const std::vector<std::optional<double>>& distances,
                                     const std::vector<double>& thresholds) {
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (const double t : thresholds) {
    if (distances.empty()) {
      out.push_back(0.0);
      continue;
    }
    const auto hits = std::count_if(distances.begin(), distances.end(),
                                    [t](const auto& d) { return d && *d <= t; });
    out.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(distances.size()));
  }
  return out;
}

EvalReport evaluate(const std::vector<EvalPair>& pairs, const std::vector<double>& thresholds,
                    const MonteCarloOptions& mc) {
  EvalReport report;
  report.thresholds = thresholds;
  std::vector<std::optional<double>> distances;
  double theta_sum = 0.0;
  int theta_count = 0;

  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const EvalPair& p = pairs[k];
    ObjectMetrics m;
    m.object_id = p.object_id;
    m.valid = p.est.valid();
    const OverlapEstimate o =
        volume_overlap(p.gt, p.est, MonteCarloOptions{mc.samples, substream_seed(mc.seed, k)});
    m.o3d = o.value;
    m.o3d_std_error = o.std_error;
    m.theta_err = orientation_error(p.gt, p.est);
    if (p.est.center && p.gt.center) m.center_dist = (*p.est.center - *p.gt.center).norm();
    if (m.theta_err) {
      theta_sum += *m.theta_err;
      ++theta_count;
    }
    report.mean_o3d += m.o3d;
    distances.push_back(m.center_dist);
    report.per_object.push_back(std::move(m));
  }
  if (!pairs.empty()) report.mean_o3d /= static_cast<double>(pairs.size());
  if (theta_count > 0) report.mean_theta_err = theta_sum / theta_count;
  report.pct_within = centroid_success(distances, thresholds);
  return report;
}

}  // namespace pfd
