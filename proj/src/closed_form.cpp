#include "pfd/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace pfd {

namespace {

Eigen::Matrix3d similarity(const Eigen::Vector2d& center, double half_extent) {
  const double s = 1.0 / half_extent;
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
  H(0, 0) = s;
  H(1, 1) = s;
  H(0, 2) = -s * center.x();
  H(1, 2) = -s * center.y();
  return H;
}

}  // namespace

ImageConditioning ImageConditioning::for_image(double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) throw InvalidInput("image size must be positive");
  return {similarity({width / 2.0, height / 2.0}, std::max(width, height) / 2.0)};
}

ImageConditioning ImageConditioning::from_conics(const std::vector<DualConic>& conics) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  bool any = false;
  for (const auto& c : conics) {
    const Eigen::Matrix3d& m = c.m;
    if (!(std::abs(m(2, 2)) > 1e-12 * m.norm())) continue;
    // Tangent lines x = k satisfy m00 - 2 k m02 + k^2 m22 = 0 (same for y).
    bool ok = true;
    Eigen::Vector2d clo, chi;
    for (int axis = 0; axis < 2; ++axis) {
      const double disc = m(axis, 2) * m(axis, 2) - m(axis, axis) * m(2, 2);
      if (!(disc >= 0.0)) {
        ok = false;
        break;
      }
      const double k1 = (m(axis, 2) + std::sqrt(disc)) / m(2, 2);
      const double k2 = (m(axis, 2) - std::sqrt(disc)) / m(2, 2);
      clo(axis) = std::min(k1, k2);
      chi(axis) = std::max(k1, k2);
    }
    if (!ok || !clo.allFinite() || !chi.allFinite()) continue;
    lo = lo.cwiseMin(clo);
    hi = hi.cwiseMax(chi);
    any = true;
  }
  if (!any) return {};
  const double half = 0.5 * (hi - lo).maxCoeff();
  if (!(half > 0.0)) return {};
  return {similarity(0.5 * (lo + hi), half)};
}

StackedSystem build_system(const ObjectObservations& obs, const CameraMap& cameras,
                           const ImageConditioning& conditioning) {
  const int F = static_cast<int>(obs.observations.size());
  if (F < 2)
    throw InvalidInput("object '" + obs.object_id + "' needs at least two observations, has " +
                       std::to_string(F));

  StackedSystem sys;
  sys.M = Eigen::MatrixXd::Zero(6 * F, 10 + F);
  sys.frames.reserve(F);
  std::set<int> seen;
  const Eigen::Matrix3d& H = conditioning.H;

  for (int f = 0; f < F; ++f) {
    const Observation& o = obs.observations[f];
    if (!seen.insert(o.frame_id).second)
      throw InvalidInput("object '" + obs.object_id + "' has two observations in frame " +
                         std::to_string(o.frame_id));
    const auto cam = cameras.find(o.frame_id);
    if (cam == cameras.end())
      throw InvalidInput("no camera for frame " + std::to_string(o.frame_id));

    const CameraProjection conditioned{H * cam->second.P, cam->second.frame_id};
    const Eigen::Matrix3d c = normalize_sign(Eigen::Matrix3d(H * o.conic.m * H.transpose()));
    Vector6d cv = vech<3>(c);
    const double norm = cv.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw InvalidInput("zero or non-finite dual conic in frame " + std::to_string(o.frame_id));
    cv /= norm;

    sys.M.block<6, 10>(6 * f, 0) = compute_G(conditioned);
    sys.M.block<6, 1>(6 * f, 10 + f) = -cv;
    sys.frames.push_back(o.frame_id);
  }
  return sys;
}

ClosedFormSolution solve_svd(const StackedSystem& system) {
  const Eigen::MatrixXd& M = system.M;
  const int F = system.n_frames();
  if (F < 2 || M.rows() != 6 * F || M.cols() != 10 + F)
    throw InvalidInput("malformed stacked system");

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const Eigen::Index n = M.cols();

  ClosedFormSolution out;
  out.w = svd.matrixV().col(n - 1);
  out.w_second = svd.matrixV().col(n - 2);
  out.residual = sigma(n - 1);
  out.sigma_max = sigma(0);
  out.gap = sigma(n - 2) > 0.0 ? sigma(n - 1) / sigma(n - 2) : 1.0;
  out.ill_posed = F < 3;
  out.ambiguous = out.gap > 0.99;

  auto dual_of_w = [&] { return DualQuadric{vech_inv<4>(Vector10d(out.w.head<10>()))}; };
  auto primal = primal_from_dual(dual_of_w());
  // Sign of w: the primal gets a nonnegative 3x3 trace (dual trace <= 0 when
  // no primal exists).
  const bool flip = primal ? primal->m.topLeftCorner<3, 3>().trace() < 0.0
                           : dual_of_w().m.topLeftCorner<3, 3>().trace() > 0.0;
  if (flip) {
    out.w = -out.w;
    if (primal) primal->m = -primal->m;
  }

  out.dual_quadric = dual_of_w();
  out.betas = out.w.tail(F);
  out.primal = primal;
  out.primal_recovery_failed = !primal.has_value();
  if (primal) {
    try {
      out.ellipsoid = decompose_quadric(*primal);
    } catch (const NoFiniteCenter&) {
      out.ellipsoid = Ellipsoid3D::invalid();
    }
  }
  return out;
}

}  // namespace pfd
