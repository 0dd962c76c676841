#include "pfd/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

namespace pfd {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Matrix3d random_rotation(Rng& rng) {
  // Uniform unit quaternion (Shoemake).
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double u3 = rng.uniform();
  const double two_pi = 2.0 * std::numbers::pi;
  const Eigen::Quaterniond q(std::sqrt(u1) * std::cos(two_pi * u3),
                             std::sqrt(1.0 - u1) * std::sin(two_pi * u2),
                             std::sqrt(1.0 - u1) * std::cos(two_pi * u2),
                             std::sqrt(u1) * std::sin(two_pi * u3));
  return q.normalized().toRotationMatrix();
}

double evenly(double lo, double hi, int k, int n) {
  return n <= 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
}

std::vector<ObjectObservations> observations_from(const std::vector<std::vector<Ellipse2D>>& ellipses,
                                                  const std::vector<CameraProjection>& cameras) {
  std::vector<ObjectObservations> out(ellipses.size());
  for (std::size_t i = 0; i < ellipses.size(); ++i) {
    out[i].object_id = std::to_string(i);
    for (std::size_t f = 0; f < cameras.size(); ++f)
      out[i].observations.push_back({cameras[f].frame_id, dual_conic_of(ellipses[i][f])});
  }
  return out;
}

std::vector<std::vector<Ellipse2D>> project_all(const Scene& scene) {
  std::vector<std::vector<Ellipse2D>> out(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i)
    for (const auto& cam : scene.cameras) out[i].push_back(project_gt_ellipse(scene.objects[i], cam));
  return out;
}

std::vector<std::vector<Ellipse2D>> perturb_all(const std::vector<std::vector<Ellipse2D>>& gt,
                                                const PerturbationSpec& spec, Rng& rng) {
  auto out = gt;
  for (auto& per_object : out)
    for (auto& e : per_object) e = perturb_ellipse(e, spec, rng);
  return out;
}

}  // namespace

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidInput(std::string("invalid scenario: ") + what);
  };
  require(n_objects >= 0, "n_objects must be nonnegative");
  require(cube_side > 0.0, "cube_side must be positive");
  require(major_axis_min > 0.0 && major_axis_min <= major_axis_max, "major axis range");
  require(axis_ratio_min > 0.0 && axis_ratio_min <= axis_ratio_max && axis_ratio_max <= 1.0,
          "axis ratio range must lie in (0, 1]");
  require(n_views >= 1, "n_views must be positive");
  require(camera_distance > 0.0, "camera_distance must be positive");
  require(azimuth_min <= azimuth_max, "azimuth range");
  require(elevation_min <= elevation_max && elevation_max < 90.0 && elevation_min > -90.0,
          "elevation range must lie inside (-90, 90)");
  require(focal > 0.0 && image_width > 0.0 && image_height > 0.0, "intrinsics");
}

CameraMap Scene::camera_map() const {
  CameraMap out;
  for (const auto& c : cameras) out.emplace(c.frame_id, c);
  return out;
}

CameraProjection look_at_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                                double focal, const Eigen::Vector2d& principal_point, int frame_id) {
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(forward.dot(up)) > 1.0 - 1e-9) up = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);

  Eigen::Matrix3d R;
  R.row(0) = right.transpose();
  R.row(1) = down.transpose();
  R.row(2) = forward.transpose();
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = focal;
  K(1, 1) = focal;
  K(0, 2) = principal_point.x();
  K(1, 2) = principal_point.y();

  CameraProjection cam;
  cam.P.leftCols<3>() = K * R;
  cam.P.col(3) = -K * R * position;
  cam.frame_id = frame_id;
  return cam;
}

Scene generate_scene(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Scene scene;
  const double half = cfg.cube_side / 2.0;
  for (int i = 0; i < cfg.n_objects; ++i) {
    const Eigen::Vector3d center(rng.uniform(-half, half), rng.uniform(-half, half),
                                 rng.uniform(-half, half));
    const double major = rng.uniform(cfg.major_axis_min, cfg.major_axis_max);
    const double g1 = rng.uniform(cfg.axis_ratio_min, cfg.axis_ratio_max);
    const double g2 = rng.uniform(cfg.axis_ratio_min, cfg.axis_ratio_max);
    const Eigen::Matrix3d R = random_rotation(rng);
    scene.objects.push_back(Ellipsoid3D::make(center, {major, g1 * major, g2 * major}, R));
  }
  for (int k = 0; k < cfg.n_views; ++k) {
    const double az = evenly(cfg.azimuth_min, cfg.azimuth_max, k, cfg.n_views) * kDeg;
    const double el = evenly(cfg.elevation_min, cfg.elevation_max, k, cfg.n_views) * kDeg;
    const Eigen::Vector3d pos =
        cfg.camera_distance *
        Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    scene.cameras.push_back(
        look_at_camera(pos, Eigen::Vector3d::Zero(), cfg.focal, cfg.principal_point, k));
  }
  return scene;
}

Ellipse2D project_gt_ellipse(const Ellipsoid3D& ellipsoid, const CameraProjection& camera) {
  if (!ellipsoid.valid()) throw InvalidInput("cannot project an invalid ellipsoid");

  // Depth along the principal axis must stay positive over the whole body.
  const Eigen::Matrix3d Mleft = camera.P.leftCols<3>();
  const double orient = Mleft.determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Vector3d n = orient * camera.P.row(2).head<3>().transpose();
  const double depth = n.dot(*ellipsoid.center) + orient * camera.P(2, 3);
  const auto& ax = *ellipsoid.axes;
  const Eigen::Matrix3d spread =
      ax.rotation * ax.semi_axes.array().square().matrix().asDiagonal() * ax.rotation.transpose();
  if (!(depth > std::sqrt(n.dot(spread * n))))
    throw DegenerateProjection("ellipsoid is not entirely in front of the camera");

  const DualQuadric dual = dual_of(compose_quadric(ellipsoid));
  const DualConic projected = project_quadric(dual, camera);
  try {
    return ellipse_from_conic(Conic{adjugate(projected.m)});
  } catch (const NotAnEllipse& e) {
    throw DegenerateProjection(std::string("outline is not a real ellipse: ") + e.what());
  }
}

std::string_view error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::TE:
      return "TE";
    case ErrorKind::RE:
      return "RE";
    case ErrorKind::SE:
      return "SE";
  }
  return "?";
}

ErrorKind parse_error_kind(std::string_view name) {
  if (name == "TE" || name == "te") return ErrorKind::TE;
  if (name == "RE" || name == "re") return ErrorKind::RE;
  if (name == "SE" || name == "se") return ErrorKind::SE;
  throw InvalidInput("unknown error kind '" + std::string(name) + "'");
}

Ellipse2D perturb_ellipse(const Ellipse2D& e, const PerturbationSpec& spec, Rng& rng) {
  const double m = spec.magnitude;
  if (!(m >= 0.0) || !std::isfinite(m)) throw InvalidInput("perturbation magnitude must be >= 0");
  if (spec.kind == ErrorKind::SE && m >= 1.0)
    throw InvalidInput("size error magnitude must be below 1");

  Ellipse2D out = e;
  switch (spec.kind) {
    case ErrorKind::TE: {
      const double mean_axis = 0.5 * (e.l1 + e.l2);
      const double nu_x = rng.uniform(-m, m);
      const double nu_y = rng.uniform(-m, m);
      out.center += mean_axis * Eigen::Vector2d(nu_x, nu_y);
      break;
    }
    case ErrorKind::RE:
      out.alpha = normalize_half_turn(e.alpha + rng.uniform(-m, m));
      break;
    case ErrorKind::SE: {
      const double scale = 1.0 + rng.uniform(-m, m);
      out.l1 = e.l1 * scale;
      out.l2 = e.l2 * scale;
      break;
    }
  }
  return out;
}

std::vector<double> default_grid(ErrorKind k) {
  std::vector<double> g;
  switch (k) {
    case ErrorKind::RE:
      for (int d = 0; d <= 45; d += 5) g.push_back(d * kDeg);
      break;
    case ErrorKind::SE:
      for (int i = 0; i <= 10; ++i) g.push_back(0.05 * i);
      break;
    case ErrorKind::TE:
      for (int i = 0; i <= 10; ++i) g.push_back(0.03 * i);
      break;
  }
  return g;
}

SceneEvaluation evaluate_scene(const Scene& scene, Method method, const ImageConditioning& conditioning,
                               const RegularizedOptions& options, const MonteCarloOptions& mc,
                               const std::optional<PerturbationSpec>& perturbation,
                               std::uint64_t perturbation_seed) {
  auto ellipses = project_all(scene);
  if (perturbation) {
    Rng rng(perturbation_seed);
    ellipses = perturb_all(ellipses, *perturbation, rng);
  }
  const auto observations = observations_from(ellipses, scene.cameras);
  const CameraMap cameras = scene.camera_map();

  SceneEvaluation out;
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    out.estimates.push_back(estimate_object(method, observations[i], cameras, conditioning, options));
    pairs.push_back({observations[i].object_id, scene.objects[i], out.estimates.back().ellipsoid});
  }
  out.report = evaluate(pairs, {1.0, 2.0}, mc);
  return out;
}

SweepResult run_sweep(const SweepConfig& cfg) {
  if (cfg.trials < 1) throw InvalidInput("sweep needs at least one trial");
  cfg.scenario.validate();

  struct Trial {
    Scene scene;
    std::vector<std::vector<Ellipse2D>> gt;
  };
  std::vector<Trial> trials;
  for (int t = 0; t < cfg.trials; ++t) {
    ScenarioConfig sc = cfg.scenario;
    sc.seed = substream_seed(cfg.seed, 0x5CE7E, t);
    Trial trial{generate_scene(sc), {}};
    trial.gt = project_all(trial.scene);
    trials.push_back(std::move(trial));
  }

  struct Task {
    ErrorKind kind;
    std::size_t mag_index;
    double magnitude;
    int trial;
  };
  std::vector<Task> tasks;
  std::vector<std::pair<ErrorKind, std::vector<double>>> grids;
  for (const ErrorKind k : cfg.kinds) {
    const auto it = cfg.grids.find(k);
    grids.emplace_back(k, it != cfg.grids.end() ? it->second : default_grid(k));
    for (std::size_t m = 0; m < grids.back().second.size(); ++m) {
      PerturbationSpec probe{k, grids.back().second[m]};
      Rng dummy(0);
      perturb_ellipse(Ellipse2D{}, probe, dummy);  // rejects bad magnitudes up front
      for (int t = 0; t < cfg.trials; ++t) tasks.push_back({k, m, grids.back().second[m], t});
    }
  }

  struct Accum {
    double o3d = 0.0;
    double theta = 0.0;
    int theta_count = 0;
    int valid = 0;
    int objects = 0;
  };
  const std::size_t n_methods = cfg.methods.size();
  std::vector<Accum> accum(tasks.size() * n_methods);
  const ImageConditioning conditioning =
      ImageConditioning::for_image(cfg.scenario.image_width, cfg.scenario.image_height);

  auto run_task = [&](std::size_t index) {
    const Task& task = tasks[index];
    const Trial& trial = trials[task.trial];
    Rng rng(substream_seed(cfg.seed, static_cast<int>(task.kind), task.mag_index, task.trial));
    const auto ellipses = perturb_all(trial.gt, {task.kind, task.magnitude}, rng);
    const auto observations = observations_from(ellipses, trial.scene.cameras);
    const CameraMap cameras = trial.scene.camera_map();

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      Accum& acc = accum[index * n_methods + mi];
      for (std::size_t i = 0; i < observations.size(); ++i) {
        const ObjectEstimate est =
            estimate_object(cfg.methods[mi], observations[i], cameras, conditioning, cfg.regularized);
        const Ellipsoid3D& gt = trial.scene.objects[i];
        const MonteCarloOptions mc{cfg.mc.samples, substream_seed(cfg.mc.seed, task.trial, i)};
        acc.o3d += volume_overlap(gt, est.ellipsoid, mc).value;
        if (const auto theta = orientation_error(gt, est.ellipsoid)) {
          acc.theta += *theta;
          ++acc.theta_count;
        }
        acc.valid += est.ellipsoid.valid() ? 1 : 0;
        ++acc.objects;
      }
    }
  };

  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, tasks.size()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < n_threads; ++w)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
      });
  }

  // Tasks were laid out kind-major, then magnitude, then trial.
  SweepResult result;
  std::size_t base = 0;
  for (const auto& [kind, grid] : grids) {
    for (std::size_t m = 0; m < grid.size(); ++m) {
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        Accum total;
        for (int t = 0; t < cfg.trials; ++t) {
          const Accum& a = accum[(base + m * cfg.trials + t) * n_methods + mi];
          total.o3d += a.o3d;
          total.theta += a.theta;
          total.theta_count += a.theta_count;
          total.valid += a.valid;
          total.objects += a.objects;
        }
        SweepRow row;
        row.kind = kind;
        row.magnitude = grid[m];
        row.method = cfg.methods[mi];
        row.n_trials = cfg.trials;
        if (total.objects > 0) {
          row.mean_o3d = total.o3d / total.objects;
          row.pct_valid = 100.0 * total.valid / total.objects;
        }
        if (total.theta_count > 0) row.mean_theta_err = total.theta / total.theta_count;
        result.rows.push_back(row);
      }
    }
    base += grid.size() * cfg.trials;
  }
  return result;
}

}  // namespace pfd
