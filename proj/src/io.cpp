#include "pfd/io.hpp"

#include <charconv>
#include <map>
#include <set>
#include <sstream>

namespace pfd::io {

namespace {

double finite_number(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) throw InvalidInput(std::string("'") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw InvalidInput(std::string("'") + key + "' must be finite");
  return d;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

Detection parse_detection(const json& d) {
  Detection out;
  out.object = d.at("object").get<std::string>();
  out.frame = d.at("frame").get<int>();
  const bool has_box = d.contains("bbox");
  const bool has_ellipse = d.contains("ellipse");
  if (has_box == has_ellipse)
    throw InvalidInput("detection of '" + out.object + "' in frame " + std::to_string(out.frame) +
                       " needs exactly one of 'bbox' or 'ellipse'");
  if (has_box) {
    const json& b = d.at("bbox");
    BoundingBox box{finite_number(b, "w"), finite_number(b, "h"),
                    {finite_number(b, "cx"), finite_number(b, "cy")}};
    ellipse_from_bbox(box);  // validates
    out.shape = box;
  } else {
    const json& e = d.at("ellipse");
    Ellipse2D el{{finite_number(e, "cx"), finite_number(e, "cy")},
                 finite_number(e, "l1"),
                 finite_number(e, "l2"),
                 finite_number(e, "alpha")};
    if (el.l1 <= 0.0 || el.l2 <= 0.0) throw InvalidInput("ellipse semi-axes must be positive");
    out.shape = el;
  }
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw InvalidInput("expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw InvalidInput("expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw InvalidInput("matrix entries must be numbers");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

// --- scene --------------------------------------------------------------------

CameraMap SceneFile::camera_map() const {
  CameraMap out;
  for (const auto& c : cameras) out.emplace(c.frame_id, c);
  return out;
}

std::vector<ObjectObservations> SceneFile::observations() const {
  std::vector<ObjectObservations> out;
  std::map<std::string, std::size_t> index;
  for (const auto& d : detections) {
    auto [it, inserted] = index.emplace(d.object, out.size());
    if (inserted) out.push_back({d.object, {}});
    const Ellipse2D e = std::visit(
        [](const auto& s) -> Ellipse2D {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, BoundingBox>)
            return ellipse_from_bbox(s);
          else
            return s;
        },
        d.shape);
    out[it->second].observations.push_back({d.frame, dual_conic_of(e)});
  }
  return out;
}

ImageConditioning SceneFile::conditioning() const {
  if (image_size) return ImageConditioning::for_image(image_size->x(), image_size->y());
  std::vector<DualConic> conics;
  for (const auto& obs : observations())
    for (const auto& o : obs.observations) conics.push_back(o.conic);
  return ImageConditioning::from_conics(conics);
}

SceneFile parse_scene(const json& j) {
  try {
    SceneFile scene;
    if (!j.is_object()) throw InvalidInput("scene must be a JSON object");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion)
      throw InvalidInput("unsupported scene schema_version");
    if (j.contains("image")) {
      const json& im = j.at("image");
      scene.image_size = Eigen::Vector2d(finite_number(im, "width"), finite_number(im, "height"));
    }

    std::set<int> frames;
    for (const json& c : j.at("cameras")) {
      CameraProjection cam;
      cam.frame_id = c.at("frame").get<int>();
      cam.P = matrix_from_json(c.at("P"), 3, 4);
      if (!cam.P.allFinite()) throw InvalidInput("camera matrices must be finite");
      if (Eigen::FullPivLU<Matrix34d>(cam.P).rank() != 3)
        throw InvalidInput("camera of frame " + std::to_string(cam.frame_id) + " is not rank 3");
      if (!frames.insert(cam.frame_id).second)
        throw InvalidInput("duplicate camera for frame " + std::to_string(cam.frame_id));
      scene.cameras.push_back(cam);
    }

    std::set<std::pair<std::string, int>> seen;
    for (const json& d : j.at("detections")) {
      Detection det = parse_detection(d);
      if (!frames.count(det.frame))
        throw InvalidInput("detection of '" + det.object + "' refers to frame " +
                           std::to_string(det.frame) + " without a camera");
      if (!seen.insert({det.object, det.frame}).second)
        throw InvalidInput("two detections of '" + det.object + "' in frame " +
                           std::to_string(det.frame));
      scene.detections.push_back(std::move(det));
    }

    if (j.contains("gt")) {
      for (const json& g : j.at("gt")) {
        GroundTruth gt;
        gt.object = g.at("object").get<std::string>();
        gt.quadric.m = matrix_from_json(g.at("quadric"), 4, 4);
        if (!gt.quadric.m.allFinite()) throw InvalidInput("gt quadrics must be finite");
        scene.gt.push_back(std::move(gt));
      }
    }
    return scene;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed scene: ") + e.what());
  }
}

json ellipse_to_json(const Ellipse2D& e) {
  return {{"cx", e.center.x()}, {"cy", e.center.y()}, {"l1", e.l1}, {"l2", e.l2}, {"alpha", e.alpha}};
}

json scene_to_json(const SceneFile& scene) {
  json j;
  j["schema_version"] = kSchemaVersion;
  if (scene.image_size)
    j["image"] = {{"width", scene.image_size->x()}, {"height", scene.image_size->y()}};
  j["cameras"] = json::array();
  for (const auto& c : scene.cameras)
    j["cameras"].push_back({{"frame", c.frame_id}, {"P", matrix_to_json(c.P)}});
  j["detections"] = json::array();
  for (const auto& d : scene.detections) {
    json dj{{"object", d.object}, {"frame", d.frame}};
    if (const auto* box = std::get_if<BoundingBox>(&d.shape))
      dj["bbox"] = {{"cx", box->center.x()}, {"cy", box->center.y()}, {"w", box->width}, {"h", box->height}};
    else
      dj["ellipse"] = ellipse_to_json(std::get<Ellipse2D>(d.shape));
    j["detections"].push_back(std::move(dj));
  }
  if (!scene.gt.empty()) {
    j["gt"] = json::array();
    for (const auto& g : scene.gt)
      j["gt"].push_back({{"object", g.object}, {"quadric", matrix_to_json(g.quadric.m)}});
  }
  return j;
}

SceneFile scene_file_from_synthetic(const Scene& scene, const ScenarioConfig& cfg) {
  SceneFile out;
  out.cameras = scene.cameras;
  out.image_size = Eigen::Vector2d(cfg.image_width, cfg.image_height);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const std::string id = "obj" + std::to_string(i);
    for (const auto& cam : scene.cameras)
      out.detections.push_back({id, cam.frame_id, project_gt_ellipse(scene.objects[i], cam)});
    out.gt.push_back({id, compose_quadric(scene.objects[i])});
  }
  return out;
}

// --- results ------------------------------------------------------------------

json estimate_to_json(const ObjectEstimate& e) {
  json j;
  j["object"] = e.object_id;
  j["method"] = std::string(method_name(e.method));
  j["status"] = std::string(status_name(e.status));
  j["quadric"] = e.quadric ? matrix_to_json(e.quadric->m) : json(nullptr);
  if (e.ellipsoid.valid()) {
    j["ellipsoid"] = {{"center", matrix_to_json(e.ellipsoid.center->transpose())[0]},
                      {"semi_axes", matrix_to_json(e.ellipsoid.axes->semi_axes.transpose())[0]},
                      {"rotation", matrix_to_json(e.ellipsoid.axes->rotation)}};
  } else {
    j["ellipsoid"] = nullptr;
  }
  j["valid"] = e.ellipsoid.valid();
  j["residual"] = e.residual;
  j["betas"] = json::array();
  for (Eigen::Index k = 0; k < e.betas.size(); ++k) j["betas"].push_back(e.betas(k));
  j["n_views"] = e.n_views;
  if (e.method == Method::PfDReg) j["converged"] = e.converged;
  return j;
}

json results_to_json(const std::vector<ObjectEstimate>& estimates) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["results"] = json::array();
  for (const auto& e : estimates) j["results"].push_back(estimate_to_json(e));
  return j;
}

std::vector<ResultRecord> parse_results(const json& j) {
  try {
    std::vector<ResultRecord> out;
    for (const json& r : j.at("results")) {
      ResultRecord rec;
      rec.object = r.at("object").get<std::string>();
      rec.method = r.value("method", "");
      rec.valid = r.value("valid", false);
      if (r.contains("quadric") && !r.at("quadric").is_null())
        rec.quadric = Quadric{matrix_from_json(r.at("quadric"), 4, 4)};
      out.push_back(std::move(rec));
    }
    return out;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed results: ") + e.what());
  }
}

// --- reports ------------------------------------------------------------------

json report_to_json(const EvalReport& report) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["per_object"] = json::array();
  for (const auto& m : report.per_object) {
    j["per_object"].push_back({{"object_id", m.object_id},
                               {"o3d", m.o3d},
                               {"o3d_std_error", m.o3d_std_error},
                               {"theta_err", optional_number(m.theta_err)},
                               {"center_dist", optional_number(m.center_dist)},
                               {"valid", m.valid}});
  }
  json agg;
  agg["mean_o3d"] = report.mean_o3d;
  agg["mean_theta_err"] = optional_number(report.mean_theta_err);
  agg["pct_within"] = json::array();
  for (std::size_t k = 0; k < report.thresholds.size(); ++k)
    agg["pct_within"].push_back({{"threshold", report.thresholds[k]}, {"pct", report.pct_within[k]}});
  j["aggregates"] = agg;
  return j;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "object_id,o3d,theta_err,center_dist,valid\n";
  for (const auto& m : report.per_object) {
    out << m.object_id << ',' << format_number(m.o3d) << ','
        << (m.theta_err ? format_number(*m.theta_err) : "") << ','
        << (m.center_dist ? format_number(*m.center_dist) : "") << ',' << (m.valid ? "true" : "false")
        << '\n';
  }
  return out.str();
}

std::string sweep_to_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "error_kind,magnitude,method,mean_o3d,mean_theta_err,pct_valid,n_trials\n";
  for (const auto& r : sweep.rows) {
    out << error_kind_name(r.kind) << ',' << format_number(r.magnitude) << ',' << method_label(r.method)
        << ',' << format_number(r.mean_o3d) << ','
        << (r.mean_theta_err ? format_number(*r.mean_theta_err) : "") << ','
        << format_number(r.pct_valid) << ',' << r.n_trials << '\n';
  }
  return out.str();
}

json sweep_to_json(const SweepResult& sweep) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["rows"] = json::array();
  for (const auto& r : sweep.rows) {
    j["rows"].push_back({{"error_kind", std::string(error_kind_name(r.kind))},
                         {"magnitude", r.magnitude},
                         {"method", std::string(method_label(r.method))},
                         {"mean_o3d", r.mean_o3d},
                         {"mean_theta_err", optional_number(r.mean_theta_err)},
                         {"pct_valid", r.pct_valid},
                         {"n_trials", r.n_trials}});
  }
  return j;
}

// --- configuration ------------------------------------------------------------

ScenarioConfig scenario_from_json(const json& j, ScenarioConfig cfg) {
  try {
    auto num = [&](const char* key, double& dst) {
      if (j.contains(key)) dst = j.at(key).get<double>();
    };
    auto integer = [&](const char* key, int& dst) {
      if (j.contains(key)) dst = j.at(key).get<int>();
    };
    integer("n_objects", cfg.n_objects);
    num("cube_side", cfg.cube_side);
    if (j.contains("major_axis_range")) {
      cfg.major_axis_min = j.at("major_axis_range").at(0).get<double>();
      cfg.major_axis_max = j.at("major_axis_range").at(1).get<double>();
    }
    if (j.contains("axis_ratio_range")) {
      cfg.axis_ratio_min = j.at("axis_ratio_range").at(0).get<double>();
      cfg.axis_ratio_max = j.at("axis_ratio_range").at(1).get<double>();
    }
    integer("n_views", cfg.n_views);
    num("camera_distance", cfg.camera_distance);
    if (j.contains("azimuth_range")) {
      cfg.azimuth_min = j.at("azimuth_range").at(0).get<double>();
      cfg.azimuth_max = j.at("azimuth_range").at(1).get<double>();
    }
    if (j.contains("elevation_range")) {
      cfg.elevation_min = j.at("elevation_range").at(0).get<double>();
      cfg.elevation_max = j.at("elevation_range").at(1).get<double>();
    }
    num("focal", cfg.focal);
    if (j.contains("principal_point"))
      cfg.principal_point = {j.at("principal_point").at(0).get<double>(),
                             j.at("principal_point").at(1).get<double>()};
    num("image_width", cfg.image_width);
    num("image_height", cfg.image_height);
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed scenario config: ") + e.what());
  }
}

RegularizedOptions regularized_from_json(const json& j, RegularizedOptions opts) {
  try {
    if (j.contains("lambda")) {
      const json& l = j.at("lambda");
      if (l.is_string()) {
        if (l.get<std::string>() != "auto") throw InvalidInput("lambda must be a number or \"auto\"");
        opts.lambda.reset();
      } else {
        opts.lambda = l.get<double>();
      }
    }
    if (j.contains("lambda_scale")) opts.lambda_scale = j.at("lambda_scale").get<double>();
    if (j.contains("max_iters")) opts.max_iters = j.at("max_iters").get<int>();
    if (j.contains("tol_cost")) opts.tol_cost = j.at("tol_cost").get<double>();
    if (j.contains("tol_step")) opts.tol_step = j.at("tol_step").get<double>();
    return opts;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed solver config: ") + e.what());
  }
}

}  // namespace pfd::io
