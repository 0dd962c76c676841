#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pfd/closed_form.hpp"
#include "pfd/metrics.hpp"
#include "pfd/pipeline.hpp"
#include "pfd/synthetic.hpp"

namespace pfd::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Matrices travel as row-major nested arrays.
json matrix_to_json(const Eigen::MatrixXd& m);
/// Throws InvalidInput on shape mismatch or non-numeric entries.
Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols);

struct Detection {
  std::string object;
  int frame = 0;
  std::variant<BoundingBox, Ellipse2D> shape;
};

struct GroundTruth {
  std::string object;
  Quadric quadric;
};

struct SceneFile {
  std::vector<CameraProjection> cameras;
  std::vector<Detection> detections;
  std::vector<GroundTruth> gt;
  std::optional<Eigen::Vector2d> image_size;  // width, height

  [[nodiscard]] CameraMap camera_map() const;
  /// One entry per object, in order of first appearance, frames in file order.
  [[nodiscard]] std::vector<ObjectObservations> observations() const;
  /// Image-size conditioning when known, otherwise the box spanned by all
  /// detections.
  [[nodiscard]] ImageConditioning conditioning() const;
};

/// Throws InvalidInput for schema violations, missing cameras or duplicate
/// (object, frame) detections.
SceneFile parse_scene(const json& j);
json scene_to_json(const SceneFile& scene);

/// Scene file holding the exact projections of a synthetic scene, with
/// ground truth attached.
SceneFile scene_file_from_synthetic(const Scene& scene, const ScenarioConfig& cfg);

json estimate_to_json(const ObjectEstimate& e);
json results_to_json(const std::vector<ObjectEstimate>& estimates);

struct ResultRecord {
  std::string object;
  std::string method;
  std::optional<Quadric> quadric;
  bool valid = false;
};
std::vector<ResultRecord> parse_results(const json& j);

json report_to_json(const EvalReport& report);
/// Columns: object_id,o3d,theta_err,center_dist,valid.
std::string report_to_csv(const EvalReport& report);

/// Columns: error_kind,magnitude,method,mean_o3d,mean_theta_err,pct_valid,n_trials.
std::string sweep_to_csv(const SweepResult& sweep);
json sweep_to_json(const SweepResult& sweep);

/// Applies the keys present in `j` on top of `cfg`.
ScenarioConfig scenario_from_json(const json& j, ScenarioConfig cfg = {});
RegularizedOptions regularized_from_json(const json& j, RegularizedOptions opts = {});

json ellipse_to_json(const Ellipse2D& e);

/// Shortest decimal text that parses back to the same double; "nan" for
/// non-finite values.
std::string format_number(double v);

}  // namespace pfd::io
