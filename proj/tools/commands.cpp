#include "commands.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "pfd/errors.hpp"
#include "pfd/io.hpp"
#include "pfd/mask_fitting.hpp"

namespace pfd::cli {

namespace {

using io::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void emit(const std::string& text, const std::optional<std::filesystem::path>& path, std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  std::ofstream file(*path, std::ios::binary);
  if (!file) throw InvalidInput("cannot write '" + path->string() + "'");
  file << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::optional<double> parse_lambda(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v) || v < 0.0) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw InvalidInput("--lambda must be a nonnegative number or \"auto\", got '" + text + "'");
  }
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

Ellipsoid3D ellipsoid_of(const std::optional<Quadric>& q) {
  if (!q) return {};
  try {
    return decompose_quadric(*q);
  } catch (const NoFiniteCenter&) {
    return {};
  }
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "json") return Format::Json;
  if (name == "csv") return Format::Csv;
  throw InvalidInput("unknown format '" + name + "' (expected json or csv)");
}

// --- fit ----------------------------------------------------------------------

int cmd_fit(const FitOptions& opts, std::ostream& out, std::ostream& err) {
  const io::SceneFile scene = io::parse_scene(read_json(opts.scene));

  RegularizedOptions reg;
  if (opts.config) reg = io::regularized_from_json(read_json(*opts.config).value("regularized", json::object()), reg);
  if (opts.lambda) reg.lambda = parse_lambda(*opts.lambda);
  if (opts.max_iters) reg.max_iters = *opts.max_iters;
  if (opts.tol_cost) reg.tol_cost = *opts.tol_cost;
  if (opts.tol_step) reg.tol_step = *opts.tol_step;

  const auto objects = scene.observations();
  const CameraMap cameras = scene.camera_map();
  const ImageConditioning cond = scene.conditioning();

  std::vector<ObjectEstimate> estimates(objects.size());
  std::vector<std::string> failures(objects.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < objects.size(); i = next++) {
      try {
        estimates[i] = estimate_object(opts.method, objects[i], cameras, cond, reg);
      } catch (const Error& e) {
        failures[i] = objects[i].object_id + ": " + e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned n = worker_count(opts.threads, objects.size());
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
  }
  for (const auto& f : failures)
    if (!f.empty()) throw InvalidInput(f);

  int code = kExitOk;
  for (const auto& e : estimates) {
    if (e.status == EstimateStatus::InsufficientViews) {
      err << "insufficient_views: " << e.object_id << " seen in " << e.n_views << " frame(s), "
          << method_name(opts.method) << " needs " << min_views(opts.method) << "\n";
      code = kExitPartial;
    } else if (e.status != EstimateStatus::Ok) {
      err << status_name(e.status) << ": " << e.object_id << "\n";
    }
  }
  emit(dump(io::results_to_json(estimates)), opts.out, out);
  return code;
}

// --- bench --------------------------------------------------------------------

SweepConfig bench_config(const BenchOptions& opts) {
  SweepConfig cfg;
  if (opts.config) {
    const json j = read_json(*opts.config);
    try {
      if (j.contains("scenario")) cfg.scenario = io::scenario_from_json(j.at("scenario"), cfg.scenario);
      if (j.contains("regularized"))
        cfg.regularized = io::regularized_from_json(j.at("regularized"), cfg.regularized);
      if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
      if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("mc_samples")) cfg.mc.samples = j.at("mc_samples").get<std::size_t>();
      if (j.contains("kinds")) {
        cfg.kinds.clear();
        for (const auto& k : j.at("kinds")) cfg.kinds.push_back(parse_error_kind(k.get<std::string>()));
      }
      if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
      }
      if (j.contains("grids")) {
        for (const auto& [name, values] : j.at("grids").items())
          cfg.grids[parse_error_kind(name)] = values.get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("malformed bench config: ") + e.what());
    }
  }
  if (opts.kinds) {
    cfg.kinds.clear();
    for (const auto& k : *opts.kinds) cfg.kinds.push_back(parse_error_kind(k));
  }
  if (opts.methods) {
    cfg.methods.clear();
    for (const auto& m : *opts.methods) cfg.methods.push_back(parse_method(m));
  }
  if (opts.grid)
    for (ErrorKind k : cfg.kinds) cfg.grids[k] = *opts.grid;
  if (opts.trials) cfg.trials = *opts.trials;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.mc_samples) cfg.mc.samples = *opts.mc_samples;
  if (opts.lambda) cfg.regularized.lambda = parse_lambda(*opts.lambda);
  cfg.mc.seed = cfg.seed;
  cfg.threads = opts.threads;

  if (cfg.trials < 1) throw InvalidInput("--trials must be at least 1");
  if (cfg.mc.samples < 1) throw InvalidInput("--mc-samples must be at least 1");
  if (cfg.kinds.empty() || cfg.methods.empty()) throw InvalidInput("no error kinds or methods selected");
  return cfg;
}

int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& /*err*/) {
  const SweepResult sweep = run_sweep(bench_config(opts));
  emit(opts.format == Format::Csv ? io::sweep_to_csv(sweep) : dump(io::sweep_to_json(sweep)), opts.out, out);
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  const std::vector<io::ResultRecord> results = io::parse_results(read_json(opts.results));
  const io::SceneFile scene = io::parse_scene(read_json(opts.scene));
  if (scene.gt.empty()) throw InvalidInput("scene '" + opts.scene.string() + "' has no ground truth");
  for (double t : opts.thresholds)
    if (!(t >= 0.0)) throw InvalidInput("thresholds must be nonnegative");

  std::map<std::string, Ellipsoid3D> gt;
  for (const auto& g : scene.gt) {
    Ellipsoid3D e = ellipsoid_of(g.quadric);
    if (!e.valid()) throw InvalidInput("ground truth of '" + g.object + "' is not an ellipsoid");
    if (!gt.emplace(g.object, std::move(e)).second)
      throw InvalidInput("duplicate ground truth for '" + g.object + "'");
  }

  int code = kExitOk;
  std::vector<EvalPair> pairs;
  std::set<std::string> matched;
  for (const auto& r : results) {
    const auto it = gt.find(r.object);
    if (it == gt.end()) {
      err << "warning: result '" << r.object << "' has no ground truth, skipped\n";
      code = kExitPartial;
      continue;
    }
    if (!matched.insert(r.object).second) throw InvalidInput("duplicate result for '" + r.object + "'");
    pairs.push_back({r.object, it->second, r.valid ? ellipsoid_of(r.quadric) : Ellipsoid3D{}});
  }
  for (const auto& [id, _] : gt) {
    if (!matched.count(id)) {
      err << "warning: ground truth '" << id << "' has no result, skipped\n";
      code = kExitPartial;
    }
  }

  const EvalReport report = evaluate(pairs, opts.thresholds, {opts.mc_samples, opts.seed});
  emit(opts.format == Format::Csv ? io::report_to_csv(report) : dump(io::report_to_json(report)), opts.out,
       out);
  return code;
}

// --- ellipse-from-mask --------------------------------------------------------

int cmd_ellipse_from_mask(const MaskOptions& opts, std::ostream& out, std::ostream& err) {
  json sidecar = json::object();
  if (opts.sidecar) {
    sidecar = read_json(*opts.sidecar);
    if (!sidecar.is_object()) throw InvalidInput("sidecar must map mask files to {object, frame, origin}");
  }

  int code = kExitOk;
  json detections = json::array();
  for (const auto& path : opts.masks) {
    try {
      const json* meta = nullptr;
      if (sidecar.contains(path.string()))
        meta = &sidecar.at(path.string());
      else if (sidecar.contains(path.filename().string()))
        meta = &sidecar.at(path.filename().string());

      std::string object = path.stem().string();
      int frame = 0;
      BinaryMask mask = load_mask(path);
      if (meta) {
        object = meta->value("object", object);
        frame = meta->value("frame", frame);
        if (meta->contains("origin")) {
          const auto origin = meta->at("origin").get<std::vector<double>>();
          if (origin.size() != 2) throw InvalidInput("origin must be [x, y]");
          mask.origin_offset = {origin[0], origin[1]};
        }
      }
      const Ellipse2D e = moments_ellipse(mask);
      detections.push_back({{"object", object}, {"frame", frame}, {"ellipse", io::ellipse_to_json(e)}});
    } catch (const json::exception& e) {
      err << path.string() << ": bad sidecar entry: " << e.what() << "\n";
      code = kExitPartial;
    } catch (const DegenerateMask& e) {
      err << path.string() << ": degenerate mask: " << e.what() << "\n";
      code = kExitPartial;
    } catch (const Error& e) {
      err << path.string() << ": " << e.what() << "\n";
      code = kExitPartial;
    }
  }
  emit(dump({{"schema_version", io::kSchemaVersion}, {"detections", detections}}), opts.out, out);
  return code;
}

}  // namespace pfd::cli
