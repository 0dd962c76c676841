// pfd: ellipsoid pose from multi-view detections.

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "pfd/errors.hpp"

namespace {

template <class T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& dst, const std::string& help) {
  app->add_option_function<T>(name, [&dst](const T& v) { dst = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace pfd::cli;

  CLI::App app{"Recover object ellipsoids from multi-view 2D detections"};
  app.require_subcommand(1);

  FitOptions fit;
  std::string fit_method = "pfd";
  auto* fit_cmd = app.add_subcommand("fit", "Estimate one ellipsoid per object of a scene file");
  fit_cmd->add_option("scene", fit.scene, "Scene JSON (cameras and detections)")->required();
  fit_cmd->add_option("--method", fit_method, "pfd or pfd-reg")->check(CLI::IsMember({"pfd", "pfd-reg"}));
  optional_flag(fit_cmd, "--config", fit.config, "JSON file with a \"regularized\" section");
  optional_flag(fit_cmd, "--lambda", fit.lambda, "Regularization weight, or \"auto\"");
  optional_flag(fit_cmd, "--max-iters", fit.max_iters, "Iteration cap for pfd-reg");
  optional_flag(fit_cmd, "--tol-cost", fit.tol_cost, "Relative cost-decrease tolerance");
  optional_flag(fit_cmd, "--tol-step", fit.tol_step, "Relative step-size tolerance");
  fit_cmd->add_option("--threads", fit.threads, "Worker threads (0: all cores)");
  optional_flag(fit_cmd, "--out", fit.out, "Write results here instead of stdout");

  BenchOptions bench;
  std::string bench_format = "csv";
  auto* bench_cmd = app.add_subcommand("bench", "Run the synthetic robustness sweep");
  optional_flag(bench_cmd, "--config", bench.config, "Sweep config JSON");
  optional_flag(bench_cmd, "--kinds", bench.kinds, "Error kinds (RE SE TE)");
  optional_flag(bench_cmd, "--grid", bench.grid, "Magnitudes used for every selected kind");
  optional_flag(bench_cmd, "--methods", bench.methods, "Methods (pfd pfd-reg)");
  optional_flag(bench_cmd, "--trials", bench.trials, "Scenes per grid point");
  optional_flag(bench_cmd, "--seed", bench.seed, "Master seed");
  optional_flag(bench_cmd, "--mc-samples", bench.mc_samples, "Monte Carlo samples per overlap");
  optional_flag(bench_cmd, "--lambda", bench.lambda, "Regularization weight, or \"auto\"");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (0: all cores)");
  bench_cmd->add_option("--format", bench_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  optional_flag(bench_cmd, "--out", bench.out, "Write the table here instead of stdout");

  EvalOptions eval;
  std::string eval_format = "json";
  auto* eval_cmd = app.add_subcommand("eval", "Score fit results against ground truth");
  eval_cmd->add_option("results", eval.results, "Results JSON from fit")->required();
  eval_cmd->add_option("scene", eval.scene, "Scene JSON with gt")->required();
  eval_cmd->add_option("--thresholds", eval.thresholds, "Centroid distance thresholds");
  eval_cmd->add_option("--mc-samples", eval.mc_samples, "Monte Carlo samples per overlap");
  eval_cmd->add_option("--seed", eval.seed, "Monte Carlo seed");
  eval_cmd->add_option("--format", eval_format, "json or csv")->check(CLI::IsMember({"csv", "json"}));
  optional_flag(eval_cmd, "--out", eval.out, "Write the report here instead of stdout");

  MaskOptions mask;
  auto* mask_cmd = app.add_subcommand("ellipse-from-mask", "Fit ellipses to binary masks (PGM or PNG)");
  mask_cmd->add_option("masks", mask.masks, "Mask images")->required();
  optional_flag(mask_cmd, "--sidecar", mask.sidecar, "JSON mapping mask files to {object, frame, origin}");
  optional_flag(mask_cmd, "--out", mask.out, "Write detections here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitMalformed;
  }

  try {
    if (*fit_cmd) {
      fit.method = pfd::parse_method(fit_method);
      return cmd_fit(fit, std::cout, std::cerr);
    }
    if (*bench_cmd) {
      bench.format = parse_format(bench_format);
      return cmd_bench(bench, std::cout, std::cerr);
    }
    if (*eval_cmd) {
      eval.format = parse_format(eval_format);
      return cmd_eval(eval, std::cout, std::cerr);
    }
    return cmd_ellipse_from_mask(mask, std::cout, std::cerr);
  } catch (const pfd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformed;
  }
}
