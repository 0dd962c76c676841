#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pfd/metrics.hpp"
#include "pfd/pipeline.hpp"
#include "pfd/regularized.hpp"
#include "pfd/synthetic.hpp"

namespace pfd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMalformed = 1;
inline constexpr int kExitPartial = 2;

enum class Format { Json, Csv };
Format parse_format(const std::string& name);

struct FitOptions {
  std::filesystem::path scene;
  Method method = Method::PfD;
  std::optional<std::filesystem::path> config;
  // Flag values override the config file.
  std::optional<std::string> lambda;  // number or "auto"
  std::optional<int> max_iters;
  std::optional<double> tol_cost;
  std::optional<double> tol_step;
  unsigned threads = 0;
  std::optional<std::filesystem::path> out;
};

struct BenchOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::vector<std::string>> kinds;
  std::optional<std::vector<double>> grid;  // applies to every selected kind
  std::optional<std::vector<std::string>> methods;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> mc_samples;
  std::optional<std::string> lambda;
  unsigned threads = 0;
  Format format = Format::Csv;
  std::optional<std::filesystem::path> out;
};

struct EvalOptions {
  std::filesystem::path results;
  std::filesystem::path scene;
  std::vector<double> thresholds{1.0, 2.0};
  std::size_t mc_samples = 100000;
  std::uint64_t seed = 0;
  Format format = Format::Json;
  std::optional<std::filesystem::path> out;
};

struct MaskOptions {
  std::vector<std::filesystem::path> masks;
  std::optional<std::filesystem::path> sidecar;
  std::optional<std::filesystem::path> out;
};

/// Each command writes machine-readable output to `out` (or the --out file)
/// and diagnostics to `err`, and returns the process exit code. Malformed
/// input surfaces as a pfd::Error.
int cmd_fit(const FitOptions& opts, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_ellipse_from_mask(const MaskOptions& opts, std::ostream& out, std::ostream& err);

/// Sweep configuration from defaults, the optional config file and flags.
SweepConfig bench_config(const BenchOptions& opts);

}  // namespace pfd::cli
