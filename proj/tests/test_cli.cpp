#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "pfd/io.hpp"
#include "pfd/mask_fitting.hpp"

using namespace pfd;
using namespace pfd::cli;
using io::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "pfd_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_binary(const std::string& args) {
  const fs::path o = scratch() / "stdout.txt", e = scratch() / "stderr.txt";
  const std::string cmd = std::string(PFD_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(o), read_text(e)};
}

io::SceneFile small_scene(int n_objects) {
  ScenarioConfig cfg;
  cfg.n_objects = n_objects;
  cfg.seed = 3;
  return io::scene_file_from_synthetic(generate_scene(cfg), cfg);
}

fs::path write_scene(const io::SceneFile& scene, const std::string& name) {
  const fs::path p = scratch() / name;
  write_text(p, io::scene_to_json(scene).dump());
  return p;
}

// Keeps only two detections of `object`, from frames 0 and 19.
io::SceneFile two_frames_for(io::SceneFile scene, const std::string& object) {
  std::erase_if(scene.detections,
                [&](const io::Detection& d) { return d.object == object && d.frame != 0 && d.frame != 19; });
  return scene;
}

}  // namespace

TEST_CASE("fit recovers an exact scene and eval scores it") {
  const fs::path scene = write_scene(small_scene(8), "exact.json");
  std::ostringstream out, err;
  REQUIRE(cmd_fit({.scene = scene}, out, err) == kExitOk);
  CHECK(err.str().empty());
  const json results = json::parse(out.str());
  REQUIRE(results.at("results").size() == 8);
  for (const auto& r : results.at("results")) {
    CHECK(r.at("status") == "ok");
    CHECK(r.at("valid") == true);
    CHECK(r.at("n_views") == 20);
    CHECK_FALSE(r.at("ellipsoid").is_null());
  }

  const fs::path res = scratch() / "exact_results.json";
  write_text(res, out.str());
  std::ostringstream report, err2;
  REQUIRE(cmd_eval({.results = res, .scene = scene, .mc_samples = 20000}, report, err2) == kExitOk);
  const json rep = json::parse(report.str());
  for (const auto& m : rep.at("per_object")) CHECK(m.at("o3d").get<double>() >= 0.99);
  CHECK(rep.at("aggregates").at("mean_o3d").get<double>() >= 0.99);
  CHECK(rep.at("aggregates").at("mean_theta_err").get<double>() < 1e-6);
  CHECK(rep.at("aggregates").at("pct_within")[0].at("pct") == 100.0);

  // Serialized quadrics re-read bit for bit.
  const auto records = io::parse_results(results);
  const auto j0 = results.at("results")[0].at("quadric");
  CHECK(io::matrix_to_json(records[0].quadric->m) == j0);
}

TEST_CASE("two-view objects") {
  const fs::path scene = write_scene(two_frames_for(small_scene(3), "obj1"), "two_view.json");

  std::ostringstream out, err;
  CHECK(cmd_fit({.scene = scene}, out, err) == kExitPartial);
  CHECK(err.str().find("insufficient_views: obj1") != std::string::npos);
  const json pfd_results = json::parse(out.str());
  REQUIRE(pfd_results.at("results").size() == 3);
  CHECK(pfd_results.at("results")[1].at("status") == "insufficient_views");
  CHECK(pfd_results.at("results")[1].at("valid") == false);
  CHECK(pfd_results.at("results")[1].at("ellipsoid").is_null());

  std::ostringstream out2, err2;
  CHECK(cmd_fit({.scene = scene, .method = Method::PfDReg}, out2, err2) == kExitOk);
  const json reg = json::parse(out2.str());
  CHECK(reg.at("results")[1].at("status") == "ok");
  CHECK(reg.at("results")[1].at("n_views") == 2);
  CHECK(reg.at("results")[1].contains("converged"));
}

TEST_CASE("eval contracts") {
  const io::SceneFile sf = small_scene(3);
  const fs::path scene = write_scene(sf, "eval_scene.json");

  // Results made from the ground truth itself, with obj2 marked invalid.
  json results{{"schema_version", 1}, {"results", json::array()}};
  for (const auto& g : sf.gt)
    results["results"].push_back({{"object", g.object}, {"method", "pfd"},
                                  {"quadric", io::matrix_to_json(g.quadric.m)}, {"valid", g.object != "obj2"}});
  const fs::path res = scratch() / "gt_results.json";
  write_text(res, results.dump());

  std::ostringstream out, err;
  REQUIRE(cmd_eval({.results = res, .scene = scene, .mc_samples = 50000}, out, err) == kExitOk);
  const json rep = json::parse(out.str());
  const auto& per = rep.at("per_object");
  REQUIRE(per.size() == 3);
  CHECK(per[0].at("o3d").get<double>() == doctest::Approx(1.0).epsilon(0.01));
  CHECK(per[0].at("theta_err").get<double>() == doctest::Approx(0.0));
  CHECK(per[2].at("o3d") == 0.0);
  CHECK(per[2].at("theta_err").is_null());
  CHECK(per[2].at("valid") == false);
  const double mean = rep.at("aggregates").at("mean_o3d");
  CHECK(mean == doctest::Approx((per[0].at("o3d").get<double>() + per[1].at("o3d").get<double>()) / 3.0));
  CHECK(rep.at("aggregates").at("pct_within")[1].at("pct").get<double>() == doctest::Approx(200.0 / 3));

  std::ostringstream csv, err_csv;
  cmd_eval({.results = res, .scene = scene, .mc_samples = 1000, .format = Format::Csv}, csv, err_csv);
  CHECK(csv.str().rfind("object_id,o3d,theta_err,center_dist,valid\n", 0) == 0);
  CHECK(csv.str().find("obj2,0,,,false") != std::string::npos);

  results["results"][0]["object"] = "stranger";
  write_text(res, results.dump());
  std::ostringstream out2, err2;
  CHECK(cmd_eval({.results = res, .scene = scene, .mc_samples = 1000}, out2, err2) == kExitPartial);
  CHECK(err2.str().find("stranger") != std::string::npos);
  CHECK(err2.str().find("obj0") != std::string::npos);
  CHECK(json::parse(out2.str()).at("per_object").size() == 2);
}

TEST_CASE("bench output") {
  BenchOptions opts;
  opts.trials = 1;
  opts.grid = std::vector<double>{0.0};
  opts.mc_samples = 2000;
  std::ostringstream a, b, err;
  REQUIRE(cmd_bench(opts, a, err) == kExitOk);
  REQUIRE(cmd_bench(opts, b, err) == kExitOk);
  CHECK(a.str() == b.str());

  std::istringstream lines(a.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "error_kind,magnitude,method,mean_o3d,mean_theta_err,pct_valid,n_trials");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.find(",0,") != std::string::npos);
    if (line.find(",PfD,") != std::string::npos) {
      const auto third = line.find(',', line.find(",PfD,") + 1);
      CHECK(std::stod(line.substr(third + 1)) >= 0.99);
    }
  }
  CHECK(rows == 6);

  opts.format = Format::Json;
  std::ostringstream j;
  cmd_bench(opts, j, err);
  CHECK(json::parse(j.str()).at("rows").size() == 6);

  opts.kinds = std::vector<std::string>{"XE"};
  CHECK_THROWS_AS(bench_config(opts), InvalidInput);
  opts.kinds.reset();
  opts.lambda = "-3";
  CHECK_THROWS_AS(bench_config(opts), InvalidInput);
  opts.lambda = "auto";
  CHECK_FALSE(bench_config(opts).regularized.lambda.has_value());
}

TEST_CASE("ellipse-from-mask batches") {
  const fs::path dir = scratch();
  auto write_pgm = [&](const std::string& name, int w, int h, auto inside) {
    std::ofstream out(dir / name, std::ios::binary);
    out << "P5\n" << w << " " << h << "\n255\n";
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.put(inside(x, y) ? static_cast<char>(255) : 0);
  };
  write_pgm("m1.pgm", 80, 60, [](int x, int y) { return (x - 40) * (x - 40) / 900.0 + (y - 30) * (y - 30) / 225.0 <= 1; });
  write_pgm("m2.pgm", 80, 60, [](int x, int y) { return x >= 10 && x < 50 && y >= 20 && y < 40; });
  write_pgm("empty.pgm", 80, 60, [](int, int) { return false; });
  write_text(dir / "sidecar.json", R"({"m1.pgm": {"object": "cup", "frame": 4, "origin": [100, 200]}})");

  MaskOptions opts{{dir / "m1.pgm", dir / "empty.pgm", dir / "m2.pgm"}, dir / "sidecar.json", std::nullopt};
  std::ostringstream out, err;
  CHECK(cmd_ellipse_from_mask(opts, out, err) == kExitPartial);
  CHECK(err.str().find("empty.pgm") != std::string::npos);
  const json j = json::parse(out.str());
  const auto& det = j.at("detections");
  REQUIRE(det.size() == 2);
  CHECK(det[0].at("object") == "cup");
  CHECK(det[0].at("frame") == 4);
  CHECK(det[0].at("ellipse").at("cx").get<double>() == doctest::Approx(140.0).epsilon(0.005));
  CHECK(det[0].at("ellipse").at("cy").get<double>() == doctest::Approx(230.0).epsilon(0.005));
  CHECK(std::abs(det[0].at("ellipse").at("l1").get<double>() - 30.0) / 30.0 < 0.02);
  CHECK(det[1].at("object") == "m2");
  CHECK(det[1].at("ellipse").at("l1").get<double>() == doctest::Approx(40.0 / std::sqrt(3.0)).epsilon(0.01));

  std::ostringstream ok, err2;
  CHECK(cmd_ellipse_from_mask({{dir / "m2.pgm"}, std::nullopt, std::nullopt}, ok, err2) == kExitOk);
}

TEST_CASE("binary exit codes and streams") {
  const fs::path dir = scratch();
  const fs::path exact = write_scene(small_scene(4), "bin_exact.json");
  const fs::path res = dir / "bin_results.json";

  const Run fit = run_binary("fit " + exact.string() + " --out " + res.string());
  CHECK(fit.code == 0);
  CHECK(fit.out.empty());
  const Run eval = run_binary("eval " + res.string() + " " + exact.string() + " --mc-samples 20000");
  CHECK(eval.code == 0);
  CHECK(json::parse(eval.out).at("aggregates").at("mean_o3d").get<double>() >= 0.99);

  const fs::path two = write_scene(two_frames_for(small_scene(3), "obj0"), "bin_two.json");
  const Run partial = run_binary("fit " + two.string());
  CHECK(partial.code == 2);
  CHECK(partial.err.find("insufficient_views") != std::string::npos);
  CHECK_NOTHROW(json::parse(partial.out));
  CHECK(run_binary("fit " + two.string() + " --method pfd-reg").code == 0);

  write_text(dir / "broken.json", "{\"cameras\": [");
  CHECK(run_binary("fit " + (dir / "broken.json").string()).code == 1);
  write_text(dir / "nocam.json", R"({"cameras": [], "detections": [{"object": "a", "frame": 0, "bbox": {"cx": 1, "cy": 1, "w": 2, "h": 2}}]})");
  const Run nocam = run_binary("fit " + (dir / "nocam.json").string());
  CHECK(nocam.code == 1);
  CHECK(nocam.out.empty());
  CHECK(run_binary("fit " + (dir / "missing.json").string()).code == 1);
  CHECK(run_binary("fit " + exact.string() + " --method magic").code == 1);
  CHECK(run_binary("fit " + exact.string() + " --method pfd-reg --lambda nope").code == 1);
  CHECK(run_binary("").code == 1);

  const Run b1 = run_binary("bench --trials 1 --grid 0 --mc-samples 1000 --kinds TE --methods pfd");
  const Run b2 = run_binary("bench --trials 1 --grid 0 --mc-samples 1000 --kinds TE --methods pfd --threads 1");
  CHECK(b1.code == 0);
  CHECK(b1.out == b2.out);
}
