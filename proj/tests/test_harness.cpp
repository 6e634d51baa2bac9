#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "seqlab/harness/config.hpp"
#include "seqlab/harness/experiments.hpp"
#include "seqlab/harness/svg.hpp"

using namespace seqlab;
namespace fs = std::filesystem;
using harness::ExperimentConfig;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "seqlab_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig smoke(const std::string& experiment, const std::string& family,
                       const std::string& out) {
  ExperimentConfig config = harness::preset(experiment, "smoke");
  if (!family.empty()) config.family = family;
  config.out_dir = out;
  harness::resolve(config);
  config.out_dir = out;
  return config;
}

}  // namespace

TEST_CASE("every experiment command completes at smoke scale inside a minute") {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"lengthgen", "deep_set"}, {"compgen", "deep_set"}, {"failure", "deep_set"},
      {"cot", "ssm"},            {"nonrealizable", "ssm"}, {"finite", ""},
      {"cover", ""},             {"lipschitz", ""},        {"discrete", "rnn"},
  };
  for (const auto& [experiment, family] : runs) {
    auto dir = fresh_dir("smoke-" + experiment);
    auto config = smoke(experiment, family, dir.string());
    auto outcome = harness::run_experiment(config);
    CHECK(fs::exists(dir / "results.csv"));
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "manifest.json"));
    bool has_svg = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".svg") has_svg = true;
    }
    CHECK(has_svg);
    CHECK_NOTHROW(harness::json::parse(slurp((dir / "report.json").string())));
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(elapsed < 60.0);
}

TEST_CASE("a degenerate single-length curve is still a valid run") {
  auto dir = fresh_dir("single-length");
  auto config = smoke("lengthgen", "deep_set", dir.string());
  config.eval_lengths = {config.train_t};
  harness::run_experiment(config);
  auto report = harness::json::parse(slurp((dir / "report.json").string()));
  CHECK(report.at("rows").size() == 1);
}

TEST_CASE("the softmax variant runs and is flagged as outside the guarantees") {
  auto dir = fresh_dir("softmax");
  auto config = smoke("lengthgen", "transformer", dir.string());
  config.attention = "softmax";
  auto outcome = harness::run_experiment(config);
  REQUIRE(outcome.report.contains("notes"));
  const std::string note = outcome.report.at("notes")[0].get<std::string>();
  CHECK(note.find("softmax") != std::string::npos);
  CHECK(note.find("guarantee") != std::string::npos);
}

TEST_CASE("config resolution keeps the training length on the curve") {
  auto config = harness::preset("lengthgen", "smoke");
  config.eval_lengths = {8, 16};
  config.train_t = 4;
  harness::resolve(config);
  CHECK(std::find(config.eval_lengths.begin(), config.eval_lengths.end(), 4) !=
        config.eval_lengths.end());
}

TEST_CASE("result CSV headers are pinned") {
  auto dir = fresh_dir("headers-lengthgen");
  harness::run_experiment(smoke("lengthgen", "rnn", dir.string()));
  CHECK(first_line((dir / "results.csv").string()) ==
        "model,family,t,risk_mean,risk_std,r2_mean,r2_std,perm_score");
  CHECK(first_line((dir / "train_report_seed0.csv").string()) ==
        "epoch,train_loss,val_loss,lr");
  CHECK(first_line((dir / "trajectory.csv").string()).rfind("t,true0", 0) == 0);

  auto finite_dir = fresh_dir("headers-finite");
  harness::run_experiment(smoke("finite", "", finite_dir.string()));
  CHECK(first_line((finite_dir / "results.csv").string()) ==
        "entry_id,lambda,b,t_h,survives_at_t");

  auto lip_dir = fresh_dir("headers-lipschitz");
  harness::run_experiment(smoke("lipschitz", "", lip_dir.string()));
  CHECK(first_line((lip_dir / "results.csv").string()) ==
        "family,trials,max_t,max_ratio,analytic_bound,violations");
}

TEST_CASE("identical configs reproduce byte-identical result CSVs") {
  auto dir_a = fresh_dir("determinism-a");
  auto dir_b = fresh_dir("determinism-b");
  auto config_a = smoke("lengthgen", "ssm", dir_a.string());
  auto config_b = smoke("lengthgen", "ssm", dir_b.string());
  harness::run_experiment(config_a);
  harness::run_experiment(config_b);
  CHECK(slurp((dir_a / "results.csv").string()) == slurp((dir_b / "results.csv").string()));
  CHECK(slurp((dir_a / "trajectory.csv").string()) ==
        slurp((dir_b / "trajectory.csv").string()));
  CHECK(slurp((dir_a / "train_report_seed0.csv").string()) ==
        slurp((dir_b / "train_report_seed0.csv").string()));
  CHECK(slurp((dir_a / "curve.svg").string()) == slurp((dir_b / "curve.svg").string()));
}

TEST_CASE("config hashes ignore field order but track values") {
  const char* a = R"({"experiment":"lengthgen","family":"ssm","scale":"smoke","seeds":1})";
  const char* b = R"({"seeds":1,"scale":"smoke","experiment":"lengthgen","family":"ssm"})";
  auto config_a = harness::config_from_json(harness::json::parse(a));
  auto config_b = harness::config_from_json(harness::json::parse(b));
  CHECK(harness::config_hash(config_a) == harness::config_hash(config_b));

  auto config_c = config_a;
  config_c.base_seed = 99;
  CHECK(harness::config_hash(config_a) != harness::config_hash(config_c));
}

TEST_CASE("manifests carry the hash, provenance and per-seed status") {
  auto dir = fresh_dir("manifest");
  auto config = smoke("lengthgen", "deep_set", dir.string());
  harness::run_experiment(config);
  auto manifest = harness::json::parse(slurp((dir / "manifest.json").string()));
  CHECK(manifest.at("config_hash").get<std::string>() == harness::config_hash(config));
  CHECK(manifest.at("per_seed_status").size() == 1);
  CHECK(manifest.at("per_seed_status")[0].get<std::string>() == "ok");
  CHECK(manifest.contains("wall_seconds"));
  CHECK(manifest.at("artifacts").size() >= 3);
}

TEST_CASE("charts carry the experiment metadata in their labels") {
  auto dir = fresh_dir("svg-labels");
  harness::run_experiment(smoke("lengthgen", "transformer", dir.string()));
  const std::string svg = slurp((dir / "curve.svg").string());
  CHECK(svg.find("transformer") != std::string::npos);
  CHECK(svg.find("sequence length") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
}

TEST_CASE("plot emission validates its inputs") {
  auto dir = fresh_dir("plot-errors");
  CHECK_THROWS_AS(harness::emit_plots({}, dir.string()), std::invalid_argument);

  const std::string missing = (dir / "nope.json").string();
  CHECK_THROWS_WITH_AS(harness::emit_plots({missing}, dir.string()),
                       doctest::Contains("nope.json"), std::runtime_error);

  // Empty series list inside a curve is rejected, naming the file and curve.
  const std::string bad = (dir / "bad.json").string();
  {
    std::ofstream out(bad);
    out << R"({"curves":{"curve":{"title":"x","x_label":"t","y_label":"y","log_y":false,)"
        << R"("series":[{"label":"s","x":[],"y":[]}]}}})";
  }
  try {
    harness::emit_plots({bad}, dir.string());
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.json") != std::string::npos);
    CHECK(msg.find("curve") != std::string::npos);
  }
}

TEST_CASE("plot emission re-renders charts from a report") {
  auto dir = fresh_dir("plot-rerender");
  harness::run_experiment(smoke("lengthgen", "ssm", dir.string()));
  auto plots_dir = fresh_dir("plot-rerender-out");
  auto written = harness::emit_plots({(dir / "report.json").string()}, plots_dir.string());
  CHECK(written.size() >= 2);
  // Same inputs, same bytes as the originals.
  CHECK(slurp((plots_dir / "curve.svg").string()) == slurp((dir / "curve.svg").string()));
}

TEST_CASE("the chart renderer rejects empty and ragged series") {
  harness::ChartOptions options;
  CHECK_THROWS_AS(harness::render_line_chart({}, options), std::invalid_argument);
  harness::Series ragged{"s", {1.0, 2.0}, {1.0}};
  CHECK_THROWS_AS(harness::render_line_chart({ragged}, options), std::invalid_argument);
}

#ifdef SEQLAB_CLI_PATH
TEST_CASE("the CLI exits zero on success and emits error JSON on failure") {
  auto dir = fresh_dir("cli");
  const std::string cli = SEQLAB_CLI_PATH;
  const std::string ok_cmd = cli + " lengthgen --scale smoke --family ssm --out " +
                             (dir / "ok").string() + " > " + (dir / "ok.out").string() +
                             " 2>&1";
  CHECK(std::system(ok_cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "ok" / "results.csv"));

  const std::string bad_cmd = cli + " lengthgen --scale bogus --out " +
                              (dir / "bad").string() + " > /dev/null 2> " +
                              (dir / "bad.err").string();
  CHECK(std::system(bad_cmd.c_str()) != 0);
  auto err = harness::json::parse(slurp((dir / "bad.err").string()));
  CHECK(err.contains("error"));
  CHECK(err.at("error").at("message").get<std::string>().find("scale") != std::string::npos);

  // Unknown family inside a valid scale also fails with machine-readable JSON.
  const std::string bad2 = cli + " lengthgen --scale smoke --family bogus --out " +
                           (dir / "bad2").string() + " > /dev/null 2> " +
                           (dir / "bad2.err").string();
  CHECK(std::system(bad2.c_str()) != 0);
  auto err2 = harness::json::parse(slurp((dir / "bad2.err").string()));
  CHECK(err2.at("error").at("message").get<std::string>().find("family") != std::string::npos);
}
#endif
