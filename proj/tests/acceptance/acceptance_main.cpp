// Acceptance suite: runs every acceptance criterion at desk scale and prints
// one PASS/FAIL line per criterion. Exits nonzero when any criterion fails.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "seqlab/eval/eval.hpp"
#include "seqlab/harness/config.hpp"
#include "seqlab/harness/experiments.hpp"
#include "seqlab/num/tape.hpp"
#include "seqlab/theory/theory.hpp"

using namespace seqlab;
namespace fs = std::filesystem;
using harness::json;

namespace {

int failures = 0;
std::vector<std::string> detail_lines;

void detail(const std::string& line) { detail_lines.push_back("    " + line); }

void report(int number, const std::string& name, bool pass) {
  std::printf("criterion %2d [%s] %s\n", number, pass ? "PASS" : "FAIL", name.c_str());
  for (const std::string& line : detail_lines) std::printf("%s\n", line.c_str());
  detail_lines.clear();
  if (!pass) ++failures;
}

void run_criterion(int number, const std::string& name, const std::function<bool()>& body) {
  bool pass = false;
  try {
    pass = body();
  } catch (const std::exception& e) {
    detail(std::string("exception: ") + e.what());
  }
  report(number, name, pass);
}

fs::path out_root() {
  fs::path dir = fs::temp_directory_path() / "seqlab_acceptance";
  fs::create_directories(dir);
  return dir;
}

harness::ExperimentConfig desk(const std::string& experiment, const std::string& family) {
  harness::ExperimentConfig config = harness::preset(experiment, "desk");
  if (!family.empty()) config.family = family;
  harness::resolve(config);
  config.out_dir = (out_root() / (experiment + "-" + (family.empty() ? "x" : family))).string();
  return config;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

double row_value(const json& report, const std::string& model, std::size_t t,
                 const std::string& key) {
  for (const json& row : report.at("rows")) {
    if (row.at("model").get<std::string>() == model && row.at("t").get<std::size_t>() == t) {
      return row.at(key).get<double>();
    }
  }
  throw std::runtime_error("row not found: " + model + " t=" + std::to_string(t));
}

const std::vector<std::string> kFamilies = {"deep_set", "transformer", "ssm", "rnn"};

// ---------------------------------------------------------------------------

bool criterion_length_generalization() {
  bool pass = true;
  for (const std::string& family : kFamilies) {
    auto outcome = harness::run_experiment(desk("lengthgen", family));
    double worst_risk = 0.0, r2_sum = 0.0;
    int r2_count = 0;
    for (std::size_t t : {12ul, 30ul, 60ul}) {
      worst_risk = std::max(worst_risk, row_value(outcome.report, "student", t, "risk_mean"));
      r2_sum += row_value(outcome.report, "student", t, "r2_mean");
      ++r2_count;
    }
    const double r2_mean = r2_sum / r2_count;
    const bool ok = worst_risk <= 1e-3 && r2_mean >= 0.90;
    detail(family + ": max risk at {12,30,60} = " + std::to_string(worst_risk) +
           ", mean R2 = " + std::to_string(r2_mean) + (ok ? "" : "  <-- fail"));
    pass = pass && ok;
  }
  return pass;
}

bool criterion_compositional_generalization() {
  bool pass = true;
  for (const std::string& family : kFamilies) {
    auto outcome = harness::run_experiment(desk("compgen", family));
    const auto config = desk("compgen", family);
    const double risk = row_value(outcome.report, "student_corner", config.train_t, "risk_mean");
    const double r2 = row_value(outcome.report, "student_corner", config.train_t, "r2_mean");
    const bool ok = risk <= 1e-3 && r2 >= 0.90;
    detail(family + ": corner risk = " + std::to_string(risk) + ", R2 = " + std::to_string(r2) +
           (ok ? "" : "  <-- fail"));
    pass = pass && ok;
  }
  return pass;
}

bool criterion_failure_cases() {
  bool pass = true;
  for (const std::string& family : {std::string("deep_set"), std::string("transformer")}) {
    auto outcome = harness::run_experiment(desk("failure", family));
    const json& arms = outcome.report.at("arms");
    const double failure_ratio = arms.at("failure").at("ratio_mean").get<double>();
    const double success_ratio = arms.at("success").at("ratio_mean").get<double>();
    const bool ok = failure_ratio >= 5.0 && success_ratio <= 3.0;
    detail(family + ": failure-arm ratio = " + std::to_string(failure_ratio) +
           " (needs >= 5), success-arm ratio = " + std::to_string(success_ratio) +
           " (needs <= 3)" + (ok ? "" : "  <-- fail"));
    pass = pass && ok;
  }
  return pass;
}

bool criterion_cot() {
  bool pass = true;
  auto config = desk("cot", "ssm");
  auto outcome = harness::run_experiment(config);
  const json& cot_arm = outcome.report.at("arms").at("label_plus_cot");
  const double lambda_err = cot_arm.at("lambda_frobenius_error_mean").get<double>();
  const double b_err = cot_arm.at("b_frobenius_error_mean").get<double>();
  const double ssm_risk =
      row_value(outcome.report, "label_plus_cot", 2 * config.train_t, "risk_mean");
  bool ok = lambda_err <= 1e-2 && b_err <= 1e-2 && ssm_risk <= 1e-3;
  detail("ssm: |dLambda|_F = " + std::to_string(lambda_err) + ", |dB|_F = " +
         std::to_string(b_err) + ", risk at 2T = " + std::to_string(ssm_risk) +
         (ok ? "" : "  <-- fail"));
  pass = pass && ok;

  auto ds_config = desk("cot", "deep_set");
  auto ds_outcome = harness::run_experiment(ds_config);
  const double ds_risk =
      row_value(ds_outcome.report, "label_plus_cot", 2 * ds_config.train_t, "risk_mean");
  ok = ds_risk <= 1e-3;
  detail("deep_set: risk at 2T = " + std::to_string(ds_risk) + (ok ? "" : "  <-- fail"));
  return pass && ok;
}

bool criterion_nonrealizable() {
  auto outcome = harness::run_experiment(desk("nonrealizable", "ssm"));
  const json& arm = outcome.report.at("arms").at("mismatched");
  std::size_t big = arm.at("seeds_with_ratio_ge_10").get<std::size_t>();
  std::ostringstream ratios;
  for (const json& r : arm.at("ratios")) ratios << r.get<double>() << " ";
  const bool ok = big >= 2;
  detail("mismatched ratios (risk 5T / risk T): " + ratios.str() + "-> " +
         std::to_string(big) + " of 3 seeds >= 10x" + (ok ? "" : "  <-- fail"));
  return ok;
}

bool criterion_finite_class() {
  auto outcome = harness::run_experiment(desk("finite", ""));
  const std::size_t t0 = outcome.report.at("t0").get<std::size_t>();
  const bool certified = outcome.report.at("survivors_certified").get<bool>();
  const auto survivors = outcome.report.at("survivors").get<std::vector<std::size_t>>();
  const bool ok = t0 == 2 && certified && survivors.size() == 1;
  detail("T0 = " + std::to_string(t0) + " (exact target 2), survivors = " +
         std::to_string(survivors.size()) + ", certified to t <= 200: " +
         (certified ? "yes" : "no") + (ok ? "" : "  <-- fail"));
  return ok;
}

bool criterion_cover() {
  auto outcome = harness::run_experiment(desk("cover", ""));
  const json& r = outcome.report;
  const bool eta_ok = r.at("eta_le_epsilon_over_l").get<bool>();
  const bool nearest = r.at("teacher_nearest_survives_all").get<bool>();
  const std::size_t t0 = r.at("stabilized_t0").get<std::size_t>();
  const bool certified = r.at("certified_within_3se").get<bool>();
  const auto counts = r.at("survivor_count_by_t").get<std::vector<std::size_t>>();
  bool nested = true;
  for (std::size_t t = 1; t < counts.size(); ++t) nested = nested && counts[t] <= counts[t - 1];
  const bool points_ok = r.at("points").get<std::size_t>() <= 500;
  const bool ok = eta_ok && nearest && t0 <= 200 && certified && nested && points_ok;
  detail("points = " + std::to_string(r.at("points").get<std::size_t>()) +
         ", eta <= eps/L: " + (eta_ok ? "yes" : "no") + ", teacher-nearest survives: " +
         (nearest ? "yes" : "no") + ", stabilized T0 = " + std::to_string(t0) +
         ", nested: " + (nested ? "yes" : "no") + ", certified within 3 se: " +
         (certified ? "yes" : "no") + (ok ? "" : "  <-- fail"));
  return ok;
}

bool criterion_lipschitz() {
  auto outcome = harness::run_experiment(desk("lipschitz", ""));
  bool ok = true;
  for (const json& row : outcome.report.at("rows")) {
    const std::size_t violations = row.at("violations").get<std::size_t>();
    const double max_ratio = row.at("max_ratio").get<double>();
    const double bound = row.at("analytic_bound").get<double>();
    detail(row.at("family").get<std::string>() + ": max ratio = " + std::to_string(max_ratio) +
           " vs bound " + std::to_string(bound) + ", violations = " +
           std::to_string(violations));
    ok = ok && violations == 0 && row.at("trials").get<std::size_t>() >= 1000 &&
         row.at("max_t").get<std::size_t>() >= 100;
  }
  return ok;
}

// Compact finite-difference sweep across every tape primitive.
bool criterion_numerics() {
  using num::Matrix;
  using num::Tape;
  using num::ValueId;
  num::RngStream rng(2024, "acceptance-fd");
  double worst = 0.0;
  const int ops = 15;
  for (int which = 0; which < ops; ++which) {
    for (int inst = 0; inst < 100; ++inst) {
      const std::size_t r = 1 + rng.below(3), c = 1 + rng.below(3);
      std::vector<Matrix> params;
      params.push_back(rng.normal_matrix(r, c, 0.0, 1.0));
      params.push_back(rng.normal_matrix(r, c, 0.0, 1.0));
      params.push_back(rng.normal_matrix(c, 2, 0.0, 1.0));
      params.push_back(rng.normal_matrix(1, c, 0.0, 1.0));
      params.push_back(rng.normal_matrix(r, 1, 0.0, 1.0));
      for (double& v : params[0].values()) {
        if (std::abs(v) < 0.1) v = v < 0 ? v - 0.1 : v + 0.1;
      }
      Matrix target = rng.uniform_matrix(r, c);

      auto build = [&](Tape& tape, const std::vector<ValueId>& ids) -> ValueId {
        ValueId a = ids[0], b = ids[1];
        switch (which) {
          case 0: return tape.reduce_sum(tape.matmul(a, ids[2]));
          case 1: return tape.reduce_sum(tape.add(a, b));
          case 2: return tape.reduce_sum(tape.sub(a, b));
          case 3: return tape.reduce_sum(tape.add_row_vector(a, ids[3]));
          case 4: return tape.reduce_sum(tape.scale(a, -1.7));
          case 5: return tape.reduce_sum(tape.hadamard(a, b));
          case 6: return tape.reduce_sum(tape.row_scale(a, ids[4]));
          case 7: return tape.reduce_sum(tape.row_sum(a));
          case 8: return tape.reduce_sum(tape.sigmoid(a));
          case 9: return tape.reduce_sum(tape.exp(tape.scale(a, 0.3)));
          case 10: return tape.reduce_sum(tape.log(tape.exp(a)));
          case 11: return tape.reduce_sum(tape.relu(a));
          case 12: return tape.reduce_mean(tape.div(a, tape.exp(tape.scale(b, 0.2))));
          case 13: return tape.mse(a, tape.input(target));
          default:
            return tape.reduce_mean(tape.concat_cols(tape.transpose(tape.transpose(a)), b));
        }
      };
      auto value = [&]() {
        Tape tape;
        std::vector<ValueId> ids;
        for (const Matrix& p : params) ids.push_back(tape.param(p));
        return tape.scalar(build(tape, ids));
      };
      Tape tape;
      std::vector<ValueId> ids;
      for (const Matrix& p : params) ids.push_back(tape.param(p));
      ValueId loss = build(tape, ids);
      tape.backward(loss);
      for (std::size_t p = 0; p < params.size(); ++p) {
        const Matrix& grad = tape.grad(ids[p]);
        for (std::size_t i = 0; i < params[p].size(); ++i) {
          double* slot = params[p].data() + i;
          const double save = *slot, h = 1e-5;
          *slot = save + h;
          const double up = value();
          *slot = save - h;
          const double down = value();
          *slot = save;
          const double fd = (up - down) / (2.0 * h);
          const double an = grad.data()[i];
          const double rel =
              std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
          worst = std::max(worst, rel);
        }
      }
    }
  }
  const bool fd_ok = worst <= 1e-5;
  detail("finite differences: worst relative error over 100 instances/op = " +
         std::to_string(worst));

  // SSM recurrence vs closed form at t = 100.
  models::ModelSpec spec;
  spec.family = models::Family::kSsm;
  spec.n = spec.m = spec.k = 4;
  auto model = models::sample_model(spec, 77);
  const auto& ssm = std::get<models::Ssm>(model);
  data::DistributionSpec dist;
  dist.n = 4;
  dist.T = 100;
  num::RngStream token_rng(78, "tokens");
  auto tokens = data::sample_tokens(dist, 2, token_rng);
  auto out = models::forward(model, tokens);
  double worst_gap = 0.0;
  for (std::size_t t : {1ul, 10ul, 50ul, 100ul}) {
    Matrix h(2, 4);
    Matrix power = Matrix::identity(4);
    for (std::size_t j = 0; j < t; ++j) {
      h = num::add(h, num::matmul(num::matmul(tokens[t - 1 - j], num::transpose(ssm.b_in)),
                                  num::transpose(power)));
      power = num::matmul(ssm.lambda, power);
    }
    worst_gap = std::max(worst_gap, num::max_abs_diff(out.traces[t - 1], h));
  }
  const bool ssm_ok = worst_gap <= 1e-10;
  detail("ssm recurrence vs closed form, worst gap to t=100 = " + std::to_string(worst_gap));

  // Formula ops against hand-evaluated values.
  const double tf_bound = theory::transformer_block_bound(3.0, 2.0, 4.0);
  theory::LipschitzConstants c;
  c.l_sigma = 0.25;
  c.lambda_sup = 2.0;
  c.b_sup = 1.0;
  c.x_sup = 1.0;
  c.m_omega = 1.0;
  c.l_omega = 1.0;
  auto rnn_bound = theory::rnn_lipschitz_bound(c);
  const double rad = theory::rademacher_bound(1.0, std::exp(1.0), 100.0, 10.0, 0.0);
  const bool formulas_ok = std::abs(tf_bound - std::sqrt(73.0)) <= 1e-12 &&
                           std::abs(rnn_bound.h_sup - 0.5) <= 1e-12 &&
                           std::abs(rnn_bound.gamma1 - 0.25) <= 1e-12 &&
                           std::abs(rnn_bound.gamma2 - 0.5) <= 1e-12 &&
                           std::abs(rnn_bound.bound - std::sqrt(1.3125)) <= 1e-12 &&
                           std::abs(rad - 2.0 * std::sqrt(1.0 / 1000.0)) <= 1e-12 &&
                           theory::rademacher_bound(1.0, 1.0, 5.0, 5.0, 0.125) == 0.125;
  detail(std::string("formula ops match hand evaluation: ") + (formulas_ok ? "yes" : "no"));
  return fd_ok && ssm_ok && formulas_ok;
}

bool criterion_determinism() {
  // Identical config, fresh directories: result CSVs must be byte-identical.
  bool ok = true;
  {
    auto config_a = desk("finite", "");
    auto config_b = config_a;
    config_a.out_dir = (out_root() / "determinism-finite-a").string();
    config_b.out_dir = (out_root() / "determinism-finite-b").string();
    harness::run_experiment(config_a);
    harness::run_experiment(config_b);
    const bool same = slurp(config_a.out_dir + "/results.csv") ==
                      slurp(config_b.out_dir + "/results.csv");
    detail(std::string("finite rerun CSVs byte-identical: ") + (same ? "yes" : "no"));
    ok = ok && same;
  }
  {
    auto config_a = harness::preset("lengthgen", "smoke");
    config_a.family = "transformer";
    harness::resolve(config_a);
    auto config_b = config_a;
    config_a.out_dir = (out_root() / "determinism-lg-a").string();
    config_b.out_dir = (out_root() / "determinism-lg-b").string();
    harness::run_experiment(config_a);
    harness::run_experiment(config_b);
    const bool same = slurp(config_a.out_dir + "/results.csv") ==
                          slurp(config_b.out_dir + "/results.csv") &&
                      slurp(config_a.out_dir + "/trajectory.csv") ==
                          slurp(config_b.out_dir + "/trajectory.csv");
    detail(std::string("lengthgen rerun CSVs byte-identical: ") + (same ? "yes" : "no"));
    ok = ok && same;
  }
  return ok;
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);  // stream criterion lines through pipes
  std::printf("acceptance suite, desk scale (outputs under %s)\n",
              out_root().string().c_str());
  run_criterion(1, "length generalization: four families, risk <= 1e-3 and R2 >= 0.90",
                criterion_length_generalization);
  run_criterion(2, "compositional generalization: corner risk <= 1e-3 and R2 >= 0.90",
                criterion_compositional_generalization);
  run_criterion(3, "failure constructions: offset arm >= 5x, trained-through arm <= 3x",
                criterion_failure_cases);
  run_criterion(4, "trace supervision: (Lambda, B) recovery <= 1e-2 and risk at 2T <= 1e-3",
                criterion_cot);
  run_criterion(5, "non-realizable control: risk ratio >= 10x in at least 2 of 3 seeds",
                criterion_nonrealizable);
  run_criterion(6, "finite class: T0 = 2 exactly and survivors certified to t = 200",
                criterion_finite_class);
  run_criterion(7, "epsilon-cover learner: nearest point survives, sets nest and stabilize",
                criterion_cover);
  run_criterion(8, "lipschitz bounds: zero violations over 1000 pairs up to t = 100",
                criterion_lipschitz);
  run_criterion(9, "numerics: gradient checks, recurrence closed form, formula ops",
                criterion_numerics);
  run_criterion(10, "determinism: reruns produce byte-identical result CSVs",
                criterion_determinism);

  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", failures);
  return 1;
}
