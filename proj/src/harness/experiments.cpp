#include "seqlab/harness/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "seqlab/data/datagen.hpp"
#include "seqlab/eval/eval.hpp"
#include "seqlab/harness/csvfmt.hpp"
#include "seqlab/harness/svg.hpp"
#include "seqlab/models/serialize.hpp"
#include "seqlab/theory/theory.hpp"
#include "seqlab/train/train.hpp"

namespace seqlab::harness {

namespace fs = std::filesystem;
using data::DistKind;
using data::DistributionSpec;
using models::CoreModel;
using models::Teacher;
using num::Matrix;
using num::RngStream;

namespace {

constexpr const char* kProvenance = "seqlab 1.0";
constexpr const char* kEvalCsvHeader =
    "model,family,t,risk_mean,risk_std,r2_mean,r2_std,perm_score";

std::uint64_t derived_seed(const ExperimentConfig& c, const std::string& role,
                           std::size_t index) {
  return RngStream::hash_label(role + "/" + std::to_string(index)) ^ c.base_seed;
}

models::ModelSpec family_spec(const ExperimentConfig& c, const std::string& family) {
  models::ModelSpec spec;
  spec.family = models::family_from_name(family);
  spec.n = c.n;
  spec.m = c.m;
  spec.k = c.k;
  spec.capacity = models::CapacityClass::kStructuredDiffeo;
  spec.mlp_hidden_layers = 2;
  spec.attention = models::attention_from_name(c.attention);
  spec.norm = c.norm == "mean_over_i_minus_1" ? models::AttentionNorm::kMeanOverIMinus1
                                              : models::AttentionNorm::kMeanOverI;
  spec.attention_heads = c.attention_heads;
  if (spec.family == models::Family::kRnn) {
    spec.capacity = models::CapacityClass::kStructuredPerceptron;
  }
  return spec;
}

DistributionSpec train_distribution(const ExperimentConfig& c) {
  DistributionSpec dist;
  dist.n = c.n;
  dist.T = c.train_t;
  if (c.experiment == "compgen") dist.kind = DistKind::kCompositionalBand;
  else if (c.experiment == "discrete") dist.kind = DistKind::kDiscreteGrid;
  else dist.kind = DistKind::kUniformHypercube;
  dist.grid_levels = c.grid_levels;
  return dist;
}

struct SeedArtifacts {
  CoreModel student;
  bool ok = false;
  std::string status;
  train::TrainReport report;
};

SeedArtifacts train_one(CoreModel student, const Teacher& teacher,
                        const DistributionSpec& dist, train::TrainConfig train_config,
                        std::uint64_t train_seed) {
  SeedArtifacts out{std::move(student), false, "ok", {}};
  train_config.seed = train_seed;
  try {
    out.report = train::erm_train(out.student, teacher, dist, train_config);
    out.ok = true;
  } catch (const train::TrainDivergence& e) {
    out.status = std::string("diverged: ") + e.what();
  } catch (const data::SamplerError& e) {
    out.status = std::string("sampler: ") + e.what();
  }
  return out;
}

void write_train_report_csv(const std::string& path, const train::TrainReport& report) {
  std::ofstream out(path);
  out << "epoch,train_loss,val_loss,lr\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << (e + 1) << "," << csv_double(report.train_loss[e]) << ","
        << csv_double(report.val_loss[e]) << "," << csv_double(report.lr[e]) << "\n";
  }
}

json train_report_json(const train::TrainReport& report) {
  json j;
  j["train_loss"] = report.train_loss;
  j["val_loss"] = report.val_loss;
  j["lr"] = report.lr;
  j["steps"] = report.steps;
  j["wall_seconds"] = report.wall_seconds;
  return j;
}

struct EvalCsvRow {
  std::string model;
  std::string family;
  std::size_t t = 0;
  double risk_mean = 0.0, risk_std = 0.0;
  double r2_mean = 0.0, r2_std = 0.0;
  bool has_perm = false;
  double perm_score = 0.0;
};

void write_eval_csv(const std::string& path, const std::vector<EvalCsvRow>& rows) {
  std::ofstream out(path);
  out << kEvalCsvHeader << "\n";
  for (const EvalCsvRow& r : rows) {
    out << r.model << "," << r.family << "," << r.t << "," << csv_double(r.risk_mean) << ","
        << csv_double(r.risk_std) << "," << csv_double(r.r2_mean) << ","
        << csv_double(r.r2_std) << ",";
    if (r.has_perm) out << csv_double(r.perm_score);
    out << "\n";
  }
}

void write_trajectory_csv(const std::string& path, const eval::Trajectory& trajectory) {
  std::ofstream out(path);
  const std::size_t m = trajectory.true_labels.cols();
  out << "t";
  for (std::size_t c = 0; c < m; ++c) out << ",true" << c;
  for (std::size_t c = 0; c < m; ++c) out << ",pred" << c;
  out << "\n";
  for (std::size_t t = 0; t < trajectory.t_count; ++t) {
    out << (t + 1);
    for (std::size_t c = 0; c < m; ++c)
      out << "," << csv_double(trajectory.true_labels(t, c));
    for (std::size_t c = 0; c < m; ++c)
      out << "," << csv_double(trajectory.predicted_labels(t, c));
    out << "\n";
  }
}

json curve_json(const std::string& title, const std::string& x_label,
                const std::string& y_label, bool log_y, const std::vector<Series>& series) {
  json j;
  j["title"] = title;
  j["x_label"] = x_label;
  j["y_label"] = y_label;
  j["log_y"] = log_y;
  j["series"] = json::array();
  for (const Series& s : series) {
    json sj;
    sj["label"] = s.label;
    sj["x"] = s.x;
    sj["y"] = s.y;
    j["series"].push_back(sj);
  }
  return j;
}

void render_curves(const json& report, const std::string& out_dir,
                   std::vector<std::string>& artifacts) {
  if (!report.contains("curves")) return;
  for (const auto& [name, curve] : report.at("curves").items()) {
    std::vector<Series> series;
    for (const json& sj : curve.at("series")) {
      series.push_back(Series{sj.at("label").get<std::string>(),
                              sj.at("x").get<std::vector<double>>(),
                              sj.at("y").get<std::vector<double>>()});
    }
    ChartOptions options;
    options.title = curve.at("title").get<std::string>();
    options.x_label = curve.at("x_label").get<std::string>();
    options.y_label = curve.at("y_label").get<std::string>();
    options.log_y = curve.at("log_y").get<bool>();
    const std::string path = out_dir + "/" + name + ".svg";
    write_line_chart(path, series, options);
    artifacts.push_back(path);
  }
}

struct SeedEval {
  std::vector<double> risks;  // per eval length
  std::vector<double> r2s;
  std::vector<double> perms;  // rnn only
};

SeedEval evaluate_seed(const CoreModel& student, const Teacher& teacher,
                       const std::vector<std::size_t>& lengths, DistributionSpec dist,
                       const ExperimentConfig& c, std::uint64_t seed, bool with_perm) {
  SeedEval out;
  RngStream root(seed, "eval");
  for (std::size_t t : lengths) {
    RngStream cell = root.derive("t", t);
    out.risks.push_back(eval::risk_at_length(student, teacher, t, dist, c.risk_samples,
                                             cell.derive("risk")));
    auto pair = eval::collect_representations(student, teacher, t, dist, c.r2_sequences,
                                              cell.derive("r2"));
    out.r2s.push_back(eval::linear_identification_r2(pair.learned, pair.truth).mean);
    if (with_perm) {
      out.perms.push_back(eval::permutation_recovery(student, models::core_of(teacher), t,
                                                     dist, c.r2_sequences,
                                                     cell.derive("perm"))
                              .score);
    }
  }
  return out;
}

std::vector<EvalCsvRow> aggregate_rows(const std::string& model, const std::string& family,
                                       const std::vector<std::size_t>& lengths,
                                       const std::vector<SeedEval>& evals, bool with_perm) {
  std::vector<EvalCsvRow> rows;
  for (std::size_t li = 0; li < lengths.size(); ++li) {
    std::vector<double> risks, r2s, perms;
    for (const SeedEval& e : evals) {
      risks.push_back(e.risks[li]);
      r2s.push_back(e.r2s[li]);
      if (with_perm) perms.push_back(e.perms[li]);
    }
    EvalCsvRow row;
    row.model = model;
    row.family = family;
    row.t = lengths[li];
    row.risk_mean = eval::mean_of(risks);
    row.risk_std = eval::sample_std(risks);
    row.r2_mean = eval::mean_of(r2s);
    row.r2_std = eval::sample_std(r2s);
    if (with_perm) {
      row.has_perm = true;
      row.perm_score = eval::mean_of(perms);
    }
    rows.push_back(row);
  }
  return rows;
}

json rows_to_json(const std::vector<EvalCsvRow>& rows) {
  json arr = json::array();
  for (const EvalCsvRow& r : rows) {
    json j;
    j["model"] = r.model;
    j["family"] = r.family;
    j["t"] = r.t;
    j["risk_mean"] = r.risk_mean;
    j["risk_std"] = r.risk_std;
    j["r2_mean"] = r.r2_mean;
    j["r2_std"] = r.r2_std;
    if (r.has_perm) j["perm_score"] = r.perm_score;
    arr.push_back(j);
  }
  return arr;
}

// ---------------------------------------------------------------------------
// lengthgen / discrete
// ---------------------------------------------------------------------------

json run_lengthgen(const ExperimentConfig& c, std::vector<std::string>& artifacts,
                   std::vector<std::string>& seed_status) {
  const models::ModelSpec spec = family_spec(c, c.family);
  DistributionSpec dist = train_distribution(c);
  const bool with_perm = spec.family == models::Family::kRnn;

  json report;
  report["experiment"] = c.experiment;
  report["family"] = c.family;
  if (c.attention == "softmax") {
    report["notes"] = json::array({"softmax attention: outside the guarantee regime"});
  }

  std::vector<SeedEval> evals;
  json per_seed = json::array();
  eval::Trajectory trajectory;
  bool have_trajectory = false;

  for (std::size_t s = 0; s < c.seeds; ++s) {
    RngStream teacher_rng(c.base_seed, "teacher/" + std::to_string(s));
    RngStream student_rng(c.base_seed, "student/" + std::to_string(s));
    Teacher teacher{sample_model(spec, teacher_rng)};
    SeedArtifacts trained = train_one(sample_model(spec, student_rng), teacher, dist, c.train,
                                      derived_seed(c, "train", s));
    seed_status.push_back(trained.status);
    json sj;
    sj["seed"] = s;
    sj["status"] = trained.status;
    if (trained.ok) {
      const std::string train_csv =
          c.out_dir + "/train_report_seed" + std::to_string(s) + ".csv";
      write_train_report_csv(train_csv, trained.report);
      artifacts.push_back(train_csv);
      sj["train"] = train_report_json(trained.report);

      evals.push_back(evaluate_seed(trained.student, teacher, c.eval_lengths, dist, c,
                                    derived_seed(c, "eval", s), with_perm));
      if (!have_trajectory) {
        trajectory = eval::track_sequence(trained.student, teacher, c.eval_lengths.back(),
                                          dist, RngStream(derived_seed(c, "traj", s), "traj"));
        have_trajectory = true;
      }
    }
    per_seed.push_back(sj);
  }
  report["per_seed"] = per_seed;

  if (evals.empty()) {
    throw std::runtime_error("lengthgen: every seed diverged; see manifest per-seed status");
  }

  auto rows = aggregate_rows("student", c.family, c.eval_lengths, evals, with_perm);
  write_eval_csv(c.out_dir + "/results.csv", rows);
  artifacts.push_back(c.out_dir + "/results.csv");
  report["rows"] = rows_to_json(rows);

  if (have_trajectory) {
    write_trajectory_csv(c.out_dir + "/trajectory.csv", trajectory);
    artifacts.push_back(c.out_dir + "/trajectory.csv");
  }

  // Charts: risk curve plus a trajectory overlay of the first components.
  std::vector<double> xs, risk_means, r2_means;
  for (const EvalCsvRow& r : rows) {
    xs.push_back(static_cast<double>(r.t));
    risk_means.push_back(r.risk_mean);
    r2_means.push_back(r.r2_mean);
  }
  json curves;
  curves["curve"] =
      curve_json("test loss vs length (" + c.family + ", trained at T=" +
                     std::to_string(c.train_t) + ")",
                 "sequence length", "mean squared error", true,
                 {Series{"student", xs, risk_means}});
  curves["r2"] = curve_json("identification R^2 vs length (" + c.family + ")",
                            "sequence length", "mean R^2", false,
                            {Series{"student", xs, r2_means}});
  if (have_trajectory) {
    std::vector<double> ts, truth, pred;
    for (std::size_t t = 0; t < trajectory.t_count; ++t) {
      ts.push_back(static_cast<double>(t + 1));
      truth.push_back(trajectory.true_labels(t, 0));
      pred.push_back(trajectory.predicted_labels(t, 0));
    }
    curves["trajectory"] = curve_json("trajectory tracking (" + c.family + ", component 0)",
                                      "position", "label", false,
                                      {Series{"true", ts, truth}, Series{"predicted", ts, pred}});
  }
  report["curves"] = curves;
  return report;
}

// ---------------------------------------------------------------------------
// compgen
// ---------------------------------------------------------------------------

json run_compgen(const ExperimentConfig& c, std::vector<std::string>& artifacts,
                 std::vector<std::string>& seed_status) {
  const models::ModelSpec spec = family_spec(c, c.family);
  DistributionSpec band = train_distribution(c);
  DistributionSpec corner = band;
  corner.kind = DistKind::kCornerComplement;

  json report;
  report["experiment"] = "compgen";
  report["family"] = c.family;

  std::vector<SeedEval> corner_evals, band_evals;
  json per_seed = json::array();
  const std::vector<std::size_t> lengths = {c.train_t};
  const bool with_perm = spec.family == models::Family::kRnn;

  for (std::size_t s = 0; s < c.seeds; ++s) {
    RngStream teacher_rng(c.base_seed, "teacher/" + std::to_string(s));
    RngStream student_rng(c.base_seed, "student/" + std::to_string(s));
    Teacher teacher{sample_model(spec, teacher_rng)};
    SeedArtifacts trained = train_one(sample_model(spec, student_rng), teacher, band, c.train,
                                      derived_seed(c, "train", s));
    seed_status.push_back(trained.status);
    json sj;
    sj["seed"] = s;
    sj["status"] = trained.status;
    if (trained.ok) {
      const std::string train_csv =
          c.out_dir + "/train_report_seed" + std::to_string(s) + ".csv";
      write_train_report_csv(train_csv, trained.report);
      artifacts.push_back(train_csv);
      corner_evals.push_back(evaluate_seed(trained.student, teacher, lengths, corner, c,
                                           derived_seed(c, "eval-corner", s), with_perm));
      band_evals.push_back(evaluate_seed(trained.student, teacher, lengths, band, c,
                                         derived_seed(c, "eval-band", s), with_perm));
    }
    per_seed.push_back(sj);
  }
  report["per_seed"] = per_seed;
  if (corner_evals.empty()) {
    throw std::runtime_error("compgen: every seed diverged; see manifest per-seed status");
  }

  auto rows = aggregate_rows("student_corner", c.family, lengths, corner_evals, with_perm);
  auto band_rows = aggregate_rows("student_band", c.family, lengths, band_evals, with_perm);
  rows.insert(rows.end(), band_rows.begin(), band_rows.end());
  write_eval_csv(c.out_dir + "/results.csv", rows);
  artifacts.push_back(c.out_dir + "/results.csv");
  report["rows"] = rows_to_json(rows);

  json curves;
  curves["curve"] = curve_json(
      "compositional generalization (" + c.family + ", T=" + std::to_string(c.train_t) + ")",
      "evaluation set (0=corner, 1=band)", "mean squared error", true,
      {Series{"corner",
              {0.0},
              {rows[0].risk_mean}},
       Series{"band", {1.0}, {rows[1].risk_mean}}});
  report["curves"] = curves;
  return report;
}

// ---------------------------------------------------------------------------
// failure
// ---------------------------------------------------------------------------

json run_failure(const ExperimentConfig& c, std::vector<std::string>& artifacts,
                 std::vector<std::string>& seed_status) {
  if (c.family != "deep_set" && c.family != "transformer") {
    throw std::invalid_argument("failure experiment supports deep_set or transformer");
  }
  // Teacher: one-hidden-layer heads, raw output; the offset construction
  // sits outside every structured class. Student: deeper heads with raw
  // output, roomy enough to express the offset on the training support.
  models::ModelSpec teacher_spec = family_spec(c, c.family);
  teacher_spec.capacity = models::CapacityClass::kHighCapacity;
  teacher_spec.mlp_hidden_layers = 1;
  teacher_spec.output_act = models::Activation::kNone;
  models::ModelSpec student_spec = teacher_spec;
  student_spec.mlp_hidden_layers = c.family == "transformer" ? 3 : 2;

  const std::size_t t0 = c.failure_t0;
  const std::size_t top = 2 * t0;
  std::vector<std::size_t> lengths;
  for (std::size_t t = 1; t <= top; ++t) lengths.push_back(t);

  json report;
  report["experiment"] = "failure";
  report["family"] = c.family;
  report["offset"] = c.failure_offset;
  report["t0"] = t0;

  json arms = json::object();
  json curves;
  std::vector<EvalCsvRow> all_rows;
  DistributionSpec dist = train_distribution(c);

  for (const std::string arm : {"failure", "success"}) {
    DistributionSpec arm_dist = dist;
    arm_dist.T = arm == "failure" ? t0 - 1 : top;

    std::vector<std::vector<double>> risk_rows;
    std::vector<double> below_means, above_means;
    json per_seed = json::array();
    for (std::size_t s = 0; s < c.seeds; ++s) {
      RngStream teacher_rng(c.base_seed, "teacher/" + std::to_string(s));
      RngStream student_rng(c.base_seed, arm + "/student/" + std::to_string(s));
      Teacher teacher{
          models::make_degenerate(sample_model(teacher_spec, teacher_rng), c.failure_offset, t0)};
      SeedArtifacts trained =
          train_one(sample_model(student_spec, student_rng), teacher, arm_dist, c.train,
                    derived_seed(c, arm + "/train", s));
      seed_status.push_back(arm + "/" + trained.status);
      json sj;
      sj["seed"] = s;
      sj["status"] = trained.status;
      if (trained.ok) {
        std::vector<double> risks;
        RngStream eval_rng(derived_seed(c, arm + "/eval", s), "eval");
        for (std::size_t t : lengths) {
          risks.push_back(eval::risk_at_length(trained.student, teacher, t, dist,
                                               c.risk_samples, eval_rng.derive("t", t)));
        }
        double below = 0.0, above = 0.0;
        std::size_t nb = 0, na = 0;
        for (std::size_t li = 0; li < lengths.size(); ++li) {
          if (lengths[li] < t0) {
            below += risks[li];
            ++nb;
          } else {
            above += risks[li];
            ++na;
          }
        }
        below /= static_cast<double>(nb);
        above /= static_cast<double>(na);
        below_means.push_back(below);
        above_means.push_back(above);
        sj["loss_below_t0"] = below;
        sj["loss_at_or_above_t0"] = above;
        sj["ratio"] = above / std::max(below, 1e-300);
        risk_rows.push_back(std::move(risks));
      }
      per_seed.push_back(sj);
    }
    if (risk_rows.empty()) {
      throw std::runtime_error("failure/" + arm + ": every seed diverged");
    }

    json arm_json;
    arm_json["per_seed"] = per_seed;
    arm_json["train_T"] = arm_dist.T;
    arm_json["loss_below_t0_mean"] = eval::mean_of(below_means);
    arm_json["loss_at_or_above_t0_mean"] = eval::mean_of(above_means);
    arm_json["ratio_mean"] =
        eval::mean_of(above_means) / std::max(eval::mean_of(below_means), 1e-300);
    arms[arm] = arm_json;

    std::vector<double> xs, means;
    for (std::size_t li = 0; li < lengths.size(); ++li) {
      xs.push_back(static_cast<double>(lengths[li]));
      std::vector<double> col;
      for (const auto& rr : risk_rows) col.push_back(rr[li]);
      means.push_back(eval::mean_of(col));
      EvalCsvRow row;
      row.model = arm;
      row.family = c.family;
      row.t = lengths[li];
      row.risk_mean = means.back();
      row.risk_std = eval::sample_std(col);
      all_rows.push_back(row);
    }
    curves[arm] = curve_json("offset teacher, " + arm + " arm (" + c.family + ")",
                             "sequence length", "mean squared error", true,
                             {Series{arm, xs, means}});
  }
  report["arms"] = arms;
  write_eval_csv(c.out_dir + "/results.csv", all_rows);
  artifacts.push_back(c.out_dir + "/results.csv");
  report["rows"] = rows_to_json(all_rows);
  report["curves"] = curves;
  return report;
}

// ---------------------------------------------------------------------------
// cot
// ---------------------------------------------------------------------------

json run_cot(const ExperimentConfig& c, std::vector<std::string>& artifacts,
             std::vector<std::string>& seed_status) {
  models::ModelSpec teacher_spec = family_spec(c, c.family);
  models::ModelSpec student_spec = teacher_spec;
  student_spec.capacity = models::CapacityClass::kHighCapacity;

  DistributionSpec dist = train_distribution(c);
  json report;
  report["experiment"] = "cot";
  report["family"] = c.family;
  report["notes"] =
      json::array({"label_only arm uses a high-capacity student: no generalization guarantee"});

  std::vector<std::size_t> lengths = c.eval_lengths;
  const std::size_t doubled = 2 * c.train_t;
  if (std::find(lengths.begin(), lengths.end(), doubled) == lengths.end()) {
    lengths.push_back(doubled);
    std::sort(lengths.begin(), lengths.end());
  }

  json arms = json::object();
  std::vector<EvalCsvRow> all_rows;
  json curves;
  const bool recurrent = c.family == "ssm" || c.family == "rnn";

  for (const std::string arm : {"label_only", "label_plus_cot"}) {
    std::vector<SeedEval> evals;
    std::vector<double> lambda_err, b_err;
    json per_seed = json::array();
    for (std::size_t s = 0; s < c.seeds; ++s) {
      RngStream teacher_rng(c.base_seed, "teacher/" + std::to_string(s));
      RngStream student_rng(c.base_seed, "student/" + std::to_string(s));
      Teacher teacher{sample_model(teacher_spec, teacher_rng)};
      CoreModel student = sample_model(student_spec, student_rng);
      train::TrainConfig tc = c.train;
      tc.loss = arm == "label_plus_cot" ? train::LossKind::kLabelPlusCot
                                        : train::LossKind::kLabelOnly;
      SeedArtifacts trained =
          train_one(std::move(student), teacher, dist, tc, derived_seed(c, arm + "/train", s));
      seed_status.push_back(arm + "/" + trained.status);
      json sj;
      sj["seed"] = s;
      sj["status"] = trained.status;
      if (trained.ok) {
        evals.push_back(evaluate_seed(trained.student, teacher, lengths, dist, c,
                                      derived_seed(c, arm + "/eval", s), false));
        if (recurrent && arm == "label_plus_cot") {
          const auto get = [&](const CoreModel& model) {
            if (const auto* ssm = std::get_if<models::Ssm>(&model))
              return std::pair<const Matrix*, const Matrix*>(&ssm->lambda, &ssm->b_in);
            const auto& rnn = std::get<models::Rnn>(model);
            return std::pair<const Matrix*, const Matrix*>(&rnn.lambda, &rnn.b_in);
          };
          auto [tl, tb] = get(models::core_of(teacher));
          auto [sl, sb] = get(trained.student);
          lambda_err.push_back(num::frobenius_norm(num::sub(*sl, *tl)));
          b_err.push_back(num::frobenius_norm(num::sub(*sb, *tb)));
          sj["lambda_frobenius_error"] = lambda_err.back();
          sj["b_frobenius_error"] = b_err.back();
        }
      }
      per_seed.push_back(sj);
    }
    if (evals.empty()) throw std::runtime_error("cot/" + arm + ": every seed diverged");

    json arm_json;
    arm_json["per_seed"] = per_seed;
    if (!lambda_err.empty()) {
      arm_json["lambda_frobenius_error_mean"] = eval::mean_of(lambda_err);
      arm_json["b_frobenius_error_mean"] = eval::mean_of(b_err);
    }
    auto rows = aggregate_rows(arm, c.family, lengths, evals, false);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    arm_json["rows"] = rows_to_json(rows);
    arms[arm] = arm_json;

    std::vector<double> xs, means;
    for (const EvalCsvRow& r : rows) {
      xs.push_back(static_cast<double>(r.t));
      means.push_back(r.risk_mean);
    }
    if (!curves.contains("curve")) {
      curves["curve"] = curve_json("label vs label+trace supervision (" + c.family + ")",
                                   "sequence length", "mean squared error", true, {});
    }
    json sj;
    sj["label"] = arm;
    sj["x"] = xs;
    sj["y"] = means;
    curves["curve"]["series"].push_back(sj);
  }
  report["arms"] = arms;
  write_eval_csv(c.out_dir + "/results.csv", all_rows);
  artifacts.push_back(c.out_dir + "/results.csv");
  report["rows"] = rows_to_json(all_rows);
  report["curves"] = curves;
  return report;
}

// ---------------------------------------------------------------------------
// nonrealizable
// ---------------------------------------------------------------------------

json run_nonrealizable(const ExperimentConfig& c, std::vector<std::string>& artifacts,
                       std::vector<std::string>& seed_status) {
  if (c.student_family == c.family) {
    throw std::invalid_argument(
        "nonrealizable: student_family must differ from the teacher family");
  }
  models::ModelSpec teacher_spec = family_spec(c, c.family);
  DistributionSpec dist = train_distribution(c);
  const std::vector<std::size_t> lengths = {c.train_t, 5 * c.train_t};

  json report;
  report["experiment"] = "nonrealizable";
  report["teacher_family"] = c.family;
  report["student_family"] = c.student_family;

  json arms = json::object();
  std::vector<EvalCsvRow> all_rows;
  json curves;
  for (const std::string arm : {"mismatched", "control"}) {
    const std::string student_family = arm == "mismatched" ? c.student_family : c.family;
    models::ModelSpec student_spec = family_spec(c, student_family);

    std::vector<SeedEval> evals;
    std::vector<double> ratios;
    json per_seed = json::array();
    for (std::size_t s = 0; s < c.seeds; ++s) {
      RngStream teacher_rng(c.base_seed, "teacher/" + std::to_string(s));
      RngStream student_rng(c.base_seed, arm + "/student/" + std::to_string(s));
      Teacher teacher{sample_model(teacher_spec, teacher_rng)};
      SeedArtifacts trained =
          train_one(sample_model(student_spec, student_rng), teacher, dist, c.train,
                    derived_seed(c, arm + "/train", s));
      seed_status.push_back(arm + "/" + trained.status);
      json sj;
      sj["seed"] = s;
      sj["status"] = trained.status;
      if (trained.ok) {
        evals.push_back(evaluate_seed(trained.student, teacher, lengths, dist, c,
                                      derived_seed(c, arm + "/eval", s), false));
        const double ratio =
            evals.back().risks[1] / std::max(evals.back().risks[0], 1e-300);
        ratios.push_back(ratio);
        sj["risk_at_train_T"] = evals.back().risks[0];
        sj["risk_at_5x_train_T"] = evals.back().risks[1];
        sj["ratio"] = ratio;
      }
      per_seed.push_back(sj);
    }
    if (evals.empty()) throw std::runtime_error("nonrealizable/" + arm + ": all seeds diverged");
    json arm_json;
    arm_json["per_seed"] = per_seed;
    arm_json["student_family"] = student_family;
    arm_json["ratios"] = ratios;
    std::size_t big = 0;
    for (double r : ratios) {
      if (r >= 10.0) ++big;
    }
    arm_json["seeds_with_ratio_ge_10"] = big;
    arms[arm] = arm_json;

    auto rows = aggregate_rows(arm, student_family, lengths, evals, false);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());

    std::vector<double> xs, means;
    for (const EvalCsvRow& r : rows) {
      xs.push_back(static_cast<double>(r.t));
      means.push_back(r.risk_mean);
    }
    if (!curves.contains("curve")) {
      curves["curve"] = curve_json("realizable vs mismatched student (teacher " + c.family + ")",
                                   "sequence length", "mean squared error", true, {});
    }
    json sj;
    sj["label"] = arm;
    sj["x"] = xs;
    sj["y"] = means;
    curves["curve"]["series"].push_back(sj);
  }
  report["arms"] = arms;
  write_eval_csv(c.out_dir + "/results.csv", all_rows);
  artifacts.push_back(c.out_dir + "/results.csv");
  report["rows"] = rows_to_json(all_rows);
  report["curves"] = curves;
  return report;
}

// ---------------------------------------------------------------------------
// finite / cover / lipschitz
// ---------------------------------------------------------------------------

void write_survivors_csv(const std::string& path,
                         const std::vector<std::string>& axis_names,
                         const std::vector<std::vector<double>>& params,
                         const std::vector<std::size_t>& first_violation,
                         const std::vector<bool>& survives) {
  std::ofstream out(path);
  out << "entry_id";
  for (const std::string& a : axis_names) out << "," << a;
  out << ",t_h,survives_at_t\n";
  for (std::size_t e = 0; e < params.size(); ++e) {
    out << e;
    for (double p : params[e]) out << "," << csv_double(p);
    out << ",";
    if (first_violation[e] == theory::kNever) out << "inf";
    else out << first_violation[e];
    out << "," << (survives[e] ? 1 : 0) << "\n";
  }
}

json run_finite(const ExperimentConfig& c, std::vector<std::string>& artifacts,
                std::vector<std::string>& seed_status) {
  const std::vector<double> lambda_axis = {0.0, 0.5};
  const std::vector<double> b_axis = {1.0};
  theory::HypothesisGrid grid = theory::scalar_ssm_grid(lambda_axis, b_axis, 0.5, 1.0);

  DistributionSpec dist;
  dist.kind = DistKind::kUniformHypercube;
  dist.n = 1;
  dist.T = c.horizon;

  const std::size_t train_t = 2;
  theory::FiniteClassResult result = theory::finite_class_t0(
      grid, dist, c.tolerance, train_t, c.horizon, c.mc_samples, c.base_seed);
  seed_status.push_back("ok");

  json report;
  report["experiment"] = "finite";
  report["train_T"] = train_t;
  report["horizon"] = c.horizon;
  report["mc_samples"] = c.mc_samples;
  report["t0"] = result.t0;
  report["survivors"] = result.survivors;
  report["survivors_certified"] = result.survivors_certified;
  json grid_json;
  grid_json["axis_names"] = grid.axis_names;
  grid_json["axes"] = grid.axes;
  grid_json["teacher_index"] = grid.teacher_index;
  report["grid"] = grid_json;
  json entries = json::array();
  std::vector<std::vector<double>> params;
  std::vector<bool> survives(grid.entries.size(), false);
  for (std::size_t e : result.survivors) survives[e] = true;
  for (std::size_t e = 0; e < grid.entries.size(); ++e) {
    params.push_back(grid.entries[e].params);
    json ej;
    ej["params"] = grid.entries[e].params;
    ej["first_violation"] = result.first_violation[e] == theory::kNever
                                ? json(nullptr)
                                : json(result.first_violation[e]);
    ej["risk_by_length"] = result.table.risk[e];
    entries.push_back(ej);
  }
  report["entries"] = entries;

  write_survivors_csv(c.out_dir + "/results.csv", grid.axis_names, params,
                      result.first_violation, survives);
  artifacts.push_back(c.out_dir + "/results.csv");

  std::vector<Series> series;
  std::vector<double> xs;
  for (std::size_t t = 1; t <= std::min<std::size_t>(c.horizon, 20); ++t)
    xs.push_back(static_cast<double>(t));
  for (std::size_t e = 0; e < grid.entries.size(); ++e) {
    std::vector<double> ys(result.table.risk[e].begin(),
                           result.table.risk[e].begin() + xs.size());
    series.push_back(Series{"lambda=" + std::to_string(grid.entries[e].params[0]), xs, ys});
  }
  json curves;
  curves["risks"] = curve_json("per-length risk of each grid entry", "sequence length",
                               "risk", false, series);
  report["curves"] = curves;
  return report;
}

json run_cover(const ExperimentConfig& c, std::vector<std::string>& artifacts,
               std::vector<std::string>& seed_status) {
  // Scalar linear-recurrence class: the recurrence activation is the
  // identity (L_sigma = 1, sigma(0) = 0) and the readout is the identity, so
  // the parameter-Lipschitz constant comes from the recurrence alone.
  const double lambda_sup = 0.7, b_sup = 1.2, x_sup = 1.0;
  theory::LipschitzConstants constants;
  constants.l_sigma = 1.0;
  constants.lambda_sup = lambda_sup;
  constants.b_sup = b_sup;
  constants.x_sup = x_sup;
  constants.m_omega = 1.0;
  constants.l_omega = 0.0;
  const double lipschitz = theory::rnn_lipschitz_bound(constants).bound;

  theory::ModelBuilder build = [](std::span<const double> p) -> CoreModel {
    models::Ssm ssm;
    ssm.n = ssm.m = ssm.k = 1;
    ssm.capacity = models::CapacityClass::kHighCapacity;
    ssm.lambda = Matrix::constant(1, 1, p[0]);
    ssm.b_in = Matrix::constant(1, 1, p[1]);
    ssm.omega = models::Head::identity();
    return ssm;
  };
  theory::CoverSpec cover = theory::make_cover(
      {"lambda", "b"}, {{0.3, lambda_sup}, {0.8, b_sup}},
      {c.cover_points_per_axis, c.cover_points_per_axis}, lipschitz, c.epsilon, build);

  const std::vector<double> teacher_params = {0.5, 1.0};
  const CoreModel teacher = build(teacher_params);

  DistributionSpec dist;
  dist.kind = DistKind::kUniformHypercube;
  dist.n = 1;
  dist.T = c.horizon;

  theory::ConstrainedResult result = theory::constrained_survivors(
      cover, teacher_params, teacher, dist, c.horizon, c.mc_samples, c.base_seed);
  seed_status.push_back("ok");

  // Certification pass with an independent sample stream.
  theory::RiskTable check;
  {
    std::vector<CoreModel> survivors;
    for (std::size_t e : result.stabilized_set) survivors.push_back(cover.build(cover.grid_points[e]));
    check = theory::risk_table(survivors, teacher, dist, c.horizon, c.mc_samples,
                               c.base_seed ^ 0x5eedC0de);
  }
  bool certified = true;
  double worst_excess = 0.0;
  for (std::size_t i = 0; i < result.stabilized_set.size(); ++i) {
    for (std::size_t t = 0; t < c.horizon; ++t) {
      const double excess = check.risk[i][t] - (cover.epsilon + 3.0 * check.se[i][t]);
      worst_excess = std::max(worst_excess, excess);
      if (excess > 0.0) certified = false;
    }
  }

  json report;
  report["experiment"] = "cover";
  report["lipschitz"] = lipschitz;
  report["eta"] = cover.eta;
  report["epsilon"] = cover.epsilon;
  report["eta_le_epsilon_over_l"] = cover.eta <= cover.epsilon / lipschitz;
  report["points"] = cover.grid_points.size();
  report["horizon"] = c.horizon;
  report["mc_samples"] = c.mc_samples;
  report["teacher_params"] = teacher_params;
  report["teacher_nearest_index"] = result.teacher_nearest;
  report["teacher_nearest_survives_all"] = result.teacher_nearest_survives_all;
  report["stabilized_t0"] = result.stabilized_t0;
  report["stabilized_survivor_count"] = result.stabilized_set.size();
  report["stabilized_survivors"] = result.stabilized_set;
  report["certified_within_3se"] = certified;
  report["certification_worst_excess"] = worst_excess;
  if (result.empty_set_diagnostic) {
    json miss;
    miss["entry"] = result.empty_set_diagnostic->entry;
    miss["worst_excess"] = result.empty_set_diagnostic->worst_excess;
    report["empty_set_diagnostic"] = miss;
    report["notes"] = json::array(
        {"empty survivor set contradicts the cover guarantee; check eta and L"});
  }

  std::vector<std::size_t> survivor_counts;
  for (const auto& s : result.survivors_by_t) survivor_counts.push_back(s.size());
  report["survivor_count_by_t"] = survivor_counts;

  std::vector<std::size_t> first_violation(cover.grid_points.size(), theory::kNever);
  for (std::size_t e = 0; e < cover.grid_points.size(); ++e) {
    for (std::size_t t = 0; t < c.horizon; ++t) {
      if (result.table.risk[e][t] > cover.epsilon) {
        first_violation[e] = t + 1;
        break;
      }
    }
  }
  std::vector<bool> survives(cover.grid_points.size(), false);
  for (std::size_t e : result.stabilized_set) survives[e] = true;
  write_survivors_csv(c.out_dir + "/results.csv", cover.axis_names, cover.grid_points,
                      first_violation, survives);
  artifacts.push_back(c.out_dir + "/results.csv");

  std::vector<double> xs, ys;
  for (std::size_t t = 0; t < survivor_counts.size(); ++t) {
    xs.push_back(static_cast<double>(t));
    ys.push_back(static_cast<double>(survivor_counts[t]));
  }
  json curves;
  curves["survivors"] = curve_json("constrained-learner survivors vs training length",
                                   "training length T", "surviving cover points", false,
                                   {Series{"survivors", xs, ys}});
  report["curves"] = curves;
  return report;
}

json run_lipschitz(const ExperimentConfig& c, std::vector<std::string>& artifacts,
                   std::vector<std::string>& seed_status) {
  json report;
  report["experiment"] = "lipschitz";
  json rows = json::array();
  std::ofstream csv(c.out_dir + "/results.csv");
  csv << "family,trials,max_t,max_ratio,analytic_bound,violations\n";

  json curves;
  for (const auto& [name, family] :
       std::vector<std::pair<std::string, theory::LipschitzFamily>>{
           {"transformer_block", theory::LipschitzFamily::kTransformerBlock},
           {"rnn", theory::LipschitzFamily::kRnn}}) {
    theory::EmpiricalLipschitzConfig config;
    config.family = family;
    config.trials = c.lipschitz_trials;
    config.max_t = c.lipschitz_max_t;
    theory::EmpiricalLipschitzResult result =
        theory::empirical_lipschitz(config, c.base_seed);
    json j;
    j["family"] = name;
    j["trials"] = config.trials;
    j["max_t"] = config.max_t;
    j["max_ratio"] = result.max_ratio;
    j["analytic_bound"] = result.analytic_bound;
    j["violations"] = result.violations;
    rows.push_back(j);
    csv << name << "," << config.trials << "," << config.max_t << ","
        << csv_double(result.max_ratio) << "," << csv_double(result.analytic_bound) << ","
        << result.violations << "\n";

    std::vector<double> xs, ys, bound;
    for (std::size_t t = 0; t < result.per_t_max.size(); ++t) {
      xs.push_back(static_cast<double>(t + 1));
      ys.push_back(result.per_t_max[t]);
      bound.push_back(result.analytic_bound);
    }
    curves[name] = curve_json("empirical parameter-Lipschitz ratio (" + name + ")",
                              "sequence length", "max ratio", false,
                              {Series{"observed", xs, ys}, Series{"bound", xs, bound}});
  }
  csv.close();
  artifacts.push_back(c.out_dir + "/results.csv");
  report["rows"] = rows;
  report["curves"] = curves;
  seed_status.push_back("ok");
  return report;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(config.out_dir);

  RunOutcome outcome;
  outcome.out_dir = config.out_dir;
  std::vector<std::string> seed_status;

  json report;
  if (config.experiment == "lengthgen" || config.experiment == "discrete") {
    report = run_lengthgen(config, outcome.artifacts, seed_status);
  } else if (config.experiment == "compgen") {
    report = run_compgen(config, outcome.artifacts, seed_status);
  } else if (config.experiment == "failure") {
    report = run_failure(config, outcome.artifacts, seed_status);
  } else if (config.experiment == "cot") {
    report = run_cot(config, outcome.artifacts, seed_status);
  } else if (config.experiment == "nonrealizable") {
    report = run_nonrealizable(config, outcome.artifacts, seed_status);
  } else if (config.experiment == "finite") {
    report = run_finite(config, outcome.artifacts, seed_status);
  } else if (config.experiment == "cover") {
    report = run_cover(config, outcome.artifacts, seed_status);
  } else if (config.experiment == "lipschitz") {
    report = run_lipschitz(config, outcome.artifacts, seed_status);
  } else {
    throw std::invalid_argument("unknown experiment: " + config.experiment);
  }

  report["config"] = config_to_json(config);
  report["config_hash"] = config_hash(config);
  render_curves(report, config.out_dir, outcome.artifacts);

  const std::string report_path = config.out_dir + "/report.json";
  {
    std::ofstream out(report_path);
    out << report.dump(2) << "\n";
  }
  outcome.artifacts.push_back(report_path);

  RunManifest manifest;
  manifest.config_hash = config_hash(config);
  manifest.config = config_to_json(config);
  manifest.artifacts = outcome.artifacts;
  manifest.provenance = kProvenance;
  manifest.per_seed_status = seed_status;
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(config.out_dir + "/manifest.json", manifest);
  outcome.artifacts.push_back(config.out_dir + "/manifest.json");
  outcome.report = std::move(report);
  return outcome;
}

std::vector<std::string> emit_plots(const std::vector<std::string>& report_paths,
                                    const std::string& out_dir) {
  if (report_paths.empty()) throw std::invalid_argument("emit_plots: no report files given");
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  for (const std::string& path : report_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("emit_plots: cannot open " + path);
    json report;
    try {
      in >> report;
    } catch (const std::exception& e) {
      throw std::runtime_error("emit_plots: " + path + " is not valid JSON: " + e.what());
    }
    if (!report.contains("curves")) {
      throw std::runtime_error("emit_plots: " + path + " has no curves section");
    }
    std::size_t row = 0;
    for (const auto& [name, curve] : report.at("curves").items()) {
      ++row;
      std::vector<Series> series;
      for (const json& sj : curve.at("series")) {
        auto xs = sj.at("x").get<std::vector<double>>();
        auto ys = sj.at("y").get<std::vector<double>>();
        if (xs.empty() || xs.size() != ys.size()) {
          throw std::runtime_error("emit_plots: " + path + " curve '" + name + "' row " +
                                   std::to_string(row) + " has an empty or ragged series");
        }
        series.push_back(Series{sj.at("label").get<std::string>(), xs, ys});
      }
      ChartOptions options;
      options.title = curve.at("title").get<std::string>();
      options.x_label = curve.at("x_label").get<std::string>();
      options.y_label = curve.at("y_label").get<std::string>();
      options.log_y = curve.at("log_y").get<bool>();
      const std::string svg_path = out_dir + "/" + name + ".svg";
      write_line_chart(svg_path, series, options);
      written.push_back(svg_path);
    }
  }
  return written;
}

}  // namespace seqlab::harness
