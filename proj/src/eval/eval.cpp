#include "seqlab/eval/eval.hpp"

#include <algorithm>
#include <cmath>

#include "seqlab/num/linalg.hpp"

namespace seqlab::eval {

namespace {

// Final-position-only forward passes. These mirror the full forwards in
// models/families.cpp but keep just the running state.

FinalForward deepset_final(const models::DeepSet& model, std::span<const Matrix> tokens) {
  Matrix sum;
  for (const Matrix& x : tokens) {
    Matrix e = models::head_eval(model.psi, x);
    sum = sum.empty() ? std::move(e) : num::add(sum, e);
  }
  return {models::head_eval(model.omega, sum), sum};
}

FinalForward transformer_final(const models::Transformer& model,
                               std::span<const Matrix> tokens) {
  const std::size_t T = tokens.size();
  const std::size_t i = T - 1;
  const std::size_t batch = tokens[0].rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.k));
  const bool skip_self = model.norm == models::AttentionNorm::kMeanOverIMinus1;
  const std::size_t j_end = skip_self ? i : i + 1;

  Matrix z;
  if (model.positional) {
    Matrix acc(batch, model.k);
    for (std::size_t j = 0; j < j_end; ++j) {
      const std::size_t dist = i - j;
      if (dist >= model.t_max) continue;
      const auto& maps = model.position_kernels[dist];
      Matrix q = num::matmul(tokens[i], num::transpose(maps.wq));
      Matrix k = num::matmul(tokens[j], num::transpose(maps.wk));
      Matrix v = num::matmul(tokens[j], num::transpose(maps.wv));
      Matrix s = num::scale(num::row_sum(num::hadamard(q, k)), inv_sqrt_d);
      Matrix w = model.attention == models::AttentionKind::kSigmoid ? num::sigmoid(s)
                 : model.attention == models::AttentionKind::kRelu  ? num::relu(s)
                                                                    : s;
      acc = num::add(acc, num::row_scale(v, w));
    }
    z = num::scale(acc, j_end ? 1.0 / static_cast<double>(j_end) : 0.0);
  } else {
    std::vector<Matrix> per_head;
    for (const auto& maps : model.heads) {
      Matrix q = num::matmul(tokens[i], num::transpose(maps.wq));
      const Matrix wk_t = num::transpose(maps.wk);
      const Matrix wv_t = num::transpose(maps.wv);
      Matrix acc(batch, model.k);
      if (model.attention == models::AttentionKind::kSoftmax) {
        std::vector<Matrix> expo;
        Matrix denom(batch, 1);
        for (std::size_t j = 0; j < j_end; ++j) {
          Matrix k = num::matmul(tokens[j], wk_t);
          Matrix s = num::scale(num::row_sum(num::hadamard(q, k)), inv_sqrt_d);
          Matrix e = num::exp(s);
          denom = num::add(denom, e);
          expo.push_back(std::move(e));
        }
        for (std::size_t j = 0; j < j_end; ++j) {
          Matrix v = num::matmul(tokens[j], wv_t);
          for (std::size_t r = 0; r < batch; ++r) expo[j](r, 0) /= denom(r, 0);
          acc = num::add(acc, num::row_scale(v, expo[j]));
        }
      } else {
        for (std::size_t j = 0; j < j_end; ++j) {
          Matrix k = num::matmul(tokens[j], wk_t);
          Matrix v = num::matmul(tokens[j], wv_t);
          Matrix s = num::scale(num::row_sum(num::hadamard(q, k)), inv_sqrt_d);
          Matrix w = model.attention == models::AttentionKind::kSigmoid ? num::sigmoid(s)
                     : model.attention == models::AttentionKind::kRelu  ? num::relu(s)
                                                                        : s;
          acc = num::add(acc, num::row_scale(v, w));
        }
        acc = num::scale(acc, j_end ? 1.0 / static_cast<double>(j_end) : 0.0);
      }
      per_head.push_back(std::move(acc));
    }
    z = per_head[0];
    for (std::size_t h = 1; h < per_head.size(); ++h) {
      Matrix wide(batch, z.cols() + per_head[h].cols());
      for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t c = 0; c < z.cols(); ++c) wide(r, c) = z(r, c);
        for (std::size_t c = 0; c < per_head[h].cols(); ++c)
          wide(r, z.cols() + c) = per_head[h](r, c);
      }
      z = std::move(wide);
    }
    if (!model.mix.empty()) z = num::matmul(z, model.mix);
  }
  return {models::head_eval(model.omega, z), z};
}

FinalForward recurrent_final(const Matrix& lambda, const Matrix& b_in,
                             const models::Head& omega, bool nonlinear,
                             std::span<const Matrix> tokens) {
  const Matrix b_t = num::transpose(b_in);
  const Matrix lambda_t = num::transpose(lambda);
  Matrix h;
  for (const Matrix& x : tokens) {
    Matrix pre = num::matmul(x, b_t);
    if (!h.empty()) pre = num::add(num::matmul(h, lambda_t), pre);
    h = nonlinear ? num::sigmoid(pre) : std::move(pre);
  }
  return {models::head_eval(omega, h), h};
}

}  // namespace

FinalForward final_forward(const CoreModel& model, std::span<const Matrix> tokens) {
  if (tokens.empty()) throw num::ShapeError("final_forward: empty sequence");
  return std::visit(
      [&](const auto& m) -> FinalForward {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, models::DeepSet>) return deepset_final(m, tokens);
        else if constexpr (std::is_same_v<T, models::Transformer>)
          return transformer_final(m, tokens);
        else if constexpr (std::is_same_v<T, models::Ssm>)
          return recurrent_final(m.lambda, m.b_in, m.omega, false, tokens);
        else
          return recurrent_final(m.lambda, m.b_in, m.omega, true, tokens);
      },
      model);
}

FinalForward final_forward(const Teacher& teacher, std::span<const Matrix> tokens) {
  FinalForward out = final_forward(models::core_of(teacher), tokens);
  if (const auto* d = std::get_if<models::DegenerateTeacher>(&teacher)) {
    if (tokens.size() > d->t0) out.label = num::add_row_vector(out.label, d->offset);
  }
  return out;
}

double risk_at_length(const CoreModel& student, const Teacher& teacher, std::size_t t,
                      DistributionSpec dist, std::size_t num_samples, RngStream rng) {
  if (t == 0 || num_samples == 0) {
    throw std::invalid_argument("risk_at_length: t and num_samples must be positive");
  }
  dist.T = t;
  const std::size_t chunk = 512;
  double weighted = 0.0;
  std::size_t done = 0;
  std::size_t index = 0;
  while (done < num_samples) {
    const std::size_t take = std::min(chunk, num_samples - done);
    RngStream chunk_rng = rng.derive("chunk", index++);
    auto tokens = data::sample_tokens(dist, take, chunk_rng);
    const Matrix truth = final_forward(teacher, tokens).label;
    const Matrix pred = final_forward(student, tokens).label;
    weighted += num::mean_squared_error(pred, truth) * static_cast<double>(take);
    done += take;
  }
  return weighted / static_cast<double>(num_samples);
}

R2Result linear_identification_r2(const Matrix& learned, const Matrix& truth) {
  if (learned.rows() != truth.rows()) {
    throw num::ShapeError("linear_identification_r2: row counts differ");
  }
  if (learned.rows() < learned.cols() + 2) {
    throw std::invalid_argument("linear_identification_r2: need more samples than dims");
  }
  const std::size_t rows = learned.rows();
  Matrix design(rows, learned.cols() + 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < learned.cols(); ++c) design(r, c) = learned(r, c);
    design(r, learned.cols()) = 1.0;
  }
  auto fit = num::solve_least_squares(design, truth);
  Matrix residual = num::sub(num::matmul(design, fit.solution), truth);

  R2Result out;
  out.degenerate = fit.degenerate;
  out.per_dim.resize(truth.cols());
  double acc = 0.0;
  for (std::size_t c = 0; c < truth.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += truth(r, c);
    mean /= static_cast<double>(rows);
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = truth(r, c) - mean;
      ss_tot += d * d;
      ss_res += residual(r, c) * residual(r, c);
    }
    const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    out.per_dim[c] = r2;
    acc += r2;
  }
  out.mean = acc / static_cast<double>(truth.cols());
  return out;
}

RepresentationPair collect_representations(const CoreModel& student, const Teacher& teacher,
                                           std::size_t t, DistributionSpec dist,
                                           std::size_t sequences, RngStream rng) {
  dist.T = t;
  auto tokens = data::sample_tokens(dist, sequences, rng);
  models::ForwardResult s = models::forward(student, tokens);
  models::ForwardResult f = models::forward(models::core_of(teacher), tokens);

  const std::size_t sd = s.traces[0].cols();
  const std::size_t fd = f.traces[0].cols();
  RepresentationPair pair{Matrix(sequences * t, sd), Matrix(sequences * t, fd)};
  for (std::size_t pos = 0; pos < t; ++pos) {
    for (std::size_t r = 0; r < sequences; ++r) {
      for (std::size_t c = 0; c < sd; ++c)
        pair.learned(pos * sequences + r, c) = s.traces[pos](r, c);
      for (std::size_t c = 0; c < fd; ++c)
        pair.truth(pos * sequences + r, c) = f.traces[pos](r, c);
    }
  }
  return pair;
}

PermutationRecovery permutation_recovery(const CoreModel& rnn_student,
                                         const CoreModel& rnn_teacher, std::size_t t,
                                         DistributionSpec dist, std::size_t sequences,
                                         RngStream rng) {
  if (models::trace_dim(rnn_student) != models::trace_dim(rnn_teacher)) {
    throw num::ShapeError("permutation_recovery: hidden dims differ");
  }
  RepresentationPair pair =
      collect_representations(rnn_student, Teacher{rnn_teacher}, t, dist, sequences, rng);
  // teacher_h ~ student_h * W; the permutation claim is W ~ Pi^T acting on
  // rows of the student state.
  auto fit = num::solve_least_squares(pair.learned, pair.truth);
  const Matrix map = num::transpose(fit.solution);  // teacher_dim x student_dim

  PermutationRecovery out;
  out.map = map;
  const std::size_t k = map.rows();
  out.assignment.resize(k);
  std::vector<bool> claimed(k, false);
  bool collision = false;
  std::size_t good = 0;
  for (std::size_t r = 0; r < k; ++r) {
    std::size_t arg = 0;
    double best = -1.0;
    double norm_sq = 0.0;
    for (std::size_t c = 0; c < map.cols(); ++c) {
      const double a = std::abs(map(r, c));
      norm_sq += map(r, c) * map(r, c);
      if (a > best) {
        best = a;
        arg = c;
      }
    }
    out.assignment[r] = arg;
    const double off_mass = std::sqrt(std::max(0.0, norm_sq - best * best));
    const bool clean = norm_sq > 0.0 && off_mass <= 0.1 * std::sqrt(norm_sq);
    if (claimed[arg]) collision = true;
    const bool fresh = !claimed[arg];
    claimed[arg] = true;
    if (clean && fresh) ++good;
  }
  out.valid_permutation = !collision;
  out.score = static_cast<double>(good) / static_cast<double>(k);
  return out;
}

double mean_of(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

EvalReport length_gen_curve(std::span<const CoreModel> students, const Teacher& teacher,
                            std::span<const std::size_t> lengths, DistributionSpec dist,
                            const EvalOptions& options) {
  for (std::size_t i = 1; i < lengths.size(); ++i) {
    if (lengths[i] <= lengths[i - 1]) {
      throw std::invalid_argument("length_gen_curve: lengths must be strictly increasing");
    }
  }
  if (lengths.empty()) throw std::invalid_argument("length_gen_curve: no lengths given");

  EvalReport report;
  RngStream root(options.seed, "length_gen_curve");
  for (std::size_t t : lengths) {
    std::vector<double> risks, r2s, perms;
    for (std::size_t s = 0; s < students.size(); ++s) {
      RngStream cell = root.derive("t", t).derive("seed", s);
      risks.push_back(risk_at_length(students[s], teacher, t, dist, options.risk_samples,
                                     cell.derive("risk")));
      if (options.with_r2) {
        auto pair = collect_representations(students[s], teacher, t, dist,
                                            options.r2_sequences, cell.derive("r2"));
        r2s.push_back(linear_identification_r2(pair.learned, pair.truth).mean);
      }
      if (options.with_permutation) {
        perms.push_back(permutation_recovery(students[s], models::core_of(teacher), t, dist,
                                             options.r2_sequences, cell.derive("perm"))
                            .score);
      }
    }
    EvalRow row;
    row.t = t;
    row.risk_mean = mean_of(risks);
    row.risk_std = sample_std(risks);
    if (!r2s.empty()) {
      row.r2_mean = mean_of(r2s);
      row.r2_std = sample_std(r2s);
    }
    if (!perms.empty()) row.perm_score = mean_of(perms);
    report.rows.push_back(row);
  }
  return report;
}

Trajectory track_sequence(const CoreModel& student, const Teacher& teacher, std::size_t t,
                          DistributionSpec dist, RngStream rng) {
  dist.T = t;
  auto tokens = data::sample_tokens(dist, 1, rng);
  models::ForwardResult truth = models::forward(teacher, tokens);
  models::ForwardResult pred = models::forward(student, tokens);
  const std::size_t m = truth.labels[0].cols();
  Trajectory out;
  out.t_count = t;
  out.true_labels = Matrix(t, m);
  out.predicted_labels = Matrix(t, m);
  for (std::size_t pos = 0; pos < t; ++pos) {
    for (std::size_t c = 0; c < m; ++c) {
      out.true_labels(pos, c) = truth.labels[pos](0, c);
      out.predicted_labels(pos, c) = pred.labels[pos](0, c);
    }
  }
  return out;
}

}  // namespace seqlab::eval
