#include "seqlab/models/families.hpp"

#include <cmath>
#include <stdexcept>

#include "seqlab/num/linalg.hpp"

namespace seqlab::models {

const char* family_name(Family f) {
  switch (f) {
    case Family::kDeepSet: return "deep_set";
    case Family::kTransformer: return "transformer";
    case Family::kSsm: return "ssm";
    case Family::kRnn: return "rnn";
  }
  return "?";
}

const char* capacity_name(CapacityClass c) {
  switch (c) {
    case CapacityClass::kStructuredPerceptron: return "structured_perceptron";
    case CapacityClass::kStructuredDiffeo: return "structured_diffeo";
    case CapacityClass::kHighCapacity: return "high_capacity";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "deep_set") return Family::kDeepSet;
  if (name == "transformer") return Family::kTransformer;
  if (name == "ssm") return Family::kSsm;
  if (name == "rnn") return Family::kRnn;
  throw std::invalid_argument("unknown family: " + name);
}

CapacityClass capacity_from_name(const std::string& name) {
  if (name == "structured_perceptron") return CapacityClass::kStructuredPerceptron;
  if (name == "structured_diffeo") return CapacityClass::kStructuredDiffeo;
  if (name == "high_capacity") return CapacityClass::kHighCapacity;
  throw std::invalid_argument("unknown capacity class: " + name);
}

const char* attention_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::kSigmoid: return "sigmoid";
    case AttentionKind::kRelu: return "relu";
    case AttentionKind::kLinear: return "linear";
    case AttentionKind::kSoftmax: return "softmax";
  }
  return "?";
}

AttentionKind attention_from_name(const std::string& name) {
  if (name == "sigmoid") return AttentionKind::kSigmoid;
  if (name == "relu") return AttentionKind::kRelu;
  if (name == "linear") return AttentionKind::kLinear;
  if (name == "softmax") return AttentionKind::kSoftmax;
  throw std::invalid_argument("unknown attention kind: " + name);
}

Matrix head_eval(const Head& head, const Matrix& x) {
  switch (head.kind) {
    case HeadKind::kIdentity: return x;
    case HeadKind::kExp: return num::exp(x);
    case HeadKind::kLog: return num::log(x);
    case HeadKind::kMlp: return mlp_eval(head.mlp, x);
  }
  return x;
}

HeadVars head_register(Tape& tape, const Head& head) {
  HeadVars vars;
  if (head.kind == HeadKind::kMlp) vars.mlp = mlp_register(tape, head.mlp);
  return vars;
}

ValueId head_forward(Tape& tape, const HeadVars& vars, const Head& head, ValueId x) {
  switch (head.kind) {
    case HeadKind::kIdentity: return x;
    case HeadKind::kExp: return tape.exp(x);
    case HeadKind::kLog: return tape.log(x);
    case HeadKind::kMlp: return mlp_forward(tape, vars.mlp, head.mlp.spec, x);
  }
  return x;
}

void head_collect(Head& head, std::vector<Matrix*>& out) {
  if (head.kind == HeadKind::kMlp) mlp_collect(head.mlp, out);
}

void head_param_ids(const HeadVars& vars, std::vector<ValueId>& out) {
  mlp_param_ids(vars.mlp, out);
}

DegenerateTeacher make_degenerate(CoreModel base, double offset, std::size_t t0) {
  const std::size_t m = label_dim(base);
  return DegenerateTeacher{std::move(base), Matrix::constant(1, m, offset), t0};
}

DegenerateTeacher make_degenerate(CoreModel base, Matrix offset, std::size_t t0) {
  if (offset.rows() != 1 || offset.cols() != label_dim(base)) {
    throw num::ShapeError("make_degenerate: offset " + offset.shape_str() +
                          " does not match label dim " + std::to_string(label_dim(base)));
  }
  return DegenerateTeacher{std::move(base), std::move(offset), t0};
}

Family family_of(const CoreModel& model) {
  return std::visit(
      [](const auto& m) -> Family {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeepSet>) return Family::kDeepSet;
        if constexpr (std::is_same_v<T, Transformer>) return Family::kTransformer;
        if constexpr (std::is_same_v<T, Ssm>) return Family::kSsm;
        return Family::kRnn;
      },
      model);
}

Family base_family(const Teacher& teacher) {
  if (const auto* d = std::get_if<DegenerateTeacher>(&teacher)) return family_of(d->base);
  return family_of(core_of(teacher));
}

std::size_t token_dim(const CoreModel& model) {
  return std::visit([](const auto& m) { return m.n; }, model);
}

std::size_t label_dim(const CoreModel& model) {
  return std::visit([](const auto& m) { return m.m; }, model);
}

std::size_t trace_dim(const CoreModel& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeepSet>) return m.trace_dim;
        if constexpr (std::is_same_v<T, Transformer>) return m.trace_dim;
        if constexpr (std::is_same_v<T, Ssm>) return m.k;
        if constexpr (std::is_same_v<T, Rnn>) return m.k;
      },
      model);
}

std::size_t token_dim(const Teacher& teacher) { return token_dim(core_of(teacher)); }
std::size_t label_dim(const Teacher& teacher) { return label_dim(core_of(teacher)); }
std::size_t trace_dim(const Teacher& teacher) { return trace_dim(core_of(teacher)); }

CoreModel& core_of(Teacher& teacher) {
  if (auto* d = std::get_if<DegenerateTeacher>(&teacher)) return d->base;
  return std::get<CoreModel>(teacher);
}

const CoreModel& core_of(const Teacher& teacher) {
  if (const auto* d = std::get_if<DegenerateTeacher>(&teacher)) return d->base;
  return std::get<CoreModel>(teacher);
}

bool is_degenerate(const Teacher& teacher) {
  return std::holds_alternative<DegenerateTeacher>(teacher);
}

namespace {

void check_token_dim(const char* who, std::size_t expected, std::span<const Matrix> tokens) {
  for (const Matrix& t : tokens) {
    if (t.cols() != expected) {
      throw num::ShapeError(std::string(who) + ": token slab " + t.shape_str() +
                            " does not match model token dim " + std::to_string(expected));
    }
  }
}

Matrix attention_weights_eval(AttentionKind kind, const Matrix& scores) {
  switch (kind) {
    case AttentionKind::kSigmoid: return num::sigmoid(scores);
    case AttentionKind::kRelu: return num::relu(scores);
    case AttentionKind::kLinear: return scores;
    case AttentionKind::kSoftmax: return scores;  // handled by the caller
  }
  return scores;
}

ValueId attention_weights_tape(Tape& tape, AttentionKind kind, ValueId scores) {
  switch (kind) {
    case AttentionKind::kSigmoid: return tape.sigmoid(scores);
    case AttentionKind::kRelu: return tape.relu(scores);
    case AttentionKind::kLinear: return scores;
    case AttentionKind::kSoftmax: return scores;
  }
  return scores;
}

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation-path forwards (no tape, used for teachers and metrics).
// ---------------------------------------------------------------------------

namespace {

ForwardResult deepset_forward_eval(const DeepSet& model, std::span<const Matrix> tokens) {
  check_token_dim("deep_set", model.n, tokens);
  ForwardResult out;
  Matrix sum;
  for (const Matrix& x : tokens) {
    Matrix e = head_eval(model.psi, x);
    sum = sum.empty() ? std::move(e) : num::add(sum, e);
    out.traces.push_back(sum);
    out.labels.push_back(head_eval(model.omega, sum));
  }
  return out;
}

struct AttentionScratch {
  // q/k/v per (kernel, position), each batch x k.
  std::vector<std::vector<Matrix>> q, k, v;
};

void project_qkv(const std::vector<AttentionMaps>& kernels, std::span<const Matrix> tokens,
                 AttentionScratch& s) {
  const std::size_t kk = kernels.size();
  s.q.assign(kk, {});
  s.k.assign(kk, {});
  s.v.assign(kk, {});
  for (std::size_t h = 0; h < kk; ++h) {
    const Matrix wq_t = num::transpose(kernels[h].wq);
    const Matrix wk_t = num::transpose(kernels[h].wk);
    const Matrix wv_t = num::transpose(kernels[h].wv);
    for (const Matrix& x : tokens) {
      s.q[h].push_back(num::matmul(x, wq_t));
      s.k[h].push_back(num::matmul(x, wk_t));
      s.v[h].push_back(num::matmul(x, wv_t));
    }
  }
}

Matrix pair_scores(const Matrix& q, const Matrix& k, double inv_sqrt_d) {
  return num::scale(num::row_sum(num::hadamard(q, k)), inv_sqrt_d);
}

ForwardResult transformer_forward_eval(const Transformer& model,
                                       std::span<const Matrix> tokens) {
  check_token_dim("transformer", model.n, tokens);
  const std::size_t T = tokens.size();
  const std::size_t batch = T ? tokens[0].rows() : 0;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.k));

  AttentionScratch s;
  const auto& kernels = model.positional ? model.position_kernels : model.heads;
  project_qkv(kernels, tokens, s);

  ForwardResult out;
  for (std::size_t i = 0; i < T; ++i) {
    const bool skip_self = model.norm == AttentionNorm::kMeanOverIMinus1;
    const std::size_t j_end = skip_self ? i : i + 1;

    Matrix z;
    if (model.positional) {
      Matrix acc(batch, model.k);
      for (std::size_t j = 0; j < j_end; ++j) {
        const std::size_t dist = i - j;
        if (dist >= model.t_max) continue;  // kernels vanish past t_max
        Matrix w = attention_weights_eval(
            model.attention, pair_scores(s.q[dist][i], s.k[dist][j], inv_sqrt_d));
        acc = num::add(acc, num::row_scale(s.v[dist][j], w));
      }
      z = num::scale(acc, j_end ? 1.0 / static_cast<double>(j_end) : 0.0);
    } else {
      std::vector<Matrix> per_head;
      for (std::size_t h = 0; h < model.heads.size(); ++h) {
        Matrix acc(batch, model.k);
        if (model.attention == AttentionKind::kSoftmax) {
          std::vector<Matrix> weights;
          Matrix denom(batch, 1);
          for (std::size_t j = 0; j < j_end; ++j) {
            Matrix e = num::exp(pair_scores(s.q[h][i], s.k[h][j], inv_sqrt_d));
            denom = num::add(denom, e);
            weights.push_back(std::move(e));
          }
          for (std::size_t j = 0; j < j_end; ++j) {
            for (std::size_t r = 0; r < batch; ++r) weights[j](r, 0) /= denom(r, 0);
            acc = num::add(acc, num::row_scale(s.v[h][j], weights[j]));
          }
        } else {
          for (std::size_t j = 0; j < j_end; ++j) {
            Matrix w = attention_weights_eval(model.attention,
                                              pair_scores(s.q[h][i], s.k[h][j], inv_sqrt_d));
            acc = num::add(acc, num::row_scale(s.v[h][j], w));
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
    out.traces.push_back(z);
    out.labels.push_back(head_eval(model.omega, z));
  }
  return out;
}

ForwardResult ssm_forward_eval(const Ssm& model, std::span<const Matrix> tokens) {
  check_token_dim("ssm", model.n, tokens);
  ForwardResult out;
  const Matrix b_t = num::transpose(model.b_in);
  const Matrix lambda_t = num::transpose(model.lambda);
  Matrix h;
  for (const Matrix& x : tokens) {
    Matrix drive = num::matmul(x, b_t);
    h = h.empty() ? std::move(drive) : num::add(num::matmul(h, lambda_t), drive);
    out.traces.push_back(h);
    out.labels.push_back(head_eval(model.omega, h));
  }
  return out;
}

ForwardResult rnn_forward_eval(const Rnn& model, std::span<const Matrix> tokens) {
  check_token_dim("rnn", model.n, tokens);
  ForwardResult out;
  const Matrix b_t = num::transpose(model.b_in);
  const Matrix lambda_t = num::transpose(model.lambda);
  Matrix h;
  for (const Matrix& x : tokens) {
    Matrix pre = num::matmul(x, b_t);
    if (!h.empty()) pre = num::add(num::matmul(h, lambda_t), pre);
    h = num::sigmoid(pre);
    out.traces.push_back(h);
    out.labels.push_back(head_eval(model.omega, h));
  }
  return out;
}

}  // namespace

ForwardResult forward(const CoreModel& model, std::span<const Matrix> tokens) {
  return std::visit(
      [&](const auto& m) -> ForwardResult {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeepSet>) return deepset_forward_eval(m, tokens);
        else if constexpr (std::is_same_v<T, Transformer>)
          return transformer_forward_eval(m, tokens);
        else if constexpr (std::is_same_v<T, Ssm>) return ssm_forward_eval(m, tokens);
        else return rnn_forward_eval(m, tokens);
      },
      model);
}

ForwardResult forward(const Teacher& teacher, std::span<const Matrix> tokens) {
  if (const auto* d = std::get_if<DegenerateTeacher>(&teacher)) {
    ForwardResult out = forward(d->base, tokens);
    // Positions are 1-based: index t holds the label for prefix length t+1,
    // and the offset applies strictly beyond t0.
    for (std::size_t t = d->t0; t < out.labels.size(); ++t) {
      out.labels[t] = num::add_row_vector(out.labels[t], d->offset);
    }
    return out;
  }
  return forward(std::get<CoreModel>(teacher), tokens);
}

// ---------------------------------------------------------------------------
// Tape-side forwards (training).
// ---------------------------------------------------------------------------

ModelVars register_params(Tape& tape, const CoreModel& model) {
  ModelVars vars;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeepSet>) {
          vars.psi = head_register(tape, m.psi);
          vars.omega = head_register(tape, m.omega);
        } else if constexpr (std::is_same_v<T, Transformer>) {
          for (const AttentionMaps& h : m.heads) {
            vars.matrices.push_back(tape.param(h.wq));
            vars.matrices.push_back(tape.param(h.wk));
            vars.matrices.push_back(tape.param(h.wv));
          }
          if (!m.mix.empty()) vars.matrices.push_back(tape.param(m.mix));
          for (const AttentionMaps& h : m.position_kernels) {
            vars.matrices.push_back(tape.param(h.wq));
            vars.matrices.push_back(tape.param(h.wk));
            vars.matrices.push_back(tape.param(h.wv));
          }
          vars.omega = head_register(tape, m.omega);
        } else {
          vars.matrices.push_back(tape.param(m.lambda));
          vars.matrices.push_back(tape.param(m.b_in));
          vars.omega = head_register(tape, m.omega);
        }
      },
      model);
  head_param_ids(vars.psi, vars.params);
  for (ValueId id : vars.matrices) vars.params.push_back(id);
  head_param_ids(vars.omega, vars.params);
  return vars;
}

void collect_params(CoreModel& model, std::vector<Matrix*>& out) {
  std::visit(
      [&](auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeepSet>) {
          head_collect(m.psi, out);
          head_collect(m.omega, out);
        } else if constexpr (std::is_same_v<T, Transformer>) {
          for (AttentionMaps& h : m.heads) {
            out.push_back(&h.wq);
            out.push_back(&h.wk);
            out.push_back(&h.wv);
          }
          if (!m.mix.empty()) out.push_back(&m.mix);
          for (AttentionMaps& h : m.position_kernels) {
            out.push_back(&h.wq);
            out.push_back(&h.wk);
            out.push_back(&h.wv);
          }
          head_collect(m.omega, out);
        } else {
          out.push_back(&m.lambda);
          out.push_back(&m.b_in);
          head_collect(m.omega, out);
        }
      },
      model);
}

namespace {

TapeForward deepset_forward_tape(Tape& tape, const ModelVars& vars, const DeepSet& model,
                                 std::span<const Matrix> tokens) {
  TapeForward out;
  ValueId sum{};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    ValueId x = tape.input(tokens[t]);
    ValueId e = head_forward(tape, vars.psi, model.psi, x);
    sum = t == 0 ? e : tape.add(sum, e);
    out.traces.push_back(sum);
    out.labels.push_back(head_forward(tape, vars.omega, model.omega, sum));
  }
  return out;
}

TapeForward transformer_forward_tape(Tape& tape, const ModelVars& vars,
                                     const Transformer& model,
                                     std::span<const Matrix> tokens) {
  const std::size_t T = tokens.size();
  const std::size_t batch = T ? tokens[0].rows() : 0;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.k));

  const std::size_t n_kernels =
      model.positional ? model.position_kernels.size() : model.heads.size();
  const bool has_mix = !model.mix.empty();
  // vars.matrices layout: heads (3 each), mix if present, position kernels
  // (3 each); a positional model has no heads and no mix.
  const std::size_t kernel_base = model.heads.size() * 3 + (has_mix ? 1 : 0);

  std::vector<ValueId> xs;
  for (const Matrix& x : tokens) xs.push_back(tape.input(x));

  // Transposed projections, shared across positions.
  std::vector<ValueId> wq_t(n_kernels), wk_t(n_kernels), wv_t(n_kernels);
  for (std::size_t h = 0; h < n_kernels; ++h) {
    const std::size_t base = (model.positional ? kernel_base : 0) + h * 3;
    wq_t[h] = tape.transpose(vars.matrices[base + 0]);
    wk_t[h] = tape.transpose(vars.matrices[base + 1]);
    wv_t[h] = tape.transpose(vars.matrices[base + 2]);
  }
  // q/k/v nodes are created lazily; the positional variant only touches a
  // kernel at positions where its distance occurs.
  std::vector<std::vector<ValueId>> q(n_kernels, std::vector<ValueId>(T)),
      k(n_kernels, std::vector<ValueId>(T)), v(n_kernels, std::vector<ValueId>(T));
  std::vector<std::vector<bool>> have(n_kernels, std::vector<bool>(T, false));
  auto ensure_qkv = [&](std::size_t h, std::size_t t) {
    if (have[h][t]) return;
    q[h][t] = tape.matmul(xs[t], wq_t[h]);
    k[h][t] = tape.matmul(xs[t], wk_t[h]);
    v[h][t] = tape.matmul(xs[t], wv_t[h]);
    have[h][t] = true;
  };
  auto scores = [&](std::size_t h, std::size_t i, std::size_t j) {
    return tape.scale(tape.row_sum(tape.hadamard(q[h][i], k[h][j])), inv_sqrt_d);
  };

  TapeForward out;
  for (std::size_t i = 0; i < T; ++i) {
    const bool skip_self = model.norm == AttentionNorm::kMeanOverIMinus1;
    const std::size_t j_end = skip_self ? i : i + 1;

    ValueId z{};
    if (model.positional) {
      ValueId acc = tape.input(Matrix(batch, model.k));
      for (std::size_t j = 0; j < j_end; ++j) {
        const std::size_t dist = i - j;
        if (dist >= model.t_max) continue;
        ensure_qkv(dist, i);
        ensure_qkv(dist, j);
        ValueId w = attention_weights_tape(tape, model.attention, scores(dist, i, j));
        acc = tape.add(acc, tape.row_scale(v[dist][j], w));
      }
      z = tape.scale(acc, j_end ? 1.0 / static_cast<double>(j_end) : 0.0);
    } else {
      std::vector<ValueId> per_head;
      for (std::size_t h = 0; h < model.heads.size(); ++h) {
        ensure_qkv(h, i);
        ValueId acc = tape.input(Matrix(batch, model.k));
        if (model.attention == AttentionKind::kSoftmax) {
          std::vector<ValueId> expo;
          ValueId denom = tape.input(Matrix(batch, 1));
          for (std::size_t j = 0; j < j_end; ++j) {
            ensure_qkv(h, j);
            ValueId e = tape.exp(scores(h, i, j));
            denom = tape.add(denom, e);
            expo.push_back(e);
          }
          for (std::size_t j = 0; j < j_end; ++j) {
            acc = tape.add(acc, tape.row_scale(v[h][j], tape.div(expo[j], denom)));
          }
        } else {
          for (std::size_t j = 0; j < j_end; ++j) {
            ensure_qkv(h, j);
            ValueId w = attention_weights_tape(tape, model.attention, scores(h, i, j));
            acc = tape.add(acc, tape.row_scale(v[h][j], w));
          }
          acc = tape.scale(acc, j_end ? 1.0 / static_cast<double>(j_end) : 0.0);
        }
        per_head.push_back(acc);
      }
      z = per_head[0];
      for (std::size_t h = 1; h < per_head.size(); ++h) z = tape.concat_cols(z, per_head[h]);
      if (has_mix) z = tape.matmul(z, vars.matrices[model.heads.size() * 3]);
    }
    out.traces.push_back(z);
    out.labels.push_back(head_forward(tape, vars.omega, model.omega, z));
  }
  return out;
}

TapeForward recurrent_forward_tape(Tape& tape, const ModelVars& vars, const Head& omega,
                                   const HeadVars& omega_vars, bool nonlinear,
                                   std::span<const Matrix> tokens) {
  TapeForward out;
  ValueId lambda_t = tape.transpose(vars.matrices[0]);
  ValueId b_t = tape.transpose(vars.matrices[1]);
  ValueId h{};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    ValueId x = tape.input(tokens[t]);
    ValueId pre = tape.matmul(x, b_t);
    if (t > 0) pre = tape.add(tape.matmul(h, lambda_t), pre);
    h = nonlinear ? tape.sigmoid(pre) : pre;
    out.traces.push_back(h);
    out.labels.push_back(head_forward(tape, omega_vars, omega, h));
  }
  return out;
}

}  // namespace

TapeForward forward_on_tape(Tape& tape, const ModelVars& vars, const CoreModel& model,
                            std::span<const Matrix> tokens) {
  check_token_dim("forward_on_tape", token_dim(model), tokens);
  return std::visit(
      [&](const auto& m) -> TapeForward {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeepSet>)
          return deepset_forward_tape(tape, vars, m, tokens);
        else if constexpr (std::is_same_v<T, Transformer>)
          return transformer_forward_tape(tape, vars, m, tokens);
        else if constexpr (std::is_same_v<T, Ssm>)
          return recurrent_forward_tape(tape, vars, m.omega, vars.omega, false, tokens);
        else
          return recurrent_forward_tape(tape, vars, m.omega, vars.omega, true, tokens);
      },
      model);
}

// ---------------------------------------------------------------------------
// Sampling and validation.
// ---------------------------------------------------------------------------

namespace {

Matrix sample_in_matrix(RngStream& rng, std::size_t rows, std::size_t cols,
                        const ModelSpec& spec) {
  if (rows == cols) return rng.orthogonal_matrix(rows);
  // Rectangular recurrence input: slice of a larger orthogonal matrix keeps
  // singular values at one.
  const std::size_t big = std::max(rows, cols);
  Matrix o = rng.orthogonal_matrix(big);
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = o(r, c);
  (void)spec;
  return out;
}

Head sample_output_head(const ModelSpec& spec, std::size_t in, std::size_t out,
                        RngStream& rng) {
  if (spec.capacity == CapacityClass::kStructuredPerceptron) {
    // The structured readout is sigma(A z): one affine map, no offset.
    MlpSpec ps = MlpSpec::perceptron(in, out, spec.output_act, /*bias=*/false);
    return Head::of(sample_mlp(ps, rng, spec.init_mean, spec.init_stddev));
  }
  MlpSpec ms = MlpSpec::with_hidden(in, out, spec.mlp_hidden_layers, spec.k, spec.output_act);
  return Head::of(sample_mlp(ms, rng, spec.init_mean, spec.init_stddev));
}

AttentionMaps sample_attention_maps(const ModelSpec& spec, RngStream& rng) {
  // Fan-in-scaled projections keep the pre-activation scores in the
  // responsive range of the attention nonlinearity.
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.n));
  auto draw = [&]() {
    Matrix m(spec.k, spec.n);
    for (double& v : m.values()) v = rng.uniform(-bound, bound);
    return m;
  };
  return AttentionMaps{draw(), draw(), draw()};
}

}  // namespace

CoreModel sample_model(const ModelSpec& spec, std::uint64_t seed) {
  RngStream rng(seed, std::string("model/") + family_name(spec.family));
  return sample_model(spec, rng);
}

CoreModel sample_model(const ModelSpec& spec, RngStream& rng) {
  if (spec.n == 0 || spec.m == 0 || spec.k == 0) {
    throw std::invalid_argument("sample_model: dims must be positive");
  }
  CoreModel model;
  switch (spec.family) {
    case Family::kDeepSet: {
      RngStream psi_rng = rng.derive("psi");
      RngStream omega_rng = rng.derive("omega");
      MlpSpec psi_spec = MlpSpec::with_hidden(spec.n, spec.k, spec.mlp_hidden_layers, spec.k,
                                              Activation::kSigmoid);
      DeepSet ds;
      ds.n = spec.n;
      ds.m = spec.m;
      ds.capacity = spec.capacity;
      ds.psi = Head::of(sample_mlp(psi_spec, psi_rng, spec.init_mean, spec.init_stddev));
      ds.omega = sample_output_head(spec, spec.k, spec.m, omega_rng);
      ds.trace_dim = spec.k;
      model = std::move(ds);
      break;
    }
    case Family::kTransformer: {
      Transformer tf;
      tf.n = spec.n;
      tf.m = spec.m;
      tf.k = spec.k;
      tf.capacity = spec.capacity;
      tf.attention = spec.attention;
      tf.norm = spec.norm;
      tf.positional = spec.positional;
      tf.t_max = spec.t_max;
      if (spec.positional) {
        if (spec.t_max == 0) {
          throw std::invalid_argument("sample_model: positional transformer needs t_max > 0");
        }
        if (spec.attention_heads != 1) {
          throw std::invalid_argument(
              "sample_model: positional transformer supports a single head");
        }
        RngStream kr = rng.derive("position_kernels");
        for (std::size_t d = 0; d < spec.t_max; ++d) {
          RngStream one = kr.derive("distance", d);
          tf.position_kernels.push_back(sample_attention_maps(spec, one));
        }
      } else {
        RngStream hr = rng.derive("attention_heads");
        for (std::size_t h = 0; h < spec.attention_heads; ++h) {
          RngStream one = hr.derive("head", h);
          tf.heads.push_back(sample_attention_maps(spec, one));
        }
        if (spec.attention_heads > 1) {
          RngStream mr = rng.derive("mix");
          tf.mix = mr.normal_matrix(spec.attention_heads * spec.k, spec.k, spec.init_mean,
                                    spec.init_stddev);
        }
      }
      tf.trace_dim = spec.k;
      RngStream omega_rng = rng.derive("omega");
      tf.omega = sample_output_head(spec, spec.k, spec.m, omega_rng);
      model = std::move(tf);
      break;
    }
    case Family::kSsm: {
      Ssm ssm;
      ssm.n = spec.n;
      ssm.m = spec.m;
      ssm.k = spec.k;
      ssm.capacity = spec.capacity;
      RngStream lr = rng.derive("lambda");
      RngStream br = rng.derive("b_in");
      ssm.lambda = lr.orthogonal_matrix(spec.k);
      ssm.b_in = sample_in_matrix(br, spec.k, spec.n, spec);
      RngStream omega_rng = rng.derive("omega");
      ssm.omega = sample_output_head(spec, spec.k, spec.m, omega_rng);
      model = std::move(ssm);
      break;
    }
    case Family::kRnn: {
      Rnn rnn;
      rnn.n = spec.n;
      rnn.m = spec.m;
      rnn.k = spec.k;
      rnn.capacity = spec.capacity;
      RngStream lr = rng.derive("lambda");
      RngStream br = rng.derive("b_in");
      rnn.lambda = lr.orthogonal_matrix(spec.k);
      rnn.b_in = sample_in_matrix(br, spec.k, spec.n, spec);
      RngStream omega_rng = rng.derive("omega");
      if (spec.capacity == CapacityClass::kHighCapacity) {
        rnn.omega = sample_output_head(spec, spec.k, spec.m, omega_rng);
      } else {
        // sigma(A h) with orthogonal A and no bias offset.
        MlpSpec ps = MlpSpec::perceptron(spec.k, spec.m, Activation::kSigmoid, /*bias=*/false);
        MlpParams params = zero_mlp(ps);
        params.weights[0] =
            num::transpose(sample_in_matrix(omega_rng, spec.m, spec.k, spec));
        rnn.omega = Head::of(std::move(params));
      }
      model = std::move(rnn);
      break;
    }
  }
  if (spec.capacity != CapacityClass::kHighCapacity) validate_structured(model);
  return model;
}

double condition_number(const Matrix& a) {
  auto sv = num::singular_values(a);
  if (sv.empty() || sv.back() <= 0.0) return std::numeric_limits<double>::infinity();
  return sv.front() / sv.back();
}

void validate_structured(const CoreModel& model) {
  constexpr double kMaxCondition = 1e8;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeepSet>) {
          if (m.capacity == CapacityClass::kStructuredDiffeo &&
              m.omega.kind == HeadKind::kMlp &&
              m.omega.mlp.spec.in_dim != m.omega.mlp.spec.out_dim) {
            throw std::invalid_argument(
                "structured deep set: omega must map a space to itself");
          }
        } else if constexpr (std::is_same_v<T, Ssm>) {
          if (m.capacity != CapacityClass::kHighCapacity) {
            if (!(m.m == m.k && m.k == m.n)) {
              throw std::invalid_argument("structured ssm requires m = k = n");
            }
            if (condition_number(m.lambda) > kMaxCondition ||
                condition_number(m.b_in) > kMaxCondition) {
              throw num::NumericError("structured ssm: recurrence is near-singular");
            }
          }
        } else if constexpr (std::is_same_v<T, Rnn>) {
          if (m.capacity != CapacityClass::kHighCapacity) {
            if (!(m.m == m.k && m.k == m.n)) {
              throw std::invalid_argument("structured rnn requires m = k = n");
            }
            if (condition_number(m.lambda) > kMaxCondition ||
                condition_number(m.b_in) > kMaxCondition) {
              throw num::NumericError("structured rnn: recurrence is near-singular");
            }
          }
        }
      },
      model);
}

}  // namespace seqlab::models
