#include "seqlab/train/train.hpp"

#include <chrono>
#include <cmath>

#include "seqlab/num/tape.hpp"

namespace seqlab::train {

using num::Tape;
using num::ValueId;

void OptimizerState::init(std::span<Matrix* const> params, double initial_lr) {
  first_moment.clear();
  second_moment.clear();
  for (const Matrix* p : params) {
    first_moment.emplace_back(p->rows(), p->cols());
    second_moment.emplace_back(p->rows(), p->cols());
  }
  step = 0;
  lr = initial_lr;
}

void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state, const TrainConfig& config) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw num::ShapeError("adamw_step: parameter/gradient/state counts disagree");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& theta = *params[p];
    const Matrix& g = *grads[p];
    Matrix& m = state.first_moment[p];
    Matrix& v = state.second_moment[p];
    if (!theta.same_shape(g) || !theta.same_shape(m)) {
      throw num::ShapeError("adamw_step: moment shape does not match parameter " +
                            theta.shape_str());
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = config.beta1 * m.data()[i] + (1.0 - config.beta1) * gi;
      v.data()[i] = config.beta2 * v.data()[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m.data()[i] / bc1;
      const double v_hat = v.data()[i] / bc2;
      theta.data()[i] -= state.lr * (m_hat / (std::sqrt(v_hat) + config.eps)) +
                         state.lr * config.weight_decay * theta.data()[i];
    }
  }
}

double PlateauScheduler::observe(double validation_loss, double lr) {
  if (cooldown_left_ > 0) {
    --cooldown_left_;
    best_ = std::min(best_, validation_loss);
    return lr;
  }
  if (best_ - validation_loss < threshold_) {
    best_ = std::min(best_, validation_loss);
    cooldown_left_ = cooldown_epochs_;
    return std::max(lr * factor_, min_lr_);
  }
  best_ = validation_loss;
  return lr;
}

namespace {

struct LossNodes {
  ValueId total;
};

// The training objective sums the per-length expected losses over prefix
// lengths 1..T, with the squared error averaged over batch and output dims at
// each length.
LossNodes batch_loss_on_tape(Tape& tape, const models::TapeForward& fwd,
                             const data::SequenceBatch& batch, LossKind loss,
                             bool final_label_only, std::size_t first_position) {
  const std::size_t T = batch.labels.size();
  const std::size_t start = std::min(first_position - 1, T - 1);
  ValueId label_term{};
  if (final_label_only) {
    label_term = tape.mse(fwd.labels[T - 1], tape.input(batch.labels[T - 1]));
  } else {
    for (std::size_t t = start; t < T; ++t) {
      ValueId term = tape.mse(fwd.labels[t], tape.input(batch.labels[t]));
      label_term = t == start ? term : tape.add(label_term, term);
    }
  }
  if (loss == LossKind::kLabelOnly) return {label_term};

  const std::size_t student_dim = tape.value(fwd.traces[0]).cols();
  const std::size_t teacher_dim = batch.cot.empty() ? 0 : batch.cot[0].cols();
  if (student_dim != teacher_dim) {
    throw num::ShapeError("cot loss: student trace dim " + std::to_string(student_dim) +
                          " does not match teacher trace dim " + std::to_string(teacher_dim));
  }
  ValueId trace_term{};
  if (final_label_only) {
    trace_term = tape.mse(fwd.traces[T - 1], tape.input(batch.cot[T - 1]));
  } else {
    for (std::size_t t = start; t < T; ++t) {
      ValueId term = tape.mse(fwd.traces[t], tape.input(batch.cot[t]));
      trace_term = t == start ? term : tape.add(trace_term, term);
    }
  }
  return {tape.add(label_term, trace_term)};
}

double eval_loss_for_batch(const CoreModel& student, const data::SequenceBatch& batch,
                           LossKind loss, bool final_label_only,
                           std::size_t first_position) {
  models::ForwardResult fwd = models::forward(student, batch.tokens);
  const std::size_t T = batch.labels.size();
  const std::size_t start = std::min(first_position - 1, T - 1);
  double label_term = 0.0;
  if (final_label_only) {
    label_term = num::mean_squared_error(fwd.labels[T - 1], batch.labels[T - 1]);
  } else {
    for (std::size_t t = start; t < T; ++t)
      label_term += num::mean_squared_error(fwd.labels[t], batch.labels[t]);
  }
  if (loss == LossKind::kLabelOnly) return label_term;
  double trace_term = 0.0;
  if (final_label_only) {
    trace_term = num::mean_squared_error(fwd.traces[T - 1], batch.cot[T - 1]);
  } else {
    for (std::size_t t = start; t < T; ++t)
      trace_term += num::mean_squared_error(fwd.traces[t], batch.cot[t]);
  }
  return label_term + trace_term;
}

}  // namespace

double evaluation_loss(const CoreModel& student, const Teacher& teacher,
                       const DistributionSpec& dist, std::size_t batches,
                       std::size_t batch_size, num::RngStream rng, LossKind loss,
                       bool final_label_only, std::size_t first_position) {
  double total = 0.0;
  const bool with_cot = loss == LossKind::kLabelPlusCot;
  for (std::size_t b = 0; b < batches; ++b) {
    num::RngStream batch_rng = rng.derive("batch", b);
    auto tokens = data::sample_tokens(dist, batch_size, batch_rng);
    data::SequenceBatch batch = data::label_batch(teacher, std::move(tokens), with_cot);
    total += eval_loss_for_batch(student, batch, loss, final_label_only, first_position);
  }
  return total / static_cast<double>(batches);
}

TrainReport erm_train(CoreModel& student, const Teacher& teacher,
                      const DistributionSpec& dist, const TrainConfig& config) {
  const auto start = std::chrono::steady_clock::now();

  std::vector<Matrix*> params;
  models::collect_params(student, params);
  OptimizerState state;
  state.init(params, config.lr);
  PlateauScheduler scheduler(config);

  const bool with_cot = config.loss == LossKind::kLabelPlusCot;
  data::BatchStream train_stream(dist, config.batch_size, config.seed, "train");
  // Fixed validation set: the scheduler compares epochs against a 1e-6
  // absolute threshold, so resampling noise would trigger spurious rate cuts.
  num::RngStream val_stream(config.seed, "validation");

  TrainReport report;
  Tape tape;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
      data::SequenceBatch batch =
          data::label_batch(teacher, train_stream.tokens(epoch, b), with_cot);
      tape.reset();
      double step_loss = 0.0;
      try {
        models::ModelVars vars = models::register_params(tape, student);
        models::TapeForward fwd = models::forward_on_tape(tape, vars, student, batch.tokens);
        LossNodes loss = batch_loss_on_tape(tape, fwd, batch, config.loss,
                                            config.final_label_only,
                                            config.first_loss_position);
        step_loss = tape.scalar(loss.total);
        if (!std::isfinite(step_loss)) {
          throw num::NumericError("loss is not finite");
        }
        tape.backward(loss.total);
        std::vector<const Matrix*> grads;
        grads.reserve(vars.params.size());
        for (ValueId id : vars.params) grads.push_back(&tape.grad(id));
        adamw_step(params, grads, state, config);
      } catch (const num::NumericError& e) {
        throw TrainDivergence(std::string("training diverged: ") + e.what(), state.lr, epoch,
                              b);
      }
      epoch_loss += step_loss;
      ++report.steps;
    }
    epoch_loss /= static_cast<double>(config.batches_per_epoch);

    const double val_loss =
        evaluation_loss(student, teacher, dist, config.val_batches, config.batch_size,
                        val_stream, config.loss, config.final_label_only,
                        config.first_loss_position);
    state.lr = scheduler.observe(val_loss, state.lr);

    report.train_loss.push_back(epoch_loss);
    report.val_loss.push_back(val_loss);
    report.lr.push_back(state.lr);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport cot_train(CoreModel& student, const Teacher& teacher,
                      const DistributionSpec& dist, TrainConfig config) {
  config.loss = LossKind::kLabelPlusCot;
  return erm_train(student, teacher, dist, config);
}

}  // namespace seqlab::train
