#ifndef SEQLAB_TRAIN_TRAIN_HPP
#define SEQLAB_TRAIN_TRAIN_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqlab/data/datagen.hpp"
#include "seqlab/models/families.hpp"
#include "seqlab/num/matrix.hpp"

namespace seqlab::train {

using data::DistributionSpec;
using models::CoreModel;
using models::Teacher;
using num::Matrix;

enum class LossKind : std::uint8_t { kLabelOnly, kLabelPlusCot };

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double plateau_factor = 0.8;
  double plateau_threshold = 1e-6;
  std::size_t cooldown_epochs = 1;
  double min_lr = 1e-7;
  std::size_t batch_size = 256;
  std::size_t batches_per_epoch = 100;
  std::size_t epochs = 100;
  LossKind loss = LossKind::kLabelOnly;
  std::uint64_t seed = 0;
  std::size_t val_batches = 10;
  bool final_label_only = false;
  // First prefix length that contributes to the loss; 2 restricts training
  // to positions where the trailing-context attention variant is defined.
  std::size_t first_loss_position = 1;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;
  double lr = 0.0;

  void init(std::span<Matrix* const> params, double initial_lr);
};

// Decoupled weight decay: theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
//                                  - lr * wd * theta.
void adamw_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                OptimizerState& state, const TrainConfig& config);

// Drops the rate by `plateau_factor` whenever an epoch fails to improve the
// best validation loss by more than `plateau_threshold`, then holds through a
// cooldown; never below `min_lr`.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const TrainConfig& config)
      : factor_(config.plateau_factor),
        threshold_(config.plateau_threshold),
        cooldown_epochs_(config.cooldown_epochs),
        min_lr_(config.min_lr) {}

  double observe(double validation_loss, double lr);

 private:
  double factor_;
  double threshold_;
  std::size_t cooldown_epochs_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t cooldown_left_ = 0;
};

struct TrainReport {
  std::vector<double> train_loss;  // per-epoch mean
  std::vector<double> val_loss;
  std::vector<double> lr;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
};

class TrainDivergence : public std::runtime_error {
 public:
  TrainDivergence(const std::string& what, double lr, std::size_t epoch, std::size_t batch)
      : std::runtime_error(what + " (lr=" + std::to_string(lr) +
                           ", epoch=" + std::to_string(epoch) +
                           ", batch=" + std::to_string(batch) + ")"),
        lr_(lr),
        epoch_(epoch),
        batch_(batch) {}
  double lr() const { return lr_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  double lr_;
  std::size_t epoch_, batch_;
};

// Expected-risk minimization on a streaming dataset: the per-step loss is the
// mean over prefix lengths of the mean squared error at that length (plus, for
// label_plus_cot, the matching trace term at unit weight).
TrainReport erm_train(CoreModel& student, const Teacher& teacher,
                      const DistributionSpec& dist, const TrainConfig& config);

// Same loop with the chain-of-thought term forced on.
TrainReport cot_train(CoreModel& student, const Teacher& teacher,
                      const DistributionSpec& dist, TrainConfig config);

// Held-out loss of the student against the teacher under the stream seeded by
// `rng`; the same composition the trainer optimizes.
double evaluation_loss(const CoreModel& student, const Teacher& teacher,
                       const DistributionSpec& dist, std::size_t batches,
                       std::size_t batch_size, num::RngStream rng, LossKind loss,
                       bool final_label_only, std::size_t first_loss_position = 1);

}  // namespace seqlab::train

#endif  // SEQLAB_TRAIN_TRAIN_HPP
