#ifndef SEQLAB_EVAL_EVAL_HPP
#define SEQLAB_EVAL_EVAL_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqlab/data/datagen.hpp"
#include "seqlab/models/families.hpp"
#include "seqlab/num/matrix.hpp"

namespace seqlab::eval {

using data::DistributionSpec;
using models::CoreModel;
using models::Teacher;
using num::Matrix;
using num::RngStream;

// Output and hidden trace at the final position only; evaluation never needs
// the O(T^2) full-prefix pass.
struct FinalForward {
  Matrix label;
  Matrix trace;
};

FinalForward final_forward(const CoreModel& model, std::span<const Matrix> tokens);
FinalForward final_forward(const Teacher& teacher, std::span<const Matrix> tokens);

// Monte Carlo estimate of E[l2(h(x_<=t), y_t)] at exactly length t; the mean
// squared error over samples and output dimensions.
double risk_at_length(const CoreModel& student, const Teacher& teacher, std::size_t t,
                      DistributionSpec dist, std::size_t num_samples, RngStream rng);

struct R2Result {
  std::vector<double> per_dim;
  double mean = 0.0;
  bool degenerate = false;
};

// Ordinary least squares of the true representations on the learned ones
// (with intercept); R^2 per true dimension, then the mean.
R2Result linear_identification_r2(const Matrix& learned, const Matrix& truth);

// Stacks student and teacher hidden representations across all positions of
// `sequences` held-out sequences of length t.
struct RepresentationPair {
  Matrix learned;  // rows x student trace dim
  Matrix truth;    // rows x teacher trace dim
};

RepresentationPair collect_representations(const CoreModel& student, const Teacher& teacher,
                                           std::size_t t, DistributionSpec dist,
                                           std::size_t sequences, RngStream rng);

struct PermutationRecovery {
  double score = 0.0;   // fraction of rows that pin a clean permutation entry
  Matrix map;           // fitted linear map, teacher trace ~ map * student trace
  std::vector<std::size_t> assignment;  // argmax column per row
  bool valid_permutation = false;
};

// Fits a linear map between student and teacher hidden states on probe
// sequences; a row scores when its argmax column is unclaimed and carries at
// least 90% of the row norm.
PermutationRecovery permutation_recovery(const CoreModel& rnn_student,
                                         const CoreModel& rnn_teacher, std::size_t t,
                                         DistributionSpec dist, std::size_t sequences,
                                         RngStream rng);

struct EvalOptions {
  std::size_t risk_samples = 10000;
  std::size_t r2_sequences = 1000;
  bool with_r2 = true;
  bool with_permutation = false;
  std::uint64_t seed = 0;
};

struct EvalRow {
  std::size_t t = 0;
  double risk_mean = 0.0;
  double risk_std = 0.0;
  double r2_mean = 0.0;
  double r2_std = 0.0;
  std::optional<double> perm_score;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<std::string> notes;
};

// Per-length risks and identification scores, aggregated mean +/- std over
// the per-seed students.
EvalReport length_gen_curve(std::span<const CoreModel> students, const Teacher& teacher,
                            std::span<const std::size_t> lengths, DistributionSpec dist,
                            const EvalOptions& options);

// True vs predicted output components of a single probe sequence, for
// trajectory plots. Row t: (t, y_true..., y_pred...).
struct Trajectory {
  std::size_t t_count = 0;
  Matrix true_labels;       // T x m
  Matrix predicted_labels;  // T x m
};

Trajectory track_sequence(const CoreModel& student, const Teacher& teacher, std::size_t t,
                          DistributionSpec dist, RngStream rng);

double mean_of(std::span<const double> xs);
double sample_std(std::span<const double> xs);

}  // namespace seqlab::eval

#endif  // SEQLAB_EVAL_EVAL_HPP
