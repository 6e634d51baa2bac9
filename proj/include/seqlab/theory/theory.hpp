#ifndef SEQLAB_THEORY_THEORY_HPP
#define SEQLAB_THEORY_THEORY_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqlab/data/datagen.hpp"
#include "seqlab/models/families.hpp"

namespace seqlab::theory {

using data::DistributionSpec;
using models::CoreModel;
using num::Matrix;

inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

// ---------------------------------------------------------------------------
// Shared risk machinery: per-length Monte Carlo risks for a set of candidate
// models against one teacher, all lengths of one unrolled pass.
// ---------------------------------------------------------------------------

struct RiskTable {
  // risk[e][t-1]: MC estimate of the expected squared error of entry e at
  // exactly length t; se is the standard error of that estimate.
  std::vector<std::vector<double>> risk;
  std::vector<std::vector<double>> se;
  std::size_t horizon = 0;
  std::size_t samples = 0;

  double cumulative(std::size_t entry, std::size_t t) const;
};

RiskTable risk_table(std::span<const CoreModel> entries, const CoreModel& teacher,
                     DistributionSpec dist, std::size_t horizon, std::size_t samples,
                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Finite hypothesis classes.
// ---------------------------------------------------------------------------

struct GridEntry {
  std::vector<double> params;
  CoreModel model;
};

struct HypothesisGrid {
  models::Family family = models::Family::kSsm;
  std::vector<std::string> axis_names;
  std::vector<std::vector<double>> axes;
  std::vector<GridEntry> entries;
  std::size_t teacher_index = kNever;  // realizability: the teacher is on the grid
};

// Scalar SSM with identity output head over the Cartesian product of the two
// axes; throws when (teacher_lambda, teacher_b) is not a grid point.
HypothesisGrid scalar_ssm_grid(std::span<const double> lambda_values,
                               std::span<const double> b_values, double teacher_lambda,
                               double teacher_b);

HypothesisGrid grid_from_entries(models::Family family, std::vector<std::string> axis_names,
                                 std::vector<GridEntry> entries, std::size_t teacher_index);

struct FiniteClassResult {
  // Smallest length where the cumulative risk exceeds the tolerance, kNever
  // when an entry matches the teacher at every probed length.
  std::vector<std::size_t> first_violation;
  std::size_t t0 = 0;  // max finite first_violation
  std::vector<std::size_t> survivors;  // entries with cumulative risk <= tol for t <= train_t
  bool survivors_certified = false;    // per-length risk <= tol at all probed lengths
  RiskTable table;
};

FiniteClassResult finite_class_t0(const HypothesisGrid& grid, const DistributionSpec& dist,
                                  double risk_tolerance, std::size_t train_t,
                                  std::size_t horizon, std::size_t samples,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Epsilon-cover constrained learner.
// ---------------------------------------------------------------------------

using ModelBuilder = std::function<CoreModel(std::span<const double>)>;

struct CoverSpec {
  std::vector<std::string> axis_names;
  std::vector<std::pair<double, double>> bounds;  // parameter box
  std::vector<std::size_t> points_per_axis;
  double eta = 0.0;       // max Euclidean distance from any box point to the lattice
  double lipschitz = 0.0;
  double epsilon = 0.0;   // per-length risk budget; requires eta <= epsilon / lipschitz
  std::vector<std::vector<double>> grid_points;
  ModelBuilder build;
};

// Axis-aligned lattice over the box; eta follows from the spacings. Throws
// when the cover precondition eta <= epsilon / L fails.
CoverSpec make_cover(std::vector<std::string> axis_names,
                     std::vector<std::pair<double, double>> bounds,
                     std::vector<std::size_t> points_per_axis, double lipschitz,
                     double epsilon, ModelBuilder build);

struct NearestMiss {
  std::size_t entry = kNever;
  double worst_excess = 0.0;  // max over constrained lengths of risk - epsilon
};

struct ConstrainedResult {
  // survivors_by_t[T] = indices with per-length risk <= epsilon for 1 <= t <= T;
  // index 0 is the unconstrained cover.
  std::vector<std::vector<std::size_t>> survivors_by_t;
  std::size_t stabilized_t0 = 0;  // first T with survivors constant through the horizon
  std::vector<std::size_t> stabilized_set;
  std::size_t teacher_nearest = kNever;
  bool teacher_nearest_survives_all = false;
  std::optional<NearestMiss> empty_set_diagnostic;
  RiskTable table;
};

ConstrainedResult constrained_survivors(const CoverSpec& cover,
                                        std::span<const double> teacher_params,
                                        const CoreModel& teacher,
                                        const DistributionSpec& dist, std::size_t horizon,
                                        std::size_t samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Lipschitz bounds and their empirical falsification probes.
// ---------------------------------------------------------------------------

struct LipschitzConstants {
  double l_omega = 0.0;   // param-Lipschitz of the readout
  double m_omega = 0.0;   // input-Lipschitz of the readout
  double l_psi = 0.0;     // param-Lipschitz of the token map
  double l_sigma = 0.0;   // recurrence activation Lipschitz constant
  double lambda_sup = 0.0;
  double b_sup = 0.0;
  double x_sup = 0.0;
};

// sqrt(L_omega^2 + M_omega^2 L_psi^2) for one block.
double transformer_block_bound(double l_omega, double m_omega, double l_psi);

struct RnnLipschitzBound {
  double h_sup = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double bound = 0.0;             // sqrt(L_omega^2 + g1^2 + g2^2), per the derivation line
  double bound_as_printed = 0.0;  // sqrt(L_sigma^2 + g1^2 + g2^2), the final printed form
};

// Requires the contraction l_sigma * lambda_sup < 1. The derivation's
// first-order term carries L_omega; the closing expression prints L_sigma
// instead, so both are reported.
RnnLipschitzBound rnn_lipschitz_bound(const LipschitzConstants& c);

enum class LipschitzFamily : std::uint8_t { kTransformerBlock, kRnn };

struct EmpiricalLipschitzConfig {
  LipschitzFamily family = LipschitzFamily::kRnn;
  std::size_t dim = 4;
  std::size_t trials = 1000;
  std::size_t max_t = 100;
  double x_sup = 1.0;
  // Transformer block: linear token map and readout with Frobenius bounds.
  double psi_sup = 2.0;
  double omega_sup = 1.5;  // doubles as M_omega
  // RNN: centered sigmoid activation, L_sigma = 1/4.
  double lambda_sup = 2.0;
  double b_sup = 1.0;
};

struct EmpiricalLipschitzResult {
  double max_ratio = 0.0;
  double analytic_bound = 0.0;
  std::size_t violations = 0;
  std::vector<double> per_t_max;  // envelope of ratios by sequence length
  LipschitzConstants constants;
};

// Max over random parameter pairs and sequences of
// ||h(x_<=t; a) - h(x_<=t; b)|| / ||a - b||, checked against the matching
// analytic bound at every t up to max_t.
EmpiricalLipschitzResult empirical_lipschitz(const EmpiricalLipschitzConfig& config,
                                             std::uint64_t seed);

// 2 c sqrt(log N / (m T)) + epsilon.
double rademacher_bound(double c, double cover_size, double m, double t, double epsilon);

}  // namespace seqlab::theory

#endif  // SEQLAB_THEORY_THEORY_HPP
