#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqlab/num/linalg.hpp"
#include "seqlab/theory/theory.hpp"

using namespace seqlab;
using models::CoreModel;
using num::Matrix;

namespace {

data::DistributionSpec uniform_dist(std::size_t n, std::size_t T) {
  data::DistributionSpec dist;
  dist.n = n;
  dist.T = T;
  return dist;
}

CoreModel linear_ssm(const Matrix& lambda, const Matrix& b, const Matrix& readout) {
  models::Ssm ssm;
  ssm.k = lambda.rows();
  ssm.n = b.cols();
  ssm.m = readout.cols();
  ssm.capacity = models::CapacityClass::kHighCapacity;
  ssm.lambda = lambda;
  ssm.b_in = b;
  models::MlpParams head;
  head.spec = models::MlpSpec::perceptron(readout.rows(), readout.cols(),
                                          models::Activation::kNone, /*bias=*/false);
  head.weights.push_back(readout);
  ssm.omega = models::Head::of(std::move(head));
  return ssm;
}

}  // namespace

TEST_CASE("the two-entry scalar grid pins T0 = 2 via brute-force risks") {
  const std::vector<double> lambdas = {0.0, 0.5};
  const std::vector<double> bs = {1.0};
  auto grid = theory::scalar_ssm_grid(lambdas, bs, 0.5, 1.0);
  REQUIRE(grid.entries.size() == 2);
  REQUIRE(grid.teacher_index == 1);

  auto result = theory::finite_class_t0(grid, uniform_dist(1, 1), 1e-3, 2, 50, 100000, 31);
  CHECK(result.t0 == 2);
  CHECK(result.first_violation[0] == 2);
  CHECK(result.first_violation[1] == theory::kNever);
  REQUIRE(result.survivors.size() == 1);
  CHECK(result.survivors[0] == 1);
  CHECK(result.survivors_certified);

  // The lambda = 0 entry differs by 0.5 x_1 at t = 2: risk = 0.25 E[x^2] = 1/12.
  CHECK(result.table.risk[0][0] == 0.0);
  CHECK(std::abs(result.table.risk[0][1] - 1.0 / 12.0) <= 0.002);
  // Cumulative risk is non-decreasing, so the first crossing is permanent.
  for (std::size_t e = 0; e < grid.entries.size(); ++e) {
    double cumulative = 0.0;
    bool crossed = false;
    for (std::size_t t = 1; t <= result.table.horizon; ++t) {
      cumulative += result.table.risk[e][t - 1];
      if (crossed) CHECK(cumulative > 1e-3);
      if (cumulative > 1e-3) crossed = true;
    }
  }
}

TEST_CASE("a singleton grid containing only the teacher has T0 = 0") {
  auto grid = theory::scalar_ssm_grid(std::vector<double>{0.5}, std::vector<double>{1.0}, 0.5,
                                      1.0);
  auto result = theory::finite_class_t0(grid, uniform_dist(1, 1), 1e-3, 4, 20, 20000, 32);
  CHECK(result.t0 == 0);
  REQUIRE(result.survivors.size() == 1);
  CHECK(result.survivors_certified);
}

TEST_CASE("a teacher that is off the grid is rejected") {
  CHECK_THROWS_AS(theory::scalar_ssm_grid(std::vector<double>{0.0, 0.5},
                                          std::vector<double>{1.0}, 0.25, 1.0),
                  std::invalid_argument);
}

TEST_CASE("a similarity-transformed teacher survives every length") {
  num::RngStream rng(33, "conj");
  Matrix lambda = rng.orthogonal_matrix(2);
  Matrix b = rng.orthogonal_matrix(2);
  CoreModel teacher = linear_ssm(lambda, b, Matrix::identity(2));

  Matrix c = num::add(rng.orthogonal_matrix(2), num::scale(Matrix::identity(2), 0.4));
  Matrix c_inv = num::inverse(c);
  // Lambda~ = C Lambda C^-1, B~ = C B, omega~ = omega o C^-1; with row-major
  // states the readout right-multiplies by (C^-1)^T.
  CoreModel conjugate = linear_ssm(num::matmul(num::matmul(c, lambda), c_inv),
                                   num::matmul(c, b), num::transpose(c_inv));

  std::vector<theory::GridEntry> entries;
  entries.push_back(theory::GridEntry{{0.0}, teacher});
  entries.push_back(theory::GridEntry{{1.0}, conjugate});
  auto grid = theory::grid_from_entries(models::Family::kSsm, {"which"}, std::move(entries), 0);

  auto result = theory::finite_class_t0(grid, uniform_dist(2, 1), 1e-6, 2, 40, 4000, 34);
  CHECK(result.first_violation[1] == theory::kNever);
  CHECK(result.survivors.size() == 2);
}

TEST_CASE("cover construction computes eta from the lattice spacing") {
  auto build = [](std::span<const double> p) {
    return linear_ssm(Matrix::constant(1, 1, p[0]), Matrix::constant(1, 1, p[1]),
                      Matrix::identity(1));
  };
  auto cover = theory::make_cover({"a", "b"}, {{0.0, 1.0}, {0.0, 1.0}}, {11, 11}, 10.0, 1.0,
                                  build);
  CHECK(cover.grid_points.size() == 121);
  CHECK(cover.eta == doctest::Approx(std::sqrt(2.0 * 0.05 * 0.05)).epsilon(1e-12));

  CHECK_THROWS_AS(theory::make_cover({"a", "b"}, {{0.0, 1.0}, {0.0, 1.0}}, {11, 11}, 10.0,
                                     0.1, build),
                  std::invalid_argument);  // eta > epsilon / L
}

TEST_CASE("constrained survivors are nested, stabilize, and keep the teacher's neighbor") {
  auto build = [](std::span<const double> p) {
    return linear_ssm(Matrix::constant(1, 1, p[0]), Matrix::constant(1, 1, p[1]),
                      Matrix::identity(1));
  };
  theory::LipschitzConstants constants;
  constants.l_sigma = 1.0;
  constants.lambda_sup = 0.7;
  constants.b_sup = 1.2;
  constants.x_sup = 1.0;
  constants.m_omega = 1.0;
  constants.l_omega = 0.0;
  const double lipschitz = theory::rnn_lipschitz_bound(constants).bound;

  auto cover = theory::make_cover({"lambda", "b"}, {{0.3, 0.7}, {0.8, 1.2}}, {8, 8}, lipschitz,
                                  0.6, build);
  const std::vector<double> teacher_params = {0.5, 1.0};
  CoreModel teacher = build(teacher_params);
  auto result = theory::constrained_survivors(cover, teacher_params, teacher,
                                              uniform_dist(1, 1), 60, 4000, 35);

  // T = 0 row is the whole cover.
  CHECK(result.survivors_by_t[0].size() == cover.grid_points.size());
  for (std::size_t t = 0; t + 1 <= 60; ++t) {
    const auto& wide = result.survivors_by_t[t];
    const auto& narrow = result.survivors_by_t[t + 1];
    CHECK(narrow.size() <= wide.size());
    for (std::size_t e : narrow) {
      CHECK(std::find(wide.begin(), wide.end(), e) != wide.end());
    }
  }
  CHECK(result.teacher_nearest_survives_all);
  CHECK(result.stabilized_t0 <= 60);
  CHECK_FALSE(result.empty_set_diagnostic.has_value());
}

TEST_CASE("transformer block bound follows the closed form") {
  CHECK(theory::transformer_block_bound(3.0, 2.0, 4.0) ==
        doctest::Approx(std::sqrt(73.0)).epsilon(1e-15));
  CHECK(theory::transformer_block_bound(5.0, 0.0, 123.0) == doctest::Approx(5.0));
  CHECK(theory::transformer_block_bound(0.0, 0.0, 0.0) == 0.0);
}

TEST_CASE("rnn bound matches the hand-evaluated constants") {
  theory::LipschitzConstants c;
  c.l_sigma = 0.25;
  c.lambda_sup = 2.0;
  c.b_sup = 1.0;
  c.x_sup = 1.0;
  c.m_omega = 1.0;
  c.l_omega = 1.0;
  auto bound = theory::rnn_lipschitz_bound(c);
  CHECK(bound.h_sup == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(bound.gamma1 == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(bound.gamma2 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(bound.bound == doctest::Approx(std::sqrt(1.3125)).epsilon(1e-15));
  // The closing line of the derivation prints L_sigma in place of L_omega;
  // both readings are reported.
  CHECK(bound.bound_as_printed ==
        doctest::Approx(std::sqrt(0.25 * 0.25 + 0.0625 + 0.25)).epsilon(1e-15));
}

TEST_CASE("zero input bound collapses to the readout constant") {
  theory::LipschitzConstants c;
  c.l_sigma = 0.25;
  c.lambda_sup = 2.0;
  c.b_sup = 1.0;
  c.x_sup = 0.0;
  c.m_omega = 1.0;
  c.l_omega = 2.0;
  auto bound = theory::rnn_lipschitz_bound(c);
  CHECK(bound.gamma1 == 0.0);
  CHECK(bound.gamma2 == 0.0);
  CHECK(bound.bound == doctest::Approx(2.0));
}

TEST_CASE("the contraction precondition is enforced") {
  theory::LipschitzConstants c;
  c.l_sigma = 0.5;
  c.lambda_sup = 2.0;  // product exactly 1
  c.b_sup = 1.0;
  c.x_sup = 1.0;
  c.m_omega = 1.0;
  c.l_omega = 1.0;
  CHECK_THROWS_AS(theory::rnn_lipschitz_bound(c), std::invalid_argument);
}

TEST_CASE("empirical ratios never cross the analytic bounds") {
  for (auto family :
       {theory::LipschitzFamily::kTransformerBlock, theory::LipschitzFamily::kRnn}) {
    theory::EmpiricalLipschitzConfig config;
    config.family = family;
    config.trials = 120;
    config.max_t = 50;
    auto result = theory::empirical_lipschitz(config, 36);
    CHECK(result.violations == 0);
    CHECK(result.max_ratio > 0.0);
    CHECK(result.max_ratio <= result.analytic_bound);
    // Uniformity in t: the late envelope stays within one bound of the early
    // envelope.
    double early = 0.0;
    for (std::size_t t = 0; t < 10; ++t) early = std::max(early, result.per_t_max[t]);
    CHECK(result.per_t_max[config.max_t - 1] <= early + result.analytic_bound);
  }
}

TEST_CASE("rademacher bound evaluates the closed form") {
  const double e = std::exp(1.0);
  CHECK(theory::rademacher_bound(1.0, e, 100.0, 10.0, 0.0) ==
        doctest::Approx(2.0 * std::sqrt(1.0 / 1000.0)).epsilon(1e-15));
  CHECK(theory::rademacher_bound(3.0, 1.0, 10.0, 10.0, 0.25) == doctest::Approx(0.25));
  CHECK(theory::rademacher_bound(1.0, 50.0, 200.0, 10.0, 0.0) <
        theory::rademacher_bound(1.0, 50.0, 100.0, 10.0, 0.0));
}
