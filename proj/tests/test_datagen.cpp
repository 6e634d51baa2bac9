#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "seqlab/data/datagen.hpp"

using namespace seqlab;
using data::DistKind;
using data::DistributionSpec;
using num::Matrix;
using num::RngStream;

namespace {

DistributionSpec spec_of(DistKind kind, std::size_t n, std::size_t T) {
  DistributionSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.T = T;
  return spec;
}

}  // namespace

TEST_CASE("uniform samples live in the unit hypercube with the right mean") {
  auto spec = spec_of(DistKind::kUniformHypercube, 4, 3);
  RngStream rng(1, "uniform");
  auto tokens = data::sample_tokens(spec, 10000, rng);
  double mean = 0.0;
  std::size_t count = 0;
  for (const Matrix& slab : tokens) {
    for (double v : slab.values()) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
      mean += v;
      ++count;
    }
  }
  CHECK(count >= 100000);
  CHECK(std::abs(mean / count - 0.5) <= 0.01);
}

TEST_CASE("samplers are deterministic given the stream") {
  for (DistKind kind : {DistKind::kUniformHypercube, DistKind::kCompositionalBand,
                        DistKind::kCornerComplement, DistKind::kDiscreteGrid}) {
    auto spec = spec_of(kind, 2, 3);
    RngStream a(7, "det"), b(7, "det");
    auto ta = data::sample_tokens(spec, 16, a);
    auto tb = data::sample_tokens(spec, 16, b);
    for (std::size_t t = 0; t < 3; ++t) CHECK(num::max_abs_diff(ta[t], tb[t]) == 0.0);
  }
}

TEST_CASE("every band sample satisfies the constraint; acceptance is 3/4 at n=1 T=2") {
  auto spec = spec_of(DistKind::kCompositionalBand, 1, 2);
  RngStream rng(2, "band");
  data::SamplerStats stats;
  auto tokens = data::sample_tokens(spec, 40000, rng, &stats);
  for (std::size_t row = 0; row < 40000; ++row) CHECK(data::in_band(tokens, row, 0.5));
  // Band area in the unit square: 1 - 2*(1/2)*(1/2)^2 = 3/4.
  CHECK(stats.proposals >= 40000);
  CHECK(std::abs(stats.acceptance_rate() - 0.75) <= 0.01);
}

TEST_CASE("band acceptance at n=1 T=3 matches an independent volume oracle") {
  auto spec = spec_of(DistKind::kCompositionalBand, 1, 3);
  RngStream rng(3, "band3");
  data::SamplerStats stats;
  data::sample_tokens(spec, 30000, rng, &stats);

  // Monte Carlo volume with the standard library generator.
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t inside = 0;
  const std::size_t trials = 200000;
  for (std::size_t i = 0; i < trials; ++i) {
    const double s = unif(gen) + unif(gen) + unif(gen);
    if (std::abs(s - 1.5) <= 0.5) ++inside;
  }
  const double oracle = static_cast<double>(inside) / trials;
  CHECK(std::abs(stats.acceptance_rate() - oracle) <= 0.01);
}

TEST_CASE("corner samples violate the band; acceptance is 1/4 at n=1 T=2") {
  auto spec = spec_of(DistKind::kCornerComplement, 1, 2);
  RngStream rng(4, "corner");
  data::SamplerStats stats;
  auto tokens = data::sample_tokens(spec, 40000, rng, &stats);
  for (std::size_t row = 0; row < 40000; ++row) CHECK_FALSE(data::in_band(tokens, row, 0.5));
  CHECK(std::abs(stats.acceptance_rate() - 0.25) <= 0.01);
}

TEST_CASE("band and corner supports are disjoint") {
  auto band = spec_of(DistKind::kCompositionalBand, 3, 4);
  auto corner = spec_of(DistKind::kCornerComplement, 3, 4);
  RngStream rng(5, "disjoint");
  auto train = data::sample_tokens(band, 10000, rng);
  auto test = data::sample_tokens(corner, 10000, rng);
  std::size_t overlap = 0;
  for (std::size_t row = 0; row < 10000; ++row) {
    if (!data::in_band(train, row, 0.5)) ++overlap;
    if (data::in_band(test, row, 0.5)) ++overlap;
  }
  CHECK(overlap == 0);
}

TEST_CASE("band and corner together cover the hypercube uniformly") {
  // Mixing the two conditionals by the acceptance mass reproduces the
  // uniform distribution; per-component means and a coarse histogram check.
  const std::size_t n = 2, T = 3;
  auto band = spec_of(DistKind::kCompositionalBand, n, T);
  auto corner = spec_of(DistKind::kCornerComplement, n, T);
  RngStream rng(6, "mixture");

  data::SamplerStats corner_stats;
  auto corner_tokens = data::sample_tokens(corner, 20000, rng, &corner_stats);
  const double p_corner = corner_stats.acceptance_rate();
  // Per-component band acceptance compounds over components.
  const std::size_t band_rows =
      static_cast<std::size_t>(20000.0 * (1.0 - p_corner) / p_corner);
  auto band_tokens = data::sample_tokens(band, band_rows, rng);

  std::vector<std::size_t> histogram(10, 0);
  std::size_t count = 0;
  auto tally = [&](const std::vector<Matrix>& tokens) {
    for (const Matrix& slab : tokens) {
      for (double v : slab.values()) {
        ++histogram[std::min<std::size_t>(9, static_cast<std::size_t>(v * 10.0))];
        ++count;
      }
    }
  };
  tally(corner_tokens);
  tally(band_tokens);
  for (std::size_t bin = 0; bin < 10; ++bin) {
    const double freq = static_cast<double>(histogram[bin]) / count;
    CHECK(std::abs(freq - 0.1) <= 0.01);
  }
}

TEST_CASE("discrete tokens sit on the grid with uniform level frequencies") {
  auto spec = spec_of(DistKind::kDiscreteGrid, 2, 2);
  spec.grid_levels = 2;
  RngStream rng(7, "discrete");
  auto tokens = data::sample_tokens(spec, 30000, rng);
  std::size_t ones = 0, total = 0;
  for (const Matrix& slab : tokens) {
    for (double v : slab.values()) {
      CHECK((v == 0.0 || v == 1.0));
      if (v == 1.0) ++ones;
      ++total;
    }
  }
  CHECK(std::abs(static_cast<double>(ones) / static_cast<double>(total) - 0.5) <= 0.01);

  spec.grid_levels = 5;
  auto tokens5 = data::sample_tokens(spec, 50000, rng);
  std::vector<std::size_t> counts(5, 0);
  std::size_t total5 = 0;
  for (const Matrix& slab : tokens5) {
    for (double v : slab.values()) {
      const double scaled = v * 4.0;
      const auto level = static_cast<std::size_t>(std::lround(scaled));
      CHECK(std::abs(scaled - static_cast<double>(level)) <= 1e-12);
      ++counts[level];
      ++total5;
    }
  }
  for (std::size_t level = 0; level < 5; ++level) {
    CHECK(std::abs(static_cast<double>(counts[level]) / total5 - 0.2) <= 0.01);
  }
}

TEST_CASE("label_batch computes prefix labels with the identity-sum teacher") {
  models::DeepSet ds;
  ds.n = ds.m = 1;
  ds.trace_dim = 1;
  ds.capacity = models::CapacityClass::kHighCapacity;
  ds.psi = models::Head::identity();
  ds.omega = models::Head::identity();

  std::vector<Matrix> tokens = {Matrix::constant(1, 1, 0.1), Matrix::constant(1, 1, 0.2)};
  auto batch = data::label_batch(models::Teacher{models::CoreModel{ds}}, tokens, false);
  CHECK(batch.labels[0](0, 0) == doctest::Approx(0.1));
  CHECK(batch.labels[1](0, 0) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("cot traces equal the forward hidden states exactly") {
  models::ModelSpec spec;
  spec.family = models::Family::kSsm;
  spec.n = spec.m = spec.k = 3;
  auto model = models::sample_model(spec, 13);
  RngStream rng(14, "tokens");
  auto dist = spec_of(DistKind::kUniformHypercube, 3, 4);
  auto tokens = data::sample_tokens(dist, 5, rng);
  auto batch = data::label_batch(models::Teacher{model}, tokens, true);
  auto direct = models::forward(model, batch.tokens);
  REQUIRE(batch.cot.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(num::max_abs_diff(batch.cot[t], direct.traces[t]) == 0.0);
  }
}

TEST_CASE("degenerate teachers label the boundary exactly") {
  models::ModelSpec spec;
  spec.family = models::Family::kDeepSet;
  spec.n = spec.m = spec.k = 2;
  auto base = models::sample_model(spec, 15);
  models::Teacher teacher{models::make_degenerate(base, 0.2, 5)};
  RngStream rng(16, "tokens");
  auto dist = spec_of(DistKind::kUniformHypercube, 2, 6);
  auto tokens = data::sample_tokens(dist, 3, rng);
  auto batch = data::label_batch(teacher, tokens, false);
  auto plain = data::label_batch(models::Teacher{base}, std::move(tokens), false);
  CHECK(num::max_abs_diff(batch.labels[4], plain.labels[4]) == 0.0);
  Matrix shifted = num::add_row_vector(plain.labels[5], Matrix::constant(1, 2, 0.2));
  CHECK(num::max_abs_diff(batch.labels[5], shifted) == 0.0);
}

TEST_CASE("labels are a pure function of tokens, independent of batch order") {
  models::ModelSpec spec;
  spec.family = models::Family::kRnn;
  spec.n = spec.m = spec.k = 3;
  auto model = models::sample_model(spec, 17);
  RngStream rng(18, "tokens");
  auto dist = spec_of(DistKind::kUniformHypercube, 3, 3);
  auto tokens = data::sample_tokens(dist, 2, rng);

  // Swap the two sequences.
  auto swapped = tokens;
  for (Matrix& slab : swapped) {
    for (std::size_t c = 0; c < slab.cols(); ++c) std::swap(slab(0, c), slab(1, c));
  }
  auto a = data::label_batch(models::Teacher{model}, tokens, false);
  auto b = data::label_batch(models::Teacher{model}, swapped, false);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(a.labels[t](0, c) == b.labels[t](1, c));
      CHECK(a.labels[t](1, c) == b.labels[t](0, c));
    }
  }
}

TEST_CASE("batch streams reproduce batches from (epoch, index) alone") {
  auto dist = spec_of(DistKind::kUniformHypercube, 3, 4);
  data::BatchStream stream(dist, 32, 99, "train");
  auto a = stream.tokens(3, 17);
  auto b = stream.tokens(3, 17);
  auto c = stream.tokens(3, 18);
  for (std::size_t t = 0; t < 4; ++t) CHECK(num::max_abs_diff(a[t], b[t]) == 0.0);
  CHECK(num::max_abs_diff(a[0], c[0]) > 0.0);

  data::BatchStream same(dist, 32, 99, "train");
  auto d = same.tokens(3, 17);
  for (std::size_t t = 0; t < 4; ++t) CHECK(num::max_abs_diff(a[t], d[t]) == 0.0);
}

TEST_CASE("the rejection cap raises a sampler error that names the remedy") {
  auto spec = spec_of(DistKind::kCompositionalBand, 1, 4);
  spec.band_halfwidth = 1e-4;
  spec.max_proposals_per_sample = 50;
  RngStream rng(19, "cap");
  try {
    data::sample_tokens(spec, 4, rng);
    FAIL("expected SamplerError");
  } catch (const data::SamplerError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("smaller T or n") != std::string::npos);
  }
}

TEST_CASE("batch dump uses the documented header") {
  models::DeepSet ds;
  ds.n = ds.m = 1;
  ds.trace_dim = 1;
  ds.capacity = models::CapacityClass::kHighCapacity;
  ds.psi = models::Head::identity();
  ds.omega = models::Head::identity();
  std::vector<Matrix> tokens = {Matrix::constant(2, 1, 0.5)};
  auto batch = data::label_batch(models::Teacher{models::CoreModel{ds}}, tokens, false);
  std::ostringstream out;
  data::dump_batch_csv(out, batch);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "seq_id,t,x0,y0");
  std::string row;
  std::getline(in, row);
  CHECK(row == "0,1,0.5,0.5");
}
