#include "seqlab/data/datagen.hpp"

#include <cmath>

#include "seqlab/harness/csvfmt.hpp"

namespace seqlab::data {

const char* dist_name(DistKind k) {
  switch (k) {
    case DistKind::kUniformHypercube: return "uniform_hypercube";
    case DistKind::kCompositionalBand: return "compositional_band";
    case DistKind::kCornerComplement: return "corner_complement";
    case DistKind::kDiscreteGrid: return "discrete_grid";
  }
  return "?";
}

DistKind dist_from_name(const std::string& name) {
  if (name == "uniform_hypercube") return DistKind::kUniformHypercube;
  if (name == "compositional_band") return DistKind::kCompositionalBand;
  if (name == "corner_complement") return DistKind::kCornerComplement;
  if (name == "discrete_grid") return DistKind::kDiscreteGrid;
  throw std::invalid_argument("unknown distribution: " + name);
}

namespace {

void validate(const DistributionSpec& spec) {
  if (spec.n == 0 || spec.T == 0) {
    throw std::invalid_argument("sampler: n and T must be positive");
  }
  if (spec.kind == DistKind::kDiscreteGrid && spec.grid_levels < 2) {
    throw std::invalid_argument("sampler: discrete grid needs at least 2 levels");
  }
}

std::vector<Matrix> blank_tokens(std::size_t T, std::size_t batch, std::size_t n) {
  std::vector<Matrix> tokens;
  tokens.reserve(T);
  for (std::size_t t = 0; t < T; ++t) tokens.emplace_back(batch, n);
  return tokens;
}

std::vector<Matrix> sample_uniform(const DistributionSpec& spec, std::size_t batch,
                                   RngStream& rng, SamplerStats* stats) {
  auto tokens = blank_tokens(spec.T, batch, spec.n);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t t = 0; t < spec.T; ++t)
      for (std::size_t c = 0; c < spec.n; ++c) tokens[t](s, c) = rng.uniform();
  if (stats) {
    stats->proposals += batch;
    stats->accepted += batch;
  }
  return tokens;
}

std::vector<Matrix> sample_discrete(const DistributionSpec& spec, std::size_t batch,
                                    RngStream& rng, SamplerStats* stats) {
  auto tokens = blank_tokens(spec.T, batch, spec.n);
  const double step = 1.0 / static_cast<double>(spec.grid_levels - 1);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t t = 0; t < spec.T; ++t)
      for (std::size_t c = 0; c < spec.n; ++c)
        tokens[t](s, c) = step * static_cast<double>(rng.below(spec.grid_levels));
  if (stats) {
    stats->proposals += batch;
    stats->accepted += batch;
  }
  return tokens;
}

// The band constraint is per component and tokens are i.i.d. uniform, so
// conditioning factorizes: rejecting each component sequence on its own event
// yields exactly the jointly conditioned distribution while keeping the
// acceptance rate independent of n.
std::vector<Matrix> sample_band(const DistributionSpec& spec, std::size_t batch,
                                RngStream& rng, SamplerStats* stats) {
  auto tokens = blank_tokens(spec.T, batch, spec.n);
  const double center = 0.5 * static_cast<double>(spec.T);
  std::vector<double> column(spec.T);
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t c = 0; c < spec.n; ++c) {
      std::uint64_t tries = 0;
      while (true) {
        ++tries;
        if (tries > spec.max_proposals_per_sample) {
          throw SamplerError(
              "compositional band sampler: exceeded " +
              std::to_string(spec.max_proposals_per_sample) +
              " proposals for one component sequence; acceptance decays with T, use a "
              "smaller T or n");
        }
        double sum = 0.0;
        for (std::size_t t = 0; t < spec.T; ++t) {
          column[t] = rng.uniform();
          sum += column[t];
        }
        if (std::abs(sum - center) <= spec.band_halfwidth) break;
      }
      if (stats) {
        stats->proposals += tries;
        stats->accepted += 1;
      }
      for (std::size_t t = 0; t < spec.T; ++t) tokens[t](s, c) = column[t];
    }
  }
  return tokens;
}

std::vector<Matrix> sample_corner(const DistributionSpec& spec, std::size_t batch,
                                  RngStream& rng, SamplerStats* stats) {
  auto tokens = blank_tokens(spec.T, batch, spec.n);
  const double center = 0.5 * static_cast<double>(spec.T);
  std::vector<double> sums(spec.n);
  std::vector<double> proposal(spec.T * spec.n);
  for (std::size_t s = 0; s < batch; ++s) {
    std::uint64_t tries = 0;
    while (true) {
      ++tries;
      if (tries > spec.max_proposals_per_sample) {
        throw SamplerError("corner sampler: exceeded " +
                           std::to_string(spec.max_proposals_per_sample) +
                           " proposals for one sequence; the complement has vanishing mass "
                           "at this (n, T)");
      }
      std::fill(sums.begin(), sums.end(), 0.0);
      for (std::size_t t = 0; t < spec.T; ++t)
        for (std::size_t c = 0; c < spec.n; ++c) {
          const double u = rng.uniform();
          proposal[t * spec.n + c] = u;
          sums[c] += u;
        }
      bool outside = false;
      for (std::size_t c = 0; c < spec.n; ++c) {
        if (std::abs(sums[c] - center) > spec.band_halfwidth) {
          outside = true;
          break;
        }
      }
      if (outside) break;
    }
    if (stats) {
      stats->proposals += tries;
      stats->accepted += 1;
    }
    for (std::size_t t = 0; t < spec.T; ++t)
      for (std::size_t c = 0; c < spec.n; ++c) tokens[t](s, c) = proposal[t * spec.n + c];
  }
  return tokens;
}

}  // namespace

std::vector<Matrix> sample_tokens(const DistributionSpec& spec, std::size_t batch,
                                  RngStream& rng, SamplerStats* stats) {
  validate(spec);
  SamplerStats local;
  SamplerStats* s = stats ? stats : &local;
  std::vector<Matrix> tokens;
  switch (spec.kind) {
    case DistKind::kUniformHypercube: tokens = sample_uniform(spec, batch, rng, s); break;
    case DistKind::kCompositionalBand: tokens = sample_band(spec, batch, rng, s); break;
    case DistKind::kCornerComplement: tokens = sample_corner(spec, batch, rng, s); break;
    case DistKind::kDiscreteGrid: tokens = sample_discrete(spec, batch, rng, s); break;
  }
  if (s->proposals > 1000 && s->acceptance_rate() < spec.acceptance_floor) {
    throw SamplerError(std::string("sampler for ") + dist_name(spec.kind) +
                       ": acceptance rate " + std::to_string(s->acceptance_rate()) +
                       " below floor; use a smaller T or n");
  }
  return tokens;
}

bool in_band(const std::vector<Matrix>& tokens, std::size_t row, double halfwidth) {
  if (tokens.empty()) return true;
  const std::size_t n = tokens[0].cols();
  const double center = 0.5 * static_cast<double>(tokens.size());
  for (std::size_t c = 0; c < n; ++c) {
    double sum = 0.0;
    for (const Matrix& slab : tokens) sum += slab(row, c);
    if (std::abs(sum - center) > halfwidth) return false;
  }
  return true;
}

SequenceBatch label_batch(const Teacher& teacher, std::vector<Matrix> tokens, bool with_cot,
                          BatchMeta meta) {
  models::ForwardResult result = models::forward(teacher, tokens);
  SequenceBatch batch;
  batch.tokens = std::move(tokens);
  batch.labels = std::move(result.labels);
  if (with_cot) batch.cot = std::move(result.traces);
  batch.meta = std::move(meta);
  return batch;
}

BatchStream::BatchStream(DistributionSpec spec, std::size_t batch_size, std::uint64_t seed,
                         std::string purpose)
    : spec_(spec), batch_size_(batch_size), seed_(seed), purpose_(std::move(purpose)) {
  validate(spec_);
}

std::vector<Matrix> BatchStream::tokens(std::size_t epoch, std::size_t index) const {
  RngStream rng(seed_, purpose_ + "/epoch/" + std::to_string(epoch) + "/batch/" +
                           std::to_string(index));
  return sample_tokens(spec_, batch_size_, rng);
}

void dump_batch_csv(std::ostream& out, const SequenceBatch& batch) {
  const std::size_t T = batch.tokens.size();
  const std::size_t n = T ? batch.tokens[0].cols() : 0;
  const std::size_t m = batch.labels.size() == T && T ? batch.labels[0].cols() : 0;
  out << "seq_id,t";
  for (std::size_t c = 0; c < n; ++c) out << ",x" << c;
  for (std::size_t c = 0; c < m; ++c) out << ",y" << c;
  out << "\n";
  const std::size_t rows = T ? batch.tokens[0].rows() : 0;
  for (std::size_t s = 0; s < rows; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      out << s << "," << (t + 1);
      for (std::size_t c = 0; c < n; ++c) out << "," << harness::csv_double(batch.tokens[t](s, c));
      for (std::size_t c = 0; c < m; ++c) out << "," << harness::csv_double(batch.labels[t](s, c));
      out << "\n";
    }
  }
}

}  // namespace seqlab::data
