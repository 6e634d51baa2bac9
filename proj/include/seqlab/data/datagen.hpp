#ifndef SEQLAB_DATA_DATAGEN_HPP
#define SEQLAB_DATA_DATAGEN_HPP

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "seqlab/models/families.hpp"
#include "seqlab/num/matrix.hpp"
#include "seqlab/num/rng.hpp"

namespace seqlab::data {

using models::Teacher;
using num::Matrix;
using num::RngStream;

enum class DistKind : std::uint8_t {
  kUniformHypercube,
  kCompositionalBand,
  kCornerComplement,
  kDiscreteGrid,
};

const char* dist_name(DistKind k);
DistKind dist_from_name(const std::string& name);

struct DistributionSpec {
  DistKind kind = DistKind::kUniformHypercube;
  std::size_t n = 0;
  std::size_t T = 0;
  double band_halfwidth = 0.5;
  std::size_t grid_levels = 2;
  // Rejection-sampling guard rails.
  std::uint64_t max_proposals_per_sample = 1'000'000;
  double acceptance_floor = 1e-6;
};

class SamplerError : public std::runtime_error {
 public:
  explicit SamplerError(const std::string& what) : std::runtime_error(what) {}
};

struct SamplerStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  double acceptance_rate() const {
    return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  }
};

// Draws `batch` sequences of length spec.T; slab t is batch x n. The band
// constraint factorizes over components, so the training sampler rejects
// per-component sequences independently; the complement does not factorize
// and is rejected jointly.
std::vector<Matrix> sample_tokens(const DistributionSpec& spec, std::size_t batch,
                                  RngStream& rng, SamplerStats* stats = nullptr);

// True when every component satisfies the band constraint
// -hw <= sum_j (x_j^k - 1/2) <= hw.
bool in_band(const std::vector<Matrix>& tokens, std::size_t row, double halfwidth);

struct BatchMeta {
  std::string distribution;
  std::uint64_t seed = 0;
  std::string teacher_id;
};

struct SequenceBatch {
  std::vector<Matrix> tokens;  // T slabs, batch x n
  std::vector<Matrix> labels;  // T slabs, batch x m
  std::vector<Matrix> cot;     // empty unless traces were requested
  BatchMeta meta;
};

SequenceBatch label_batch(const Teacher& teacher, std::vector<Matrix> tokens, bool with_cot,
                          BatchMeta meta = {});

// Online dataset: the tokens of batch (epoch, index) are a pure function of
// (seed, purpose, epoch, index), which is what makes reruns reproducible.
class BatchStream {
 public:
  BatchStream(DistributionSpec spec, std::size_t batch_size, std::uint64_t seed,
              std::string purpose);

  std::vector<Matrix> tokens(std::size_t epoch, std::size_t index) const;
  const DistributionSpec& spec() const { return spec_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  DistributionSpec spec_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::string purpose_;
};

// Columns: seq_id,t,x0..x{n-1},y0..y{m-1}; one row per (sequence, prefix).
void dump_batch_csv(std::ostream& out, const SequenceBatch& batch);

}  // namespace seqlab::data

#endif  // SEQLAB_DATA_DATAGEN_HPP
