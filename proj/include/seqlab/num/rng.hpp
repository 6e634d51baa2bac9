#ifndef SEQLAB_NUM_RNG_HPP
#define SEQLAB_NUM_RNG_HPP

#include <cstdint>
#include <string>
#include <string_view>

#include "seqlab/num/matrix.hpp"

namespace seqlab::num {

// Counter-based random stream (Philox4x32-10). A draw is a pure function of
// (seed, stream id, draw index), so identical inputs produce identical values
// on every platform and streams can be derived hierarchically without
// consuming state from the parent.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);
  RngStream(std::uint64_t seed, std::string_view stream_label);

  // Child stream keyed by this stream's id and a label; the parent's draw
  // position is unaffected.
  RngStream derive(std::string_view child_label) const;
  RngStream derive(std::string_view child_label, std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t draw_index() const { return draw_index_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Matrix uniform_matrix(std::size_t rows, std::size_t cols);
  Matrix normal_matrix(std::size_t rows, std::size_t cols, double mean, double stddev);
  // Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
  Matrix orthogonal_matrix(std::size_t n);
  // Uniformly random permutation matrix.
  Matrix permutation_matrix(std::size_t n);

  static std::uint64_t hash_label(std::string_view label);

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t draw_index_ = 0;  // counts 32-bit words drawn
  std::uint32_t buffer_[4] = {0, 0, 0, 0};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;

  std::uint32_t next_u32();
  void refill();
};

}  // namespace seqlab::num

#endif  // SEQLAB_NUM_RNG_HPP
