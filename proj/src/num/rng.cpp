#include "seqlab/num/rng.hpp"

#include <cmath>
#include <numbers>

namespace seqlab::num {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t ctr[4], std::uint32_t key[2]) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  const std::uint32_t c1 = ctr[1], c3 = ctr[3];
  ctr[0] = hi1 ^ c1 ^ key[0];
  ctr[1] = lo1;
  ctr[2] = hi0 ^ c3 ^ key[1];
  ctr[3] = lo0;
  key[0] += kPhiloxW0;
  key[1] += kPhiloxW1;
}

// Philox4x32-10: key = seed, counter = (stream id, block index).
inline void philox_block(std::uint64_t seed, std::uint64_t stream, std::uint64_t block,
                         std::uint32_t out[4]) {
  std::uint32_t ctr[4] = {
      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t key[2] = {static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32)};
  for (int round = 0; round < 10; ++round) philox_round(ctr, key);
  out[0] = ctr[0];
  out[1] = ctr[1];
  out[2] = ctr[2];
  out[3] = ctr[3];
}

}  // namespace

std::uint64_t RngStream::hash_label(std::string_view label) {
  // FNV-1a, 64 bit.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

RngStream::RngStream(std::uint64_t seed, std::string_view stream_label)
    : RngStream(seed, hash_label(stream_label)) {}

RngStream RngStream::derive(std::string_view child_label) const {
  std::uint64_t child = hash_label(child_label);
  // Mix the parent stream id in so labels are scoped.
  child ^= stream_id_ + 0x9E3779B97F4A7C15ull + (child << 6) + (child >> 2);
  return RngStream(seed_, child);
}

RngStream RngStream::derive(std::string_view child_label, std::uint64_t index) const {
  return derive(std::string(child_label) + "/" + std::to_string(index));
}

void RngStream::refill() {
  philox_block(seed_, stream_id_, draw_index_ / 4, buffer_);
  buffered_ = 4;
}

std::uint32_t RngStream::next_u32() {
  if (buffered_ == 0) refill();
  const std::uint32_t v = buffer_[4 - buffered_];
  --buffered_;
  ++draw_index_;
  return v;
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal(double mean, double stddev) {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return mean + stddev * spare_normal_;
  }
  // Box-Muller; u1 is kept away from zero so log stays finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_normal_ = true;
  return mean + stddev * r * std::cos(theta);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw NumericError("RngStream::below: n must be positive");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

Matrix RngStream::uniform_matrix(std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = uniform();
  return m;
}

Matrix RngStream::normal_matrix(std::size_t rows, std::size_t cols, double mean,
                                double stddev) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(mean, stddev);
  return m;
}

Matrix RngStream::orthogonal_matrix(std::size_t n) {
  // Modified Gram-Schmidt on a Gaussian matrix; re-draws on (measure zero)
  // rank deficiency.
  while (true) {
    Matrix g = normal_matrix(n, n, 0.0, 1.0);
    bool ok = true;
    for (std::size_t c = 0; c < n && ok; ++c) {
      for (std::size_t prev = 0; prev < c; ++prev) {
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += g(r, c) * g(r, prev);
        for (std::size_t r = 0; r < n; ++r) g(r, c) -= dot * g(r, prev);
      }
      double norm = 0.0;
      for (std::size_t r = 0; r < n; ++r) norm += g(r, c) * g(r, c);
      norm = std::sqrt(norm);
      if (norm < 1e-12) {
        ok = false;
        break;
      }
      for (std::size_t r = 0; r < n; ++r) g(r, c) /= norm;
    }
    if (ok) return g;
  }
}

Matrix RngStream::permutation_matrix(std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) p(i, perm[i]) = 1.0;
  return p;
}

}  // namespace seqlab::num
