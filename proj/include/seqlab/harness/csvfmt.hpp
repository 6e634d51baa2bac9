#ifndef SEQLAB_HARNESS_CSVFMT_HPP
#define SEQLAB_HARNESS_CSVFMT_HPP

#include <cstdio>
#include <string>

namespace seqlab::harness {

// One canonical float rendering for every CSV the toolchain writes; %.17g
// round-trips doubles and keeps reruns byte-identical.
inline std::string csv_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace seqlab::harness

#endif  // SEQLAB_HARNESS_CSVFMT_HPP
