#pragma once

#include <cstdint>

namespace gossipsim {

// Sizing inputs: n participants, per-transmission error rate e, target
// probability p that a dissemination reaches everyone.
struct ReliabilityTarget {
  uint32_t n = 1;
  double e = 0.0;  // in [0, 1)
  double p = 0.99; // in (0.5, 1)
};

// Fanout needed for the target:
//   f = ceil( (ln n + ln(1 / ln(1/p))) / (1 - e) )
// Calibrated against the published anchors (8 for n=10, 11 for n=250 at
// e=0.05, p=0.99); non-anchor values are cross-checked by the simulation
// oracle in expected_atomicity. Throws std::domain_error on out-of-range
// inputs.
uint32_t compute_fanout(const ReliabilityTarget& target);

struct AtomicityEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  uint32_t runs = 0;
};

// Monte-Carlo estimate of the probability that one dissemination with the
// given fanout and hop budget reaches all n nodes. Drives one private
// simulator instance per dissemination.
AtomicityEstimate expected_atomicity(uint32_t n, uint32_t fanout,
                                     uint32_t hops, uint32_t runs = 200,
                                     double loss = 0.0,
                                     uint64_t seed_base = 7000);

}  // namespace gossipsim
