#include "fanout.hpp"

#include <cmath>
#include <stdexcept>

#include "simnet.hpp"

namespace gossipsim {

uint32_t compute_fanout(const ReliabilityTarget& target) {
  if (target.n < 1) throw std::domain_error("n must be >= 1");
  if (target.e < 0.0 || target.e >= 1.0)
    throw std::domain_error("error rate must be in [0, 1)");
  if (target.p <= 0.5 || target.p >= 1.0)
    throw std::domain_error("delivery assurance must be in (0.5, 1)");
  const double raw = std::log(static_cast<double>(target.n)) +
                     std::log(1.0 / std::log(1.0 / target.p));
  const double inflated = raw / (1.0 - target.e);
  const double f = std::ceil(inflated);
  return f < 1.0 ? 1u : static_cast<uint32_t>(f);
}

AtomicityEstimate expected_atomicity(uint32_t n, uint32_t fanout,
                                     uint32_t hops, uint32_t runs, double loss,
                                     uint64_t seed_base) {
  if (n < 2 || fanout < 1 || hops < 1 || runs < 1)
    throw std::domain_error("n >= 2, fanout >= 1, hops >= 1, runs >= 1");
  uint32_t atomic = 0;
  for (uint32_t i = 0; i < runs; ++i) {
    SimConfig cfg;
    cfg.n = n;
    cfg.protocol = Protocol::gossip;
    cfg.gossip.variant = Variant::eager_push;
    cfg.gossip.fanout = fanout;
    cfg.gossip.initial_hops = hops;
    cfg.gossip.id_ttl_ms = 60000;
    cfg.gossip.data_ttl_ms = 0;
    cfg.loss = loss;
    cfg.seed = seed_base + i;
    cfg.events = 1;
    cfg.interval_ms = 1000;
    cfg.tail_ms = 5000;
    const RunMetrics m = run(std::move(cfg));
    if (m.atomic_fraction >= 1.0) ++atomic;
  }
  AtomicityEstimate est;
  est.runs = runs;
  est.estimate = static_cast<double>(atomic) / static_cast<double>(runs);
  est.std_error =
      std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(runs));
  return est;
}

}  // namespace gossipsim
