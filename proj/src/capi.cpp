#include "gossipsim/gossipsim.h"

#include <cstdlib>
#include <string>

#include "core.hpp"
#include "fanout.hpp"
#include "simnet.hpp"

namespace {

thread_local std::string g_last_error = "";

void set_error(const std::string& message) { g_last_error = message; }

gsim_status fail(gsim_status status, const std::string& message) {
  set_error(message);
  return status;
}

bool parse_u32(const std::string& text, uint32_t& out) {
  try {
    size_t pos = 0;
    const unsigned long v = std::stoul(text, &pos);
    if (pos != text.size() || v > UINT32_MAX) return false;
    out = static_cast<uint32_t>(v);
    return true;
  } catch (...) {
    return false;
  }
}

bool parse_u64(const std::string& text, uint64_t& out) {
  try {
    size_t pos = 0;
    out = std::stoull(text, &pos);
    return pos == text.size();
  } catch (...) {
    return false;
  }
}

bool parse_i64(const std::string& text, int64_t& out) {
  try {
    size_t pos = 0;
    out = std::stoll(text, &pos);
    return pos == text.size();
  } catch (...) {
    return false;
  }
}

bool parse_f64(const std::string& text, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(text, &pos);
    return pos == text.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

struct gsim_config {
  gossipsim::SimConfig cfg;
};

struct gsim_metrics {
  gossipsim::RunMetrics metrics;
  std::string description;
};

extern "C" {

const char* gsim_version(void) { return "0.1.0"; }

const char* gsim_last_error(void) { return g_last_error.c_str(); }

gsim_config* gsim_config_new(void) {
  auto* handle = new (std::nothrow) gsim_config();
  if (handle) {
    // Library defaults mirror the headline experiment shape.
    handle->cfg.n = 10;
    handle->cfg.gossip.fanout = 8;
    handle->cfg.gossip.initial_hops = 5;
    handle->cfg.events = 1;
  }
  return handle;
}

void gsim_config_free(gsim_config* cfg) { delete cfg; }

gsim_status gsim_config_set(gsim_config* cfg, const char* key,
                            const char* value) {
  if (!cfg || !key || !value)
    return fail(GSIM_ERR_INVALID_ARGUMENT, "null argument");
  const std::string k = key;
  const std::string v = value;
  auto& c = cfg->cfg;
  auto bad_value = [&]() {
    return fail(GSIM_ERR_INVALID_ARGUMENT, k + ": invalid value '" + v + "'");
  };

  try {
    if (k == "n") {
      uint32_t n;
      if (!parse_u32(v, n) || n < 2) return bad_value();
      c.n = n;
    } else if (k == "protocol") {
      c.protocol = gossipsim::protocol_from_name(v);
    } else if (k == "variant") {
      auto variant = gossipsim::variant_from_name(v);
      if (!variant) return bad_value();
      c.gossip.variant = *variant;
    } else if (k == "policy") {
      auto policy = gossipsim::policy_from_name(v);
      if (!policy) return bad_value();
      c.gossip.duplicate_policy = *policy;
      if (*policy == gossipsim::DuplicatePolicy::balls_and_bins)
        c.gossip.id_ttl_ms = 0;
      else if (c.gossip.id_ttl_ms == 0)
        c.gossip.id_ttl_ms = 30000;
    } else if (k == "fanout") {
      uint32_t f;
      if (!parse_u32(v, f) || f < 1) return bad_value();
      c.gossip.fanout = f;
    } else if (k == "hops") {
      uint32_t h;
      if (!parse_u32(v, h) || h < 1) return bad_value();
      c.gossip.initial_hops = h;
    } else if (k == "loss") {
      double loss;
      if (!parse_f64(v, loss) || loss < 0.0 || loss > 1.0) return bad_value();
      c.loss = loss;
    } else if (k == "seed") {
      uint64_t seed;
      if (!parse_u64(v, seed)) return bad_value();
      c.seed = seed;
    } else if (k == "events") {
      uint32_t events;
      if (!parse_u32(v, events) || events < 1) return bad_value();
      c.events = events;
    } else if (k == "interval_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms <= 0) return bad_value();
      c.interval_ms = ms;
    } else if (k == "id_ttl_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms < 0) return bad_value();
      c.gossip.id_ttl_ms = ms;
      c.gossip.duplicate_policy =
          ms == 0 ? gossipsim::DuplicatePolicy::balls_and_bins
                  : gossipsim::DuplicatePolicy::infect_and_die;
    } else if (k == "data_ttl_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms < 0) return bad_value();
      c.gossip.data_ttl_ms = ms;
    } else if (k == "pull_period_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms < 0) return bad_value();
      c.gossip.pull_period_ms = ms;
    } else if (k == "pull_window_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms < 0) return bad_value();
      c.gossip.pull_window_ms = ms;
    } else if (k == "aggregation_timeout_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms <= 0) return bad_value();
      c.gossip.aggregation_timeout_ms = ms;
    } else if (k == "eager_hops_threshold") {
      uint32_t t;
      if (!parse_u32(v, t)) return bad_value();
      c.gossip.eager_hops_threshold = t;
    } else if (k == "fetch_retry_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms <= 0) return bad_value();
      c.gossip.fetch_retry_ms = ms;
    } else if (k == "scope") {
      if (v.empty()) return bad_value();
      c.gossip.scope = v;
    } else if (k == "membership") {
      if (v == "registry")
        c.membership = gossipsim::MembershipMode::registry;
      else if (v == "newscast")
        c.membership = gossipsim::MembershipMode::newscast;
      else
        return bad_value();
    } else if (k == "view_capacity") {
      uint32_t cap;
      if (!parse_u32(v, cap)) return bad_value();
      c.view_capacity = cap;
    } else if (k == "exchange_timeframe_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms < 0) return bad_value();
      c.exchange_timeframe_ms = ms;
    } else if (k == "network_delay_ms") {
      double ms;
      if (!parse_f64(v, ms) || ms < 0) return bad_value();
      c.latency.network_delay_ms = ms;
    } else if (k == "per_send_cost_ms") {
      double ms;
      if (!parse_f64(v, ms) || ms < 0) return bad_value();
      c.latency.per_send_cost_ms = ms;
    } else if (k == "jitter_ms") {
      double ms;
      if (!parse_f64(v, ms) || ms < 0) return bad_value();
      c.latency.jitter_ms = ms;
    } else if (k == "warmup_discard") {
      uint32_t count;
      if (!parse_u32(v, count)) return bad_value();
      c.warmup_discard = count;
    } else if (k == "cooldown_discard") {
      uint32_t count;
      if (!parse_u32(v, count)) return bad_value();
      c.cooldown_discard = count;
    } else if (k == "tick_period_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms <= 0) return bad_value();
      c.tick_period_ms = ms;
    } else if (k == "tail_ms") {
      int64_t ms;
      if (!parse_i64(v, ms) || ms < 0) return bad_value();
      c.tail_ms = ms;
    } else if (k == "tx_log") {
      c.tx_log_path = v;
    } else if (k == "scenario") {
      c.scenario = v;
    } else {
      return fail(GSIM_ERR_INVALID_ARGUMENT, "unknown config key: " + k);
    }
  } catch (const std::exception& e) {
    return fail(GSIM_ERR_INVALID_ARGUMENT, k + ": " + e.what());
  }
  return GSIM_OK;
}

gsim_status gsim_run(const gsim_config* cfg, gsim_metrics** out) {
  if (!cfg || !out) return fail(GSIM_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  try {
    gossipsim::RunMetrics metrics = gossipsim::run(cfg->cfg);
    auto* handle = new gsim_metrics{metrics, metrics.to_string()};
    *out = handle;
    return GSIM_OK;
  } catch (const gossipsim::ConfigError& e) {
    return fail(GSIM_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return fail(GSIM_ERR_RUNTIME, e.what());
  }
}

void gsim_metrics_free(gsim_metrics* metrics) { delete metrics; }

gsim_status gsim_metrics_get(const gsim_metrics* metrics, const char* key,
                             double* out) {
  if (!metrics || !key || !out)
    return fail(GSIM_ERR_INVALID_ARGUMENT, "null argument");
  const std::string k = key;
  const auto& m = metrics->metrics;
  if (k == "delivery_rate")
    *out = m.delivery_rate;
  else if (k == "atomic_fraction")
    *out = m.atomic_fraction;
  else if (k == "mean_latency_ms")
    *out = m.mean_latency_ms;
  else if (k == "p99_latency_ms")
    *out = m.p99_latency_ms;
  else if (k == "max_latency_ms")
    *out = m.max_latency_ms;
  else if (k == "mean_hops")
    *out = m.mean_hops;
  else if (k == "total_transmissions")
    *out = static_cast<double>(m.total_transmissions);
  else if (k == "data_transmissions")
    *out = static_cast<double>(m.data_transmissions);
  else if (k == "delivered_transmissions")
    *out = static_cast<double>(m.delivered_transmissions);
  else if (k == "dropped_transmissions")
    *out = static_cast<double>(m.dropped_transmissions);
  else if (k == "inflight_at_end")
    *out = static_cast<double>(m.inflight_at_end);
  else if (k == "producer_transmissions")
    *out = static_cast<double>(m.producer_transmissions);
  else if (k == "producer_transmissions_per_event")
    *out = m.producer_transmissions_per_event;
  else if (k == "delivered_pairs")
    *out = static_cast<double>(m.delivered_pairs);
  else if (k == "expected_pairs")
    *out = static_cast<double>(m.expected_pairs);
  else if (k == "scope_mismatches")
    *out = static_cast<double>(m.scope_mismatches);
  else if (k == "dropped_replies")
    *out = static_cast<double>(m.dropped_replies);
  else if (k == "producer_index")
    *out = static_cast<double>(m.producer_index);
  else if (k == "seed")
    *out = static_cast<double>(m.seed);
  else
    return fail(GSIM_ERR_INVALID_ARGUMENT, "unknown metric key: " + k);
  return GSIM_OK;
}

const char* gsim_metrics_describe(const gsim_metrics* metrics) {
  return metrics ? metrics->description.c_str() : "";
}

gsim_status gsim_compute_fanout(uint32_t n, double error_rate,
                                double assurance, uint32_t* out) {
  if (!out) return fail(GSIM_ERR_INVALID_ARGUMENT, "null argument");
  try {
    *out = gossipsim::compute_fanout({n, error_rate, assurance});
    return GSIM_OK;
  } catch (const std::exception& e) {
    return fail(GSIM_ERR_INVALID_ARGUMENT, e.what());
  }
}

gsim_status gsim_expected_atomicity(uint32_t n, uint32_t fanout, uint32_t hops,
                                    uint32_t runs, double loss, uint64_t seed,
                                    double* estimate, double* std_error) {
  if (!estimate || !std_error)
    return fail(GSIM_ERR_INVALID_ARGUMENT, "null argument");
  try {
    const auto est =
        gossipsim::expected_atomicity(n, fanout, hops, runs, loss, seed);
    *estimate = est.estimate;
    *std_error = est.std_error;
    return GSIM_OK;
  } catch (const std::exception& e) {
    return fail(GSIM_ERR_INVALID_ARGUMENT, e.what());
  }
}

}  // extern "C"
