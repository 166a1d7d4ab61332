/* gossipsim — gossip dissemination engine and deterministic network
 * simulator behind a C ABI.
 *
 * Usage pattern:
 *
 *   gsim_config* cfg = gsim_config_new();
 *   gsim_config_set(cfg, "n", "250");
 *   gsim_config_set(cfg, "fanout", "11");
 *   gsim_config_set(cfg, "loss", "0.10");
 *   gsim_metrics* m = NULL;
 *   if (gsim_run(cfg, &m) == GSIM_OK) {
 *     double rate;
 *     gsim_metrics_get(m, "delivery_rate", &rate);
 *   }
 *   gsim_metrics_free(m);
 *   gsim_config_free(cfg);
 *
 * All functions returning gsim_status set a thread-local message
 * retrievable with gsim_last_error() on failure. Handles are opaque and
 * single-threaded; independent handles may be used from different threads.
 */

#ifndef GOSSIPSIM_H
#define GOSSIPSIM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gsim_status {
  GSIM_OK = 0,
  GSIM_ERR_INVALID_ARGUMENT = 1,
  GSIM_ERR_CONFIG = 2,
  GSIM_ERR_RUNTIME = 3,
  GSIM_ERR_IO = 4
} gsim_status;

typedef struct gsim_config gsim_config;   /* simulation run configuration */
typedef struct gsim_metrics gsim_metrics; /* per-run result metrics */

const char* gsim_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* gsim_last_error(void);

gsim_config* gsim_config_new(void);
void gsim_config_free(gsim_config* cfg);

/* Set one configuration key from its text form. Keys:
 *   n, protocol (gossip|eventing), variant (eager-push|lazy-push|
 *   eager-pull|lazy-pull), policy (infect-and-die|balls-and-bins),
 *   fanout, hops, loss, seed, events, interval_ms, id_ttl_ms, data_ttl_ms,
 *   pull_period_ms, pull_window_ms, aggregation_timeout_ms,
 *   eager_hops_threshold, fetch_retry_ms, scope, membership
 *   (registry|newscast), view_capacity, exchange_timeframe_ms,
 *   network_delay_ms, per_send_cost_ms, jitter_ms, warmup_discard,
 *   cooldown_discard, tick_period_ms, tail_ms, tx_log, scenario.
 * Unknown keys and unparsable values fail with GSIM_ERR_INVALID_ARGUMENT. */
gsim_status gsim_config_set(gsim_config* cfg, const char* key,
                            const char* value);

/* Run one simulation; on success *out owns the metrics. Deterministic:
 * identical configuration (including seed) gives identical metrics and an
 * identical transmission log. */
gsim_status gsim_run(const gsim_config* cfg, gsim_metrics** out);

void gsim_metrics_free(gsim_metrics* metrics);

/* Read one metric as a double. Keys:
 *   delivery_rate, atomic_fraction, mean_latency_ms, p99_latency_ms,
 *   max_latency_ms, mean_hops, total_transmissions, data_transmissions,
 *   delivered_transmissions, dropped_transmissions, inflight_at_end,
 *   producer_transmissions, producer_transmissions_per_event,
 *   delivered_pairs, expected_pairs, scope_mismatches, dropped_replies,
 *   producer_index, seed. */
gsim_status gsim_metrics_get(const gsim_metrics* metrics, const char* key,
                             double* out);

/* Deterministic one-line rendering of all metrics (owned by the handle). */
const char* gsim_metrics_describe(const gsim_metrics* metrics);

/* Fanout needed to reach n participants with delivery assurance p under
 * per-transmission error rate e. */
gsim_status gsim_compute_fanout(uint32_t n, double error_rate,
                                double assurance, uint32_t* out);

/* Monte-Carlo estimate (with standard error) of the probability that one
 * dissemination with the given fanout and hop budget reaches all n nodes. */
gsim_status gsim_expected_atomicity(uint32_t n, uint32_t fanout, uint32_t hops,
                                    uint32_t runs, double loss, uint64_t seed,
                                    double* estimate, double* std_error);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GOSSIPSIM_H */
