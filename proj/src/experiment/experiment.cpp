#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "gossipsim/gossipsim.h"

namespace gossipsim::cli {

namespace {

struct ConfigDeleter {
  void operator()(gsim_config* cfg) const { gsim_config_free(cfg); }
};
struct MetricsDeleter {
  void operator()(gsim_metrics* m) const { gsim_metrics_free(m); }
};
using ConfigPtr = std::unique_ptr<gsim_config, ConfigDeleter>;
using MetricsPtr = std::unique_ptr<gsim_metrics, MetricsDeleter>;

const std::vector<std::string> kVariants{"eager-push", "lazy-push",
                                         "eager-pull", "lazy-pull"};
const std::vector<std::string> kPolicies{"infect-and-die", "balls-and-bins"};

// Engine keys forwarded verbatim to gsim_config_set.
const std::vector<std::string> kEngineKeys{
    "id_ttl_ms",     "data_ttl_ms",      "pull_period_ms",
    "pull_window_ms", "aggregation_timeout_ms", "eager_hops_threshold",
    "fetch_retry_ms", "scope",           "membership",
    "view_capacity", "exchange_timeframe_ms", "network_delay_ms",
    "per_send_cost_ms", "jitter_ms",     "tick_period_ms",
    "tail_ms"};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_field(const std::string& origin, size_t line,
                            const std::string& key, const std::string& why) {
  std::ostringstream msg;
  msg << origin;
  if (line > 0) msg << ":" << line;
  msg << ": " << key << ": " << why;
  throw ParseError(msg.str());
}

uint32_t to_u32(const std::string& origin, size_t line, const std::string& key,
                const std::string& value, uint32_t min_value = 0) {
  try {
    size_t pos = 0;
    const unsigned long v = std::stoul(value, &pos);
    if (pos != value.size() || v > UINT32_MAX || v < min_value)
      bad_field(origin, line, key, "invalid value '" + value + "'");
    return static_cast<uint32_t>(v);
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    bad_field(origin, line, key, "invalid value '" + value + "'");
  }
}

uint64_t to_u64(const std::string& origin, size_t line, const std::string& key,
                const std::string& value) {
  try {
    size_t pos = 0;
    const uint64_t v = std::stoull(value, &pos);
    if (pos != value.size())
      bad_field(origin, line, key, "invalid value '" + value + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    bad_field(origin, line, key, "invalid value '" + value + "'");
  }
}

int64_t to_i64(const std::string& origin, size_t line, const std::string& key,
               const std::string& value, int64_t min_value) {
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(value, &pos);
    if (pos != value.size() || v < min_value)
      bad_field(origin, line, key, "invalid value '" + value + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    bad_field(origin, line, key, "invalid value '" + value + "'");
  }
}

double to_f64(const std::string& origin, size_t line, const std::string& key,
              const std::string& value, double lo, double hi) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size() || v < lo || v > hi)
      bad_field(origin, line, key, "invalid value '" + value + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    bad_field(origin, line, key, "invalid value '" + value + "'");
  }
}

void set_one(ExperimentSpec& spec, const std::string& key,
             const std::string& value, const std::string& origin,
             size_t line) {
  const auto values = split_list(value);
  if (values.empty()) bad_field(origin, line, key, "empty value");

  if (key == "name") {
    spec.name = value;
  } else if (key == "protocol") {
    if (value != "gossip" && value != "eventing")
      bad_field(origin, line, key, "must be gossip or eventing");
    spec.protocol = value;
  } else if (key == "nodes") {
    spec.nodes.clear();
    for (const auto& v : values)
      spec.nodes.push_back(to_u32(origin, line, key, v, 2));
  } else if (key == "fanout") {
    spec.fanouts.clear();
    for (const auto& v : values) {
      if (v != "auto") to_u32(origin, line, key, v, 1);
      spec.fanouts.push_back(v);
    }
  } else if (key == "loss") {
    spec.losses.clear();
    for (const auto& v : values)
      spec.losses.push_back(to_f64(origin, line, key, v, 0.0, 1.0));
  } else if (key == "variant") {
    spec.variants.clear();
    for (const auto& v : values) {
      if (std::find(kVariants.begin(), kVariants.end(), v) == kVariants.end())
        bad_field(origin, line, key, "unknown variant '" + v + "'");
      spec.variants.push_back(v);
    }
  } else if (key == "policy") {
    spec.policies.clear();
    for (const auto& v : values) {
      if (std::find(kPolicies.begin(), kPolicies.end(), v) == kPolicies.end())
        bad_field(origin, line, key, "unknown policy '" + v + "'");
      spec.policies.push_back(v);
    }
  } else if (key == "hops") {
    spec.hops = to_u32(origin, line, key, value, 1);
  } else if (key == "runs") {
    spec.runs_per_point = to_u32(origin, line, key, value, 1);
  } else if (key == "seed") {
    spec.seed_base = to_u64(origin, line, key, value);
  } else if (key == "events") {
    spec.events = to_u32(origin, line, key, value, 1);
  } else if (key == "interval_ms") {
    spec.interval_ms = to_i64(origin, line, key, value, 1);
  } else if (key == "warmup_discard") {
    spec.warmup_discard = to_u32(origin, line, key, value);
  } else if (key == "cooldown_discard") {
    spec.cooldown_discard = to_u32(origin, line, key, value);
  } else if (key == "error_rate") {
    spec.error_rate = to_f64(origin, line, key, value, 0.0, 0.999);
  } else if (key == "assurance") {
    spec.assurance = to_f64(origin, line, key, value, 0.500001, 0.999999);
  } else if (key == "out") {
    spec.out_path = value;
  } else if (key == "tx_log") {
    spec.tx_log_base = value;
  } else if (std::find(kEngineKeys.begin(), kEngineKeys.end(), key) !=
             kEngineKeys.end()) {
    spec.engine[key] = value;
  } else {
    bad_field(origin, line, key, "unknown key");
  }
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

double metric(const MetricsPtr& m, const char* key) {
  double out = 0.0;
  if (gsim_metrics_get(m.get(), key, &out) != GSIM_OK)
    throw std::runtime_error(gsim_last_error());
  return out;
}

void set_or_throw(const ConfigPtr& cfg, const std::string& key,
                  const std::string& value) {
  if (gsim_config_set(cfg.get(), key.c_str(), value.c_str()) != GSIM_OK)
    throw std::runtime_error(gsim_last_error());
}

MetricsPtr run_or_throw(const ConfigPtr& cfg) {
  gsim_metrics* raw = nullptr;
  if (gsim_run(cfg.get(), &raw) != GSIM_OK)
    throw std::runtime_error(gsim_last_error());
  return MetricsPtr(raw);
}

// The per-run metric columns shared by raw and aggregate rows.
struct RowMetrics {
  double delivery_rate = 0, atomic = 0, mean_hops = 0, mean_latency = 0,
         p99_latency = 0, total_tx = 0, producer_tx = 0;
};

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  const auto range = text.find("..");
  if (range != std::string::npos && range > 0) {
    // Numeric range "a..b" (inclusive).
    try {
      size_t pos_a = 0, pos_b = 0;
      const std::string a = trim(text.substr(0, range));
      const std::string b = trim(text.substr(range + 2));
      const long lo = std::stol(a, &pos_a);
      const long hi = std::stol(b, &pos_b);
      if (pos_a == a.size() && pos_b == b.size() && lo >= 0 && hi >= lo) {
        for (long v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
        return out;
      }
    } catch (...) {
      // fall through to comma splitting
    }
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ExperimentSpec parse_config_text(const std::string& text,
                                 const std::string& origin) {
  ExperimentSpec spec;
  std::stringstream ss(text);
  std::string raw;
  size_t line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      bad_field(origin, line_no, line, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) bad_field(origin, line_no, "(empty)", "missing key");
    set_one(spec, key, value, origin, line_no);
  }
  return spec;
}

ExperimentSpec parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

void apply_override(ExperimentSpec& spec, const std::string& key,
                    const std::string& value) {
  set_one(spec, key, value, "flag --" + key, 0);
}

uint32_t resolve_fanout(const std::string& token, uint32_t n,
                        double error_rate, double assurance) {
  if (token != "auto") return static_cast<uint32_t>(std::stoul(token));
  uint32_t f = 0;
  if (gsim_compute_fanout(n, error_rate, assurance, &f) != GSIM_OK)
    throw std::runtime_error(gsim_last_error());
  return f;
}

std::string run_experiment(const ExperimentSpec& spec) {
  const bool eventing = spec.protocol == "eventing";
  // The eventing baseline has no gossip parameters and runs over reliable
  // transport; collapse those sweep axes.
  const std::vector<std::string> fanouts =
      eventing ? std::vector<std::string>{"-"} : spec.fanouts;
  const std::vector<double> losses =
      eventing ? std::vector<double>{0.0} : spec.losses;
  const std::vector<std::string> variants =
      eventing ? std::vector<std::string>{"-"} : spec.variants;
  const std::vector<std::string> policies =
      eventing ? std::vector<std::string>{"-"} : spec.policies;

  std::ostringstream csv;
  csv << "scenario,n,fanout,hops,loss,variant,policy,run,seed,delivery_rate,"
         "atomic,mean_hops,mean_latency_ms,p99_latency_ms,"
         "total_transmissions,producer_transmissions\n";

  const std::string scenario = spec.name + ":" + spec.protocol;
  const size_t total_points = spec.nodes.size() * fanouts.size() *
                              losses.size() * variants.size() *
                              policies.size();
  size_t point_index = 0;
  for (uint32_t n : spec.nodes) {
    for (const auto& fanout_token : fanouts) {
      const uint32_t fanout =
          eventing ? 0
                   : resolve_fanout(fanout_token, n, spec.error_rate,
                                    spec.assurance);
      for (double loss : losses) {
        for (const auto& variant : variants) {
          for (const auto& policy : policies) {
            std::vector<RowMetrics> rows;
            for (uint32_t r = 0; r < spec.runs_per_point; ++r) {
              const uint64_t seed = spec.seed_base + r;
              ConfigPtr cfg(gsim_config_new());
              if (!cfg) throw std::runtime_error("out of memory");
              set_or_throw(cfg, "scenario", scenario);
              set_or_throw(cfg, "n", std::to_string(n));
              set_or_throw(cfg, "protocol", spec.protocol);
              set_or_throw(cfg, "seed", std::to_string(seed));
              set_or_throw(cfg, "events", std::to_string(spec.events));
              set_or_throw(cfg, "interval_ms",
                           std::to_string(spec.interval_ms));
              set_or_throw(cfg, "warmup_discard",
                           std::to_string(spec.warmup_discard));
              set_or_throw(cfg, "cooldown_discard",
                           std::to_string(spec.cooldown_discard));
              if (!eventing) {
                set_or_throw(cfg, "fanout", std::to_string(fanout));
                set_or_throw(cfg, "hops", std::to_string(spec.hops));
                set_or_throw(cfg, "loss", fmt6(loss));
                set_or_throw(cfg, "variant", variant);
                set_or_throw(cfg, "policy", policy);
              }
              for (const auto& [k, v] : spec.engine) set_or_throw(cfg, k, v);
              if (!spec.tx_log_base.empty()) {
                std::string path = spec.tx_log_base;
                if (total_points * spec.runs_per_point > 1)
                  path += ".p" + std::to_string(point_index) + ".r" +
                          std::to_string(r);
                set_or_throw(cfg, "tx_log", path);
              }

              const MetricsPtr m = run_or_throw(cfg);
              RowMetrics row;
              row.delivery_rate = round6(metric(m, "delivery_rate"));
              row.atomic = round6(metric(m, "atomic_fraction"));
              row.mean_hops = round6(metric(m, "mean_hops"));
              row.mean_latency = round6(metric(m, "mean_latency_ms"));
              row.p99_latency = round6(metric(m, "p99_latency_ms"));
              row.total_tx = metric(m, "total_transmissions");
              row.producer_tx =
                  round6(metric(m, "producer_transmissions_per_event"));
              rows.push_back(row);

              csv << scenario << ',' << n << ',' << fanout_token << ','
                  << (eventing ? "-" : std::to_string(spec.hops)) << ','
                  << fmt6(loss) << ',' << variant << ',' << policy << ',' << r
                  << ',' << seed << ',' << fmt6(row.delivery_rate) << ','
                  << fmt6(row.atomic) << ',' << fmt6(row.mean_hops) << ','
                  << fmt6(row.mean_latency) << ',' << fmt6(row.p99_latency)
                  << ',' << static_cast<uint64_t>(row.total_tx) << ','
                  << fmt6(row.producer_tx) << '\n';
            }

            RowMetrics mean;
            for (const auto& row : rows) {
              mean.delivery_rate += row.delivery_rate;
              mean.atomic += row.atomic;
              mean.mean_hops += row.mean_hops;
              mean.mean_latency += row.mean_latency;
              mean.p99_latency += row.p99_latency;
              mean.total_tx += row.total_tx;
              mean.producer_tx += row.producer_tx;
            }
            const double count = static_cast<double>(rows.size());
            csv << scenario << ',' << n << ',' << fanout_token << ','
                << (eventing ? "-" : std::to_string(spec.hops)) << ','
                << fmt6(loss) << ',' << variant << ',' << policy << ",mean,-,"
                << fmt6(mean.delivery_rate / count) << ','
                << fmt6(mean.atomic / count) << ','
                << fmt6(mean.mean_hops / count) << ','
                << fmt6(mean.mean_latency / count) << ','
                << fmt6(mean.p99_latency / count) << ','
                << fmt6(mean.total_tx / count) << ','
                << fmt6(mean.producer_tx / count) << '\n';
            ++point_index;
          }
        }
      }
    }
  }
  return csv.str();
}

std::string reliability_curve(const ReliabilityCurveSpec& spec) {
  if (spec.fanouts.empty()) throw ParseError("fanout range must be non-empty");
  std::ostringstream csv;
  csv << "scenario,n,hops,loss,runs,seed,fanout,avg_receivers_pct,"
         "atomic_runs_pct\n";
  for (uint32_t fanout : spec.fanouts) {
    double receivers_sum = 0.0;
    uint32_t atomic = 0;
    for (uint32_t r = 0; r < spec.runs; ++r) {
      ConfigPtr cfg(gsim_config_new());
      if (!cfg) throw std::runtime_error("out of memory");
      set_or_throw(cfg, "scenario", spec.name);
      set_or_throw(cfg, "n", std::to_string(spec.n));
      set_or_throw(cfg, "protocol", "gossip");
      set_or_throw(cfg, "fanout", std::to_string(fanout));
      set_or_throw(cfg, "hops", std::to_string(spec.hops));
      set_or_throw(cfg, "loss", fmt6(spec.loss));
      set_or_throw(cfg, "events", "1");
      set_or_throw(cfg, "interval_ms", "1000");
      set_or_throw(cfg, "tail_ms", "5000");
      set_or_throw(cfg, "warmup_discard", "0");
      set_or_throw(cfg, "cooldown_discard", "0");
      set_or_throw(cfg, "seed", std::to_string(spec.seed_base + r));
      const MetricsPtr m = run_or_throw(cfg);
      receivers_sum += metric(m, "delivery_rate");
      if (metric(m, "atomic_fraction") >= 1.0) ++atomic;
    }
    const double runs = static_cast<double>(spec.runs);
    csv << spec.name << ',' << spec.n << ',' << spec.hops << ','
        << fmt6(spec.loss) << ',' << spec.runs << ',' << spec.seed_base << ','
        << fanout << ',' << fmt6(100.0 * receivers_sum / runs) << ','
        << fmt6(100.0 * static_cast<double>(atomic) / runs) << '\n';
  }
  return csv.str();
}

}  // namespace gossipsim::cli
