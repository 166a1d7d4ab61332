#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

// Experiment front-end: config parsing, parameter sweeps, CSV assembly.
// Implemented purely against the gossipsim C API.

namespace gossipsim::cli {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A sweep: lists of n / fanout / loss / variant / policy values crossed with
// fixed settings, runs_per_point seeded runs per point (seed = seed_base +
// run index).
struct ExperimentSpec {
  std::string name = "run";
  std::string protocol = "gossip";
  std::vector<uint32_t> nodes{10};
  std::vector<std::string> fanouts{"auto"};  // integers or "auto"
  std::vector<double> losses{0.0};
  std::vector<std::string> variants{"eager-push"};
  std::vector<std::string> policies{"infect-and-die"};
  uint32_t hops = 5;
  uint32_t runs_per_point = 1;
  uint64_t seed_base = 42;
  uint32_t events = 120;
  int64_t interval_ms = 5000;
  uint32_t warmup_discard = 10;
  uint32_t cooldown_discard = 10;
  double error_rate = 0.05;  // e, used when fanout = auto
  double assurance = 0.99;   // p, used when fanout = auto
  std::map<std::string, std::string> engine;  // passthrough engine keys
  std::string out_path;                       // empty = caller decides
  std::string tx_log_base;                    // empty = no logs
};

// Flat key-value config format, documented in configs/headline.cfg.
// Throws ParseError identifying the offending line and key.
ExperimentSpec parse_config_text(const std::string& text,
                                 const std::string& origin);
ExperimentSpec parse_config_file(const std::string& path);

// One flag-style override; key names match the config file keys.
void apply_override(ExperimentSpec& spec, const std::string& key,
                    const std::string& value);

// Runs the sweep and returns CSV: one row per (point, run) plus one
// aggregate (mean) row per point. Deterministic for a given spec.
std::string run_experiment(const ExperimentSpec& spec);

struct ReliabilityCurveSpec {
  std::string name = "reliability";
  uint32_t n = 250;
  uint32_t hops = 5;
  std::vector<uint32_t> fanouts;
  uint32_t runs = 100;
  double loss = 0.0;
  uint64_t seed_base = 42;
};

// Single-dissemination runs per fanout value; reports the average receiver
// percentage and the atomic-run percentage.
std::string reliability_curve(const ReliabilityCurveSpec& spec);

// "a, b,c" -> {"a", "b", "c"}; "8..11" -> {"8","9","10","11"}.
std::vector<std::string> split_list(const std::string& text);

// Resolves "auto" through the fanout formula.
uint32_t resolve_fanout(const std::string& token, uint32_t n,
                        double error_rate, double assurance);

}  // namespace gossipsim::cli
