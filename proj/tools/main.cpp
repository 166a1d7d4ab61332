#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "experiment/experiment.hpp"
#include "gossipsim/gossipsim.h"

namespace {

void write_output(const std::string& csv, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << csv;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + out_path);
  out << csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gossip dissemination experiments (deterministic simulator)"};
  app.require_subcommand(1);

  // run: sweep experiment -> CSV
  auto* run_cmd =
      app.add_subcommand("run", "run a sweep experiment and emit CSV rows");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "experiment config file");
  // Flag overrides share the config-file key names.
  const std::vector<std::pair<std::string, std::string>> run_flags{
      {"--nodes", "nodes"},
      {"--fanout", "fanout"},
      {"--hops", "hops"},
      {"--loss", "loss"},
      {"--variant", "variant"},
      {"--policy", "policy"},
      {"--runs", "runs"},
      {"--seed", "seed"},
      {"--protocol", "protocol"},
      {"--events", "events"},
      {"--interval-ms", "interval_ms"},
      {"--error-rate", "error_rate"},
      {"--assurance", "assurance"},
      {"--name", "name"},
      {"--scope", "scope"},
      {"--membership", "membership"},
      {"--tx-log", "tx_log"},
      {"--out", "out"}};
  std::map<std::string, std::string> run_values;
  for (const auto& [flag, key] : run_flags)
    run_cmd->add_option(flag, run_values[key], key);

  // reliability: dissemination-curve sweep over fanout
  auto* rel_cmd = app.add_subcommand(
      "reliability", "average-receivers / atomic-runs curve over fanout");
  gossipsim::cli::ReliabilityCurveSpec rel;
  std::string rel_fanouts = "1..12";
  std::string rel_out;
  rel_cmd->add_option("--n", rel.n, "participants")->check(CLI::Range(2u, 100000u));
  rel_cmd->add_option("--hops", rel.hops, "hop budget r");
  rel_cmd->add_option("--fanout", rel_fanouts, "fanout list or range a..b");
  rel_cmd->add_option("--runs", rel.runs, "dissemination runs per fanout");
  rel_cmd->add_option("--loss", rel.loss, "transmission loss probability")
      ->check(CLI::Range(0.0, 1.0));
  rel_cmd->add_option("--seed", rel.seed_base, "base seed");
  rel_cmd->add_option("--name", rel.name, "scenario label");
  rel_cmd->add_option("--out", rel_out, "output CSV path (default stdout)");

  // fanout: parameter helper
  auto* fan_cmd =
      app.add_subcommand("fanout", "compute fanout from reliability targets");
  uint32_t fan_n = 10;
  double fan_e = 0.05, fan_p = 0.99;
  fan_cmd->add_option("--n", fan_n, "participants")->required();
  fan_cmd->add_option("--error-rate", fan_e, "expected error rate e");
  fan_cmd->add_option("--assurance", fan_p, "delivery assurance p");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      gossipsim::cli::ExperimentSpec spec;
      if (!config_path.empty())
        spec = gossipsim::cli::parse_config_file(config_path);
      for (const auto& [flag, key] : run_flags) {
        if (run_cmd->count(flag) > 0)
          gossipsim::cli::apply_override(spec, key, run_values[key]);
      }
      const std::string csv = gossipsim::cli::run_experiment(spec);
      write_output(csv, spec.out_path);
    } else if (rel_cmd->parsed()) {
      rel.fanouts.clear();
      for (const auto& token : gossipsim::cli::split_list(rel_fanouts))
        rel.fanouts.push_back(static_cast<uint32_t>(std::stoul(token)));
      const std::string csv = gossipsim::cli::reliability_curve(rel);
      write_output(csv, rel_out);
    } else if (fan_cmd->parsed()) {
      uint32_t fanout = 0;
      if (gsim_compute_fanout(fan_n, fan_e, fan_p, &fanout) != GSIM_OK)
        throw std::runtime_error(gsim_last_error());
      std::cout << fanout << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
