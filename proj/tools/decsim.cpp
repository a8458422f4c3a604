// SPDX-License-Identifier: Apache-2.0
// decsim command-line tool: run, graph dump, schedule preview.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "decsim/runner.hpp"

namespace {

// Flags that mirror config keys; anything set is merged over the document.
struct Overrides {
  std::optional<std::string> strategy, topology, update_order, out;
  std::optional<int> n_workers, k0, k_min, epochs;
  std::optional<double> gamma_k, heterogeneity;
  std::optional<long long> batch_size;
  std::optional<unsigned long long> seed;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--strategy", strategy, "c_complete, d_complete, d_ring, d_torus, d_exponential, d_adaptive");
    cmd.add_option("--topology", topology, "ring, torus, ring_lattice, exponential, complete");
    cmd.add_option("--n-workers", n_workers, "number of simulated workers");
    cmd.add_option("--k0", k0, "initial ring-lattice coordination number (d_adaptive)");
    cmd.add_option("--gamma-k", gamma_k, "per-epoch decay of k (d_adaptive)");
    cmd.add_option("--k-min", k_min, "lower clamp of k (d_adaptive)");
    cmd.add_option("--epochs", epochs, "training epochs");
    cmd.add_option("--batch-size", batch_size, "per-worker batch size");
    cmd.add_option("--seed", seed, "run seed");
    cmd.add_option("--heterogeneity", heterogeneity, "0 = IID shards, 1 = label-sorted shards");
    cmd.add_option("--update-order", update_order, "gradient_then_average or average_then_gradient");
    cmd.add_option("--out", out, "output directory");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    auto put = [&](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    put("strategy", strategy);
    put("topology", topology);
    // a strategy flag replaces the file's strategy/topology pair
    if (strategy && !topology) j["topology"] = nullptr;
    put("n_workers", n_workers);
    put("k0", k0);
    put("gamma_k", gamma_k);
    put("k_min", k_min);
    put("epochs", epochs);
    put("batch_size", batch_size);
    put("seed", seed);
    put("heterogeneity", heterogeneity);
    put("update_order", update_order);
    put("out", out);
    return j;
  }
};

std::optional<decsim::TorusDims> parse_dims(const std::string& text) {
  const auto sep = text.find_first_of("x,");
  if (sep == std::string::npos) throw decsim::ConfigError("--torus-dims expects ROWSxCOLS, e.g. 4x4");
  try {
    return decsim::TorusDims{std::stoi(text.substr(0, sep)), std::stoi(text.substr(sep + 1))};
  } catch (const std::exception&) {
    throw decsim::ConfigError("--torus-dims expects ROWSxCOLS, e.g. 4x4");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decsim: deterministic decentralized SGD simulator"};
  app.require_subcommand(1);

  std::string run_config;
  Overrides run_overrides;
  auto* run = app.add_subcommand("run", "run one experiment or a sweep from a JSON/TOML config");
  run->add_option("config", run_config, "config file (.json or .toml)")->required();
  run_overrides.add_to(*run);

  auto* graph = app.add_subcommand("graph", "inspect communication graphs");
  graph->require_subcommand(1);
  std::string kind;
  int n = 0;
  std::optional<int> k;
  std::string dims;
  auto* dump = graph->add_subcommand("dump", "print topology, mixing matrix and spectral report as JSON");
  dump->add_option("--kind", kind, "ring, torus, ring_lattice, exponential, complete")->required();
  dump->add_option("--n", n, "number of nodes")->required();
  dump->add_option("--k", k, "coordination number (ring_lattice)");
  dump->add_option("--torus-dims", dims, "ROWSxCOLS (torus)");

  auto* schedule = app.add_subcommand("schedule", "inspect learning-rate and topology schedules");
  schedule->require_subcommand(1);
  std::string preview_config;
  Overrides preview_overrides;
  auto* preview = schedule->add_subcommand("preview", "print epoch,k,lr,degree,message_volume");
  preview->add_option("config", preview_config, "config file (.json or .toml)")->required();
  preview_overrides.add_to(*preview);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return decsim::kExitConfig;
  }

  if (*run) return decsim::run_command(run_config, run_overrides.to_json(), std::cout, std::cerr);
  if (*preview) {
    return decsim::schedule_preview_command(preview_config, preview_overrides.to_json(), std::cout, std::cerr);
  }
  if (*dump) {
    try {
      const auto t = decsim::parse_topology_kind(kind);
      const auto d = dims.empty() ? std::nullopt : parse_dims(dims);
      std::cout << decsim::graph_dump(t, n, k, d).dump(2) << '\n';
      return decsim::kExitOk;
    } catch (const decsim::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return decsim::kExitConfig;
    }
  }
  return decsim::kExitConfig;
}
