// SPDX-License-Identifier: Apache-2.0
#include "decsim/runner.hpp"

#include <map>

#include <fmt/format.h>

#include "decsim/output.hpp"

namespace decsim {
namespace {

nlohmann::json sweep_axes_json(const SweepAxes& a) {
  return {{"strategies", a.strategies}, {"n_workers", a.n_workers}, {"seeds", a.seeds}};
}

template <class T, class Fn>
T with_anchor(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigKeyError& e) {
    rethrow_anchored(path, e);
  }
}

// Maps an exception escaping a command onto its exit code.
int report(const std::exception_ptr& ep, std::ostream& err) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

RunSummary run_single(const ExperimentConfig& config) {
  MetricsWriter writer(config.out, config.emit);
  const auto summary = run_experiment(config, [&](const MetricsRecord& r) { writer.write(r); });
  writer.close();
  const auto resolved = to_json(config);
  write_json(config.out / "config.json", resolved);
  write_json(config.out / "summary.json", {{"config", resolved}, {"result", to_json(summary)}});
  return summary;
}

SweepResult run_sweep(const SweepConfig& sweep, std::ostream& err) {
  SweepResult result;
  const auto& out = sweep.base.out;
  MetricsWriter combined(out, sweep.base.emit);

  nlohmann::json cells = nlohmann::json::array();
  nlohmann::json groups = nlohmann::json::array();
  std::string ranks = "n_workers,seed,iteration";
  for (const auto& s : sweep.axes.strategies) ranks += "," + s;
  ranks += '\n';
  bool any_diverged = false;
  bool any_io = false;

  for (int n : sweep.axes.n_workers) {
    for (auto seed : sweep.axes.seeds) {
      std::vector<std::vector<MetricsRecord>> streams;
      bool complete = true;
      for (const auto& label : sweep.axes.strategies) {
        const auto cell = sweep_cell(sweep, label, n, seed);
        std::vector<MetricsRecord> records;
        nlohmann::json entry{{"run_id", cell.run_id}, {"strategy", label}, {"n_workers", n}, {"seed", seed}};
        try {
          MetricsWriter writer(cell.out, cell.emit);
          const auto summary = run_experiment(cell, [&](const MetricsRecord& r) {
            writer.write(r);
            combined.write(r);
            MetricsRecord slim = r;
            slim.grads.clear();
            records.push_back(std::move(slim));
          });
          writer.close();
          const auto resolved = to_json(cell);
          write_json(cell.out / "config.json", resolved);
          write_json(cell.out / "summary.json", {{"config", resolved}, {"result", to_json(summary)}});
          entry["status"] = summary.diverged ? "diverged" : "ok";
          entry["result"] = to_json(summary);
          if (summary.diverged) {
            any_diverged = true;
            complete = false;
            err << "divergence: " << summary.divergence_message << '\n';
          }
        } catch (const Error& e) {
          any_io = any_io || dynamic_cast<const IoError*>(&e) != nullptr;
          entry["status"] = "error";
          entry["error"] = e.what();
          complete = false;
          err << "cell " << cell.run_id << " failed: " << e.what() << '\n';
        }
        cells.push_back(std::move(entry));
        streams.push_back(std::move(records));
      }

      nlohmann::json group{{"n_workers", n}, {"seed", seed}};
      if (complete) {
        std::vector<StrategyStream> views;
        for (std::size_t i = 0; i < streams.size(); ++i) views.push_back({sweep.axes.strategies[i], streams[i]});
        try {
          const auto table = rank_strategies(views);
          for (std::size_t row = 0; row < table.iterations.size(); ++row) {
            ranks += fmt::format("{},{},{}", n, seed, table.iterations[row]);
            for (int r : table.ranks[row]) ranks += fmt::format(",{}", r);
            ranks += '\n';
          }
          group["ranked"] = true;
        } catch (const AlignmentError& e) {
          group["ranked"] = false;
          group["reason"] = e.what();
        }
      } else {
        group["ranked"] = false;
        group["reason"] = "a cell in this group diverged or failed";
      }
      groups.push_back(std::move(group));
    }
  }
  combined.close();
  write_text(out / "ranks.csv", ranks);

  auto config = to_json(sweep.base);
  config.erase("run_id");
  // strategy-specific keys the base strategy does not resolve but cells use
  for (const char* key : {"k0", "gamma_k", "k_min", "torus_dims"}) {
    if (sweep.base_document.contains(key)) config[key] = sweep.base_document[key];
  }
  config["sweep"] = sweep_axes_json(sweep.axes);
  result.summary = {{"config", config}, {"cells", std::move(cells)}, {"rank_groups", std::move(groups)}};
  write_json(out / "summary.json", result.summary);
  result.exit_code = any_io ? kExitIo : any_diverged ? kExitDivergence : kExitOk;
  return result;
}

int run_command(const std::filesystem::path& config_path, const nlohmann::json& overrides, std::ostream& out,
                std::ostream& err) {
  try {
    const auto doc = load_document(config_path, overrides);
    if (is_sweep(doc)) {
      const auto sweep = with_anchor<SweepConfig>(config_path, [&] { return sweep_from_json(doc); });
      const auto result = run_sweep(sweep, err);
      out << fmt::format("sweep: {} cells written to {}\n", result.summary["cells"].size(), sweep.base.out.string());
      return result.exit_code;
    }
    const auto config = with_anchor<ExperimentConfig>(config_path, [&] { return experiment_from_json(doc); });
    const auto summary = run_single(config);
    if (summary.diverged) {
      err << "divergence: " << summary.divergence_message << '\n';
      return kExitDivergence;
    }
    out << fmt::format("{}: final test accuracy {:.4f}, train loss {:.6f}, {} iterations -> {}\n", config.run_id,
                       summary.final_test_accuracy, summary.final_loss, summary.iterations, config.out.string());
    return kExitOk;
  } catch (...) {
    return report(std::current_exception(), err);
  }
}

std::string schedule_preview(const ExperimentConfig& config) {
  std::string table = "epoch,k,lr,degree,message_volume\n";
  for (const auto& p : plan_epochs(config)) {
    table += fmt::format("{},{},{},{},{}\n", p.epoch, p.k, p.lr, p.degree, p.message_volume);
  }
  return table;
}

int schedule_preview_command(const std::filesystem::path& config_path, const nlohmann::json& overrides,
                             std::ostream& out, std::ostream& err) {
  try {
    auto doc = load_document(config_path, overrides);
    doc.erase("sweep");
    const auto config = with_anchor<ExperimentConfig>(config_path, [&] { return experiment_from_json(doc); });
    out << schedule_preview(config);
    return kExitOk;
  } catch (...) {
    return report(std::current_exception(), err);
  }
}

nlohmann::json graph_dump(TopologyKind kind, int n, std::optional<int> k, std::optional<TorusDims> dims) {
  const auto topology = build_topology(kind, n, k, dims);
  const auto mix = mixing_matrix(topology);
  return {{"topology", to_json(topology)}, {"mixing_matrix", to_json(mix)}, {"spectral", to_json(spectral_report(mix))}};
}

}  // namespace decsim
