// SPDX-License-Identifier: Apache-2.0
#include "decsim/output.hpp"

#include <fmt/format.h>

#include "decsim/error.hpp"

namespace decsim {
namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string optional_real(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

void append_rows(std::string& out, const MetricsRecord& r, std::string_view kind,
                 const std::vector<TensorDispersion>& tensors) {
  const auto run_id = csv_field(r.run_id);
  const auto test = optional_real(r.test_accuracy);
  const auto train = optional_real(r.train_accuracy);
  for (const auto& t : tensors) {
    const auto& s = t.stats;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", run_id, r.strategy, r.epoch, r.iteration, kind,
                       csv_field(t.tensor), r.mean_train_loss, test, train, s.gini, s.index_of_dispersion,
                       s.coefficient_of_variation, s.quartile_coefficient, s.zero_mean ? 1 : 0,
                       s.zero_quartile_sum ? 1 : 0);
  }
}

nlohmann::json tensors_json(const std::vector<TensorDispersion>& tensors) {
  auto arr = nlohmann::json::array();
  for (const auto& t : tensors) {
    arr.push_back({{"tensor", t.tensor},
                   {"gini", t.stats.gini},
                   {"index_of_dispersion", t.stats.index_of_dispersion},
                   {"coefficient_of_variation", t.stats.coefficient_of_variation},
                   {"quartile_coefficient", t.stats.quartile_coefficient},
                   {"zero_mean", t.stats.zero_mean},
                   {"zero_quartile_sum", t.stats.zero_quartile_sum}});
  }
  return arr;
}

}  // namespace

std::string metrics_csv_rows(const MetricsRecord& r) {
  std::string out;
  append_rows(out, r, "param", r.params);
  append_rows(out, r, "grad", r.grads);
  return out;
}

nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j{{"run_id", r.run_id},
                   {"strategy", r.strategy},
                   {"epoch", r.epoch},
                   {"iteration", r.iteration},
                   {"mean_train_loss", r.mean_train_loss},
                   {"params", tensors_json(r.params)}};
  if (r.test_accuracy) j["test_accuracy"] = *r.test_accuracy;
  if (r.train_accuracy) j["train_accuracy"] = *r.train_accuracy;
  if (!r.grads.empty()) j["grads"] = tensors_json(r.grads);
  return j;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir, const std::vector<EmitFormat>& formats) : dir_(dir) {
  ensure_directory(dir);
  for (auto f : formats) {
    const auto path = dir / (f == EmitFormat::Csv ? "metrics.csv" : "metrics.ndjson");
    auto& stream = f == EmitFormat::Csv ? csv_ : ndjson_;
    stream.open(path, std::ios::binary | std::ios::trunc);
    if (!stream) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  }
  if (csv_.is_open()) csv_ << kMetricsCsvHeader << '\n';
}

void MetricsWriter::write(const MetricsRecord& r) {
  if (csv_.is_open()) csv_ << metrics_csv_rows(r);
  if (ndjson_.is_open()) ndjson_ << to_json(r).dump() << '\n';
  if ((csv_.is_open() && !csv_) || (ndjson_.is_open() && !ndjson_)) {
    throw IoError(fmt::format("write failed under '{}'", dir_.string()));
  }
}

void MetricsWriter::close() {
  for (auto* s : {&csv_, &ndjson_}) {
    if (!s->is_open()) continue;
    s->close();
    if (!*s) throw IoError(fmt::format("write failed under '{}'", dir_.string()));
  }
}

std::string ranks_csv(const RankTable& table) {
  std::string out = "iteration";
  for (const auto& s : table.strategies) out += "," + csv_field(s);
  out += '\n';
  for (std::size_t row = 0; row < table.iterations.size(); ++row) {
    out += fmt::format("{}", table.iterations[row]);
    for (int r : table.ranks[row]) out += fmt::format(",{}", r);
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : s.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"mean_train_loss", e.mean_train_loss},
                      {"test_accuracy", e.test_accuracy},
                      {"train_accuracy", e.train_accuracy},
                      {"degree", e.degree},
                      {"lr", e.lr}});
  }
  nlohmann::json j{{"run_id", s.run_id},
                   {"strategy", s.strategy},
                   {"n_workers", s.n_workers},
                   {"seed", s.seed},
                   {"param_count", s.param_count},
                   {"iterations", s.iterations},
                   {"final_test_accuracy", s.final_test_accuracy},
                   {"final_train_accuracy", s.final_train_accuracy},
                   {"final_loss", s.final_loss},
                   {"epochs_to_target", s.epochs_to_target ? nlohmann::json(*s.epochs_to_target) : nlohmann::json()},
                   {"message_volume", s.message_volume},
                   {"diverged", s.diverged},
                   {"wall_seconds", s.wall_seconds},
                   {"epochs", std::move(epochs)}};
  if (s.diverged) {
    j["divergence"] = {{"message", s.divergence_message},
                       {"epoch", s.divergence_epoch},
                       {"iteration", s.divergence_iteration}};
  }
  return j;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message()));
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace decsim
