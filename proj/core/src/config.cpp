// SPDX-License-Identifier: Apache-2.0
#include "decsim/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

namespace decsim {
namespace {

using nlohmann::json;

std::string join(const std::string& pointer, std::string_view key) { return pointer + "/" + std::string(key); }

// Typed, path-aware access to one JSON object; remembers which keys were read
// so that anything left over can be rejected as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string pointer) : obj_(obj), pointer_(std::move(pointer)) {
    if (!obj_.is_object()) throw ConfigKeyError(pointer_, fmt::format("'{}' must be an object", display()));
  }

  bool has(std::string_view key) const { return obj_.contains(std::string(key)); }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    const auto it = obj_.find(std::string(key));
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string path(std::string_view key) const { return join(pointer_, key); }

  template <class T>
  std::optional<T> get(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return convert<T>(*v, path(key));
  }

  template <class T>
  T get_or(std::string_view key, T fallback) {
    auto v = get<T>(key);
    return v ? *v : fallback;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.contains(k)) throw ConfigKeyError(path(k), fmt::format("unknown key '{}'", path(k)));
    }
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigKeyError(where, fmt::format("'{}' must be a boolean", where));
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigKeyError(where, fmt::format("'{}' must be a string", where));
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigKeyError(where, fmt::format("'{}' must be a number", where));
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigKeyError(where, fmt::format("'{}' must be an integer", where));
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigKeyError(where, fmt::format("'{}' must be non-negative", where));
        }
      }
      return v.get<T>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  std::string display() const { return pointer_.empty() ? "<root>" : pointer_; }

  const json& obj_;
  std::string pointer_;
  std::set<std::string> seen_;
};

template <class Fn>
auto at_key(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigKeyError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigKeyError(where, e.what());
  }
}

struct StrategyChoice {
  StrategyKind kind;
};

StrategyKind resolve_strategy(const std::string& strategy, const std::optional<std::string>& topology,
                              const std::string& s_path, const std::string& t_path) {
  std::optional<StrategyKind> kind;
  if (strategy == "centralized") {
    if (topology && *topology != "complete") {
      throw ConfigKeyError(t_path, fmt::format("centralized training averages over the complete graph, not '{}'", *topology));
    }
    kind = StrategyKind::CentralizedComplete;
  } else if (strategy == "decentralized") {
    if (!topology) throw ConfigKeyError(s_path, "decentralized strategy requires a 'topology'");
    const auto t = at_key(t_path, [&] { return parse_topology_kind(*topology); });
    switch (t) {
      case TopologyKind::Complete: kind = StrategyKind::DecentralizedComplete; break;
      case TopologyKind::Ring: kind = StrategyKind::DecentralizedRing; break;
      case TopologyKind::Torus: kind = StrategyKind::DecentralizedTorus; break;
      case TopologyKind::Exponential: kind = StrategyKind::DecentralizedExponential; break;
      case TopologyKind::RingLattice: kind = StrategyKind::DecentralizedAdaptive; break;
    }
  } else if (strategy == "adaptive") {
    kind = StrategyKind::DecentralizedAdaptive;
  } else {
    kind = at_key(s_path, [&] { return parse_strategy_kind(strategy); });
  }

  if (topology) {
    const auto t = at_key(t_path, [&] { return parse_topology_kind(*topology); });
    const TopologyKind implied = [&] {
      switch (*kind) {
        case StrategyKind::CentralizedComplete:
        case StrategyKind::DecentralizedComplete: return TopologyKind::Complete;
        case StrategyKind::DecentralizedRing: return TopologyKind::Ring;
        case StrategyKind::DecentralizedTorus: return TopologyKind::Torus;
        case StrategyKind::DecentralizedExponential: return TopologyKind::Exponential;
        case StrategyKind::DecentralizedAdaptive: return TopologyKind::RingLattice;
      }
      return TopologyKind::Complete;
    }();
    if (t != implied) {
      throw ConfigKeyError(t_path, fmt::format("topology '{}' conflicts with strategy '{}'", *topology, strategy));
    }
  }
  return *kind;
}

LRSchedule parse_schedule(const json& doc, const std::string& pointer, int epochs) {
  ObjectReader r(doc, pointer);
  LRSchedule s;
  if (auto k = r.get<std::string>("kind")) s.kind = at_key(r.path("kind"), [&] { return parse_schedule_kind(*k); });
  s.base_lr = r.get_or<double>("base_lr", s.base_lr);
  if (auto sc = r.get<std::string>("scaling")) s.scaling = at_key(r.path("scaling"), [&] { return parse_lr_scaling(*sc); });
  if (auto rb = r.get<std::int64_t>("reference_batch")) {
    if (*rb < 1) throw ConfigKeyError(r.path("reference_batch"), "schedule reference_batch must be >= 1");
    s.reference_batch = static_cast<std::size_t>(*rb);
  }
  if (const json* phases = r.find("phases")) {
    if (!phases->is_array()) throw ConfigKeyError(r.path("phases"), "schedule phases must be an array");
    for (std::size_t i = 0; i < phases->size(); ++i) {
      const std::string where = fmt::format("{}/{}", r.path("phases"), i);
      ObjectReader pr((*phases)[i], where);
      const json* ep = pr.find("epochs");
      const json* lr = pr.find("lr");
      if (!ep || !ep->is_array() || ep->size() != 2 || !(*ep)[0].is_number_integer() || !(*ep)[1].is_number_integer()) {
        throw ConfigKeyError(pr.path("epochs"), "phase 'epochs' must be [begin, end]");
      }
      if (!lr || !lr->is_array() || lr->size() != 2) {
        throw ConfigKeyError(pr.path("lr"), "phase 'lr' must be [start, end], e.g. [\"1\", \"0.1s\"]");
      }
      auto point = [&](const json& v) {
        if (v.is_number()) return LrPoint{v.get<double>(), false};
        if (!v.is_string()) throw ConfigKeyError(pr.path("lr"), "lr endpoints must be numbers or strings like \"0.1s\"");
        return at_key(pr.path("lr"), [&] { return parse_lr_point(v.get<std::string>()); });
      };
      s.phases.push_back({(*ep)[0].get<int>(), (*ep)[1].get<int>(), point((*lr)[0]), point((*lr)[1])});
      pr.reject_unknown();
    }
  }
  r.reject_unknown();
  if (s.kind != ScheduleKind::Constant && s.phases.empty()) s.phases = default_phases(s.kind, epochs);
  at_key(pointer, [&] { validate(s); return 0; });
  if (s.kind != ScheduleKind::Constant &&
      (s.phases.front().begin_epoch > 0 || s.phases.back().end_epoch < epochs)) {
    throw ConfigKeyError(join(pointer, "phases"),
                         fmt::format("schedule phases cover epochs [{}, {}) but the run has epochs [0, {})",
                                     s.phases.front().begin_epoch, s.phases.back().end_epoch, epochs));
  }
  return s;
}

json schedule_to_json(const LRSchedule& s) {
  json j{{"kind", to_string(s.kind)},
         {"base_lr", s.base_lr},
         {"scaling", to_string(s.scaling)},
         {"reference_batch", s.reference_batch}};
  if (s.kind != ScheduleKind::Constant) {
    json phases = json::array();
    for (const auto& p : s.phases) {
      phases.push_back({{"epochs", {p.begin_epoch, p.end_epoch}}, {"lr", {to_string(p.start), to_string(p.end)}}});
    }
    j["phases"] = std::move(phases);
  }
  return j;
}

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = node.as_array()) {
    json j = json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  std::ostringstream os;
  if (const auto* d = node.as_date()) os << *d;
  if (const auto* t = node.as_time()) os << *t;
  if (const auto* dt = node.as_date_time()) os << *dt;
  return os.str();
}

std::vector<std::string> split_pointer(const std::string& pointer) {
  std::vector<std::string> parts;
  std::size_t pos = 1;
  while (pos <= pointer.size() && !pointer.empty()) {
    const auto next = pointer.find('/', pos);
    parts.push_back(pointer.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return parts;
}

// Line of every object key in a JSON text, keyed by JSON pointer.
std::map<std::string, int> json_key_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string key;
    int index = 0;
    bool expect_key = false;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  auto pointer_with = [&](const std::string& key) {
    std::string p;
    for (std::size_t f = 0; f + 1 < stack.size(); ++f) {
      p += "/" + (stack[f].object ? stack[f].key : std::to_string(stack[f].index));
    }
    return p + "/" + key;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        if (text[i] == '\n') ++line;
        s.push_back(text[i]);
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
        lines.emplace(pointer_with(s), line);
      }
    } else if (c == '{') {
      stack.push_back({true, {}, 0, true});
    } else if (c == '[') {
      stack.push_back({false, {}, 0, false});
    } else if ((c == '}' || c == ']') && !stack.empty()) {
      stack.pop_back();
    } else if (c == ',' && !stack.empty()) {
      if (stack.back().object) {
        stack.back().expect_key = true;
      } else {
        ++stack.back().index;
      }
    }
  }
  return lines;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool is_toml(const std::filesystem::path& path) { return path.extension() == ".toml"; }

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::CentralizedComplete: return "c_complete";
    case StrategyKind::DecentralizedComplete: return "d_complete";
    case StrategyKind::DecentralizedRing: return "d_ring";
    case StrategyKind::DecentralizedTorus: return "d_torus";
    case StrategyKind::DecentralizedExponential: return "d_exponential";
    case StrategyKind::DecentralizedAdaptive: return "d_adaptive";
  }
  return "unknown";
}

StrategyKind parse_strategy_kind(std::string_view label) {
  for (auto k : {StrategyKind::CentralizedComplete, StrategyKind::DecentralizedComplete, StrategyKind::DecentralizedRing,
                 StrategyKind::DecentralizedTorus, StrategyKind::DecentralizedExponential,
                 StrategyKind::DecentralizedAdaptive}) {
    if (label == to_string(k)) return k;
  }
  throw ConfigError(fmt::format(
      "unknown strategy '{}' (expected c_complete, d_complete, d_ring, d_torus, d_exponential, d_adaptive, "
      "or centralized/decentralized/adaptive with a topology)",
      label));
}

std::string_view to_string(UpdateOrder order) {
  return order == UpdateOrder::GradientThenAverage ? "gradient_then_average" : "average_then_gradient";
}

UpdateOrder parse_update_order(std::string_view name) {
  if (name == "gradient_then_average") return UpdateOrder::GradientThenAverage;
  if (name == "average_then_gradient") return UpdateOrder::AverageThenGradient;
  throw ConfigError(fmt::format("unknown update_order '{}' (expected gradient_then_average or average_then_gradient)", name));
}

void validate(const Strategy& s, int n_workers) {
  const bool adaptive = s.kind == StrategyKind::DecentralizedAdaptive;
  if (adaptive != s.ada.has_value()) {
    throw ConfigError(adaptive ? "d_adaptive strategy requires ada parameters (k0, gamma_k)"
                               : "ada parameters are only valid for the d_adaptive strategy");
  }
  // Below three workers every strategy degenerates to the fully connected graph.
  if (n_workers < 3) return;
  if (s.ada) validate(*s.ada, n_workers);
  if (s.kind == StrategyKind::DecentralizedTorus) (void)build_topology(TopologyKind::Torus, n_workers, std::nullopt, s.torus_dims);
}

ExperimentConfig experiment_from_json(const json& doc) {
  ObjectReader r(doc, "");
  ExperimentConfig c;

  c.seed = r.get_or<std::uint64_t>("seed", 0);
  c.n_workers = r.get_or<int>("n_workers", c.n_workers);
  if (c.n_workers < 1) throw ConfigKeyError(r.path("n_workers"), fmt::format("n_workers must be >= 1 (got {})", c.n_workers));
  c.epochs = r.get_or<int>("epochs", c.epochs);
  if (c.epochs < 1) throw ConfigKeyError(r.path("epochs"), fmt::format("epochs must be >= 1 (got {})", c.epochs));
  if (auto b = r.get<std::int64_t>("batch_size")) {
    if (*b < 1) throw ConfigKeyError(r.path("batch_size"), "batch_size must be >= 1");
    c.batch_size = static_cast<std::size_t>(*b);
  }
  c.threads = r.get_or<int>("threads", c.threads);
  if (c.threads < 1) throw ConfigKeyError(r.path("threads"), "threads must be >= 1");
  c.capture_gradients = r.get_or<bool>("capture_gradients", false);
  if (auto t = r.get<double>("target_accuracy")) {
    if (*t < 0.0 || *t > 1.0) throw ConfigKeyError(r.path("target_accuracy"), "target_accuracy must lie in [0, 1]");
    c.target_accuracy = t;
  }

  const auto strategy = r.get<std::string>("strategy");
  if (!strategy) throw ConfigKeyError("/strategy", "missing required key 'strategy'");
  c.strategy.kind = resolve_strategy(*strategy, r.get<std::string>("topology"), r.path("strategy"), r.path("topology"));
  if (auto o = r.get<std::string>("update_order")) {
    c.strategy.update_order = at_key(r.path("update_order"), [&] { return parse_update_order(*o); });
  }
  if (const json* dims = r.find("torus_dims")) {
    if (!dims->is_array() || dims->size() != 2 || !(*dims)[0].is_number_integer() || !(*dims)[1].is_number_integer()) {
      throw ConfigKeyError(r.path("torus_dims"), "torus_dims must be [rows, cols]");
    }
    if (c.strategy.kind == StrategyKind::DecentralizedTorus) {
      c.strategy.torus_dims = TorusDims{(*dims)[0].get<int>(), (*dims)[1].get<int>()};
    }
  }
  const auto k0 = r.get<int>("k0");
  const auto gamma_k = r.get<double>("gamma_k");
  const auto k_min = r.get<int>("k_min");
  if (c.strategy.kind == StrategyKind::DecentralizedAdaptive) {
    if (!gamma_k) throw ConfigKeyError("/gamma_k", "d_adaptive strategy requires 'gamma_k'");
    AdaParams p;
    p.k_min = k_min.value_or(2);
    p.k0 = k0.value_or(std::max(p.k_min, (c.n_workers - 1) / 2));
    p.gamma_k = *gamma_k;
    c.strategy.ada = p;
  }
  at_key(c.strategy.ada ? std::string("/k0") : std::string("/strategy"), [&] {
    validate(c.strategy, c.n_workers);
    return 0;
  });

  const double heterogeneity = r.get_or<double>("heterogeneity", 0.0);
  if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0)) {
    throw ConfigKeyError(r.path("heterogeneity"), fmt::format("heterogeneity must lie in [0, 1] (got {})", heterogeneity));
  }

  if (const json* d = r.find("dataset")) {
    ObjectReader dr(*d, "/dataset");
    auto& s = c.data.spec;
    if (auto n = dr.get<std::int64_t>("n_samples")) {
      if (*n < 1) throw ConfigKeyError(dr.path("n_samples"), "n_samples must be >= 1");
      s.n_samples = static_cast<std::size_t>(*n);
    }
    s.input_dim = dr.get_or<int>("input_dim", s.input_dim);
    s.n_classes = dr.get_or<int>("n_classes", s.n_classes);
    s.cluster_spread = dr.get_or<double>("cluster_spread", s.cluster_spread);
    if (auto ds = dr.get<std::uint64_t>("seed")) {
      s.seed = *ds;
      c.data.explicit_seed = true;
    }
    c.data.holdout_fraction = dr.get_or<double>("holdout_fraction", c.data.holdout_fraction);
    if (!(c.data.holdout_fraction >= 0.0 && c.data.holdout_fraction < 1.0)) {
      throw ConfigKeyError(dr.path("holdout_fraction"), "holdout_fraction must lie in [0, 1)");
    }
    if (auto csv = dr.get<std::string>("csv")) c.data.csv = std::filesystem::path(*csv);
    c.data.identical_shards = dr.get_or<bool>("identical_shards", false);
    dr.reject_unknown();
  }
  c.data.spec.heterogeneity = heterogeneity;
  if (!c.data.explicit_seed) c.data.spec.seed = c.seed;
  if (!c.data.csv) at_key("/dataset", [&] { validate(c.data.spec); return 0; });

  if (const json* m = r.find("model")) {
    ObjectReader mr(*m, "/model");
    if (auto k = mr.get<std::string>("kind")) c.model.kind = at_key(mr.path("kind"), [&] { return parse_model_kind(*k); });
    c.model.hidden_dim = mr.get<int>("hidden_dim");
    mr.reject_unknown();
  }
  if (c.model.kind == ModelKind::MLP && !c.model.hidden_dim) {
    throw ConfigKeyError("/model/hidden_dim", "mlp model requires hidden_dim");
  }
  if (c.model.hidden_dim && *c.model.hidden_dim < 1) throw ConfigKeyError("/model/hidden_dim", "hidden_dim must be >= 1");
  if (c.model.kind == ModelKind::Linear) c.model.hidden_dim.reset();
  c.model.seed = c.seed;
  if (!c.data.csv) {
    c.model.input_dim = c.data.spec.input_dim;
    c.model.output_dim = c.data.spec.n_classes;
  }

  if (const json* s = r.find("schedule")) {
    c.schedule = parse_schedule(*s, "/schedule", c.epochs);
  } else {
    at_key("/schedule", [&] { validate(c.schedule); return 0; });
  }

  if (!c.data.csv) {
    const auto train = c.data.spec.n_samples -
                       static_cast<std::size_t>(std::floor(c.data.holdout_fraction * static_cast<double>(c.data.spec.n_samples)));
    const auto shard_size = c.data.identical_shards ? train : train / static_cast<std::size_t>(c.n_workers);
    if (shard_size == 0) {
      throw ConfigKeyError("/n_workers", fmt::format("n_workers ({}) exceeds the {} training samples", c.n_workers, train));
    }
    if (c.batch_size > shard_size) {
      throw ConfigKeyError("/batch_size", fmt::format("batch_size ({}) exceeds shard size ({})", c.batch_size, shard_size));
    }
  }

  c.run_id = r.get_or<std::string>("run_id", fmt::format("{}-n{}-s{}", to_string(c.strategy.kind), c.n_workers, c.seed));
  if (auto out = r.get<std::string>("out")) {
    c.out = *out;
  } else {
    c.out = default_output_dir(c.run_id);
  }
  if (const json* emit = r.find("emit")) {
    if (!emit->is_array()) throw ConfigKeyError(r.path("emit"), "emit must be an array of \"csv\" / \"ndjson\"");
    c.emit.clear();
    for (const auto& e : *emit) {
      const auto v = e.is_string() ? e.get<std::string>() : std::string();
      if (v == "csv") {
        c.emit.push_back(EmitFormat::Csv);
      } else if (v == "ndjson") {
        c.emit.push_back(EmitFormat::Ndjson);
      } else {
        throw ConfigKeyError(r.path("emit"), fmt::format("unknown emit format '{}' (expected csv or ndjson)", e.dump()));
      }
    }
  }
  r.find("sweep");  // handled by sweep_from_json
  r.reject_unknown();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["run_id"] = c.run_id;
  j["strategy"] = to_string(c.strategy.kind);
  j["update_order"] = to_string(c.strategy.update_order);
  if (c.strategy.torus_dims) j["torus_dims"] = {c.strategy.torus_dims->rows, c.strategy.torus_dims->cols};
  if (c.strategy.ada) {
    j["k0"] = c.strategy.ada->k0;
    j["gamma_k"] = c.strategy.ada->gamma_k;
    j["k_min"] = c.strategy.ada->k_min;
  }
  j["n_workers"] = c.n_workers;
  j["model"] = {{"kind", to_string(c.model.kind)}};
  if (c.model.hidden_dim) j["model"]["hidden_dim"] = *c.model.hidden_dim;
  json d{{"holdout_fraction", c.data.holdout_fraction}, {"identical_shards", c.data.identical_shards}};
  if (c.data.csv) {
    d["csv"] = c.data.csv->string();
  } else {
    d["n_samples"] = c.data.spec.n_samples;
    d["input_dim"] = c.data.spec.input_dim;
    d["n_classes"] = c.data.spec.n_classes;
    d["cluster_spread"] = c.data.spec.cluster_spread;
  }
  if (c.data.explicit_seed) d["seed"] = c.data.spec.seed;
  j["dataset"] = std::move(d);
  j["heterogeneity"] = c.data.spec.heterogeneity;
  j["schedule"] = schedule_to_json(c.schedule);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["capture_gradients"] = c.capture_gradients;
  if (c.target_accuracy) j["target_accuracy"] = *c.target_accuracy;
  j["out"] = c.out.string();
  json emit = json::array();
  for (auto e : c.emit) emit.push_back(e == EmitFormat::Csv ? "csv" : "ndjson");
  j["emit"] = std::move(emit);
  return j;
}

json read_config_document(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  if (is_toml(path)) {
    try {
      const auto table = toml::parse(text, path.string());
      return toml_to_json(table);
    } catch (const toml::parse_error& e) {
      throw ConfigError(fmt::format("{}:{}: {}", path.string(), e.source().begin.line, e.description()));
    }
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // count lines up to the failing byte
    int line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError(fmt::format("{}:{}: JSON syntax error: {}", path.string(), line, e.what()));
  }
}

std::optional<int> locate_key_line(const std::filesystem::path& path, const std::string& pointer) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError&) {
    return std::nullopt;
  }
  auto parts = split_pointer(pointer);
  if (is_toml(path)) {
    toml::table table;
    try {
      table = toml::parse(text, path.string());
    } catch (const toml::parse_error&) {
      return std::nullopt;
    }
    while (!parts.empty()) {
      const toml::node* node = &table;
      for (const auto& p : parts) {
        if (const auto* t = node ? node->as_table() : nullptr) {
          node = t->get(p);
        } else if (const auto* a = node ? node->as_array() : nullptr) {
          node = a->get(static_cast<std::size_t>(std::strtoul(p.c_str(), nullptr, 10)));
        } else {
          node = nullptr;
        }
      }
      if (node && node->source().begin.line > 0) return static_cast<int>(node->source().begin.line);
      parts.pop_back();
    }
    return std::nullopt;
  }
  const auto lines = json_key_lines(text);
  while (!parts.empty()) {
    std::string p;
    for (const auto& s : parts) p += "/" + s;
    if (const auto it = lines.find(p); it != lines.end()) return it->second;
    parts.pop_back();
  }
  return std::nullopt;
}

bool is_sweep(const json& doc) { return doc.is_object() && doc.contains("sweep"); }

SweepConfig sweep_from_json(const json& doc) {
  SweepConfig s;
  json base = doc;
  if (!base.contains("run_id")) base["run_id"] = "sweep";
  s.base = experiment_from_json(base);
  s.base_document = doc;
  s.base_document.erase("sweep");
  s.base_document.erase("run_id");
  ObjectReader r(doc.at("sweep"), "/sweep");
  auto list = [&](std::string_view key, auto tag) {
    using T = decltype(tag);
    std::vector<T> out;
    const json* v = r.find(key);
    if (!v) return out;
    if (!v->is_array() || v->empty()) throw ConfigKeyError(r.path(key), fmt::format("sweep.{} must be a non-empty array", key));
    for (std::size_t i = 0; i < v->size(); ++i) out.push_back(ObjectReader::convert<T>((*v)[i], fmt::format("{}/{}", r.path(key), i)));
    return out;
  };
  s.axes.strategies = list("strategies", std::string{});
  s.axes.n_workers = list("n_workers", int{});
  s.axes.seeds = list("seeds", std::uint64_t{});
  r.reject_unknown();
  if (s.axes.strategies.empty()) s.axes.strategies.emplace_back(to_string(s.base.strategy.kind));
  if (s.axes.n_workers.empty()) s.axes.n_workers.push_back(s.base.n_workers);
  if (s.axes.seeds.empty()) s.axes.seeds.push_back(s.base.seed);
  for (std::size_t i = 0; i < s.axes.strategies.size(); ++i) {
    at_key(fmt::format("/sweep/strategies/{}", i), [&] { return parse_strategy_kind(s.axes.strategies[i]); });
  }
  // every cell must validate before anything runs
  for (const auto& st : s.axes.strategies) {
    for (int n : s.axes.n_workers) {
      for (auto seed : s.axes.seeds) (void)sweep_cell(s, st, n, seed);
    }
  }
  return s;
}

ExperimentConfig sweep_cell(const SweepConfig& sweep, std::string_view strategy, int n_workers, std::uint64_t seed) {
  json doc = sweep.base_document;
  doc["strategy"] = std::string(strategy);
  doc.erase("topology");
  doc["n_workers"] = n_workers;
  doc["seed"] = seed;
  if (strategy == "d_adaptive" && !doc.contains("k0")) doc["k0"] = (n_workers - 1) / 2;
  const auto run_id = fmt::format("{}-n{}-s{}", strategy, n_workers, seed);
  doc["run_id"] = run_id;
  doc["out"] = (sweep.base.out / "cells" / run_id).string();
  return experiment_from_json(doc);
}

json load_document(const std::filesystem::path& path, const json& overrides) {
  json doc = read_config_document(path);
  if (!doc.is_object()) throw ConfigError(fmt::format("{}:1: config root must be an object/table", path.string()));
  if (!overrides.is_null()) doc.merge_patch(overrides);
  return doc;
}

void rethrow_anchored(const std::filesystem::path& path, const ConfigKeyError& e) {
  const auto line = locate_key_line(path, e.pointer());
  if (line) throw ConfigError(fmt::format("{}:{}: {}", path.string(), *line, e.what()));
  throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
}

std::filesystem::path default_output_dir(std::string_view run_id) {
  if (const char* root = std::getenv("DECSIM_OUTPUT_ROOT"); root && *root) {
    return std::filesystem::path(root) / std::string(run_id);
  }
  return std::filesystem::path("decsim-out") / std::string(run_id);
}

}  // namespace decsim
