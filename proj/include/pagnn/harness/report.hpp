#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pagnn/harness/evaluate.hpp"
#include "pagnn/harness/train.hpp"

namespace pagnn::harness {

/// One table block: a model family trained at (N, m_train), tested at each
/// entry of m_test.
struct GridRow {
  int n_antennas = 4;
  int m_train = 2;
  std::vector<int> m_test = {2};
};

inline void to_json(nlohmann::json& j, const GridRow& g) {
  j = {{"n_antennas", g.n_antennas}, {"m_train", g.m_train}, {"m_test", g.m_test}};
}

inline void from_json(const nlohmann::json& j, GridRow& g) {
  g.n_antennas = j.at("n_antennas").get<int>();
  g.m_train = j.at("m_train").get<int>();
  g.m_test = j.value("m_test", std::vector<int>{g.m_train});
}

/// Everything one experiment needs. Per-row N and M override the matching
/// fields of `system`.
struct ExperimentConfig {
  SystemConfig system;
  TrainConfig train = TrainConfig::desk();
  EvalOptions eval;
  sca::SCAOptions sca;
  std::size_t train_samples = 10000;
  std::size_t test_samples = 200;
  std::uint64_t seed = 0;
  std::vector<ModelKind> models = {ModelKind::Mlp, ModelKind::GatPool, ModelKind::Bgat};
  std::map<std::string, Architecture> architectures;  // overrides by model id
  std::vector<GridRow> grid = {GridRow{4, 2, {2, 3, 4}}};
  nlohmann::json reference = nlohmann::json::object();  // free-form, copied into the table

  Architecture architecture(ModelKind k) const {
    const auto it = architectures.find(to_string(k));
    return it == architectures.end() ? Architecture::for_kind(k) : it->second;
  }

  SystemConfig system_for(int n, int m) const {
    SystemConfig c = system;
    c.n_antennas = n;
    c.n_users = m;
    c.guard_distance = system.guard_distance;
    c.validate();
    return c;
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& e) {
  std::vector<std::string> models;
  for (auto k : e.models) models.push_back(to_string(k));
  nlohmann::json arch = nlohmann::json::object();
  for (const auto& [k, a] : e.architectures) arch[k] = a;
  j = {{"system", e.system},
       {"train", e.train},
       {"eval", e.eval},
       {"sca", {{"tol", e.sca.tol}, {"max_iter", e.sca.max_iter}}},
       {"train_samples", e.train_samples},
       {"test_samples", e.test_samples},
       {"seed", e.seed},
       {"models", models},
       {"architectures", arch},
       {"grid", e.grid},
       {"reference", e.reference}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& e) {
  e = {};
  if (j.contains("system")) e.system = j.at("system").get<SystemConfig>();
  if (j.contains("train")) e.train = j.at("train").get<TrainConfig>();
  if (j.contains("eval")) e.eval = j.at("eval").get<EvalOptions>();
  if (j.contains("sca")) {
    e.sca.tol = j.at("sca").value("tol", e.sca.tol);
    e.sca.max_iter = j.at("sca").value("max_iter", e.sca.max_iter);
  }
  e.train_samples = j.value("train_samples", e.train_samples);
  e.test_samples = j.value("test_samples", e.test_samples);
  e.seed = j.value("seed", e.seed);
  if (j.contains("models")) {
    e.models.clear();
    for (const auto& s : j.at("models")) e.models.push_back(model_kind_from_string(s.get<std::string>()));
  }
  if (j.contains("architectures"))
    for (const auto& [k, v] : j.at("architectures").items()) {
      nlohmann::json a = v;
      a["kind"] = to_string(model_kind_from_string(k));
      e.architectures[to_string(model_kind_from_string(k))] = a.get<Architecture>();
    }
  if (j.contains("grid")) e.grid = j.at("grid").get<std::vector<GridRow>>();
  e.reference = j.value("reference", nlohmann::json::object());
  if (e.train_samples < 1 || e.test_samples < 1) throw ConfigError("experiment: sample counts must be >= 1");
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return nlohmann::json::parse(f).get<ExperimentConfig>();
}

/// Stable per-artifact seed: splitmix64 over (base, kind, a, b).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t kind, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(mix(base) ^ kind) ^ a) ^ b);
}

enum SeedKind : std::uint64_t { kTrainData = 1, kTestData = 2, kModelInit = 3 };

// Table ---------------------------------------------------------------------

inline const std::vector<std::string>& table_columns() {
  static const std::vector<std::string> cols = {"fixed", "mlp", "gat", "bgat"};
  return cols;
}

inline std::string column_title(const std::string& id) {
  if (id == "fixed") return "Fixed";
  if (id == "mlp") return "MLP";
  if (id == "gat") return "GAT";
  if (id == "bgat") return "BGAT";
  return id;
}

inline constexpr const char* kNotApplicable = "×";

struct TableCell {
  bool applicable = false;
  double ee = 0.0;
  double latency_ms = 0.0;  // median
  double feasibility_rate = 0.0;
};

struct TableRow {
  int n_antennas = 0;
  int m_train = 0;
  int m_test = 0;
  std::map<std::string, TableCell> cells;  // missing key: not applicable
};

struct ComparisonTable {
  std::vector<TableRow> rows;
  nlohmann::json reference = nlohmann::json::object();
};

inline TableCell cell_from(const EvalReport& r) {
  if (!r.applicable) return {};
  return {true, r.mean_ee, r.latency.median_ms, r.feasibility_rate};
}

/// Long CSV: one "ee" and one "latency_ms" line per (N, M_train, M_test).
inline void write_table_csv(std::ostream& os, const ComparisonTable& t) {
  os << "n_antennas,m_train,m_test,metric";
  for (const auto& c : table_columns()) os << ',' << column_title(c);
  os << '\n';
  os.precision(8);
  for (const auto& row : t.rows)
    for (const char* metric : {"ee", "latency_ms"}) {
      os << row.n_antennas << ',' << row.m_train << ',' << row.m_test << ',' << metric;
      for (const auto& c : table_columns()) {
        const auto it = row.cells.find(c);
        os << ',';
        if (it == row.cells.end() || !it->second.applicable) os << kNotApplicable;
        else os << (std::string(metric) == "ee" ? it->second.ee : it->second.latency_ms);
      }
      os << '\n';
    }
}

inline nlohmann::json table_to_json(const ComparisonTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json cells = nlohmann::json::object();
    for (const auto& c : table_columns()) {
      const auto it = row.cells.find(c);
      if (it == row.cells.end() || !it->second.applicable) {
        cells[column_title(c)] = kNotApplicable;
      } else {
        cells[column_title(c)] = {{"ee", it->second.ee},
                                  {"latency_ms", it->second.latency_ms},
                                  {"feasibility_rate", it->second.feasibility_rate}};
      }
    }
    rows.push_back({{"n_antennas", row.n_antennas}, {"m_train", row.m_train}, {"m_test", row.m_test},
                    {"cells", cells}});
  }
  return {{"columns", {"Fixed", "MLP", "GAT", "BGAT"}}, {"rows", rows}, {"reference", t.reference}};
}

/// Assembles the table from per-cell reports. `models` maps
/// (N, M_train, model id) to reports keyed by M_test; the fixed baseline is
/// keyed by (N, M_test). Absent entries become not-applicable cells.
struct ReportStore {
  std::map<std::tuple<int, int, std::string>, std::map<int, EvalReport>> models;
  std::map<std::pair<int, int>, EvalReport> fixed;
};

inline ComparisonTable compare_table(const std::vector<GridRow>& grid, const ReportStore& store,
                                     const nlohmann::json& reference = nlohmann::json::object()) {
  ComparisonTable t;
  t.reference = reference;
  for (const auto& g : grid)
    for (int mt : g.m_test) {
      TableRow row{g.n_antennas, g.m_train, mt, {}};
      if (auto it = store.fixed.find({g.n_antennas, mt}); it != store.fixed.end()) row.cells["fixed"] = cell_from(it->second);
      for (const auto& id : table_columns()) {
        if (id == "fixed") continue;
        const auto it = store.models.find({g.n_antennas, g.m_train, id});
        if (it == store.models.end()) continue;
        if (auto jt = it->second.find(mt); jt != it->second.end()) row.cells[id] = cell_from(jt->second);
      }
      t.rows.push_back(std::move(row));
    }
  return t;
}

inline void write_table(const ComparisonTable& t, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "table.csv");
  write_table_csv(csv, t);
  std::ofstream js(dir / "table.json");
  js << table_to_json(t).dump(2) << '\n';
  if (!csv || !js) throw std::runtime_error("cannot write table files in " + dir.string());
}

// Orchestration -------------------------------------------------------------

using LogFn = std::function<void(const std::string&)>;

inline std::filesystem::path row_dir(const std::filesystem::path& out, int n, int m_train) {
  return out / ("N" + std::to_string(n) + "_M" + std::to_string(m_train));
}

/// Generates data, trains every model of every grid row, evaluates them and
/// the fixed baseline on every M_test, and writes datasets, checkpoints,
/// training histories, per-cell reports and the table under `out`.
inline ComparisonTable run_experiment(const ExperimentConfig& e, const std::filesystem::path& out,
                                      const LogFn& log = {}) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  std::filesystem::create_directories(out);
  {
    std::ofstream f(out / "experiment.json");
    f << nlohmann::json(e).dump(2) << '\n';
  }
  ReportStore store;
  auto test_set = [&](int n, int m) {
    const auto path = out / ("test_N" + std::to_string(n) + "_M" + std::to_string(m) + ".json");
    if (std::filesystem::exists(path)) return load_dataset(path.string());
    Dataset ds = gen_dataset(e.system_for(n, m), e.test_samples, derive_seed(e.seed, kTestData, n, m));
    save_dataset(ds, path.string());
    return ds;
  };
  auto write_report = [](const EvalReport& r, const std::filesystem::path& p) {
    std::ofstream f(p);
    f << report_to_json(r).dump(1) << '\n';
  };

  for (const auto& g : e.grid) {
    const auto dir = row_dir(out, g.n_antennas, g.m_train);
    std::filesystem::create_directories(dir);
    const SystemConfig train_cfg = e.system_for(g.n_antennas, g.m_train);
    const Dataset train_ds =
        gen_dataset(train_cfg, e.train_samples, derive_seed(e.seed, kTrainData, g.n_antennas, g.m_train));
    save_dataset(train_ds, (dir / "train.json").string());

    for (int mt : g.m_test)
      if (!store.fixed.count({g.n_antennas, mt})) {
        say("fixed baseline N=" + std::to_string(g.n_antennas) + " M=" + std::to_string(mt));
        const SystemConfig c = e.system_for(g.n_antennas, mt);
        EvalReport r = evaluate_fixed(c, test_set(g.n_antennas, mt), e.sca, e.eval);
        write_report(r, out / ("fixed_N" + std::to_string(g.n_antennas) + "_M" + std::to_string(mt) + ".json"));
        store.fixed.emplace(std::make_pair(g.n_antennas, mt), std::move(r));
      }

    for (ModelKind k : e.models) {
      const std::string id = to_string(k);
      ModelSpec spec{e.architecture(k), g.n_antennas, g.m_train};
      TrainConfig tc = e.train;
      tc.seed = derive_seed(e.seed ^ e.train.seed, kModelInit, g.n_antennas, g.m_train);
      say("train " + id + " N=" + std::to_string(g.n_antennas) + " M=" + std::to_string(g.m_train));
      const TrainResult tr = train(spec, train_cfg, train_ds, tc, [&](const EpochRecord& r) {
        say("  " + id + " epoch " + std::to_string(r.epoch) + " val_ee " + std::to_string(r.val_ee));
      });
      save_model(tr.model, (dir / (id + ".model.json")).string());
      {
        std::ofstream f(dir / (id + ".history.csv"));
        write_history_csv(f, tr);
      }
      for (int mt : g.m_test) {
        const SystemConfig c = e.system_for(g.n_antennas, mt);
        EvalReport r = evaluate(tr.model, c, test_set(g.n_antennas, mt), e.eval);
        write_report(r, dir / (id + "_test_M" + std::to_string(mt) + ".json"));
        store.models[{g.n_antennas, g.m_train, id}].emplace(mt, std::move(r));
      }
    }
  }
  ComparisonTable t = compare_table(e.grid, store, e.reference);
  write_table(t, out);
  return t;
}

}  // namespace pagnn::harness
