#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pagnn/bgat/model.hpp"
#include "pagnn/harness/dataset.hpp"
#include "pagnn/harness/parallel.hpp"
#include "pagnn/sca/sca.hpp"

namespace pagnn::harness {

struct EvalOptions {
  int latency_samples = 200;
  int warmup = 10;
  double feasibility_tol = 1e-9;
  int threads = 0;
};

inline void to_json(nlohmann::json& j, const EvalOptions& o) {
  j = {{"latency_samples", o.latency_samples},
       {"warmup", o.warmup},
       {"feasibility_tol", o.feasibility_tol},
       {"threads", o.threads}};
}

inline void from_json(const nlohmann::json& j, EvalOptions& o) {
  o = {};
  o.latency_samples = j.value("latency_samples", o.latency_samples);
  o.warmup = j.value("warmup", o.warmup);
  o.feasibility_tol = j.value("feasibility_tol", o.feasibility_tol);
  o.threads = j.value("threads", o.threads);
}

struct LatencyStats {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p90_ms = 0.0;
  int samples = 0;
};

/// Linear-interpolated percentile, q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline LatencyStats latency_stats(const std::vector<double>& ms) {
  LatencyStats s;
  s.samples = static_cast<int>(ms.size());
  if (ms.empty()) return s;
  for (double v : ms) s.mean_ms += v;
  s.mean_ms /= static_cast<double>(ms.size());
  s.median_ms = percentile(ms, 0.5);
  s.p90_ms = percentile(ms, 0.9);
  return s;
}

inline nlohmann::json latency_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean_ms}, {"median_ms", s.median_ms}, {"p90_ms", s.p90_ms}, {"samples", s.samples}};
}

struct EvalReport {
  std::string model_id;
  int n_antennas = 0;
  int m_train = 0;
  int m_test = 0;
  bool applicable = true;
  std::string note;  // reason when not applicable
  double mean_ee = 0.0;
  std::vector<double> per_sample_ee;
  double feasibility_rate = 0.0;
  LatencyStats latency;      // full single-sample inference (graph construction included)
  LatencyStats graph_build;  // graph construction alone (graph models)
};

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j = {{"model_id", r.model_id},   {"n_antennas", r.n_antennas}, {"m_train", r.m_train},
                      {"m_test", r.m_test},       {"applicable", r.applicable}};
  if (!r.applicable) {
    j["note"] = r.note;
    return j;
  }
  j["mean_ee"] = r.mean_ee;
  j["feasibility_rate"] = r.feasibility_rate;
  j["latency"] = latency_json(r.latency);
  if (r.graph_build.samples > 0) j["graph_build"] = latency_json(r.graph_build);
  j["per_sample_ee"] = r.per_sample_ee;
  return j;
}

namespace detail {

template <class F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void finish(EvalReport& r, const std::vector<int>& feasible) {
  const double n = static_cast<double>(r.per_sample_ee.size());
  double s = 0.0;
  for (double v : r.per_sample_ee) s += v;
  r.mean_ee = s / n;
  int ok = 0;
  for (int f : feasible) ok += f;
  r.feasibility_rate = ok / n;
}

}  // namespace detail

/// Exact EE of every sample recomputed from the emitted solution, feasibility
/// at `opt.feasibility_tol`, and single-sample latency (median over
/// `opt.latency_samples` forwards after `opt.warmup` warm-ups, cycling through
/// the dataset). A shape mismatch yields a "not applicable" report.
inline EvalReport evaluate(const Model& m, const SystemConfig& cfg, const Dataset& ds,
                           const EvalOptions& opt = {}) {
  EvalReport r;
  r.model_id = to_string(m.spec.arch.kind);
  r.n_antennas = m.spec.n_antennas;
  r.m_train = m.spec.n_users;
  r.m_test = ds.n_users();
  if (ds.samples.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  try {
    pagnn::detail::check_problem(m.spec, cfg, ds.samples.front());
  } catch (const NotApplicableError& e) {
    r.applicable = false;
    r.note = e.what();
    return r;
  }

  r.per_sample_ee.resize(ds.size());
  std::vector<int> feasible(ds.size());
  const int threads = opt.threads == 0 ? default_threads() : opt.threads;
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const Solution sol = predict(m, cfg, ds.samples[i]);
    feasible[i] = check_feasible(cfg, sol, opt.feasibility_tol).ok ? 1 : 0;
    r.per_sample_ee[i] = energy_efficiency(cfg, ds.samples[i], sol);
  });
  detail::finish(r, feasible);

  std::vector<double> fwd, graph;
  const bool graph_model = m.spec.arch.kind != ModelKind::Mlp;
  for (int i = 0; i < opt.warmup + opt.latency_samples; ++i) {
    const UserLayout& l = ds.samples[static_cast<std::size_t>(i) % ds.size()];
    const double t = detail::time_ms([&] { (void)predict(m, cfg, l); });
    double g = 0.0;
    if (graph_model) g = detail::time_ms([&] { (void)build_graph(cfg, l, m.spec.arch.graph); });
    if (i < opt.warmup) continue;
    fwd.push_back(t);
    if (graph_model) graph.push_back(g);
  }
  r.latency = latency_stats(fwd);
  r.graph_build = latency_stats(graph);
  return r;
}

/// Fixed-antenna baseline: SCA power control on the centered array. Latency
/// is the per-instance solve time, each sample solved once, serially.
inline EvalReport evaluate_fixed(const SystemConfig& cfg, const Dataset& ds, const sca::SCAOptions& sopt = {},
                                 const EvalOptions& opt = {}) {
  if (ds.samples.empty()) throw std::invalid_argument("evaluate_fixed: dataset is empty");
  EvalReport r;
  r.model_id = "fixed";
  r.n_antennas = cfg.n_antennas;
  r.m_train = r.m_test = ds.n_users();
  const AntennaPlacement placement = sca::fixed_placement(cfg);
  std::vector<int> feasible(ds.size());
  std::vector<double> times(ds.size());
  r.per_sample_ee.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sca::SCAResult res;
    times[i] = detail::time_ms([&] { res = sca::sca_solve(cfg, ds.samples[i], placement, sopt); });
    const Solution sol{placement, res.power};
    feasible[i] = check_feasible(cfg, sol, opt.feasibility_tol).ok ? 1 : 0;
    r.per_sample_ee[i] = energy_efficiency(cfg, ds.samples[i], sol);
  }
  detail::finish(r, feasible);
  r.latency = latency_stats(times);
  return r;
}

}  // namespace pagnn::harness
