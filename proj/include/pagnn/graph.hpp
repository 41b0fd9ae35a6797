#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "pagnn/bgat/projection.hpp"
#include "pagnn/core_model.hpp"

namespace pagnn {

/// Divisors applied to raw quantities before they become features:
/// coordinates, distances and intervals by `length`, powers by `power`.
struct NormScales {
  double length = 1.0;
  double power = 1.0;
};

struct GraphOptions {
  bool normalize = true;  // false feeds raw meters / watts
};

inline NormScales norm_scales(const SystemConfig& cfg, const GraphOptions& opts) {
  if (!opts.normalize) return {1.0, 1.0};
  return {cfg.half_range, cfg.power_budget};
}

/// Complete bipartite user/antenna graph with node and edge features.
struct BipartiteGraph {
  Eigen::MatrixXd user_features;     // M x 2: x / L, y / L
  Eigen::MatrixXd antenna_features;  // N x 2: delta / L, p / P_max
  Eigen::MatrixXd edge_features;     // M x N: ||u_m - psi_n|| / L
  NormScales scales;

  Eigen::Index n_users() const { return user_features.rows(); }
  Eigen::Index n_antennas() const { return antenna_features.rows(); }
};

inline Eigen::MatrixXd user_feature_matrix(const UserLayout& layout, double length_scale) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(layout.size()), 2);
  for (std::size_t m = 0; m < layout.size(); ++m) {
    f(static_cast<Eigen::Index>(m), 0) = layout.positions[m].x() / length_scale;
    f(static_cast<Eigen::Index>(m), 1) = layout.positions[m].y() / length_scale;
  }
  return f;
}

/// Initial interval per antenna, B_max / (N - 1); a single antenna gets B_max.
inline double initial_interval(const SystemConfig& cfg) {
  const double budget = derived_constants(cfg).spacing_budget;
  return cfg.n_antennas > 1 ? budget / (cfg.n_antennas - 1) : budget;
}

/// Builds the graph for one layout together with the solution its initial
/// antenna features imply (intervals projected onto the spacing budget).
inline std::pair<BipartiteGraph, Solution> build_graph(const SystemConfig& cfg, const UserLayout& layout,
                                                       const GraphOptions& opts = {}) {
  cfg.validate();
  if (layout.size() == 0) throw std::invalid_argument("build_graph: layout has no users");
  const auto n = static_cast<std::size_t>(cfg.n_antennas);
  const DerivedConstants dc = derived_constants(cfg);
  const NormScales sc = norm_scales(cfg, opts);

  const std::vector<double> deltas(n, initial_interval(cfg));
  Solution sol;
  sol.placement = positions_from_deltas(scale_to_budget(deltas, dc.spacing_budget), cfg);
  sol.power.p.assign(n, cfg.power_budget / static_cast<double>(n));

  BipartiteGraph g;
  g.scales = sc;
  g.user_features = user_feature_matrix(layout, sc.length);
  g.antenna_features.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    g.antenna_features(static_cast<Eigen::Index>(i), 0) = deltas[i] / sc.length;
    g.antenna_features(static_cast<Eigen::Index>(i), 1) = sol.power.p[i] / sc.power;
  }
  g.edge_features = edge_lengths(cfg, layout, sol.placement.x, sc.length);
  return {std::move(g), std::move(sol)};
}

/// Recomputes every edge feature from the given placement.
inline BipartiteGraph update_edge_features(BipartiteGraph graph, const SystemConfig& cfg,
                                           const UserLayout& layout, const AntennaPlacement& placement) {
  graph.edge_features = edge_lengths(cfg, layout, placement.x, graph.scales.length);
  return graph;
}

inline nlohmann::json graph_to_json(const BipartiteGraph& g) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
      out.push_back(row);
    }
    return out;
  };
  return {{"user_features", rows(g.user_features)},
          {"antenna_features", rows(g.antenna_features)},
          {"edge_features", rows(g.edge_features)},
          {"scales", {{"length", g.scales.length}, {"power", g.scales.power}}}};
}

}  // namespace pagnn
