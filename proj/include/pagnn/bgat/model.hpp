#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pagnn/bgat/architecture.hpp"
#include "pagnn/bgat/loss.hpp"
#include "pagnn/bgat/projection.hpp"
#include "pagnn/diffkit/layers.hpp"
#include "pagnn/diffkit/serialize.hpp"
#include "pagnn/graph.hpp"

namespace pagnn {

/// The model cannot be applied to this problem size (e.g. an MLP trained
/// for a different user count).
class NotApplicableError : public diff::ShapeError {
 public:
  using diff::ShapeError::ShapeError;
};

/// Intermediate quantities of one BGAT block, after its readouts.
struct BlockState {
  Eigen::MatrixXd user_embeddings;     // GAT output, M x F~K
  Eigen::MatrixXd antenna_embeddings;  // GAT output, N x F~K
  Eigen::MatrixXd readout_input;       // node-MLP output of antennas, N x 2
  std::vector<double> delta;           // projected intervals, meters
  std::vector<double> x;               // positions, meters
  std::vector<double> p;               // projected powers, watts
  Eigen::MatrixXd edges;               // refreshed normalized edge features
};

struct BlockTrace {
  std::vector<BlockState> blocks;
};

struct Model {
  ModelSpec spec;
  diff::ParamSet params;
  std::uint64_t seed = 0;
};

/// He-initialized weights; biases set to `arch.bias_init`.
inline Model make_model(const ModelSpec& spec, std::uint64_t seed) {
  Model m{spec, diff::he_init(param_shapes(spec), seed), seed};
  for (int i = 0; i < m.params.entries(); ++i)
    if (m.params.spec(i).is_bias) m.params[i].setConstant(spec.arch.bias_init);
  return m;
}

/// Decision variables as tape nodes: positions in meters, powers in watts.
struct ForwardVars {
  diff::Var x;
  diff::Var p;
};

namespace detail {

class ParamCursor {
 public:
  explicit ParamCursor(const std::vector<diff::Var>& v) : v_(v) {}
  diff::Var next() {
    if (i_ >= v_.size()) throw diff::ShapeError("parameter set shorter than the architecture");
    return v_[i_++];
  }
  std::size_t consumed() const { return i_; }

 private:
  const std::vector<diff::Var>& v_;
  std::size_t i_ = 0;
};

inline diff::GatLayerVars take_heads(ParamCursor& c, int heads, bool with_edge) {
  diff::GatLayerVars layer;
  for (int h = 0; h < heads; ++h) {
    diff::HeadVars hv;
    hv.a = c.next();
    hv.w_s = c.next();
    hv.w_t = c.next();
    if (with_edge) hv.w_e = c.next();
    layer.heads.push_back(hv);
  }
  return layer;
}

inline std::vector<diff::DenseVars> take_dense(ParamCursor& c, std::size_t layers, bool relu_last) {
  std::vector<diff::DenseVars> out;
  for (std::size_t t = 0; t < layers; ++t) {
    diff::DenseVars d;
    d.w = c.next();
    d.b = c.next();
    d.relu = relu_last || t + 1 < layers;
    out.push_back(d);
  }
  return out;
}

struct Projected {
  diff::Var delta_norm;  // 1 x N
  diff::Var x;           // 1 x N, meters
  diff::Var p_norm;      // 1 x N
};

/// ReLU then budget scaling of both raw readout rows, then positions.
inline Projected project(const diff::Var& delta_raw, const diff::Var& power_raw, const SystemConfig& cfg,
                         const NormScales& sc) {
  const DerivedConstants dc = derived_constants(cfg);
  Projected out;
  out.delta_norm = ops::scale_to_budget(diff::relu(delta_raw), dc.spacing_budget / sc.length);
  out.x = ops::positions_from_deltas(out.delta_norm, cfg, sc.length);
  out.p_norm = ops::scale_to_budget(diff::relu(power_raw), cfg.power_budget / sc.power);
  return out;
}

inline std::vector<double> row_values(const diff::Mat& m, double scale = 1.0) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) out[static_cast<std::size_t>(i)] = m(i) * scale;
  return out;
}

inline void check_problem(const ModelSpec& ms, const SystemConfig& cfg, const UserLayout& layout) {
  if (cfg.n_antennas != ms.n_antennas)
    throw NotApplicableError("model built for N=" + std::to_string(ms.n_antennas) +
                             " antennas applied to N=" + std::to_string(cfg.n_antennas));
  if (layout.size() == 0) throw std::invalid_argument("layout has no users");
  if (ms.arch.kind == ModelKind::Mlp && static_cast<int>(layout.size()) != ms.n_users)
    throw NotApplicableError("MLP baseline trained for M=" + std::to_string(ms.n_users) +
                             " users applied to M=" + std::to_string(layout.size()));
}

inline ForwardVars bgat_graph(diff::Tape& t, const ModelSpec& ms, const std::vector<diff::Var>& theta,
                              const SystemConfig& cfg, const UserLayout& layout, BlockTrace* trace) {
  const Architecture& a = ms.arch;
  const BipartiteGraph graph = build_graph(cfg, layout, a.graph).first;
  const NormScales sc = graph.scales;
  diff::Var users = t.constant(graph.user_features);
  diff::Var antennas = t.constant(graph.antenna_features);
  diff::Var edges = t.constant(graph.edge_features);
  diff::Var x, p_norm;
  ParamCursor cur(theta);
  for (int d = 0; d < a.n_blocks; ++d) {
    const std::string tag = "block " + std::to_string(d);
    t.set_stage(tag + " gat");
    diff::GatLayerVars user_side = take_heads(cur, a.heads, true);
    diff::GatLayerVars antenna_side = a.share_attention ? user_side : take_heads(cur, a.heads, true);
    user_side.w_r = antenna_side.w_r = cur.next();
    const auto emb = diff::gat_block_forward(user_side, antenna_side, users, antennas, edges);

    t.set_stage(tag + " mlp");
    const auto mlp = take_dense(cur, a.node_mlp.size(), true);
    const diff::Var ant_out = diff::mlp_forward(mlp, emb.antennas);

    t.set_stage(tag + " readout");
    const auto rd = take_dense(cur, 2, false);
    const auto rp = take_dense(cur, 2, false);
    const diff::Var delta_raw = diff::mlp_forward(rd, diff::transpose(diff::column(ant_out, 0)));
    const diff::Var power_raw = diff::mlp_forward(rp, diff::transpose(diff::column(ant_out, 1)));
    const Projected pr = project(delta_raw, power_raw, cfg, sc);
    x = pr.x;
    p_norm = pr.p_norm;

    t.set_stage(tag + " edge refresh");
    edges = ops::edge_lengths(pr.x, cfg, layout, sc.length);
    if (a.feed_projected) {
      antennas = diff::concat_cols({diff::transpose(pr.delta_norm), diff::transpose(pr.p_norm)});
    } else {
      antennas = ant_out;
      users = diff::mlp_forward(mlp, emb.users);
    }
    if (trace) {
      BlockState bs;
      bs.user_embeddings = emb.users.value();
      bs.antenna_embeddings = emb.antennas.value();
      bs.readout_input = ant_out.value();
      bs.delta = row_values(pr.delta_norm.value(), sc.length);
      bs.x = row_values(pr.x.value());
      bs.p = row_values(pr.p_norm.value(), sc.power);
      bs.edges = edges.value();
      trace->blocks.push_back(std::move(bs));
    }
  }
  if (cur.consumed() != theta.size()) throw diff::ShapeError("parameter set longer than the architecture");
  return {x, diff::scale(p_norm, sc.power)};
}

inline ForwardVars mlp_graph(diff::Tape& t, const ModelSpec& ms, const std::vector<diff::Var>& theta,
                             const SystemConfig& cfg, const UserLayout& layout) {
  const NormScales sc = norm_scales(cfg, ms.arch.graph);
  diff::Mat in(1, 2 * static_cast<Eigen::Index>(layout.size()));
  for (std::size_t m = 0; m < layout.size(); ++m) {
    in(0, static_cast<Eigen::Index>(2 * m)) = layout.positions[m].x() / sc.length;
    in(0, static_cast<Eigen::Index>(2 * m + 1)) = layout.positions[m].y() / sc.length;
  }
  ParamCursor cur(theta);
  t.set_stage("mlp");
  const auto layers = take_dense(cur, ms.arch.baseline_hidden.size() + 1, false);
  const diff::Var out = diff::mlp_forward(layers, t.constant(in));
  t.set_stage("readout");
  const int n = ms.n_antennas;
  const Projected pr = project(diff::slice_cols(out, 0, n), diff::slice_cols(out, n, n), cfg, sc);
  return {pr.x, diff::scale(pr.p_norm, sc.power)};
}

inline ForwardVars gatpool_graph(diff::Tape& t, const ModelSpec& ms, const std::vector<diff::Var>& theta,
                                 const SystemConfig& cfg, const UserLayout& layout) {
  const Architecture& a = ms.arch;
  const NormScales sc = norm_scales(cfg, a.graph);
  diff::Var h = t.constant(user_feature_matrix(layout, sc.length));
  ParamCursor cur(theta);
  for (int l = 0; l < a.n_blocks; ++l) {
    t.set_stage("layer " + std::to_string(l) + " gat");
    diff::GatLayerVars layer = take_heads(cur, a.heads, false);
    layer.w_r = cur.next();
    h = diff::gat_layer_forward(layer, h);
  }
  t.set_stage("pool");
  const diff::Var pooled = diff::colwise_max(h);
  t.set_stage("head mlp");
  const auto layers = take_dense(cur, a.baseline_hidden.size() + 1, false);
  const diff::Var out = diff::mlp_forward(layers, pooled);
  t.set_stage("readout");
  const int n = ms.n_antennas;
  const Projected pr = project(diff::slice_cols(out, 0, n), diff::slice_cols(out, n, n), cfg, sc);
  return {pr.x, diff::scale(pr.p_norm, sc.power)};
}

}  // namespace detail

/// Records the forward pass of any model kind on `t`. `theta` holds one
/// bound variable per parameter entry (see Tape::bind).
inline ForwardVars forward(diff::Tape& t, const ModelSpec& ms, const std::vector<diff::Var>& theta,
                           const SystemConfig& cfg, const UserLayout& layout, BlockTrace* trace = nullptr) {
  detail::check_problem(ms, cfg, layout);
  switch (ms.arch.kind) {
    case ModelKind::Bgat: return detail::bgat_graph(t, ms, theta, cfg, layout, trace);
    case ModelKind::Mlp: return detail::mlp_graph(t, ms, theta, cfg, layout);
    case ModelKind::GatPool: return detail::gatpool_graph(t, ms, theta, cfg, layout);
  }
  throw std::logic_error("unreachable model kind");
}

inline std::vector<diff::Var> bind_constants(diff::Tape& t, const diff::ParamSet& theta) {
  std::vector<diff::Var> out;
  for (int i = 0; i < theta.entries(); ++i) out.push_back(t.constant(theta[i]));
  return out;
}

inline Solution to_solution(const ForwardVars& fv) {
  return {{detail::row_values(fv.x.value())}, {detail::row_values(fv.p.value())}};
}

/// Inference: parameters enter as constants, nothing is kept for backward.
inline Solution predict(const ModelSpec& ms, const diff::ParamSet& theta, const SystemConfig& cfg,
                        const UserLayout& layout, BlockTrace* trace = nullptr) {
  diff::Tape t;
  return to_solution(forward(t, ms, bind_constants(t, theta), cfg, layout, trace));
}

inline Solution predict(const Model& m, const SystemConfig& cfg, const UserLayout& layout,
                        BlockTrace* trace = nullptr) {
  return predict(m.spec, m.params, cfg, layout, trace);
}

inline Solution bgat_forward(const Model& m, const SystemConfig& cfg, const UserLayout& layout,
                             BlockTrace* trace = nullptr) {
  if (m.spec.arch.kind != ModelKind::Bgat) throw std::invalid_argument("bgat_forward: not a BGAT model");
  return predict(m, cfg, layout, trace);
}

inline Solution mlp_baseline_forward(const Model& m, const SystemConfig& cfg, const UserLayout& layout) {
  if (m.spec.arch.kind != ModelKind::Mlp) throw std::invalid_argument("mlp_baseline_forward: not an MLP model");
  return predict(m, cfg, layout);
}

inline Solution gatpool_baseline_forward(const Model& m, const SystemConfig& cfg, const UserLayout& layout) {
  if (m.spec.arch.kind != ModelKind::GatPool)
    throw std::invalid_argument("gatpool_baseline_forward: not a pooled GAT model");
  return predict(m, cfg, layout);
}

/// Loss of one sample.
inline double loss_value(const ModelSpec& ms, const diff::ParamSet& theta, const SystemConfig& cfg,
                         const UserLayout& layout) {
  diff::Tape t;
  const ForwardVars fv = forward(t, ms, bind_constants(t, theta), cfg, layout);
  t.set_stage("loss");
  return ops::neg_energy_efficiency(fv.x, fv.p, cfg, layout).value()(0, 0);
}

/// Loss of one sample and its gradient with respect to every parameter.
inline double loss_and_grad(const ModelSpec& ms, const diff::ParamSet& theta, const SystemConfig& cfg,
                            const UserLayout& layout, diff::ParamSet& grad) {
  diff::Tape t;
  const ForwardVars fv = forward(t, ms, t.bind(theta), cfg, layout);
  t.set_stage("loss");
  const diff::Var loss = ops::neg_energy_efficiency(fv.x, fv.p, cfg, layout);
  t.backward(loss);
  grad = t.param_grads(theta);
  return loss.value()(0, 0);
}

inline constexpr const char* kCheckpointFormat = "pagnn-model";
inline constexpr int kCheckpointVersion = 1;

// Checkpoint layout:
//   { "format": "pagnn-model", "version": 1, "n_antennas", "n_users",
//     "architecture": {...}, "params": <diffkit parameter document> }
inline nlohmann::json model_to_json(const Model& m) {
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"n_antennas", m.spec.n_antennas},
          {"n_users", m.spec.n_users},
          {"architecture", m.spec.arch},
          {"params", diff::params_to_json(m.params, m.seed)}};
}

/// Parses a checkpoint. A non-zero `expected_antennas` rejects models built
/// for a different antenna count.
inline Model model_from_json(const nlohmann::json& j, int expected_antennas = 0) {
  if (j.value("format", std::string()) != kCheckpointFormat)
    throw std::runtime_error("not a model checkpoint (missing format tag)");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
  Model m;
  m.spec.n_antennas = j.at("n_antennas").get<int>();
  m.spec.n_users = j.at("n_users").get<int>();
  m.spec.arch = j.at("architecture").get<Architecture>();
  if (expected_antennas > 0 && m.spec.n_antennas != expected_antennas)
    throw NotApplicableError("checkpoint was trained for N=" + std::to_string(m.spec.n_antennas) +
                             " antennas but the configuration has N=" + std::to_string(expected_antennas));
  m.params = diff::params_from_json(j.at("params"));
  m.seed = j.at("params").value("seed", std::uint64_t{0});
  if (!m.params.same_shapes(diff::he_init(param_shapes(m.spec), 0)))
    throw diff::ShapeError("checkpoint parameters do not match its architecture descriptor");
  return m;
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << model_to_json(m).dump(1) << '\n';
}

inline Model load_model(const std::string& path, int expected_antennas = 0) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return model_from_json(nlohmann::json::parse(f), expected_antennas);
}

}  // namespace pagnn
