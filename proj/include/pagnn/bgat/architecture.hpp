#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pagnn/diffkit/params.hpp"
#include "pagnn/graph.hpp"

namespace pagnn {

enum class ModelKind { Bgat, Mlp, GatPool };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Bgat: return "bgat";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::GatPool: return "gat";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "bgat") return ModelKind::Bgat;
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "gat" || s == "gatpool") return ModelKind::GatPool;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected bgat, mlp or gat)");
}

/// Structural hyperparameters. Defaults reproduce the published block
/// structure: 5 blocks, 4 heads of width 8, per-node MLP 32 -> 16 -> 2 and
/// readout MLPs N -> 2N -> N.
struct Architecture {
  ModelKind kind = ModelKind::Bgat;
  int n_blocks = 5;      // BGAT blocks, or GAT layers for the pooled baseline
  int heads = 4;
  int head_width = 8;
  std::vector<int> node_mlp = {16, 2};  // widths after the GAT output
  bool share_attention = true;          // same heads for both edge directions
  bool feed_projected = true;           // next block sees projected (delta, p)
  std::vector<int> baseline_hidden = {64, 64};  // MLP baseline / pooled-GAT head
  double bias_init = 0.0;                       // constant for every bias entry
  GraphOptions graph;

  int gat_width() const { return heads * head_width; }

  static Architecture bgat() { return {}; }
  static Architecture mlp() {
    Architecture a;
    a.kind = ModelKind::Mlp;
    return a;
  }
  static Architecture gat_pool() {
    Architecture a;
    a.kind = ModelKind::GatPool;
    a.n_blocks = 2;
    a.baseline_hidden = {64};
    return a;
  }
  static Architecture for_kind(ModelKind k) {
    switch (k) {
      case ModelKind::Mlp: return mlp();
      case ModelKind::GatPool: return gat_pool();
      default: return bgat();
    }
  }
};

inline void to_json(nlohmann::json& j, const Architecture& a) {
  j = {{"kind", to_string(a.kind)},
       {"n_blocks", a.n_blocks},
       {"heads", a.heads},
       {"head_width", a.head_width},
       {"node_mlp", a.node_mlp},
       {"share_attention", a.share_attention},
       {"feed_projected", a.feed_projected},
       {"baseline_hidden", a.baseline_hidden},
       {"bias_init", a.bias_init},
       {"normalize_features", a.graph.normalize}};
}

inline void from_json(const nlohmann::json& j, Architecture& a) {
  a = Architecture::for_kind(model_kind_from_string(j.value("kind", std::string("bgat"))));
  a.n_blocks = j.value("n_blocks", a.n_blocks);
  a.heads = j.value("heads", a.heads);
  a.head_width = j.value("head_width", a.head_width);
  a.node_mlp = j.value("node_mlp", a.node_mlp);
  a.share_attention = j.value("share_attention", a.share_attention);
  a.feed_projected = j.value("feed_projected", a.feed_projected);
  a.baseline_hidden = j.value("baseline_hidden", a.baseline_hidden);
  a.bias_init = j.value("bias_init", a.bias_init);
  a.graph.normalize = j.value("normalize_features", a.graph.normalize);
}

/// What a parameter set was built for. `n_users` only constrains the MLP
/// baseline; graph models record the training M for bookkeeping.
struct ModelSpec {
  Architecture arch;
  int n_antennas = 4;
  int n_users = 2;
};

namespace detail {

inline void add_head_params(std::vector<diff::ParamSpec>& out, const std::string& prefix, int width,
                            int in, bool with_edge) {
  out.push_back({prefix + ".a", 1, width, width, false});
  out.push_back({prefix + ".w_s", width, in, in, false});
  out.push_back({prefix + ".w_t", width, in, in, false});
  if (with_edge) out.push_back({prefix + ".w_e", 1, width, 1, false});
}

inline void add_dense(std::vector<diff::ParamSpec>& out, const std::string& prefix, int in, int outw) {
  out.push_back({prefix + ".w", outw, in, in, false});
  out.push_back({prefix + ".b", 1, outw, in, true});
}

}  // namespace detail

/// Parameter shapes in flat-index order:
///   BGAT: per block d ascending: per head k ascending (a, w_s, w_t, w_e);
///         [unshared: antenna-direction heads likewise]; w_r; node MLP layers
///         (w, b); readout_delta (w, b) x 2; readout_power (w, b) x 2.
///   MLP:  dense layers (w, b) in order.
///   GAT:  per layer: heads (a, w_s, w_t), w_r; then head MLP (w, b).
inline std::vector<diff::ParamSpec> param_shapes(const ModelSpec& ms) {
  const Architecture& a = ms.arch;
  const int n = ms.n_antennas;
  const int fw = a.head_width, k = a.heads, gw = a.gat_width();
  std::vector<diff::ParamSpec> out;
  switch (a.kind) {
    case ModelKind::Bgat: {
      const int in = 2;
      if (a.node_mlp.empty() || a.node_mlp.back() != 2)
        throw std::invalid_argument("BGAT node MLP must end in width 2");
      for (int d = 0; d < a.n_blocks; ++d) {
        const std::string b = "block" + std::to_string(d);
        for (int h = 0; h < k; ++h) detail::add_head_params(out, b + ".head" + std::to_string(h), fw, in, true);
        if (!a.share_attention)
          for (int h = 0; h < k; ++h)
            detail::add_head_params(out, b + ".ant_head" + std::to_string(h), fw, in, true);
        out.push_back({b + ".w_r", gw, in, in, false});
        int prev = gw;
        for (std::size_t t = 0; t < a.node_mlp.size(); ++t) {
          detail::add_dense(out, b + ".mlp" + std::to_string(t), prev, a.node_mlp[t]);
          prev = a.node_mlp[t];
        }
        detail::add_dense(out, b + ".readout_delta0", n, 2 * n);
        detail::add_dense(out, b + ".readout_delta1", 2 * n, n);
        detail::add_dense(out, b + ".readout_power0", n, 2 * n);
        detail::add_dense(out, b + ".readout_power1", 2 * n, n);
      }
      break;
    }
    case ModelKind::Mlp: {
      int prev = 2 * ms.n_users;
      for (std::size_t t = 0; t < a.baseline_hidden.size(); ++t) {
        detail::add_dense(out, "mlp" + std::to_string(t), prev, a.baseline_hidden[t]);
        prev = a.baseline_hidden[t];
      }
      detail::add_dense(out, "mlp_out", prev, 2 * n);
      break;
    }
    case ModelKind::GatPool: {
      int in = 2;
      for (int l = 0; l < a.n_blocks; ++l) {
        const std::string b = "layer" + std::to_string(l);
        for (int h = 0; h < k; ++h) detail::add_head_params(out, b + ".head" + std::to_string(h), fw, in, false);
        out.push_back({b + ".w_r", gw, in, in, false});
        in = gw;
      }
      int prev = gw;
      for (std::size_t t = 0; t < a.baseline_hidden.size(); ++t) {
        detail::add_dense(out, "head_mlp" + std::to_string(t), prev, a.baseline_hidden[t]);
        prev = a.baseline_hidden[t];
      }
      detail::add_dense(out, "head_out", prev, 2 * n);
      break;
    }
  }
  return out;
}

}  // namespace pagnn
