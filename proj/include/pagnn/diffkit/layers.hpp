#pragma once

#include <vector>

#include "pagnn/diffkit/ops.hpp"

namespace pagnn::diff {

/// Parameters of one attention head, already bound to a tape.
/// a, w_e: 1 x F~;  w_s, w_t: F~ x F.  w_e is left invalid for edge-free graphs.
struct HeadVars {
  Var a;
  Var w_s;
  Var w_t;
  Var w_e;
};

struct GatLayerVars {
  std::vector<HeadVars> heads;
  Var w_r;  // (F~ K) x F residual
};

struct DenseVars {
  Var w;  // out x in
  Var b;  // 1 x out
  bool relu = true;
};

/// Attention weights alpha(i, j) of rows `self_x` over neighbour rows
/// `nbr_x`; each row sums to one.
inline Var attention_scores(const HeadVars& h, const Var& self_x, const Var& nbr_x, const Var& edges) {
  const Var src = linear(self_x, h.w_s);
  const Var nbr = linear(nbr_x, h.w_t);
  return row_softmax(attention_logits(src, nbr, edges, h.w_e, h.a));
}

/// Aggregate, concatenate heads, add residual, ReLU for the rows of `self_x`
/// attending over `nbr_x`. Output is |self| x (F~ K).
inline Var gat_update(const GatLayerVars& layer, const Var& self_x, const Var& nbr_x, const Var& edges) {
  std::vector<Var> per_head;
  per_head.reserve(layer.heads.size());
  for (const auto& h : layer.heads) {
    const Var src = linear(self_x, h.w_s);
    const Var nbr = linear(nbr_x, h.w_t);
    const Var alpha = row_softmax(attention_logits(src, nbr, edges, h.w_e, h.a));
    per_head.push_back(matmul(alpha, nbr));
  }
  const Var combined = per_head.size() == 1 ? per_head.front() : concat_cols(per_head);
  return relu(add(combined, linear(self_x, layer.w_r)));
}

struct BipartiteEmbeddings {
  Var users;     // M x (F~ K)
  Var antennas;  // N x (F~ K)
};

/// One GAT block on the complete bipartite graph: every user attends over
/// all antennas and every antenna over all users. `edges` is M x N.
/// `user_side` drives the users' update, `antenna_side` the antennas'; pass
/// the same layer twice to share attention parameters across directions.
inline BipartiteEmbeddings gat_block_forward(const GatLayerVars& user_side,
                                             const GatLayerVars& antenna_side, const Var& users,
                                             const Var& antennas, const Var& edges) {
  const Var edges_t = transpose(edges);
  return {gat_update(user_side, users, antennas, edges),
          gat_update(antenna_side, antennas, users, edges_t)};
}

/// GAT layer on a fully connected homogeneous graph with self loops and no
/// edge features.
inline Var gat_layer_forward(const GatLayerVars& layer, const Var& x) {
  return gat_update(layer, x, x, Var{});
}

/// Stacked dense layers applied to each row of x.
inline Var mlp_forward(const std::vector<DenseVars>& layers, Var x) {
  for (const auto& l : layers) {
    x = linear(x, l.w, l.b);
    if (l.relu) x = relu(x);
  }
  return x;
}

}  // namespace pagnn::diff
