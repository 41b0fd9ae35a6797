#pragma once

#include <cmath>
#include <stdexcept>

#include "pagnn/diffkit/params.hpp"

namespace pagnn::diff {

struct AdamHyper {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  ParamSet m;  // first moment
  ParamSet v;  // second moment
  long step = 0;

  static AdamState for_params(const ParamSet& theta, AdamHyper h = {}) {
    return AdamState{h, theta.zeros_like(), theta.zeros_like(), 0};
  }
};

/// One bias-corrected Adam step, in place. Gradient is of the quantity being
/// minimized.
inline void adam_step(ParamSet& theta, const ParamSet& grad, AdamState& st) {
  if (!theta.same_shapes(grad) || !theta.same_shapes(st.m))
    throw std::invalid_argument("adam_step: shape mismatch between parameters, gradient and state");
  ++st.step;
  const auto& h = st.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.step));
  for (int i = 0; i < theta.entries(); ++i) {
    Mat& m = st.m[i];
    Mat& v = st.v[i];
    const Mat& g = grad[i];
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    theta[i].array() -= h.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + h.eps);
  }
}

}  // namespace pagnn::diff
