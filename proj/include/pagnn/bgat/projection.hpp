#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pagnn/core_model.hpp"
#include "pagnn/diffkit/ops.hpp"

namespace pagnn {

namespace detail {

inline double ordered_sum(const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s;
}

/// budget / s, lowered by ulps until the ordered sum of k v fits the budget,
/// so that scaling a second time takes the identity branch.
inline double budget_factor(const double* v, std::size_t n, double s, double budget) {
  double k = budget / s;
  for (;;) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += v[i] * k;
    if (t <= budget) return k;
    k = std::nextafter(k, 0.0);
  }
}

/// Ulp-level repair of accumulated positions: every computed gap at least
/// `guard`, then the right end pulled back inside `half`.
inline void enforce_spacing(double* x, std::size_t n, double guard, double half) {
  for (std::size_t i = 1; i < n; ++i)
    while (x[i] - x[i - 1] < guard) x[i] = std::nextafter(x[i], INFINITY);
  if (n == 0 || x[n - 1] <= half) return;
  x[n - 1] = half;
  for (std::size_t i = n - 1; i > 0; --i)
    while (x[i] - x[i - 1] < guard) x[i - 1] = std::nextafter(x[i - 1], -INFINITY);
}

}  // namespace detail

/// v * budget / max(budget, sum v). Identity when the budget is not exceeded
/// (ties included), otherwise a uniform shrink onto sum == budget.
inline std::vector<double> scale_to_budget(std::vector<double> v, double budget) {
  const double s = detail::ordered_sum(v.data(), v.size());
  if (s <= budget) return v;
  const double k = detail::budget_factor(v.data(), v.size(), s, budget);
  for (double& e : v) e *= k;
  return v;
}

/// x_1 = delta_1 - D,  x_n = x_{n-1} + delta_n + guard. With delta >= 0 and
/// sum delta <= B_max the result satisfies spacing and range constraints.
inline AntennaPlacement positions_from_deltas(const std::vector<double>& delta, const SystemConfig& cfg) {
  AntennaPlacement out;
  out.x.resize(delta.size());
  double x = -cfg.waveguide_half_length;
  for (std::size_t n = 0; n < delta.size(); ++n) {
    x += delta[n] + (n == 0 ? 0.0 : cfg.guard_distance);
    out.x[n] = x;
  }
  detail::enforce_spacing(out.x.data(), out.x.size(), cfg.guard_distance, cfg.waveguide_half_length);
  return out;
}

/// Edge lengths ||u_m - psi_n|| (M x N) divided by `length_scale`.
inline Eigen::MatrixXd edge_lengths(const SystemConfig& cfg, const UserLayout& layout,
                                    const std::vector<double>& x, double length_scale) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(layout.size()), static_cast<Eigen::Index>(x.size()));
  for (std::size_t m = 0; m < layout.size(); ++m)
    for (std::size_t n = 0; n < x.size(); ++n)
      e(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) =
          (layout.positions[m] - antenna_position(cfg, x[n])).norm() / length_scale;
  return e;
}

namespace ops {

using diff::Mat;
using diff::Tape;
using diff::Var;

/// Differentiable scale_to_budget on a 1 x N row. At sum == budget the
/// identity branch is taken.
inline Var scale_to_budget(const Var& v, double budget) {
  const Mat& val = v.value();
  const auto n = static_cast<std::size_t>(val.size());
  const double s = pagnn::detail::ordered_sum(val.data(), n);
  if (s <= budget) {
    const int vi = v.id;
    return v.tape->record(v.value(), {v}, "scale_to_budget",
                          [vi](Tape& tp, int self) { tp.add_grad(vi, tp.grad(self)); });
  }
  const int vi = v.id;
  return v.tape->record(val * pagnn::detail::budget_factor(val.data(), n, s, budget), {v}, "scale_to_budget",
                        [vi, budget, s](Tape& tp, int self) {
                          const Mat& g = tp.grad(self);
                          const double gv = g.cwiseProduct(tp.value(vi)).sum();
                          tp.add_grad(vi, ((g * (budget / s)).array() - budget * gv / (s * s)).matrix());
                        });
}

/// Positions in meters (1 x N) from normalized deltas (1 x N), where the
/// physical delta is delta_norm * length_scale.
inline Var positions_from_deltas(const Var& delta_norm, const SystemConfig& cfg, double length_scale) {
  const Mat& d = delta_norm.value();
  Mat x(1, d.cols());
  double acc = -cfg.waveguide_half_length;
  for (Eigen::Index n = 0; n < d.cols(); ++n) {
    acc += d(0, n) * length_scale + (n == 0 ? 0.0 : cfg.guard_distance);
    x(0, n) = acc;
  }
  pagnn::detail::enforce_spacing(x.data(), static_cast<std::size_t>(x.size()), cfg.guard_distance,
                                 cfg.waveguide_half_length);
  const int di = delta_norm.id;
  return delta_norm.tape->record(std::move(x), {delta_norm}, "positions_from_deltas",
                                 [di, length_scale](Tape& tp, int self) {
                                   const Mat& g = tp.grad(self);
                                   Mat gd(1, g.cols());
                                   double run = 0.0;
                                   for (Eigen::Index n = g.cols() - 1; n >= 0; --n) {
                                     run += g(0, n);
                                     gd(0, n) = run * length_scale;
                                   }
                                   tp.add_grad(di, gd);
                                 });
}

/// Normalized edge features (M x N) for antenna positions x (1 x N, meters).
inline Var edge_lengths(const Var& x, const SystemConfig& cfg, const UserLayout& layout,
                        double length_scale) {
  const Mat& xv = x.value();
  std::vector<double> xs(xv.data(), xv.data() + xv.size());
  Mat e = pagnn::edge_lengths(cfg, layout, xs, length_scale);
  const int xi = x.id;
  return x.tape->record(std::move(e), {x}, "edge_lengths",
                        [xi, &layout, length_scale](Tape& tp, int self) {
                          const Mat& g = tp.grad(self);
                          const Mat& e = tp.value(self);
                          const Mat& xv = tp.value(xi);
                          Mat gx = Mat::Zero(1, xv.cols());
                          for (Eigen::Index m = 0; m < e.rows(); ++m)
                            for (Eigen::Index n = 0; n < e.cols(); ++n) {
                              const double dist = e(m, n) * length_scale;
                              const double dx = xv(0, n) - layout.positions[static_cast<std::size_t>(m)].x();
                              gx(0, n) += g(m, n) * dx / (dist * length_scale);
                            }
                          tp.add_grad(xi, gx);
                        });
}

}  // namespace ops
}  // namespace pagnn
