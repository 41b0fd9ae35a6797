#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "pagnn/core_model.hpp"
#include "pagnn/diffkit/tape.hpp"

namespace pagnn {

/// Unsupervised training loss: -(sum_m R_m) / (sum_n p_n + P_C), i.e. the
/// negative energy efficiency with unit slot length.
inline double unsupervised_loss(const SystemConfig& cfg, const UserLayout& layout, const Solution& sol) {
  double rates = 0.0;
  for (const auto& u : layout.positions) rates += user_rate(cfg, u, sol);
  return -rates / (sol.power.total() + cfg.static_power);
}

namespace ops {

/// Differentiable unsupervised loss of positions x (1 x N, meters) and
/// powers p (1 x N, watts). `layout` must outlive the tape's backward pass.
///
/// d sqrt(p_n) / d p_n is taken as 0 at p_n == 0 (same convention as
/// relu'(0) = 0); a zero power fed by a ReLU carries no gradient anyway.
inline diff::Var neg_energy_efficiency(const diff::Var& x, const diff::Var& p, const SystemConfig& cfg,
                                       const UserLayout& layout) {
  using diff::Mat;
  const Mat& xv = x.value();
  const Mat& pv = p.value();
  const double lambda = kSpeedOfLight / cfg.carrier_freq;
  const double lambda_g = lambda / cfg.refractive_index;
  const double k0 = 2.0 * std::numbers::pi / lambda;
  const double kg = 2.0 * std::numbers::pi / lambda_g;
  const double sqrt_eta = kSpeedOfLight / (4.0 * std::numbers::pi * cfg.carrier_freq);
  const auto N = xv.cols();
  const auto M = static_cast<Eigen::Index>(layout.size());

  // Per-user complex sum S_m = sum_n sqrt(p_n) g_mn.
  std::vector<Complex> s(static_cast<std::size_t>(M));
  double rates = 0.0;
  for (Eigen::Index m = 0; m < M; ++m) {
    const Vec3& u = layout.positions[static_cast<std::size_t>(m)];
    Complex acc{0.0, 0.0};
    for (Eigen::Index n = 0; n < N; ++n) {
      const double d = (u - antenna_position(cfg, xv(0, n))).norm();
      const double phase = k0 * d + kg * (xv(0, n) + cfg.waveguide_half_length);
      acc += std::sqrt(std::max(pv(0, n), 0.0)) * std::polar(sqrt_eta / d, -phase);
    }
    s[static_cast<std::size_t>(m)] = acc;
    rates += std::log2(1.0 + std::norm(acc) / cfg.noise_power);
  }
  const double consumed = pv.sum() + cfg.static_power;
  Mat out(1, 1);
  out(0, 0) = -rates / consumed;

  const int xi = x.id, pi = p.id;
  return x.tape->record(
      std::move(out), {x, p}, "neg_energy_efficiency",
      [=, &cfg, &layout](diff::Tape& tp, int self) {
        const double g = tp.grad(self)(0, 0);
        const Mat& xv = tp.value(xi);
        const Mat& pv = tp.value(pi);
        Mat gx = Mat::Zero(1, N), gp = Mat::Zero(1, N);
        for (Eigen::Index m = 0; m < M; ++m) {
          const Vec3& u = layout.positions[static_cast<std::size_t>(m)];
          const Complex sm = s[static_cast<std::size_t>(m)];
          // d R_m / d |S_m|^2
          const double dr = 1.0 / (std::numbers::ln2 * (cfg.noise_power + std::norm(sm)));
          for (Eigen::Index n = 0; n < N; ++n) {
            const double d = (u - antenna_position(cfg, xv(0, n))).norm();
            const double phase = k0 * d + kg * (xv(0, n) + cfg.waveguide_half_length);
            const Complex gmn = std::polar(sqrt_eta / d, -phase);
            const double root = std::sqrt(std::max(pv(0, n), 0.0));
            if (root > 0.0) gp(0, n) += dr * std::real(std::conj(sm) * gmn) / root;
            // d g / d x = g * [(-j k0 - 1/d) dd/dx - j kg]
            const double dd = (xv(0, n) - u.x()) / d;
            const Complex dg = gmn * (Complex(-1.0 / d, -k0) * dd + Complex(0.0, -kg));
            gx(0, n) += dr * 2.0 * root * std::real(std::conj(sm) * dg);
          }
        }
        // loss = -R / C:  dL/dR = -1/C,  dL/dp_n (through C) = R / C^2
        const double rsum = -tp.value(self)(0, 0) * consumed;
        tp.add_grad(xi, gx * (-g / consumed));
        tp.add_grad(pi, ((gp * (-g / consumed)).array() + g * rsum / (consumed * consumed)).matrix());
      });
}

}  // namespace ops
}  // namespace pagnn
