#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pagnn/core_model.hpp"
#include "pagnn/sca/barrier.hpp"

namespace pagnn::sca {

using CMat = Eigen::MatrixXcd;

/// Centered array around the origin on the waveguide, spacing exactly the
/// guard distance: x_n = (n - (N+1)/2) * guard.
inline AntennaPlacement fixed_placement(const SystemConfig& cfg) {
  AntennaPlacement out;
  out.x.resize(static_cast<std::size_t>(cfg.n_antennas));
  const int n_ant = cfg.n_antennas;
  const double gap = cfg.guard_distance;
  // right half built outward with every gap at least Δ after rounding, then mirrored
  const int mid = n_ant / 2;
  for (int n = mid; n < n_ant; ++n) {
    double x = (n + 1 - (n_ant + 1) / 2.0) * gap;
    if (n == mid) {
      if (n_ant % 2 == 0)
        while (x + x < gap) x = std::nextafter(x, INFINITY);
    } else {
      while (x - out.x[static_cast<std::size_t>(n - 1)] < gap) x = std::nextafter(x, INFINITY);
    }
    out.x[static_cast<std::size_t>(n)] = x;
  }
  for (int n = 0; n < mid; ++n) out.x[static_cast<std::size_t>(n)] = -out.x[static_cast<std::size_t>(n_ant - 1 - n)];
  return out;
}

/// M x N effective channel for a fixed placement (free-space and
/// in-waveguide phase included).
inline CMat fixed_channel(const SystemConfig& cfg, const UserLayout& layout, const AntennaPlacement& placement) {
  CMat h(static_cast<Eigen::Index>(layout.size()), static_cast<Eigen::Index>(placement.x.size()));
  for (std::size_t m = 0; m < layout.size(); ++m)
    for (std::size_t n = 0; n < placement.x.size(); ++n)
      h(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) =
          effective_channel(cfg, layout.positions[m], placement.x[n]);
  return h;
}

inline CMat fixed_channel(const SystemConfig& cfg, const UserLayout& layout) {
  return fixed_channel(cfg, layout, fixed_placement(cfg));
}

/// EE of square-root powers q (p_n = q_n^2) under channel h.
inline double ee_from_sqrt_power(const CMat& h, const Vec& q, const SystemConfig& cfg) {
  double rates = 0.0;
  for (Eigen::Index m = 0; m < h.rows(); ++m) {
    const std::complex<double> s = h.row(m) * q.cast<std::complex<double>>();
    rates += cfg.slot_length * std::log2(1.0 + std::norm(s) / cfg.noise_power);
  }
  return rates / (q.squaredNorm() + cfg.static_power);
}

/// Anchor point of the successive convex approximation.
struct SCAState {
  Vec sqrt_power;         // p~, sqrt(watts)
  double log_ee = 0.0;    // a~
  double log_power = 0.0; // b~
  int iteration = 0;
  std::vector<double> beta_history;

  static SCAState at(const CMat& h, const Vec& q, const SystemConfig& cfg) {
    SCAState s;
    s.sqrt_power = q;
    s.log_ee = std::log(ee_from_sqrt_power(h, q, cfg));
    s.log_power = std::log(q.squaredNorm() + cfg.static_power);
    return s;
  }
};

struct SubproblemResult {
  Vec sqrt_power;
  Vec alpha;  // per-user rate bounds, bits
  double beta = 0.0;
  double a = 0.0;
  double b = 0.0;
  double gap = 0.0;
  int newton_steps = 0;
};

/// Variables z = [q (N), alpha (M), beta, a, b]; maximizes beta over the
/// convex restriction built at `state`:
///   (2^alpha_m - 1) sigma^2 <= 2 Re{conj(s~_m) h_m q} - |s~_m|^2
///   sum alpha >= exp(a + b)
///   beta <= exp(a~) (1 + a - a~)
///   ||q||^2 + P_C <= exp(b~) (1 + b - b~)
///   ||q||^2 <= P_max,  q >= 0
/// with s~_m = h_m q~.  Slot length scales the objective only.
inline SubproblemResult solve_subproblem(const CMat& h, const SystemConfig& cfg, const SCAState& state,
                                         const BarrierOptions& opt = {}) {
  const auto N = h.cols(), M = h.rows();
  const Eigen::Index ia = N, ib = N + M, ic = N + M + 1, id = N + M + 2;
  const Eigen::Index dim = N + M + 3;
  const double sigma2 = cfg.noise_power;
  const Vec& qa = state.sqrt_power;
  const double ea = std::exp(state.log_ee), eb = std::exp(state.log_power);

  // Linearized received power, scaled by 1/sigma^2: lin_m(q) = c_m . q - k_m.
  Mat c(M, N);
  Vec k(M);
  for (Eigen::Index m = 0; m < M; ++m) {
    const std::complex<double> s = h.row(m) * qa.cast<std::complex<double>>();
    for (Eigen::Index n = 0; n < N; ++n) c(m, n) = 2.0 * std::real(std::conj(s) * h(m, n)) / sigma2;
    k(m) = std::norm(s) / sigma2;
  }

  ConvexProgram prog;
  prog.objective = Vec::Zero(dim);
  prog.objective(ib) = -1.0;
  const double ln2 = std::numbers::ln2;
  for (Eigen::Index m = 0; m < M; ++m)
    prog.constraints.push_back([=](const Vec& z, bool d, Vec& g, Mat& H) {
      const double pw = std::exp2(z(ia + m));
      if (d) {
        g.head(N) = -c.row(m).transpose();
        g(ia + m) = ln2 * pw;
        H(ia + m, ia + m) = ln2 * ln2 * pw;
      }
      return pw - 1.0 - (c.row(m).dot(z.head(N)) - k(m));
    });
  prog.constraints.push_back([=](const Vec& z, bool d, Vec& g, Mat& H) {
    const double e = std::exp(z(ic) + z(id));
    if (d) {
      g.segment(ia, M).setConstant(-1.0);
      g(ic) = g(id) = e;
      H(ic, ic) = H(ic, id) = H(id, ic) = H(id, id) = e;
    }
    return e - z.segment(ia, M).sum();
  });
  prog.constraints.push_back([=](const Vec& z, bool d, Vec& g, Mat&) {
    if (d) {
      g(ib) = 1.0;
      g(ic) = -ea;
    }
    return z(ib) - ea * (1.0 + z(ic) - state.log_ee);
  });
  const double pc = cfg.static_power, pmax = cfg.power_budget;
  prog.constraints.push_back([=](const Vec& z, bool d, Vec& g, Mat& H) {
    if (d) {
      g.head(N) = 2.0 * z.head(N);
      g(id) = -eb;
      H.topLeftCorner(N, N).diagonal().setConstant(2.0);
    }
    return z.head(N).squaredNorm() + pc - eb * (1.0 + z(id) - state.log_power);
  });
  prog.constraints.push_back([=](const Vec& z, bool d, Vec& g, Mat& H) {
    if (d) {
      g.head(N) = 2.0 * z.head(N);
      H.topLeftCorner(N, N).diagonal().setConstant(2.0);
    }
    return z.head(N).squaredNorm() - pmax;
  });
  for (Eigen::Index n = 0; n < N; ++n)
    prog.constraints.push_back([=](const Vec& z, bool d, Vec& g, Mat&) {
      if (d) g(n) = -1.0;
      return -z(n);
    });

  // Strictly feasible start near the anchor.
  constexpr double kBlend = 1e-3, kMargin = 1e-3;
  Vec z0(dim);
  const Vec uniform = Vec::Constant(N, std::sqrt(pmax / static_cast<double>(N)));
  z0.head(N) = (1.0 - kBlend) * qa.cwiseMax(0.0) + 0.5 * kBlend * uniform;
  for (Eigen::Index m = 0; m < M; ++m) {
    const double lin = c.row(m).dot(z0.head(N)) - k(m);
    if (!(lin > -1.0)) throw SolverError("SCA: cannot build a strictly feasible start (user " + std::to_string(m) + ")");
    z0(ia + m) = std::log2(1.0 + lin) - kMargin;
  }
  z0(id) = state.log_power - 1.0 + (z0.head(N).squaredNorm() + pc) / eb + kMargin;
  const double alpha_sum = z0.segment(ia, M).sum();
  if (!(alpha_sum > 0.0)) throw SolverError("SCA: anchor gives no positive rate");
  z0(ic) = std::log(alpha_sum) - z0(id) - kMargin;
  z0(ib) = ea * (1.0 + z0(ic) - state.log_ee) - kMargin;

  const BarrierResult r = solve_barrier(prog, z0, opt);
  SubproblemResult out;
  out.sqrt_power = r.z.head(N);
  out.alpha = r.z.segment(ia, M);
  out.beta = r.z(ib);
  out.a = r.z(ic);
  out.b = r.z(id);
  out.gap = r.gap;
  out.newton_steps = r.newton_steps;
  return out;
}

struct SCAIterate {
  int iteration;
  double beta;       // subproblem optimum (lower bound on EE)
  double ee;         // exact EE of the iterate
  double gap;        // barrier duality gap bound
  int newton_steps;
};

struct SCAResult {
  PowerAllocation power;
  double ee = 0.0;
  double initial_ee = 0.0;
  std::vector<SCAIterate> history;
  bool converged = false;
};

struct SCAOptions {
  double tol = 1e-6;  // relative change of beta
  int max_iter = 100;
  BarrierOptions barrier;
};

/// Power-only EE maximization for a fixed placement by successive convex
/// approximation, starting from uniform power.
inline SCAResult sca_solve(const SystemConfig& cfg, const UserLayout& layout, const AntennaPlacement& placement,
                           const SCAOptions& opt = {}) {
  cfg.validate();
  const CMat h = fixed_channel(cfg, layout, placement);
  const auto N = h.cols();
  Vec q = Vec::Constant(N, std::sqrt(cfg.power_budget / static_cast<double>(N)));
  SCAState st = SCAState::at(h, q, cfg);
  SCAResult res;
  res.initial_ee = ee_from_sqrt_power(h, q, cfg);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iter; ++it) {
    const SubproblemResult sub = solve_subproblem(h, cfg, st, opt.barrier);
    q = sub.sqrt_power.cwiseMax(0.0);
    const double ee = ee_from_sqrt_power(h, q, cfg);
    st = SCAState::at(h, q, cfg);
    st.iteration = it + 1;
    res.history.push_back({it + 1, sub.beta, ee, sub.gap, sub.newton_steps});
    if (it > 0 && std::abs(sub.beta - prev) <= opt.tol * std::abs(prev)) {
      res.converged = true;
      break;
    }
    prev = sub.beta;
  }
  res.power.p.resize(static_cast<std::size_t>(N));
  for (Eigen::Index n = 0; n < N; ++n) res.power.p[static_cast<std::size_t>(n)] = q(n) * q(n);
  res.ee = energy_efficiency(cfg, layout, {placement, res.power});
  return res;
}

inline SCAResult sca_solve(const SystemConfig& cfg, const UserLayout& layout, const SCAOptions& opt = {}) {
  return sca_solve(cfg, layout, fixed_placement(cfg), opt);
}

/// CSV trace: iteration,beta,ee,gap,newton_steps
inline void write_trace_csv(std::ostream& os, const SCAResult& r) {
  os << "iteration,beta,ee,gap,newton_steps\n";
  os.precision(17);
  for (const auto& h : r.history)
    os << h.iteration << ',' << h.beta << ',' << h.ee << ',' << h.gap << ',' << h.newton_steps << '\n';
}

/// Best exact EE over a uniform power grid {k P_max / (res - 1)} restricted
/// to sum p <= P_max, for a given placement.
inline double grid_oracle(const SystemConfig& cfg, const UserLayout& layout, const AntennaPlacement& placement,
                          int resolution) {
  const int n = static_cast<int>(placement.x.size());
  if (n > 3) throw std::invalid_argument("grid_oracle: N <= 3 required (got " + std::to_string(n) + ")");
  if (resolution < 2) throw std::invalid_argument("grid_oracle: resolution must be >= 2");
  const CMat h = fixed_channel(cfg, layout, placement);
  const double step = cfg.power_budget / (resolution - 1);
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  Vec q(n);
  double best = 0.0;
  while (true) {
    int used = 0;
    for (int v : idx) used += v;
    if (used <= resolution - 1) {
      for (int i = 0; i < n; ++i) q(i) = std::sqrt(idx[static_cast<std::size_t>(i)] * step);
      best = std::max(best, ee_from_sqrt_power(h, q, cfg));
    }
    int i = 0;
    while (i < n && ++idx[static_cast<std::size_t>(i)] >= resolution) idx[static_cast<std::size_t>(i++)] = 0;
    if (i == n) break;
  }
  return best;
}

}  // namespace pagnn::sca
