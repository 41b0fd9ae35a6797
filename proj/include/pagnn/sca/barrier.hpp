#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace pagnn::sca {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Convex inequality f(z) <= 0. Returns f(z); when `derivs` is set it also
/// writes the gradient and Hessian into `grad` / `hess`, which arrive zeroed.
using ConstraintFn = std::function<double(const Vec& z, bool derivs, Vec& grad, Mat& hess)>;

/// minimize c^T z  subject to  f_i(z) <= 0.
struct ConvexProgram {
  Vec objective;
  std::vector<ConstraintFn> constraints;
};

struct BarrierOptions {
  double t0 = 1.0;
  double mu = 20.0;
  double gap_tol = 1e-11;       // stop once m / t <= gap_tol
  double newton_tol = 1e-12;    // lambda^2 / 2 per centering step
  int max_newton_per_stage = 100;
  int max_stages = 60;
};

struct BarrierResult {
  Vec z;
  double objective = 0.0;
  double gap = 0.0;            // m / t, bound on suboptimality
  double newton_decrement = 0.0;
  int newton_steps = 0;
  bool converged = false;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Log-barrier interior-point method with Newton centering and
/// backtracking. `z0` must be strictly feasible.
inline BarrierResult solve_barrier(const ConvexProgram& prog, Vec z0, const BarrierOptions& opt = {}) {
  const auto n = z0.size();
  const auto m = static_cast<double>(prog.constraints.size());
  Vec g_i(n);
  Mat h_i(n, n);

  auto values = [&](const Vec& z, std::vector<double>& f) {
    f.resize(prog.constraints.size());
    for (std::size_t i = 0; i < prog.constraints.size(); ++i) {
      f[i] = prog.constraints[i](z, false, g_i, h_i);
      if (!(f[i] < 0.0)) return false;
    }
    return true;
  };
  auto merit = [&](const Vec& z, double t, double& out) {
    std::vector<double> f;
    if (!values(z, f)) return false;
    double phi = t * prog.objective.dot(z);
    for (double v : f) phi -= std::log(-v);
    out = phi;
    return std::isfinite(phi);
  };

  std::vector<double> f;
  if (!values(z0, f)) throw SolverError("barrier: starting point is not strictly feasible");

  BarrierResult res;
  Vec z = std::move(z0);
  double t = opt.t0;
  Vec grad(n);
  Mat hess(n, n);
  for (int stage = 0; stage < opt.max_stages; ++stage) {
    double lambda2 = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opt.max_newton_per_stage; ++it) {
      grad = t * prog.objective;
      hess.setZero();
      for (const auto& c : prog.constraints) {
        g_i.setZero();
        h_i.setZero();
        const double fv = c(z, true, g_i, h_i);
        const double inv = -1.0 / fv;  // > 0
        grad += inv * g_i;
        hess.noalias() += (inv * inv) * (g_i * g_i.transpose()) + inv * h_i;
      }
      Eigen::LDLT<Mat> ldlt(hess);
      Vec step = ldlt.solve(-grad);
      if (!step.allFinite()) throw SolverError("barrier: singular Newton system");
      lambda2 = -grad.dot(step);
      ++res.newton_steps;
      if (lambda2 / 2.0 <= opt.newton_tol) break;
      double phi0;
      merit(z, t, phi0);
      double s = 1.0;
      double phi;
      while (s > 1e-16) {
        const Vec trial = z + s * step;
        if (merit(trial, t, phi) && phi <= phi0 - 0.25 * s * lambda2) break;
        s *= 0.5;
      }
      if (s <= 1e-16) break;  // no further progress at this t
      z += s * step;
    }
    res.newton_decrement = std::sqrt(std::max(lambda2, 0.0));
    res.gap = m / t;
    if (res.gap <= opt.gap_tol) {
      res.converged = true;
      break;
    }
    t *= opt.mu;
  }
  res.z = z;
  res.objective = prog.objective.dot(z);
  if (!res.converged)
    throw SolverError("barrier: no convergence, gap " + std::to_string(res.gap) + ", Newton decrement " +
                      std::to_string(res.newton_decrement));
  return res;
}

}  // namespace pagnn::sca
