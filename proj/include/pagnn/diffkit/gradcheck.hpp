#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "pagnn/diffkit/params.hpp"

namespace pagnn::diff {

struct GradCheckEntry {
  std::size_t coord;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;

  bool passed(double tol) const { return max_rel_error <= tol; }
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is ~0 from dividing round-off by round-off.
inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

/// Denominator floor at which central-difference round-off in f (about
/// 10 eps |f| / h) stays within `tol` relative error.
inline double round_off_floor(double f_value, double h, double tol) {
  return 10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f_value)) / (h * tol);
}

/// Central differences (f(t + h) - f(t - h)) / 2h on the listed flat
/// coordinates, compared against `analytic`.
inline GradCheckResult finite_difference_check(const std::function<double(const ParamSet&)>& f,
                                               const ParamSet& theta, const ParamSet& analytic,
                                               const std::vector<std::size_t>& coords, double h,
                                               double floor) {
  GradCheckResult out;
  ParamSet probe = theta;
  for (std::size_t k : coords) {
    const double orig = probe.flat(k);
    probe.flat(k) = orig + h;
    const double fp = f(probe);
    probe.flat(k) = orig - h;
    const double fm = f(probe);
    probe.flat(k) = orig;
    const double num = (fp - fm) / (2.0 * h);
    const double ana = analytic.flat(k);
    const double err = relative_error(ana, num, floor);
    out.entries.push_back({k, ana, num, err});
    out.max_rel_error = std::max(out.max_rel_error, err);
  }
  return out;
}

/// `count` distinct flat coordinates drawn uniformly with the given seed.
inline std::vector<std::size_t> sample_coordinates(std::size_t total, std::size_t count,
                                                   std::uint64_t seed) {
  std::vector<std::size_t> all(total);
  for (std::size_t i = 0; i < total; ++i) all[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(count, total));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace pagnn::diff
