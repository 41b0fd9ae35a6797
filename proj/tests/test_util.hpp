#pragma once

#include <random>
#include <vector>

#include "pagnn/bgat/projection.hpp"
#include "pagnn/core_model.hpp"

namespace pagnn::test {

inline Vec3 random_user(const SystemConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-c.half_range, c.half_range);
  const double x = u(rng);
  return {x, u(rng), 0.0};
}

inline UserLayout random_layout(const SystemConfig& c, int m, std::mt19937_64& rng) {
  UserLayout l;
  for (int i = 0; i < m; ++i) l.positions.push_back(random_user(c, rng));
  return l;
}

/// Random placement through the interval parameterization and random powers
/// with a random total in [0, P_max].
inline Solution random_feasible_solution(const SystemConfig& c, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(c.n_antennas);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n + 1), p(n);
  double ws = 0, ps = 0;
  for (double& v : w) ws += (v = u(rng));
  for (double& v : p) ps += (v = u(rng));
  const double budget = derived_constants(c).spacing_budget;
  std::vector<double> delta(n);
  for (std::size_t i = 0; i < n; ++i) delta[i] = budget * w[i] / ws;
  const double total = c.power_budget * u(rng);
  for (double& v : p) v *= total / ps;
  return {positions_from_deltas(delta, c), {p}};
}

}  // namespace pagnn::test
