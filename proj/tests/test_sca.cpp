#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pagnn/sca/sca.hpp"
#include "test_util.hpp"

using namespace pagnn;
using namespace pagnn::sca;

namespace {

// Channel recomputed from scratch with long double exponentials.
std::complex<long double> naive_channel(const SystemConfig& c, const Vec3& u, double x) {
  const long double lambda = static_cast<long double>(kSpeedOfLight) / c.carrier_freq;
  const long double lambda_g = lambda / c.refractive_index;
  const long double dx = static_cast<long double>(u.x()) - x, dy = u.y(), dz = static_cast<long double>(u.z()) - c.height;
  const long double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  const Vec3 feed = c.feed_point();
  const long double fx = static_cast<long double>(x) - feed.x(), fy = -static_cast<long double>(feed.y()),
                    fz = static_cast<long double>(c.height) - feed.z();
  const long double fed = std::sqrt(fx * fx + fy * fy + fz * fz);
  const long double phase = 2.0L * std::numbers::pi_v<long double> * (d / lambda + fed / lambda_g);
  const long double g = static_cast<long double>(kSpeedOfLight) / (4.0L * std::numbers::pi_v<long double> * c.carrier_freq);
  return std::polar(g / d, -phase);
}

// EE of a single antenna and user at power p.
double ee_1d(const SystemConfig& c, double gain, double p) {
  return c.slot_length * std::log2(1.0 + gain * p / c.noise_power) / (p + c.static_power);
}

}  // namespace

TEST(FixedPlacement, CenteredWithGuardSpacing) {
  auto c = SystemConfig::defaults(2, 1);
  c.guard_distance = 0.025;
  const auto p = fixed_placement(c);
  EXPECT_DOUBLE_EQ(p.x[0], -0.0125);
  EXPECT_DOUBLE_EQ(p.x[1], 0.0125);

  const auto c4 = SystemConfig::defaults(4, 1);
  const auto p4 = fixed_placement(c4);
  for (int n = 0; n < 4; ++n) EXPECT_DOUBLE_EQ(p4.x[static_cast<std::size_t>(n)], -p4.x[static_cast<std::size_t>(3 - n)]);
  EXPECT_TRUE(check_feasible(c4, {p4, {{0.1, 0.1, 0.1, 0.1}}}, 0.0).ok);
}

TEST(FixedChannel, ComposesCoreChannel) {
  const auto c = SystemConfig::defaults(4, 3);
  std::mt19937_64 rng(1);
  const auto layout = test::random_layout(c, 3, rng);
  const auto place = fixed_placement(c);
  const CMat h = fixed_channel(c, layout);
  const double sqrt_eta = std::sqrt(derived_constants(c).path_gain);
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 4; ++n) {
      const auto& u = layout.positions[static_cast<std::size_t>(m)];
      const double x = place.x[static_cast<std::size_t>(n)];
      EXPECT_EQ(h(m, n), effective_channel(c, u, x));
      // free-space coefficient rotated by the in-waveguide phase; that phase
      // is an unreduced double of ~1e4 rad, hence the looser bound
      const std::complex<long double> rot =
          std::complex<long double>(channel_coefficient(c, u, x)) *
          std::polar(1.0L, -static_cast<long double>(in_waveguide_phase(c, x)));
      EXPECT_LE(std::abs(std::complex<long double>(h(m, n)) - rot) / std::abs(rot), 1e-10);
      const double d = (u - antenna_position(c, x)).norm();
      EXPECT_NEAR(std::abs(h(m, n)), sqrt_eta / d, 1e-15 * sqrt_eta / d);
    }
}

TEST(FixedChannel, MatchesNaiveOracle) {
  const auto c = SystemConfig::defaults(3, 2);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto layout = test::random_layout(c, 2, rng);
    const auto place = test::random_feasible_solution(c, rng).placement;
    const CMat h = fixed_channel(c, layout, place);
    for (int m = 0; m < 2; ++m)
      for (int n = 0; n < 3; ++n) {
        const auto ref = naive_channel(c, layout.positions[static_cast<std::size_t>(m)], place.x[static_cast<std::size_t>(n)]);
        EXPECT_LE(static_cast<double>(std::abs(std::complex<long double>(h(m, n)) - ref) / std::abs(ref)), 1e-12);
      }
  }
}

TEST(Subproblem, AnchorAtOptimumIsFixedPoint) {
  const auto c = SystemConfig::defaults(2, 2);
  std::mt19937_64 rng(3);
  const auto layout = test::random_layout(c, 2, rng);
  SCAOptions opt;
  opt.tol = 1e-12;
  opt.max_iter = 200;
  const auto res = sca_solve(c, layout, opt);
  const CMat h = fixed_channel(c, layout);
  Vec q(2);
  for (int n = 0; n < 2; ++n) q(n) = std::sqrt(res.power.p[static_cast<std::size_t>(n)]);
  const auto st = SCAState::at(h, q, c);
  const auto sub = solve_subproblem(h, c, st);
  EXPECT_NEAR(sub.beta, std::exp(st.log_ee), 1e-8 * std::exp(st.log_ee));
}

TEST(Subproblem, ReturnedPointSatisfiesConstraints) {
  const auto c = SystemConfig::defaults(3, 2);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto layout = test::random_layout(c, 2, rng);
    const CMat h = fixed_channel(c, layout);
    Vec qa = Vec::Constant(3, std::sqrt(c.power_budget / 3));
    const auto st = SCAState::at(h, qa, c);
    const auto r = solve_subproblem(h, c, st);
    const Vec& q = r.sqrt_power;
    const double tol = 1e-8;
    for (int m = 0; m < 2; ++m) {
      const std::complex<double> s = h.row(m) * qa.cast<std::complex<double>>();
      const std::complex<double> hq = h.row(m) * q.cast<std::complex<double>>();
      const double lin = 2.0 * std::real(std::conj(s) * hq) - std::norm(s);
      EXPECT_LE((std::exp2(r.alpha(m)) - 1.0) * c.noise_power, lin + tol * std::abs(lin));
    }
    EXPECT_GE(r.alpha.sum(), std::exp(r.a + r.b) * (1 - tol));
    EXPECT_LE(r.beta, std::exp(st.log_ee) * (1.0 + r.a - st.log_ee) + tol);
    EXPECT_LE(q.squaredNorm() + c.static_power, std::exp(st.log_power) * (1.0 + r.b - st.log_power) + tol);
    EXPECT_LE(q.squaredNorm(), c.power_budget + tol);
    EXPECT_GE(q.minCoeff(), -tol);
    EXPECT_GE(r.beta, std::exp(st.log_ee) - 1e-10);
  }
}

TEST(ScaSolve, SingleAntennaSingleUserMatchesScan) {
  const auto c = SystemConfig::defaults(1, 1);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 5; ++t) {
    const auto layout = test::random_layout(c, 1, rng);
    const auto place = fixed_placement(c);
    const double gain = std::norm(effective_channel(c, layout.positions[0], place.x[0]));
    double best = 0.0;
    for (int i = 1; i <= 100000; ++i) best = std::max(best, ee_1d(c, gain, c.power_budget * i / 100000.0));
    const auto res = sca_solve(c, layout);
    EXPECT_GE(res.ee, 0.99 * best);
    EXPECT_LE(res.ee, best * (1 + 1e-6));
    EXPECT_NEAR(grid_oracle(c, layout, place, 100001), best, 1e-9 * best);
  }
}

TEST(ScaSolve, MonotoneFeasibleAndNearGridOptimum) {
  const auto c = SystemConfig::defaults(2, 2);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto layout = test::random_layout(c, 2, rng);
    const auto res = sca_solve(c, layout);
    ASSERT_FALSE(res.history.empty());
    for (std::size_t i = 1; i < res.history.size(); ++i)
      EXPECT_GE(res.history[i].beta, res.history[i - 1].beta - 1e-8);
    EXPECT_TRUE(res.converged);
    EXPECT_GE(res.ee, res.initial_ee);
    EXPECT_TRUE(check_feasible(c, {fixed_placement(c), res.power}, 1e-9).ok);
    EXPECT_GE(res.ee, 0.99 * grid_oracle(c, layout, fixed_placement(c), 200));
  }
}

TEST(ScaSolve, ArbitraryPlacementAndTrace) {
  const auto c = SystemConfig::defaults(4, 3);
  std::mt19937_64 rng(7);
  const auto layout = test::random_layout(c, 3, rng);
  const auto place = test::random_feasible_solution(c, rng).placement;
  const auto res = sca_solve(c, layout, place);
  EXPECT_NEAR(res.ee, energy_efficiency(c, layout, {place, res.power}), 0.0);
  std::ostringstream os;
  write_trace_csv(os, res);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "iteration,beta,ee,gap,newton_steps");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), res.history.size() + 1);
}

TEST(GridOracle, RefinementAndGuards) {
  const auto c = SystemConfig::defaults(2, 1);
  std::mt19937_64 rng(8);
  const auto layout = test::random_layout(c, 1, rng);
  const auto place = fixed_placement(c);
  // nested grids: every point of the coarse grid is on the fine one
  EXPECT_LE(grid_oracle(c, layout, place, 11), grid_oracle(c, layout, place, 101));
  EXPECT_LE(grid_oracle(c, layout, place, 101), grid_oracle(c, layout, place, 201));
  EXPECT_THROW(grid_oracle(SystemConfig::defaults(4, 1), layout, fixed_placement(SystemConfig::defaults(4, 1)), 10),
               std::invalid_argument);
  EXPECT_THROW(grid_oracle(c, layout, place, 1), std::invalid_argument);
}
