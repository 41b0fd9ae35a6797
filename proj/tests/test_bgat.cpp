#include <filesystem>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "pagnn/bgat/loss.hpp"
#include "pagnn/bgat/model.hpp"
#include "pagnn/diffkit/adam.hpp"
#include "test_util.hpp"

using namespace pagnn;

namespace {

ModelSpec spec_for(ModelKind kind, int n, int m) {
  ModelSpec s;
  s.arch = Architecture::for_kind(kind);
  s.n_antennas = n;
  s.n_users = m;
  return s;
}

Model zero_model(const ModelSpec& s) {
  Model m = make_model(s, 0);
  for (int i = 0; i < m.params.entries(); ++i) m.params[i].setZero();
  return m;
}

}  // namespace

TEST(ScaleToBudget, Examples) {
  EXPECT_EQ(scale_to_budget({1, 1}, 4), (std::vector<double>{1, 1}));
  EXPECT_EQ(scale_to_budget({3, 3}, 3), (std::vector<double>{1.5, 1.5}));
  EXPECT_EQ(scale_to_budget({0, 0}, 3), (std::vector<double>{0, 0}));
}

TEST(ScaleToBudget, IdempotentAndWithinBudget) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 5);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(4);
    for (double& e : v) e = u(rng);
    const double b = u(rng) + 0.1;
    const auto once = scale_to_budget(v, b);
    EXPECT_EQ(scale_to_budget(once, b), once);
    EXPECT_LE(std::accumulate(once.begin(), once.end(), 0.0), b * (1 + 1e-15));
  }
}

TEST(PositionsFromDeltas, Examples) {
  auto c = SystemConfig::defaults(2, 1);
  c.guard_distance = 0.025;
  const auto p = positions_from_deltas({0, 0}, c);
  EXPECT_DOUBLE_EQ(p.x[0], -100.0);
  EXPECT_DOUBLE_EQ(p.x[1], -99.975);

  const auto c4 = SystemConfig::defaults(4, 1);
  const double b = derived_constants(c4).spacing_budget;
  const auto full = positions_from_deltas({b / 4, b / 4, b / 4, b / 4}, c4);
  EXPECT_NEAR(full.x[3], c4.waveguide_half_length, 1e-12);
  for (int n = 1; n < 4; ++n) EXPECT_NEAR(full.x[n] - full.x[n - 1], b / 4 + c4.guard_distance, 1e-12);
}

TEST(PositionsFromDeltas, RandomDeltasAreFeasible) {
  const auto c = SystemConfig::defaults(4, 1);
  const double b = derived_constants(c).spacing_budget;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> d(4);
    for (double& e : d) e = u(rng) * b;
    const auto placement = positions_from_deltas(scale_to_budget(d, b), c);
    EXPECT_TRUE(check_feasible(c, {placement, {{0, 0, 0, 0}}}, 0.0).ok);
    for (int n = 1; n < 4; ++n) EXPECT_GT(placement.x[n], placement.x[n - 1]);
  }
}

TEST(PositionsFromDeltas, ExactlyFeasibleWithZeroGapsAndFullBudget) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20000; ++t) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const auto c = SystemConfig::defaults(n, 1);
    std::vector<double> d(static_cast<std::size_t>(n));
    // many exact zeros, wide dynamic range, sums above the budget
    for (double& e : d) e = u(rng) < 0.3 ? 0.0 : std::exp(12.0 * u(rng) - 6.0);
    const auto placement = positions_from_deltas(scale_to_budget(d, derived_constants(c).spacing_budget), c);
    ASSERT_TRUE(check_feasible(c, {placement, {std::vector<double>(d.size(), 0.0)}}, 0.0).ok) << "case " << t;
  }
}

TEST(Readouts, ZeroParametersGiveLeftPackedZeroPower) {
  auto s = spec_for(ModelKind::Bgat, 4, 2);
  s.arch.n_blocks = 1;
  const auto c = SystemConfig::defaults(4, 2);
  std::mt19937_64 rng(3);
  const auto layout = test::random_layout(c, 2, rng);
  const Solution sol = predict(zero_model(s), c, layout);
  for (int n = 0; n < 4; ++n) {
    EXPECT_DOUBLE_EQ(sol.placement.x[static_cast<std::size_t>(n)], -100.0 + n * c.guard_distance);
    EXPECT_EQ(sol.power.p[static_cast<std::size_t>(n)], 0.0);
  }
  EXPECT_EQ(energy_efficiency(c, layout, sol), 0.0);
}

TEST(Readouts, TraceIsFeasibleAndConsistentInMeters) {
  const auto s = spec_for(ModelKind::Bgat, 4, 3);
  const auto c = SystemConfig::defaults(4, 3);
  std::mt19937_64 rng(4);
  const auto layout = test::random_layout(c, 3, rng);
  Model m = make_model(s, 5);
  diff::randomize_biases(m.params, 0.5, 6);
  BlockTrace trace;
  const Solution sol = predict(m, c, layout, &trace);
  ASSERT_EQ(trace.blocks.size(), 5u);
  const double b = derived_constants(c).spacing_budget;
  for (const auto& bs : trace.blocks) {
    double sd = 0, sp = 0;
    for (double d : bs.delta) {
      EXPECT_GE(d, 0.0);
      sd += d;
    }
    for (double p : bs.p) sp += p;
    EXPECT_LE(sd, b * (1 + 1e-12));
    EXPECT_LE(sp, c.power_budget * (1 + 1e-12));
    const auto hand = positions_from_deltas(bs.delta, c);
    for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(bs.x[n], hand.x[n], 1e-12);
    EXPECT_TRUE(check_feasible(c, {{bs.x}, {bs.p}}, 1e-9).ok);
    EXPECT_EQ(bs.edges.rows(), 3);
  }
  EXPECT_EQ(sol.placement.x, trace.blocks.back().x);
}

TEST(BgatForward, RandomParametersAlwaysFeasible) {
  const auto c = SystemConfig::defaults(4, 3);
  std::mt19937_64 rng(7);
  const auto layout = test::random_layout(c, 3, rng);
  for (ModelKind k : {ModelKind::Bgat, ModelKind::Mlp, ModelKind::GatPool}) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Model m = make_model(spec_for(k, 4, 3), seed);
      diff::randomize_biases(m.params, 1.0, seed + 100);
      const auto r = check_feasible(c, predict(m, c, layout), 1e-9);
      EXPECT_TRUE(r.ok) << to_string(k) << " seed " << seed;
    }
  }
}

TEST(BgatForward, UserPermutationInvariant) {
  const auto c = SystemConfig::defaults(4, 3);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto layout = test::random_layout(c, 3, rng);
    const UserLayout perm{{layout.positions[1], layout.positions[2], layout.positions[0]}};
    Model m = make_model(spec_for(ModelKind::Bgat, 4, 3), static_cast<std::uint64_t>(t));
    diff::randomize_biases(m.params, 0.3, 50 + static_cast<std::uint64_t>(t));
    const Solution a = predict(m, c, layout), b = predict(m, c, perm);
    for (std::size_t n = 0; n < 4; ++n) {
      EXPECT_NEAR(a.placement.x[n], b.placement.x[n], 1e-9);
      EXPECT_NEAR(a.power.p[n], b.power.p[n], 1e-9);
    }
  }
}

TEST(BgatForward, Deterministic) {
  const auto c = SystemConfig::defaults(4, 2);
  std::mt19937_64 rng(9);
  const auto layout = test::random_layout(c, 2, rng);
  const Model m = make_model(spec_for(ModelKind::Bgat, 4, 2), 1);
  const Solution a = predict(m, c, layout), b = predict(m, c, layout);
  EXPECT_EQ(a.placement.x, b.placement.x);
  EXPECT_EQ(a.power.p, b.power.p);
}

TEST(BgatForward, WrongKindRejected) {
  const auto c = SystemConfig::defaults(4, 2);
  const Model m = make_model(spec_for(ModelKind::Mlp, 4, 2), 1);
  EXPECT_THROW(bgat_forward(m, c, {{{0, 0, 0}, {1, 1, 0}}}), std::invalid_argument);
}

TEST(Loss, ZeroPowerIsZeroAndEqualsNegativeEe) {
  const auto c = SystemConfig::defaults(4, 2);
  std::mt19937_64 rng(10);
  const auto layout = test::random_layout(c, 2, rng);
  const Solution zero{positions_from_deltas({1, 1, 1, 1}, c), {{0, 0, 0, 0}}};
  EXPECT_EQ(unsupervised_loss(c, layout, zero), 0.0);
  for (int t = 0; t < 50; ++t) {
    const Solution s = test::random_feasible_solution(c, rng);
    EXPECT_NEAR(unsupervised_loss(c, layout, s), -energy_efficiency(c, layout, s),
                1e-12 * energy_efficiency(c, layout, s));
  }
}

TEST(Loss, TapeValueMatchesScalarLoss) {
  const auto c = SystemConfig::defaults(4, 2);
  std::mt19937_64 rng(11);
  const auto layout = test::random_layout(c, 2, rng);
  Model m = make_model(spec_for(ModelKind::Bgat, 4, 2), 12);
  diff::randomize_biases(m.params, 0.3, 13);
  const double tape_loss = loss_value(m.spec, m.params, c, layout);
  const double direct = unsupervised_loss(c, layout, predict(m, c, layout));
  EXPECT_NEAR(tape_loss, direct, 1e-10 * std::max(1.0, std::abs(direct)));
}

TEST(Training, SingleSampleLossDecreasesOverFiftySteps) {
  const auto c = SystemConfig::defaults(4, 2);
  std::mt19937_64 rng(14);
  const auto layout = test::random_layout(c, 2, rng);
  // first initialization whose output power is not entirely clipped
  Model m;
  diff::ParamSet g;
  double first = 0.0;
  for (std::uint64_t seed = 0; first == 0.0; ++seed) {
    m = make_model(spec_for(ModelKind::Bgat, 4, 2), seed);
    first = loss_and_grad(m.spec, m.params, c, layout, g);
  }
  auto st = diff::AdamState::for_params(m.params);
  double last = first;
  for (int i = 0; i < 50; ++i) {
    diff::adam_step(m.params, g, st);
    last = loss_and_grad(m.spec, m.params, c, layout, g);
  }
  EXPECT_LT(last, first);
}

TEST(Baselines, MlpUserCountMismatchNotApplicable) {
  const auto c = SystemConfig::defaults(4, 3);
  const Model m = make_model(spec_for(ModelKind::Mlp, 4, 2), 1);
  EXPECT_THROW(predict(m, c, {{{0, 0, 0}, {1, 1, 0}, {2, 2, 0}}}), NotApplicableError);
  const auto c5 = SystemConfig::defaults(5, 2);
  const Model b = make_model(spec_for(ModelKind::Bgat, 4, 2), 1);
  EXPECT_THROW(predict(b, c5, {{{0, 0, 0}, {1, 1, 0}}}), NotApplicableError);
}

TEST(Baselines, MlpZeroParametersGiveZeroPower) {
  const auto c = SystemConfig::defaults(4, 2);
  const Solution s = mlp_baseline_forward(zero_model(spec_for(ModelKind::Mlp, 4, 2)), c, {{{5, 5, 0}, {-5, 3, 0}}});
  for (double p : s.power.p) EXPECT_EQ(p, 0.0);
  EXPECT_DOUBLE_EQ(s.placement.x[0], -100.0);
}

TEST(Baselines, GatPoolHandlesAnyUserCount) {
  Model m = make_model(spec_for(ModelKind::GatPool, 4, 2), 3);
  diff::randomize_biases(m.params, 0.3, 4);
  for (int users = 1; users <= 5; ++users) {
    const auto c = SystemConfig::defaults(4, users);
    std::mt19937_64 rng(static_cast<std::uint64_t>(users));
    const auto s = gatpool_baseline_forward(m, c, test::random_layout(c, users, rng));
    EXPECT_TRUE(check_feasible(c, s, 1e-9).ok);
  }
}

TEST(Checkpoint, RoundTripAndAntennaCheck) {
  const auto path = std::filesystem::temp_directory_path() / "pagnn_test_model.json";
  Model m = make_model(spec_for(ModelKind::Bgat, 4, 2), 77);
  m.spec.arch.bias_init = 0.25;
  save_model(m, path.string());
  const Model back = load_model(path.string(), 4);
  EXPECT_EQ(back.params.to_flat(), m.params.to_flat());
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.spec.arch.bias_init, 0.25);
  EXPECT_EQ(back.spec.arch.n_blocks, 5);
  EXPECT_THROW(load_model(path.string(), 5), NotApplicableError);
  std::filesystem::remove(path);
}

TEST(Architecture, DefaultsAndJson) {
  const Architecture a;
  EXPECT_EQ(a.n_blocks, 5);
  EXPECT_EQ(a.heads, 4);
  EXPECT_EQ(a.head_width, 8);
  EXPECT_EQ(a.gat_width(), 32);
  EXPECT_EQ(a.node_mlp, (std::vector<int>{16, 2}));
  nlohmann::json j = a;
  j["share_attention"] = false;
  const auto b = j.get<Architecture>();
  EXPECT_FALSE(b.share_attention);
  EXPECT_EQ(b.heads, 4);
  EXPECT_EQ(model_kind_from_string(to_string(ModelKind::GatPool)), ModelKind::GatPool);
}

TEST(Architecture, UnsharedAttentionHasMoreParameters) {
  auto s = spec_for(ModelKind::Bgat, 4, 2);
  const auto shared = make_model(s, 1).params.scalar_count();
  s.arch.share_attention = false;
  const auto unshared = make_model(s, 1).params.scalar_count();
  EXPECT_GT(unshared, shared);
  const auto c = SystemConfig::defaults(4, 2);
  EXPECT_TRUE(check_feasible(c, predict(make_model(s, 1), c, {{{0, 0, 0}, {1, 1, 0}}}), 1e-9).ok);
}
