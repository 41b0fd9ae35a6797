#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "pagnn/harness/report.hpp"

using namespace pagnn;
using namespace pagnn::harness;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pagnn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

TrainConfig tiny_train(std::uint64_t seed) {
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch_size = 8;
  tc.max_epochs = 4;
  tc.patience = 4;
  tc.val_fraction = 0.25;
  tc.seed = seed;
  tc.threads = 1;
  return tc;
}

}  // namespace

TEST(Dataset, DeterministicAndInBounds) {
  const auto c = SystemConfig::defaults(4, 3);
  const auto a = gen_dataset(c, 50, 11);
  const auto b = gen_dataset(c, 50, 11);
  const auto d = gen_dataset(c, 50, 12);
  ASSERT_EQ(a.size(), 50u);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.samples[i].size(), 3u);
    for (std::size_t m = 0; m < 3; ++m) {
      EXPECT_EQ(a.samples[i].positions[m], b.samples[i].positions[m]);
      differs |= a.samples[i].positions[m] != d.samples[i].positions[m];
      EXPECT_LE(std::abs(a.samples[i].positions[m].x()), c.half_range);
      EXPECT_LE(std::abs(a.samples[i].positions[m].y()), c.half_range);
      EXPECT_EQ(a.samples[i].positions[m].z(), 0.0);
    }
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(gen_dataset(c, 0, 1), std::invalid_argument);
}

TEST(Dataset, CoordinateMeanNearZero) {
  // sd of the mean of 1e5 U(-100, 100) draws is 100/sqrt(3e5) ~ 0.18 m
  const auto ds = gen_dataset(SystemConfig::defaults(4, 1), 100000, 5);
  double sx = 0.0, sy = 0.0;
  for (const auto& l : ds.samples) {
    sx += l.positions[0].x();
    sy += l.positions[0].y();
  }
  EXPECT_LT(std::abs(sx / 1e5), 1.0);
  EXPECT_LT(std::abs(sy / 1e5), 1.0);
}

TEST(Dataset, JsonRoundTripIsExact) {
  const auto ds = gen_dataset(SystemConfig::defaults(3, 2), 20, 3);
  const auto dir = temp_dir("dataset");
  const auto path = (dir / "d.json").string();
  save_dataset(ds, path);
  const auto back = load_dataset(path);
  EXPECT_EQ(back.seed, ds.seed);
  EXPECT_EQ(back.cfg.n_antennas, 3);
  EXPECT_EQ(back.n_users(), 2);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t m = 0; m < 2; ++m) EXPECT_EQ(back.samples[i].positions[m], ds.samples[i].positions[m]);
  const auto sub = subset(ds, {4, 1});
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.samples[0].positions[0], ds.samples[4].positions[0]);
}

TEST(Split, DisjointCoverAndSeeded) {
  const auto [tr, val] = split_indices(100, 0.05, 7);
  EXPECT_EQ(val.size(), 5u);
  EXPECT_EQ(tr.size(), 95u);
  std::set<std::size_t> all(tr.begin(), tr.end());
  all.insert(val.begin(), val.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(split_indices(100, 0.05, 7).second, val);
  EXPECT_EQ(split_indices(2, 0.01, 0).second.size(), 1u);
  EXPECT_TRUE(split_indices(1, 0.5, 0).second.empty());
}

TEST(TrainConfig, ValidationAndDefaults) {
  const TrainConfig full;
  EXPECT_EQ(full.batch_size, 2048);
  EXPECT_EQ(full.max_epochs, 1000);
  EXPECT_DOUBLE_EQ(full.lr, 5e-5);
  EXPECT_EQ(full.patience, 10);
  EXPECT_DOUBLE_EQ(full.val_fraction, 0.05);
  const auto desk = TrainConfig::desk();
  EXPECT_EQ(desk.batch_size, 256);
  EXPECT_EQ(desk.max_epochs, 100);
  TrainConfig bad = desk;
  bad.patience = 101;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = desk;
  bad.lr = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  const TrainConfig back = nlohmann::json(tiny_train(9)).get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(tiny_train(9)));
}

TEST(Train, HistoryBestMonotoneAndCheckpointMatches) {
  const auto c = SystemConfig::defaults(2, 1);
  const auto ds = gen_dataset(c, 40, 1);
  const ModelSpec spec{Architecture::for_kind(ModelKind::Bgat), 2, 1};
  const auto res = train(spec, c, ds, tiny_train(3));
  ASSERT_FALSE(res.history.empty());
  EXPECT_LE(res.history.size(), 4u);
  double prev = res.initial_val_ee;
  for (const auto& h : res.history) {
    EXPECT_GE(h.best_val_ee, prev);
    EXPECT_GE(h.best_val_ee, h.val_ee);
    prev = h.best_val_ee;
  }
  EXPECT_EQ(res.best_val_ee, res.history.back().best_val_ee);
  EXPECT_GE(res.best_val_ee, res.initial_val_ee);
  // checkpoint reproduces the best validation EE
  const auto [tr, val] = split_indices(ds.size(), 0.25, 3);
  EXPECT_EQ(mean_ee(res.model, c, subset(ds, val).samples), res.best_val_ee);

  std::ostringstream os;
  write_history_csv(os, res);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "epoch,train_loss,val_ee,best_val_ee,steps,seconds");
}

TEST(Train, DeterministicAcrossThreadCounts) {
  const auto c = SystemConfig::defaults(2, 2);
  const auto ds = gen_dataset(c, 24, 4);
  const ModelSpec spec{Architecture::for_kind(ModelKind::GatPool), 2, 2};
  auto tc = tiny_train(6);
  tc.max_epochs = 2;
  tc.patience = 2;
  const auto a = train(spec, c, ds, tc);
  tc.threads = 4;
  const auto b = train(spec, c, ds, tc);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_ee, b.history[i].val_ee);
  }
  EXPECT_EQ(a.initial_val_ee, b.initial_val_ee);
}

TEST(Train, SingleSampleOverfitKeepsBest) {
  const auto c = SystemConfig::defaults(2, 1);
  const auto ds = gen_dataset(c, 1, 8);
  const ModelSpec spec{Architecture::for_kind(ModelKind::Mlp), 2, 1};
  auto tc = tiny_train(1);
  tc.max_epochs = 20;
  tc.patience = 20;
  const auto res = train(spec, c, ds, tc);
  EXPECT_GE(mean_ee(res.model, c, ds.samples), res.initial_val_ee);
}

TEST(Train, RedrawsInitializationWithZeroValidationEE) {
  const auto c = SystemConfig::defaults(2, 1);
  const auto ds = gen_dataset(c, 100, 3);
  const ModelSpec spec{Architecture::for_kind(ModelKind::Bgat), 2, 1};
  auto tc = tiny_train(1);
  tc.max_epochs = 1;
  tc.patience = 1;
  tc.val_fraction = 0.05;
  tc.init_attempts = 1;
  const auto dead = train(spec, c, ds, tc);
  ASSERT_EQ(dead.initial_val_ee, 0.0) << "seed no longer gives a clamped start";
  EXPECT_EQ(dead.best_val_ee, 0.0);
  tc.init_attempts = 8;
  const auto live = train(spec, c, ds, tc);
  EXPECT_GE(live.init_attempt, 1);
  EXPECT_GT(live.initial_val_ee, 0.0);
  EXPECT_EQ(init_seed(5, 0), 5u);
  EXPECT_NE(init_seed(5, 1), init_seed(5, 2));
}

TEST(Train, RejectsEmptyDataset) {
  const auto c = SystemConfig::defaults(2, 1);
  Dataset empty{c, 0, {}};
  EXPECT_THROW(train({Architecture::for_kind(ModelKind::Bgat), 2, 1}, c, empty, tiny_train(0)),
               std::invalid_argument);
}

TEST(Evaluate, MeanOfPerSampleAndRecomputedEE) {
  const auto c = SystemConfig::defaults(3, 2);
  const auto ds = gen_dataset(c, 30, 2);
  Model m = make_model({Architecture::for_kind(ModelKind::Bgat), 3, 2}, 4);
  diff::randomize_biases(m.params, 0.1, 5);
  EvalOptions opt;
  opt.latency_samples = 5;
  opt.warmup = 1;
  const auto r = evaluate(m, c, ds, opt);
  ASSERT_TRUE(r.applicable);
  ASSERT_EQ(r.per_sample_ee.size(), 30u);
  const double mean = std::accumulate(r.per_sample_ee.begin(), r.per_sample_ee.end(), 0.0) / 30.0;
  EXPECT_NEAR(r.mean_ee, mean, 1e-12 * std::abs(mean));
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_EQ(r.per_sample_ee[i], energy_efficiency(c, ds.samples[i], predict(m, c, ds.samples[i])));
  EXPECT_EQ(r.feasibility_rate, 1.0);
  EXPECT_EQ(r.latency.samples, 5);
  EXPECT_EQ(r.graph_build.samples, 5);
  EXPECT_EQ(r.m_train, 2);
  EXPECT_EQ(r.m_test, 2);
}

TEST(Evaluate, MlpAtOtherUserCountNotApplicable) {
  const auto c3 = SystemConfig::defaults(4, 3);
  const Model m = make_model({Architecture::for_kind(ModelKind::Mlp), 4, 2}, 0);
  const auto r = evaluate(m, c3, gen_dataset(c3, 5, 1));
  EXPECT_FALSE(r.applicable);
  EXPECT_FALSE(r.note.empty());
  EXPECT_EQ(report_to_json(r).at("applicable"), false);

  // graph models transfer across user counts
  const Model g = make_model({Architecture::for_kind(ModelKind::Bgat), 4, 2}, 0);
  EvalOptions opt;
  opt.latency_samples = 2;
  opt.warmup = 0;
  EXPECT_TRUE(evaluate(g, c3, gen_dataset(c3, 5, 1), opt).applicable);
}

TEST(Evaluate, FixedBaselineFeasible) {
  const auto c = SystemConfig::defaults(2, 2);
  const auto ds = gen_dataset(c, 5, 9);
  const auto r = evaluate_fixed(c, ds);
  EXPECT_EQ(r.feasibility_rate, 1.0);
  EXPECT_EQ(r.model_id, "fixed");
  EXPECT_EQ(r.latency.samples, 5);
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_EQ(r.per_sample_ee[i], sca::sca_solve(c, ds.samples[i]).ee);
}

TEST(Latency, PercentileAndStats) {
  EXPECT_EQ(percentile({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_EQ(percentile({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
  EXPECT_EQ(percentile({1.0, 2.0, 3.0, 4.0}, 0.0), 1.0);
  EXPECT_EQ(percentile({1.0, 2.0, 3.0, 4.0}, 1.0), 4.0);
  const auto s = latency_stats({1.0, 2.0, 3.0, 10.0});
  EXPECT_EQ(s.samples, 4);
  EXPECT_EQ(s.median_ms, 2.5);
  EXPECT_EQ(s.mean_ms, 4.0);
}

TEST(CompareTable, CellsAndNotApplicable) {
  ReportStore store;
  EvalReport fixed;
  fixed.model_id = "fixed";
  fixed.mean_ee = 28.0;
  fixed.feasibility_rate = 1.0;
  fixed.latency.median_ms = 900.0;
  store.fixed[{4, 2}] = fixed;
  store.fixed[{4, 3}] = fixed;
  EvalReport mlp2;
  mlp2.mean_ee = 30.0;
  EvalReport mlp3;
  mlp3.applicable = false;
  store.models[{4, 2, "mlp"}] = {{2, mlp2}, {3, mlp3}};
  EvalReport b;
  b.mean_ee = 37.0;
  store.models[{4, 2, "bgat"}] = {{2, b}, {3, b}};

  const auto t = compare_table({GridRow{4, 2, {2, 3}}}, store, {{"bgat_N4_M2", 37.10}});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].cells.at("fixed").ee, 28.0);
  EXPECT_EQ(t.rows[0].cells.at("mlp").ee, 30.0);
  EXPECT_FALSE(t.rows[1].cells.at("mlp").applicable);
  EXPECT_EQ(t.rows[1].cells.count("gat"), 0u);

  const auto j = table_to_json(t);
  EXPECT_EQ(j.at("rows")[1].at("cells").at("MLP"), kNotApplicable);
  EXPECT_EQ(j.at("rows")[1].at("cells").at("GAT"), kNotApplicable);
  EXPECT_EQ(j.at("rows")[0].at("cells").at("BGAT").at("ee"), 37.0);
  EXPECT_EQ(j.at("reference").at("bgat_N4_M2"), 37.10);

  std::ostringstream os;
  write_table_csv(os, t);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_antennas,m_train,m_test,metric,Fixed,MLP,GAT,BGAT");
  EXPECT_NE(csv.find("4,2,3,ee,28,×,×,37"), std::string::npos);
  EXPECT_NE(csv.find("4,2,2,latency_ms,900,"), std::string::npos);
}

TEST(CompareTable, FixedCellEqualsBaselineEvaluation) {
  const auto c = SystemConfig::defaults(2, 2);
  const auto ds = gen_dataset(c, 3, 1);
  ReportStore store;
  const auto r = evaluate_fixed(c, ds);
  store.fixed[{2, 2}] = r;
  const auto t = compare_table({GridRow{2, 2, {2}}}, store);
  EXPECT_EQ(t.rows[0].cells.at("fixed").ee, r.mean_ee);
}

TEST(Experiment, JsonRoundTripAndSeeds) {
  ExperimentConfig e;
  e.seed = 42;
  e.train_samples = 123;
  e.models = {ModelKind::Bgat};
  e.grid = {GridRow{3, 2, {2, 3}}};
  e.reference = {{"note", "x"}};
  Architecture a = Architecture::for_kind(ModelKind::Bgat);
  a.n_blocks = 2;
  e.architectures["bgat"] = a;
  const auto back = nlohmann::json(e).get<ExperimentConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(e));
  EXPECT_EQ(back.architecture(ModelKind::Bgat).n_blocks, 2);
  EXPECT_EQ(back.architecture(ModelKind::Mlp).n_blocks, Architecture::for_kind(ModelKind::Mlp).n_blocks);
  const auto c = back.system_for(3, 5);
  EXPECT_EQ(c.n_antennas, 3);
  EXPECT_EQ(c.n_users, 5);

  EXPECT_EQ(derive_seed(1, kTrainData, 4, 2), derive_seed(1, kTrainData, 4, 2));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t k : {kTrainData, kTestData, kModelInit})
    for (int n = 2; n <= 4; ++n)
      for (int m = 1; m <= 3; ++m) seeds.insert(derive_seed(1, k, n, m));
  EXPECT_EQ(seeds.size(), 27u);
}

TEST(Experiment, EndToEndTinyRunIsReproducible) {
  ExperimentConfig e;
  e.seed = 3;
  e.train_samples = 16;
  e.test_samples = 3;
  e.train = tiny_train(0);
  e.train.max_epochs = 1;
  e.train.patience = 1;
  e.eval.latency_samples = 2;
  e.eval.warmup = 0;
  e.eval.threads = 1;
  e.grid = {GridRow{2, 1, {1, 2}}};
  const auto d1 = temp_dir("exp1"), d2 = temp_dir("exp2");
  const auto t1 = run_experiment(e, d1);
  const auto t2 = run_experiment(e, d2);
  ASSERT_EQ(t1.rows.size(), 2u);
  EXPECT_FALSE(t1.rows[1].cells.at("mlp").applicable);
  EXPECT_TRUE(t1.rows[1].cells.at("bgat").applicable);
  for (std::size_t r = 0; r < 2; ++r)
    for (const char* id : {"fixed", "gat", "bgat"}) EXPECT_EQ(t1.rows[r].cells.at(id).ee, t2.rows[r].cells.at(id).ee);
  for (const char* f : {"table.csv", "table.json", "experiment.json", "N2_M1/bgat.model.json",
                        "N2_M1/bgat.history.csv", "N2_M1/train.json", "fixed_N2_M2.json"})
    EXPECT_TRUE(std::filesystem::exists(d1 / f)) << f;
  EXPECT_EQ(load_dataset((d1 / "N2_M1/train.json").string()).samples[0].positions[0],
            load_dataset((d2 / "N2_M1/train.json").string()).samples[0].positions[0]);
  const Model m = load_model((d1 / "N2_M1/bgat.model.json").string(), 2);
  EXPECT_EQ(m.spec.n_users, 1);
}
