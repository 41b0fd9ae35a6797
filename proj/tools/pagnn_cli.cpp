// pagnn: data generation, training, evaluation and reporting for the
// pinching-antenna EE models.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pagnn/bgat/model.hpp"
#include "pagnn/diffkit/gradcheck.hpp"
#include "pagnn/harness/dataset.hpp"
#include "pagnn/harness/evaluate.hpp"
#include "pagnn/harness/report.hpp"
#include "pagnn/harness/train.hpp"
#include "pagnn/sca/sca.hpp"

namespace fs = std::filesystem;
using namespace pagnn;
using harness::ExperimentConfig;

namespace {

ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : harness::load_experiment(path);
}

void write_json(const nlohmann::json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << '\n';
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

struct GenData {
  std::string config, out;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  int antennas = 0, users = 0;

  void run() const {
    const ExperimentConfig e = load_config(config);
    const int n = antennas > 0 ? antennas : e.system.n_antennas;
    const int m = users > 0 ? users : e.system.n_users;
    const harness::Dataset ds = harness::gen_dataset(e.system_for(n, m), count > 0 ? count : e.train_samples, seed);
    harness::save_dataset(ds, out);
    log_line("wrote " + std::to_string(ds.size()) + " layouts (N=" + std::to_string(n) + ", M=" + std::to_string(m) +
             ") to " + out);
  }
};

struct Train {
  std::string config, data, model = "bgat", out, history;
  std::uint64_t seed = 0;
  int epochs = 0, threads = -1;

  void run() const {
    const ExperimentConfig e = load_config(config);
    const harness::Dataset ds = harness::load_dataset(data);
    const ModelKind kind = model_kind_from_string(model);
    const ModelSpec spec{e.architecture(kind), ds.cfg.n_antennas, ds.n_users()};
    harness::TrainConfig tc = e.train;
    tc.seed = seed;
    if (epochs > 0) {
      tc.max_epochs = epochs;
      tc.patience = std::min(tc.patience, epochs);
    }
    if (threads >= 0) tc.threads = threads;
    const auto r = harness::train(spec, ds.cfg, ds, tc, [](const harness::EpochRecord& h) {
      std::cerr << "epoch " << h.epoch << "  loss " << h.train_loss << "  val_ee " << h.val_ee << "  best "
                << h.best_val_ee << "  " << h.seconds << " s" << std::endl;
    });
    save_model(r.model, out);
    if (!history.empty()) {
      std::ofstream f(history);
      harness::write_history_csv(f, r);
    }
    log_line("best validation EE " + std::to_string(r.best_val_ee) + " at epoch " + std::to_string(r.best_epoch) +
             " (initial " + std::to_string(r.initial_val_ee) + ", initialization " +
             std::to_string(r.init_attempt) + "); model written to " + out);
  }
};

struct Eval {
  std::string config, model, data, out;
  std::uint64_t seed = 0;

  void run() const {
    const ExperimentConfig e = load_config(config);
    const harness::Dataset ds = harness::load_dataset(data);
    const Model m = load_model(model, ds.cfg.n_antennas);
    const harness::EvalReport r = harness::evaluate(m, ds.cfg, ds, e.eval);
    nlohmann::json j = harness::report_to_json(r);
    j["seed"] = seed;
    write_json(j, out);
    if (r.applicable)
      log_line(r.model_id + ": mean EE " + std::to_string(r.mean_ee) + ", feasible " +
               std::to_string(r.feasibility_rate) + ", median latency " + std::to_string(r.latency.median_ms) + " ms");
    else
      log_line(r.model_id + ": not applicable (" + r.note + ")");
  }
};

struct BaselineSca {
  std::string config, data, out, trace_dir;
  std::uint64_t seed = 0;

  void run() const {
    const ExperimentConfig e = load_config(config);
    const harness::Dataset ds = harness::load_dataset(data);
    const harness::EvalReport r = harness::evaluate_fixed(ds.cfg, ds, e.sca, e.eval);
    nlohmann::json j = harness::report_to_json(r);
    j["seed"] = seed;
    write_json(j, out);
    if (!trace_dir.empty()) {
      fs::create_directories(trace_dir);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        std::ofstream f(fs::path(trace_dir) / ("trace_" + std::to_string(i) + ".csv"));
        sca::write_trace_csv(f, sca::sca_solve(ds.cfg, ds.samples[i], e.sca));
      }
    }
    log_line("fixed: mean EE " + std::to_string(r.mean_ee) + ", median solve " + std::to_string(r.latency.median_ms) +
             " ms");
  }
};

struct GradCheck {
  std::string config, model = "bgat", out;
  std::uint64_t seed = 0;
  int antennas = 3, users = 2, blocks = 2, heads = 2;
  std::size_t coords = 100;
  double h = 1e-6, tol = 1e-5;

  int run() const {
    const ExperimentConfig e = load_config(config);
    const SystemConfig cfg = e.system_for(antennas, users);
    const ModelKind kind = model_kind_from_string(model);
    ModelSpec spec{e.architecture(kind), antennas, users};
    spec.arch.n_blocks = blocks;
    spec.arch.heads = heads;
    Model m = make_model(spec, seed);
    diff::randomize_biases(m.params, 0.1, seed + 2);
    const harness::Dataset ds = harness::gen_dataset(cfg, 1, harness::derive_seed(seed, harness::kTestData, 0, 0));
    const UserLayout& layout = ds.samples.front();
    diff::ParamSet grad;
    const double loss = loss_and_grad(spec, m.params, cfg, layout, grad);
    const auto picks = diff::sample_coordinates(m.params.scalar_count(), coords, seed + 1);
    const double floor = diff::round_off_floor(loss, h, tol);
    const auto res = diff::finite_difference_check(
        [&](const diff::ParamSet& t) { return loss_value(spec, t, cfg, layout); }, m.params, grad, picks, h, floor);
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& en : res.entries)
      entries.push_back({{"coord", en.coord},
                         {"param", m.params.spec(m.params.locate(en.coord).entry).name},
                         {"analytic", en.analytic},
                         {"numeric", en.numeric},
                         {"rel_error", en.rel_error}});
    write_json({{"loss", loss},
                {"coordinates", res.entries.size()},
                {"max_rel_error", res.max_rel_error},
                {"tolerance", tol},
                {"floor", floor},
                {"passed", res.passed(tol)},
                {"entries", entries}},
               out);
    log_line("gradcheck: max relative error " + std::to_string(res.max_rel_error) + " over " +
             std::to_string(res.entries.size()) + " coordinates: " + (res.passed(tol) ? "ok" : "FAILED"));
    return res.passed(tol) ? 0 : 1;
  }
};

struct Report {
  std::string config, out = "runs/report";
  std::optional<std::uint64_t> seed;

  void run() const {
    ExperimentConfig e = load_config(config);
    if (seed) e.seed = *seed;
    const auto t = harness::run_experiment(e, out, log_line);
    harness::write_table_csv(std::cout, t);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pagnn: pinching-antenna energy-efficiency models and baselines"};
  app.require_subcommand(1);

  GenData gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a dataset of random user layouts");
  c_gen->add_option("--config", gen.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  c_gen->add_option("--count", gen.count, "Number of layouts (default: train_samples)");
  c_gen->add_option("--antennas", gen.antennas, "N (default: from config)");
  c_gen->add_option("--users", gen.users, "M (default: from config)");
  c_gen->add_option("--seed", gen.seed, "Generator seed");
  c_gen->add_option("--out", gen.out, "Output dataset (JSON)")->required();

  Train tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a dataset");
  c_train->add_option("--config", tr.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  c_train->add_option("--data", tr.data, "Training dataset")->required()->check(CLI::ExistingFile);
  c_train->add_option("--model", tr.model, "bgat, mlp or gat");
  c_train->add_option("--seed", tr.seed, "Initialization and shuffling seed");
  c_train->add_option("--epochs", tr.epochs, "Override max epochs");
  c_train->add_option("--threads", tr.threads, "Worker threads (0: all cores)");
  c_train->add_option("--history", tr.history, "Per-epoch history (CSV)");
  c_train->add_option("--out", tr.out, "Model checkpoint (JSON)")->required();

  Eval ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a trained model");
  c_eval->add_option("--config", ev.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  c_eval->add_option("--model", ev.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--data", ev.data, "Test dataset")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--seed", ev.seed, "Recorded in the report");
  c_eval->add_option("--out", ev.out, "Report (JSON, '-' for stdout)");

  BaselineSca bs;
  auto* c_sca = app.add_subcommand("baseline-sca", "Fixed-antenna SCA baseline");
  c_sca->add_option("--config", bs.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  c_sca->add_option("--data", bs.data, "Test dataset")->required()->check(CLI::ExistingFile);
  c_sca->add_option("--seed", bs.seed, "Recorded in the report");
  c_sca->add_option("--trace-dir", bs.trace_dir, "Write one CSV iteration trace per sample here");
  c_sca->add_option("--out", bs.out, "Report (JSON, '-' for stdout)");

  GradCheck gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of the training gradient");
  c_gc->add_option("--config", gc.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  c_gc->add_option("--model", gc.model, "bgat, mlp or gat");
  c_gc->add_option("--seed", gc.seed, "Parameter, layout and coordinate seed");
  c_gc->add_option("--antennas", gc.antennas, "N");
  c_gc->add_option("--users", gc.users, "M");
  c_gc->add_option("--blocks", gc.blocks, "Blocks (layers for gat)");
  c_gc->add_option("--heads", gc.heads, "Attention heads");
  c_gc->add_option("--coords", gc.coords, "Coordinates to check");
  c_gc->add_option("--step", gc.h, "Central-difference step");
  c_gc->add_option("--tol", gc.tol, "Relative error tolerance");
  c_gc->add_option("--out", gc.out, "Result (JSON, '-' for stdout)");

  Report rp;
  auto* c_rep = app.add_subcommand("report", "Run a full experiment and write the comparison table");
  c_rep->add_option("--config", rp.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  c_rep->add_option("--seed", rp.seed, "Override the experiment seed");
  c_rep->add_option("--out", rp.out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (c_gen->parsed()) gen.run();
    if (c_train->parsed()) tr.run();
    if (c_eval->parsed()) ev.run();
    if (c_sca->parsed()) bs.run();
    if (c_gc->parsed()) return gc.run();
    if (c_rep->parsed()) rp.run();
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
  return 0;
}
