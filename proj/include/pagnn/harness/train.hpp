#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pagnn/bgat/model.hpp"
#include "pagnn/diffkit/adam.hpp"
#include "pagnn/harness/dataset.hpp"
#include "pagnn/harness/parallel.hpp"

namespace pagnn::harness {

struct TrainConfig {
  double lr = 5e-5;
  int batch_size = 2048;
  int max_epochs = 1000;
  int patience = 10;
  double val_fraction = 0.05;
  std::uint64_t seed = 0;
  int threads = 0;           // 0: hardware concurrency
  double max_seconds = 0.0;  // 0: no wall-clock cap
  int init_attempts = 8;     // initializations tried while validation EE is exactly 0

  static TrainConfig desk() {
    TrainConfig tc;
    tc.batch_size = 256;
    tc.max_epochs = 100;
    return tc;
  }

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be positive");
    if (patience < 1 || patience > max_epochs) throw ConfigError("train: patience must be in [1, max_epochs]");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("train: val_fraction must be in (0, 1)");
    if (threads < 0) throw ConfigError("train: threads must be >= 0");
    if (init_attempts < 1) throw ConfigError("train: init_attempts must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& t) {
  j = {{"lr", t.lr},         {"batch_size", t.batch_size},     {"max_epochs", t.max_epochs},
       {"patience", t.patience}, {"val_fraction", t.val_fraction}, {"seed", t.seed},
       {"threads", t.threads},   {"max_seconds", t.max_seconds}, {"init_attempts", t.init_attempts}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& t) {
  t = TrainConfig::desk();
  t.lr = j.value("lr", t.lr);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  t.val_fraction = j.value("val_fraction", t.val_fraction);
  t.seed = j.value("seed", t.seed);
  t.threads = j.value("threads", t.threads);
  t.max_seconds = j.value("max_seconds", t.max_seconds);
  t.init_attempts = j.value("init_attempts", t.init_attempts);
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean over the epoch's samples
  double val_ee = 0.0;
  double best_val_ee = 0.0;
  long steps = 0;           // cumulative Adam steps
  double seconds = 0.0;     // cumulative wall clock
};

struct TrainResult {
  Model model;  // best-validation parameters
  double initial_val_ee = 0.0;
  double best_val_ee = 0.0;
  int best_epoch = 0;  // 0: initial parameters were never beaten
  int init_attempt = 0;  // index of the initialization that was trained
  bool early_stopped = false;
  bool time_capped = false;
  std::vector<EpochRecord> history;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training / validation index split, shuffled by seed. Validation takes
/// round(fraction * size) samples, at least one when size >= 2.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t size,
                                                                                    double fraction,
                                                                                    std::uint64_t seed) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(size)));
  if (size >= 2) n_val = std::clamp<std::size_t>(n_val, 1, size - 1);
  else n_val = 0;
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return {tr, val};
}

/// Mean exact EE of the model's solutions over `samples`.
inline double mean_ee(const Model& m, const SystemConfig& cfg, const std::vector<UserLayout>& samples,
                      int threads = 1) {
  std::vector<double> ee(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    ee[i] = energy_efficiency(cfg, samples[i], predict(m, cfg, samples[i]));
  });
  double s = 0.0;
  for (double v : ee) s += v;
  return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Initialization seed of attempt `a`; attempt 0 uses the training seed.
inline std::uint64_t init_seed(std::uint64_t seed, int a) {
  return a == 0 ? seed : seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(a);
}

/// Unsupervised mini-batch Adam on the mean negative EE. Per-sample
/// gradients run in parallel and are summed in sample order, so the result
/// does not depend on the thread count. With a single sample the sample is
/// also used for validation.
inline TrainResult train(const ModelSpec& spec, const SystemConfig& cfg, const Dataset& ds, const TrainConfig& tc,
                         const EpochCallback& on_epoch = {}) {
  tc.validate();
  cfg.validate();
  if (ds.samples.empty()) throw std::invalid_argument("train: dataset is empty");
  const int threads = tc.threads == 0 ? default_threads() : tc.threads;

  auto [tr_idx, val_idx] = split_indices(ds.size(), tc.val_fraction, tc.seed);
  if (val_idx.empty()) val_idx = tr_idx;
  std::vector<UserLayout> val;
  for (std::size_t i : val_idx) val.push_back(ds.samples[i]);

  // An all-zero validation EE means every power readout is clamped by its
  // ReLU; the gradient is then exactly zero and training cannot start.
  TrainResult res;
  Model current;
  for (int a = 0; a < tc.init_attempts; ++a) {
    current = make_model(spec, init_seed(tc.seed, a));
    res.init_attempt = a;
    res.initial_val_ee = mean_ee(current, cfg, val, threads);
    if (res.initial_val_ee != 0.0) break;
  }
  res.model = current;
  res.best_val_ee = res.initial_val_ee;
  if (!std::isfinite(res.initial_val_ee)) throw TrainingError("train: non-finite validation EE at initialization");

  diff::AdamHyper hyper;
  hyper.lr = tc.lr;
  diff::AdamState adam = diff::AdamState::for_params(current.params, hyper);
  std::mt19937_64 shuffle_rng(tc.seed + 1);
  const auto t_start = std::chrono::steady_clock::now();
  int stale = 0;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::shuffle(tr_idx.begin(), tr_idx.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < tr_idx.size(); lo += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t hi = std::min(tr_idx.size(), lo + static_cast<std::size_t>(tc.batch_size));
      const std::size_t b = hi - lo;
      std::vector<diff::ParamSet> grads(b);
      std::vector<double> losses(b);
      std::vector<std::string> failures(b);
      parallel_for(b, threads, [&](std::size_t i) {
        try {
          losses[i] = loss_and_grad(current.spec, current.params, cfg, ds.samples[tr_idx[lo + i]], grads[i]);
        } catch (const diff::NonFiniteError& e) {
          failures[i] = e.what();
        }
      });
      diff::ParamSet total = current.params.zeros_like();
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t sample = tr_idx[lo + i];
        if (failures[i].empty() && (!std::isfinite(losses[i]) || !grads[i].all_finite()))
          failures[i] = "non-finite loss or gradient";
        if (!failures[i].empty()) {
          std::ostringstream msg;
          msg << "train: aborted at epoch " << epoch << ", step " << adam.step + 1 << ", sample " << sample << ": "
              << failures[i];
          throw TrainingError(msg.str());
        }
        total.add_scaled(grads[i], 1.0);
        loss_sum += losses[i];
      }
      total.scale(1.0 / static_cast<double>(b));
      diff::adam_step(current.params, total, adam);
      if (!current.params.all_finite())
        throw TrainingError("train: parameters became non-finite at step " + std::to_string(adam.step));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(tr_idx.size());
    rec.val_ee = mean_ee(current, cfg, val, threads);
    if (!std::isfinite(rec.val_ee))
      throw TrainingError("train: non-finite validation EE at epoch " + std::to_string(epoch));
    if (rec.val_ee > res.best_val_ee) {
      res.best_val_ee = rec.val_ee;
      res.best_epoch = epoch;
      res.model = current;
      stale = 0;
    } else {
      ++stale;
    }
    rec.best_val_ee = res.best_val_ee;
    rec.steps = adam.step;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stale >= tc.patience) {
      res.early_stopped = true;
      break;
    }
    if (tc.max_seconds > 0.0 && rec.seconds >= tc.max_seconds) {
      res.time_capped = true;
      break;
    }
  }
  return res;
}

inline void write_history_csv(std::ostream& os, const TrainResult& r) {
  os << "epoch,train_loss,val_ee,best_val_ee,steps,seconds\n";
  os.precision(10);
  for (const auto& h : r.history)
    os << h.epoch << ',' << h.train_loss << ',' << h.val_ee << ',' << h.best_val_ee << ',' << h.steps << ','
       << h.seconds << '\n';
}

}  // namespace pagnn::harness
