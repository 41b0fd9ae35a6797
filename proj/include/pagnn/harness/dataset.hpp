#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pagnn/core_model.hpp"

namespace pagnn::harness {

/// User layouts drawn i.i.d. from U(-L, L)^2 at z = 0.
struct Dataset {
  SystemConfig cfg;
  std::uint64_t seed = 0;
  std::vector<UserLayout> samples;

  std::size_t size() const { return samples.size(); }
  int n_users() const { return samples.empty() ? cfg.n_users : static_cast<int>(samples.front().size()); }
};

/// `count` layouts of cfg.n_users users each; draws are x then y per user,
/// users in order, samples in order, from one mt19937_64 seeded with `seed`.
inline Dataset gen_dataset(const SystemConfig& cfg, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("gen_dataset: count must be >= 1");
  cfg.validate();
  Dataset ds{cfg, seed, {}};
  ds.samples.reserve(count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-cfg.half_range, cfg.half_range);
  for (std::size_t i = 0; i < count; ++i) {
    UserLayout l;
    l.positions.reserve(static_cast<std::size_t>(cfg.n_users));
    for (int m = 0; m < cfg.n_users; ++m) {
      const double x = coord(rng);
      const double y = coord(rng);
      l.positions.emplace_back(x, y, 0.0);
    }
    ds.samples.push_back(std::move(l));
  }
  return ds;
}

/// Subset by index list (keeps cfg and seed).
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out{ds.cfg, ds.seed, {}};
  out.samples.reserve(idx.size());
  for (std::size_t i : idx) out.samples.push_back(ds.samples.at(i));
  return out;
}

// File layout: { "config": {...}, "seed": s, "n_users": M,
//                "samples": [ [[x, y], ...], ... ] }
inline nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& l : ds.samples) {
    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : l.positions) users.push_back({u.x(), u.y()});
    samples.push_back(std::move(users));
  }
  return {{"config", ds.cfg}, {"seed", ds.seed}, {"n_users", ds.n_users()}, {"samples", std::move(samples)}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset ds;
  ds.cfg = j.at("config").get<SystemConfig>();
  ds.seed = j.value("seed", std::uint64_t{0});
  for (const auto& s : j.at("samples")) {
    UserLayout l;
    for (const auto& u : s) l.positions.emplace_back(u.at(0).get<double>(), u.at(1).get<double>(), 0.0);
    ds.samples.push_back(std::move(l));
  }
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << dataset_to_json(ds).dump() << '\n';
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return dataset_from_json(nlohmann::json::parse(f));
}

}  // namespace pagnn::harness
