#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace pagnn::diff {

using Mat = Eigen::MatrixXd;

struct ParamSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  int fan_in = 1;  // He variance is 2 / fan_in
  bool is_bias = false;
};

/// Named dense parameter blocks plus a flat index over every scalar.
///
/// The flat index walks entries in insertion order and, inside an entry,
/// row-major (row 0 first, columns ascending). Model builders insert entries
/// in a fixed documented order so that flat coordinates are stable.
class ParamSet {
 public:
  ParamSet() = default;

  int add(ParamSpec spec) {
    if (spec.rows <= 0 || spec.cols <= 0)
      throw std::invalid_argument("ParamSet::add: empty shape for " + spec.name);
    offsets_.push_back(total_);
    total_ += static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols);
    values_.push_back(Mat::Zero(spec.rows, spec.cols));
    specs_.push_back(std::move(spec));
    return static_cast<int>(specs_.size()) - 1;
  }

  int entries() const { return static_cast<int>(specs_.size()); }
  std::size_t scalar_count() const { return total_; }

  const ParamSpec& spec(int i) const { return specs_.at(static_cast<std::size_t>(i)); }
  const std::vector<ParamSpec>& specs() const { return specs_; }

  Mat& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }
  const Mat& operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < specs_.size(); ++i)
      if (specs_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  /// Entry and (row, col) addressed by flat coordinate k.
  struct Location {
    int entry;
    int row;
    int col;
  };

  Location locate(std::size_t k) const {
    if (k >= total_) throw std::out_of_range("ParamSet::locate: flat index past end");
    std::size_t lo = 0, hi = offsets_.size();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (offsets_[mid] <= k) lo = mid;
      else hi = mid;
    }
    const std::size_t local = k - offsets_[lo];
    const auto cols = static_cast<std::size_t>(specs_[lo].cols);
    return {static_cast<int>(lo), static_cast<int>(local / cols), static_cast<int>(local % cols)};
  }

  double& flat(std::size_t k) {
    const auto l = locate(k);
    return values_[static_cast<std::size_t>(l.entry)](l.row, l.col);
  }
  double flat(std::size_t k) const {
    const auto l = locate(k);
    return values_[static_cast<std::size_t>(l.entry)](l.row, l.col);
  }

  std::vector<double> to_flat() const {
    std::vector<double> out;
    out.reserve(total_);
    for (const auto& m : values_)
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
  }

  void assign_flat(const std::vector<double>& flat_values) {
    if (flat_values.size() != total_)
      throw std::invalid_argument("ParamSet::assign_flat: expected " + std::to_string(total_) +
                                  " values, got " + std::to_string(flat_values.size()));
    std::size_t k = 0;
    for (auto& m : values_)
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) m(r, c) = flat_values[k++];
  }

  /// Same shapes, all values zero.
  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& m : out.values_) m.setZero();
    return out;
  }

  bool same_shapes(const ParamSet& other) const {
    if (other.specs_.size() != specs_.size()) return false;
    for (std::size_t i = 0; i < specs_.size(); ++i)
      if (specs_[i].rows != other.specs_[i].rows || specs_[i].cols != other.specs_[i].cols)
        return false;
    return true;
  }

  /// this += scale * other
  void add_scaled(const ParamSet& other, double scale) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
  }

  void scale(double s) {
    for (auto& m : values_) m *= s;
  }

  bool all_finite() const {
    for (const auto& m : values_)
      if (!m.allFinite()) return false;
    return true;
  }

 private:
  std::vector<ParamSpec> specs_;
  std::vector<Mat> values_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

/// Kaiming-normal initialization: weights ~ N(0, 2 / fan_in), biases zero.
/// Draws are taken entry by entry in flat-index order from one mt19937_64
/// stream, so the result depends only on (shapes, seed).
inline ParamSet he_init(const std::vector<ParamSpec>& shapes, std::uint64_t seed) {
  ParamSet out;
  for (const auto& s : shapes) out.add(s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < out.entries(); ++i) {
    const auto& s = out.spec(i);
    if (s.is_bias) continue;
    const double sd = std::sqrt(2.0 / static_cast<double>(s.fan_in));
    Mat& m = out[i];
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = sd * normal(rng);
  }
  return out;
}

inline ParamSet he_init(const ParamSet& like, std::uint64_t seed) { return he_init(like.specs(), seed); }

/// Redraws every bias entry from N(0, sd^2). With zero biases, pre-activations
/// of inputs zeroed by an upstream ReLU sit exactly on the kink, where finite
/// differences and the subgradient disagree.
inline void randomize_biases(ParamSet& p, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  for (int i = 0; i < p.entries(); ++i) {
    if (!p.spec(i).is_bias) continue;
    Mat& m = p[i];
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
  }
}

}  // namespace pagnn::diff
