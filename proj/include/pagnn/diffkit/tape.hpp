#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pagnn/diffkit/params.hpp"

namespace pagnn::diff {

/// A forward value became NaN or infinite. `stage()` names the model stage
/// and primitive that produced it.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(std::string stage)
      : std::runtime_error("non-finite value produced at " + stage), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over dense double matrices.
///
/// Nodes are appended in evaluation order; backward() walks them in reverse,
/// so every gradient is accumulated in a fixed order and results are
/// bit-reproducible for identical inputs. Gradients are only propagated into
/// nodes that (transitively) depend on a parameter leaf.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  void set_stage(std::string stage) { stage_ = std::move(stage); }
  const std::string& stage() const { return stage_; }

  Var constant(Mat value) { return push(std::move(value), false, -1, {}, "constant"); }

  /// Leaf bound to entry `entry` of a ParamSet; its gradient is collected by
  /// param_grads().
  Var leaf(Mat value, int entry) { return push(std::move(value), true, entry, {}, "param"); }

  /// Creates one leaf per parameter entry, in entry order.
  std::vector<Var> bind(const ParamSet& params) {
    std::vector<Var> out;
    out.reserve(static_cast<std::size_t>(params.entries()));
    for (int i = 0; i < params.entries(); ++i) out.push_back(leaf(params[i], i));
    return out;
  }

  /// Records the result of a primitive. `inputs` decide whether the node
  /// needs a gradient; `backward` reads grad(self) and accumulates into the
  /// inputs through add_grad().
  Var record(Mat value, std::initializer_list<Var> inputs, const char* op, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), op,
                  std::move(backward));
  }

  Var record(Mat value, std::span<const Var> inputs, const char* op, Backward backward) {
    bool needs = false;
    for (const Var& v : inputs)
      if (v.valid() && nodes_[static_cast<std::size_t>(v.id)].needs_grad) needs = true;
    if (!value.allFinite()) throw NonFiniteError(stage_.empty() ? op : stage_ + " / " + op);
    return push(std::move(value), needs, -1, needs ? std::move(backward) : Backward{}, op);
  }

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool needs_grad(const Var& v) const { return v.valid() && needs_grad(v.id); }

  const Mat& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  template <class Derived>
  void add_grad(int id, const Eigen::MatrixBase<Derived>& g) {
    if (!needs_grad(id)) return;
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }

  void add_grad(int id, int r, int c, double g) {
    if (!needs_grad(id)) return;
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad(r, c) += g;
  }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(const Var& root) {
    if (root.tape != this) throw std::invalid_argument("Tape::backward: foreign variable");
    if (value(root.id).size() != 1) throw std::invalid_argument("Tape::backward: root must be scalar");
    add_grad(root.id, Mat::Ones(1, 1));
    for (int i = root.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
  }

  /// Gradients of all parameter leaves, shaped like `like`. Parameters that
  /// did not influence the root get exact zeros.
  ParamSet param_grads(const ParamSet& like) const {
    ParamSet out = like.zeros_like();
    for (const auto& n : nodes_)
      if (n.param_entry >= 0 && n.grad.size() != 0) out[n.param_entry] += n.grad;
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    int param_entry = -1;
    Backward backward;
    const char* op = "";
  };

  Var push(Mat value, bool needs, int entry, Backward bw, const char* op) {
    nodes_.push_back(Node{std::move(value), Mat{}, needs, entry, std::move(bw), op});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  std::string stage_;
};

inline const Mat& Var::value() const { return tape->value(id); }

}  // namespace pagnn::diff
