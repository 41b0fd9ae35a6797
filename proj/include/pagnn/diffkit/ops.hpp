#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagnn/diffkit/tape.hpp"

namespace pagnn::diff {

inline constexpr double kLeakySlope = 0.01;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
inline void expect(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}
inline std::string dims(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}
}  // namespace detail

// Subgradient convention: relu'(0) = 0, leaky_relu'(0) = kLeakySlope.
inline double relu_grad(double z) { return z > 0.0 ? 1.0 : 0.0; }
inline double leaky(double z) { return z > 0.0 ? z : kLeakySlope * z; }
inline double leaky_grad(double z) { return z > 0.0 ? 1.0 : kLeakySlope; }

/// X W^T (+ b broadcast over rows). X: R x in, W: out x in, b: 1 x out.
inline Var linear(const Var& x, const Var& w, const Var& b = {}) {
  Tape& t = *x.tape;
  detail::expect(x.cols() == w.cols(), "linear",
                 "input " + detail::dims(x.value()) + " vs weight " + detail::dims(w.value()));
  Mat y = x.value() * w.value().transpose();
  if (b.valid()) {
    detail::expect(b.rows() == 1 && b.cols() == w.rows(), "linear", "bias shape");
    y.rowwise() += b.value().row(0);
  }
  const int xi = x.id, wi = w.id, bi = b.valid() ? b.id : -1;
  return t.record(std::move(y), {x, w, b}, "linear", [xi, wi, bi](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(xi)) tp.add_grad(xi, g * tp.value(wi));
    if (tp.needs_grad(wi)) tp.add_grad(wi, g.transpose() * tp.value(xi));
    if (bi >= 0 && tp.needs_grad(bi)) tp.add_grad(bi, g.colwise().sum());
  });
}

inline Var matmul(const Var& a, const Var& b) {
  detail::expect(a.cols() == b.rows(), "matmul", detail::dims(a.value()) + " * " + detail::dims(b.value()));
  const int ai = a.id, bi = b.id;
  return a.tape->record(a.value() * b.value(), {a, b}, "matmul", [ai, bi](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(ai)) tp.add_grad(ai, g * tp.value(bi).transpose());
    if (tp.needs_grad(bi)) tp.add_grad(bi, tp.value(ai).transpose() * g);
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::expect(a.rows() == b.rows() && a.cols() == b.cols(), "add",
                 detail::dims(a.value()) + " + " + detail::dims(b.value()));
  const int ai = a.id, bi = b.id;
  return a.tape->record(a.value() + b.value(), {a, b}, "add", [ai, bi](Tape& tp, int self) {
    tp.add_grad(ai, tp.grad(self));
    tp.add_grad(bi, tp.grad(self));
  });
}

inline Var scale(const Var& a, double s) {
  const int ai = a.id;
  return a.tape->record(a.value() * s, {a}, "scale",
                        [ai, s](Tape& tp, int self) { tp.add_grad(ai, tp.grad(self) * s); });
}

inline Var relu(const Var& a) {
  const int ai = a.id;
  return a.tape->record(a.value().cwiseMax(0.0), {a}, "relu", [ai](Tape& tp, int self) {
    tp.add_grad(ai, tp.grad(self).cwiseProduct(tp.value(ai).unaryExpr(&relu_grad)));
  });
}

inline Var leaky_relu(const Var& a) {
  const int ai = a.id;
  return a.tape->record(a.value().unaryExpr(&leaky), {a}, "leaky_relu", [ai](Tape& tp, int self) {
    tp.add_grad(ai, tp.grad(self).cwiseProduct(tp.value(ai).unaryExpr(&leaky_grad)));
  });
}

inline Var transpose(const Var& a) {
  const int ai = a.id;
  return a.tape->record(a.value().transpose(), {a}, "transpose",
                        [ai](Tape& tp, int self) { tp.add_grad(ai, tp.grad(self).transpose()); });
}

/// Column j as an R x 1 matrix.
inline Var column(const Var& a, int j) {
  detail::expect(j >= 0 && j < a.cols(), "column", "index out of range");
  const int ai = a.id;
  return a.tape->record(a.value().col(j), {a}, "column", [ai, j](Tape& tp, int self) {
    const Mat& v = tp.value(ai);
    Mat g = Mat::Zero(v.rows(), v.cols());
    g.col(j) = tp.grad(self);
    tp.add_grad(ai, g);
  });
}

/// Columns [start, start + count).
inline Var slice_cols(const Var& a, int start, int count) {
  detail::expect(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols", "range");
  const int ai = a.id;
  return a.tape->record(a.value().middleCols(start, count), {a}, "slice_cols",
                        [ai, start, count](Tape& tp, int self) {
                          const Mat& v = tp.value(ai);
                          Mat g = Mat::Zero(v.rows(), v.cols());
                          g.middleCols(start, count) = tp.grad(self);
                          tp.add_grad(ai, g);
                        });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  detail::expect(!parts.empty(), "concat_cols", "no inputs");
  Tape& t = *parts.front().tape;
  const auto rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::expect(p.rows() == rows, "concat_cols", "row mismatch");
    cols += p.cols();
  }
  Mat y(rows, cols);
  std::vector<int> ids;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    ids.push_back(p.id);
  }
  return t.record(std::move(y), std::span<const Var>(parts), "concat_cols", [ids](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    Eigen::Index off = 0;
    for (int id : ids) {
      const auto c = tp.value(id).cols();
      tp.add_grad(id, g.middleCols(off, c));
      off += c;
    }
  });
}

/// Softmax along each row.
inline Var row_softmax(const Var& a) {
  Mat y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double mx = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - mx).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  const int ai = a.id;
  return a.tape->record(std::move(y), {a}, "row_softmax", [ai](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    const Mat& s = tp.value(self);
    Mat dot = (g.cwiseProduct(s)).rowwise().sum();
    Mat ga = s.cwiseProduct(g - dot.replicate(1, g.cols()));
    tp.add_grad(ai, ga);
  });
}

/// Attention logits of one head. For every target node i (rows of `src`)
/// and neighbour j (rows of `nbr`):
///   out(i, j) = a . LeakyReLU(src_i + nbr_j + w_e * edge(i, j))
/// `src` = W_s x_i (P x F), `nbr` = W_t x_j (Q x F), `edge` P x Q, w_e and a
/// are 1 x F. `edge` / `w_e` may be omitted (no edge term).
inline Var attention_logits(const Var& src, const Var& nbr, const Var& edge, const Var& w_e,
                            const Var& a) {
  const auto P = src.rows(), Q = nbr.rows(), F = src.cols();
  const bool has_edge = edge.valid();
  detail::expect(nbr.cols() == F && a.rows() == 1 && a.cols() == F, "attention_logits", "width mismatch");
  if (has_edge)
    detail::expect(edge.rows() == P && edge.cols() == Q && w_e.rows() == 1 && w_e.cols() == F,
                   "attention_logits", "edge shape");
  const Mat& S = src.value();
  const Mat& T = nbr.value();
  const Mat& A = a.value();
  Mat out(P, Q);
  for (Eigen::Index i = 0; i < P; ++i)
    for (Eigen::Index j = 0; j < Q; ++j) {
      double acc = 0.0;
      const double e = has_edge ? edge.value()(i, j) : 0.0;
      for (Eigen::Index f = 0; f < F; ++f) {
        double z = S(i, f) + T(j, f);
        if (has_edge) z += w_e.value()(0, f) * e;
        acc += A(0, f) * leaky(z);
      }
      out(i, j) = acc;
    }
  const int si = src.id, ni = nbr.id, ai = a.id;
  const int ei = has_edge ? edge.id : -1, wi = has_edge ? w_e.id : -1;
  return src.tape->record(
      std::move(out), {src, nbr, edge, w_e, a}, "attention_logits",
      [si, ni, ei, wi, ai](Tape& tp, int self) {
        const Mat& g = tp.grad(self);
        const Mat& S = tp.value(si);
        const Mat& T = tp.value(ni);
        const Mat& A = tp.value(ai);
        const auto P = S.rows(), Q = T.rows(), F = S.cols();
        Mat gS = Mat::Zero(P, F), gT = Mat::Zero(Q, F), gA = Mat::Zero(1, F);
        Mat gW = Mat::Zero(1, F), gE;
        if (ei >= 0) gE = Mat::Zero(P, Q);
        for (Eigen::Index i = 0; i < P; ++i)
          for (Eigen::Index j = 0; j < Q; ++j) {
            const double gij = g(i, j);
            const double e = ei >= 0 ? tp.value(ei)(i, j) : 0.0;
            for (Eigen::Index f = 0; f < F; ++f) {
              double z = S(i, f) + T(j, f);
              if (ei >= 0) z += tp.value(wi)(0, f) * e;
              gA(0, f) += gij * leaky(z);
              const double dz = gij * A(0, f) * leaky_grad(z);
              gS(i, f) += dz;
              gT(j, f) += dz;
              if (ei >= 0) {
                gW(0, f) += dz * e;
                gE(i, j) += dz * tp.value(wi)(0, f);
              }
            }
          }
        tp.add_grad(si, gS);
        tp.add_grad(ni, gT);
        tp.add_grad(ai, gA);
        if (ei >= 0) {
          tp.add_grad(wi, gW);
          tp.add_grad(ei, gE);
        }
      });
}

/// Column-wise maximum (1 x C). Ties route the gradient to the first row.
inline Var colwise_max(const Var& a) {
  const Mat& v = a.value();
  Mat y(1, v.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(v.cols()));
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < v.rows(); ++r)
      if (v(r, c) > v(best, c)) best = r;
    arg[static_cast<std::size_t>(c)] = best;
    y(0, c) = v(best, c);
  }
  const int ai = a.id;
  return a.tape->record(std::move(y), {a}, "colwise_max", [ai, arg](Tape& tp, int self) {
    const Mat& g = tp.grad(self);
    const Mat& v = tp.value(ai);
    Mat ga = Mat::Zero(v.rows(), v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) ga(arg[static_cast<std::size_t>(c)], c) = g(0, c);
    tp.add_grad(ai, ga);
  });
}

/// Sum of all entries as 1 x 1.
inline Var sum(const Var& a) {
  const int ai = a.id;
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape->record(std::move(y), {a}, "sum", [ai](Tape& tp, int self) {
    const Mat& v = tp.value(ai);
    tp.add_grad(ai, Mat::Constant(v.rows(), v.cols(), tp.grad(self)(0, 0)));
  });
}

}  // namespace pagnn::diff
