#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kdgp/linalg.hpp"
#include "kdgp/message.hpp"

namespace kdgp {
namespace maxplus {

/// Additive identity of the max-plus semiring. Represented as IEEE -inf so
/// that oplus/otimes reduce to native max/+ with correct absorption.
inline constexpr double eps = -std::numeric_limits<double>::infinity();

/// Multiplicative identity e = 0.
inline constexpr double e = 0.0;

/// a oplus b = max(a, b); eps is neutral.
inline double mp_add(double a, double b) { return std::max(a, b); }

/// a otimes b = a + b; eps absorbs (-inf + x = -inf).
inline double mp_mul(double a, double b) { return a + b; }

/// Matrix over R union {-inf} with oplus/otimes semantics.
struct MaxPlusMatrix {
  Eigen::MatrixXd entries;

  MaxPlusMatrix() = default;
  MaxPlusMatrix(int rows, int cols)
      : entries(Eigen::MatrixXd::Constant(rows, cols, eps)) {}

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
  double& operator()(int i, int j) { return entries(i, j); }
  double operator()(int i, int j) const { return entries(i, j); }

  /// Identity: e on the diagonal, eps elsewhere.
  static MaxPlusMatrix identity(int n) {
    MaxPlusMatrix m(n, n);
    m.entries.diagonal().setConstant(e);
    return m;
  }

  /// E-bar, the all-e ("zero") matrix of max-plus algebra.
  static MaxPlusMatrix all_e(int rows, int cols) {
    MaxPlusMatrix m(rows, cols);
    m.entries.setConstant(e);
    return m;
  }

  bool operator==(const MaxPlusMatrix& o) const { return entries == o.entries; }
};

/// (A otimes B)_ij = max_n (a_in + b_nj).
inline MaxPlusMatrix mp_mat_mul(const MaxPlusMatrix& a, const MaxPlusMatrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("mp_mat_mul: inner dimensions disagree");
  MaxPlusMatrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double acc = eps;
      for (int n = 0; n < a.cols(); ++n) acc = std::max(acc, a(i, n) + b(n, j));
      out(i, j) = acc;
    }
  return out;
}

/// A^t under otimes; t = 0 is the max-plus identity. With self-loop
/// adjacencies, entry (i,j) of A^t is e exactly when j reaches i within
/// t hops, so the minimal t with A^t all-e is the graph diameter.
inline MaxPlusMatrix mp_mat_pow(const MaxPlusMatrix& a, int t) {
  if (a.rows() != a.cols()) throw std::invalid_argument("mp_mat_pow: matrix not square");
  if (t < 0) throw std::invalid_argument("mp_mat_pow: negative power");
  MaxPlusMatrix out = MaxPlusMatrix::identity(a.rows());
  for (int k = 0; k < t; ++k) out = mp_mat_mul(out, a);
  return out;
}

/// The element-wise max/min split of a message stack, always including the
/// implicit all-zero matrix: Qplus >= 0, Qminus <= 0 entry-wise.
struct ExtremaSplit {
  Eigen::MatrixXd qplus;
  Eigen::MatrixXd qminus;
};

/// Depth-wise extrema over a stack of equally-sized real matrices. For
/// stacks where each entry line holds at most one distinct nonzero value
/// (the K-DGP case), qplus + qminus reconstructs the element-wise sum
/// exactly.
inline ExtremaSplit extrema_split(const std::vector<Eigen::MatrixXd>& stack) {
  if (stack.empty()) throw std::invalid_argument("extrema_split: empty stack");
  ExtremaSplit out;
  out.qplus = Eigen::MatrixXd::Zero(stack.front().rows(), stack.front().cols());
  out.qminus = out.qplus;
  for (const auto& h : stack) {
    if (h.rows() != out.qplus.rows() || h.cols() != out.qplus.cols())
      throw std::invalid_argument("extrema_split: dimension mismatch in stack");
    out.qplus = out.qplus.cwiseMax(h);
    out.qminus = out.qminus.cwiseMin(h);
  }
  return out;
}

/// One dual-extrema consensus round for a sensor: stack its own message with
/// everything received, split into non-negative / non-positive extrema and
/// sum. Nonzero entries pass through both extrema unchanged, which is what
/// keeps the intrinsic column bit-identical across iterations.
inline SharedMessage dual_extrema_step(const SharedMessage& own,
                                       const std::vector<SharedMessage>& inbox) {
  std::vector<Eigen::MatrixXd> stack;
  stack.reserve(inbox.size() + 1);
  stack.push_back(own.matrix);
  for (const auto& msg : inbox) {
    if (msg.rows() != own.rows() || msg.width() != own.width())
      throw std::invalid_argument("dual_extrema_step: message dimensions disagree");
    stack.push_back(msg.matrix);
  }
  const ExtremaSplit split = extrema_split(stack);

  SharedMessage out;
  out.sensor_id = own.sensor_id;
  out.iteration = own.iteration + 1;
  out.matrix = split.qplus + split.qminus;
  return out;
}

/// Consensus-loop convergence test: element-wise RMSE between consecutive
/// iterates below the threshold.
inline bool consensus_converged(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& curr,
                                double theta_th) {
  return rmse(prev, curr) < theta_th;
}

}  // namespace maxplus
}  // namespace kdgp
