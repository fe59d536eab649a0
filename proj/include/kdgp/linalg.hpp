#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "kdgp/errors.hpp"

namespace kdgp {

/// In-place re-symmetrization, applied after every covariance update.
inline void symmetrize(Eigen::MatrixXd& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

/// Cholesky of a symmetric PD matrix with the bounded fallback policy:
/// on failure add jitter 1e-10 * trace / n to the diagonal once, then give up.
inline Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = 1e-10 * a.trace() / static_cast<double>(a.rows());
  Eigen::MatrixXd aj = a;
  aj.diagonal().array() += jitter;
  llt.compute(aj);
  if (llt.info() != Eigen::Success)
    throw NumericalError("SPD factorization failed even with jitter");
  return llt;
}

/// Solves A X = B for symmetric PD A under the single-jitter policy.
inline Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return spd_factor(a).solve(b);
}

/// Element-wise root-mean-square difference over all entries.
inline double rmse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("rmse: dimension mismatch");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

/// Predicted variances may round off slightly negative; tiny dips are
/// clamped, anything past -1e-12 signals genuine loss of positive
/// definiteness.
inline double clamp_variance(double v) {
  if (v >= 0.0) return v;
  if (v > -1e-12) return 0.0;
  throw NumericalError("negative predicted variance beyond round-off");
}

}  // namespace kdgp
