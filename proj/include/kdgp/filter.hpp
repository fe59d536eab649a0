#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "kdgp/gp.hpp"
#include "kdgp/linalg.hpp"
#include "kdgp/message.hpp"

namespace kdgp {

/// Multi-measurement Kalman update with the assembled measurement matrix.
/// S = H^T P H + sigma_n^2 I is R x R, so the only inversion in the whole
/// pipeline is R x R. All-zero columns of H (sensors whose message never
/// arrived) decouple in S and contribute nothing to the update.
inline PosteriorState kdgp_update(const PosteriorState& state,
                                  const AssembledMeasurement& meas,
                                  const KernelHyperparams& hp) {
  if (meas.H.rows() != state.m.size())
    throw std::invalid_argument("kdgp_update: H row count does not match state dimension");
  if (meas.y.size() != meas.H.cols())
    throw std::invalid_argument("kdgp_update: y length does not match H column count");

  const Eigen::MatrixXd ph = state.P * meas.H;                // E x R
  Eigen::MatrixXd s = meas.H.transpose() * ph;                // R x R
  s.diagonal().array() += hp.sigma_n * hp.sigma_n;
  symmetrize(s);
  const Eigen::MatrixXd gain = solve_spd(s, ph.transpose()).transpose();  // E x R

  PosteriorState out;
  out.m = state.m + gain * (meas.y - meas.H.transpose() * state.m);
  out.P = state.P - gain * s * gain.transpose();
  symmetrize(out.P);
  out.step = state.step + 1;
  return out;
}

/// Temporal prediction for dynamic fields, from the Ornstein-Uhlenbeck
/// kernel: decay a = exp(-dk/l_k), process noise q = 1 - exp(-2 dk/l_k).
/// dk = 0 is the identity; dk -> infinity forgets everything (m -> 0, P -> I).
inline PosteriorState kdgp_predict(const PosteriorState& state, double delta_k,
                                   const KernelHyperparams& hp) {
  if (delta_k < 0.0) throw std::invalid_argument("kdgp_predict: delta_k must be >= 0");
  const double a = std::exp(-delta_k / hp.l_k);
  const double q = 1.0 - std::exp(-2.0 * delta_k / hp.l_k);

  PosteriorState out;
  out.m = a * state.m;
  out.P = a * a * state.P;
  out.P.diagonal().array() += q;
  symmetrize(out.P);
  out.step = state.step;
  return out;
}

}  // namespace kdgp
