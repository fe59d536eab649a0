#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "kdgp/basis.hpp"
#include "kdgp/gp.hpp"
#include "kdgp/linalg.hpp"

namespace kdgp {

/// Per-sensor MADGP sufficient statistics: alpha is the running average of
/// phi phi^T over the sensor's own measurements, beta the matching average
/// of phi * y. Average consensus mixes both across the network.
struct MadgpState {
  Eigen::MatrixXd alpha;  ///< E x E, symmetric PSD
  Eigen::VectorXd beta;   ///< E
  int step = 0;           ///< k, measurements absorbed

  static MadgpState init(int E) {
    MadgpState s;
    s.alpha = Eigen::MatrixXd::Zero(E, E);
    s.beta = Eigen::VectorXd::Zero(E);
    s.step = 0;
    return s;
  }
};

/// Absorb the sensor's k-th own measurement with the 1/k running-average
/// weights: alpha <- ((k-1)/k) alpha + (1/k) phi phi^T, beta likewise.
inline MadgpState madgp_local_update(const MadgpState& state, const Vec2& x, double y,
                                     const BasisSet& basis) {
  const int k = state.step + 1;
  const double keep = double(k - 1) / k;
  const double add = 1.0 / k;
  const Eigen::VectorXd phi = phi_vector(x, basis);

  MadgpState out;
  out.alpha = keep * state.alpha + add * (phi * phi.transpose());
  symmetrize(out.alpha);
  out.beta = keep * state.beta + add * phi * y;
  out.step = k;
  return out;
}

/// One average-consensus iteration, v <- v - gamma * sum_j (v - v_j),
/// applied element-wise. Stable for 0 < gamma < 1/deg_max; the per-call
/// check uses the neighbor count actually supplied.
template <typename Value>
Value avg_consensus_step(const Value& own, const std::vector<Value>& neighbor_values,
                         double gamma) {
  if (!(gamma > 0.0) || gamma * static_cast<double>(neighbor_values.size()) >= 1.0)
    throw std::invalid_argument("avg_consensus_step: gamma outside the stable range");
  Value out = own;
  for (const auto& v : neighbor_values) out -= gamma * (own - v);
  return out;
}

/// Prediction from the (consensus-mixed) statistics:
/// mean = Phi*^T (alpha + sigma_n^2/(R k) Lambda^-1)^-1 beta, variance the
/// same quadratic form. Lambda's diagonal is the spectral densities, keeping
/// MADGP on the same approximate prior as the K-GP initialization. The only
/// inversion is E x E.
inline Prediction madgp_predict(const MadgpState& state, const std::vector<Vec2>& queries,
                                int R, int k, const BasisSet& basis,
                                const KernelHyperparams& hp) {
  if (R < 1 || k < 1) throw std::invalid_argument("madgp_predict: R and k must be >= 1");
  const int E = basis.E;
  Eigen::MatrixXd reg = state.alpha;
  const double scale = hp.sigma_n * hp.sigma_n / (double(R) * k);
  for (int e = 0; e < E; ++e)
    reg(e, e) += scale / basis.spectral_densities[static_cast<std::size_t>(e)];
  symmetrize(reg);
  const auto llt = spd_factor(reg);
  const Eigen::VectorXd weights = llt.solve(state.beta);

  Prediction pred;
  pred.mean.reserve(queries.size());
  pred.variance.reserve(queries.size());
  for (const auto& q : queries) {
    const Eigen::VectorXd phi = phi_vector(q, basis);
    pred.mean.push_back(phi.dot(weights));
    pred.variance.push_back(clamp_variance(phi.dot(llt.solve(phi))));
  }
  return pred;
}

/// One consensus message carries the (alpha, beta) pair: E^2 + E doubles
/// plus a small header, quadratic in E.
inline std::size_t madgp_message_byte_size(int E) {
  return 8 + 8 * (static_cast<std::size_t>(E) * E + static_cast<std::size_t>(E));
}

}  // namespace kdgp
