#pragma once

#include <Eigen/Core>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kdgp/basis.hpp"
#include "kdgp/kernel.hpp"
#include "kdgp/linalg.hpp"

namespace kdgp {

/// One noisy point sample of the field, taken by sensor `sensor_id` at
/// sensing step `step`. Positions are in centered basis coordinates.
struct SensorReading {
  int sensor_id = 1;
  int step = 1;
  Vec2 position{0.0, 0.0};
  double value = 0.0;
};

/// Gaussian posterior over the basis weights: mean m, covariance P, and the
/// last sensing step absorbed. P is re-symmetrized after every update and
/// stays PD for well-posed inputs.
struct PosteriorState {
  Eigen::VectorXd m;
  Eigen::MatrixXd P;
  int step = 0;
};

/// Per-query prediction: posterior mean and (pointwise) variance.
struct Prediction {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Fresh weight posterior: zero mean, prior covariance diag(S(lambda_e)).
inline PosteriorState kgp_init(const BasisSet& basis) {
  PosteriorState s;
  s.m = Eigen::VectorXd::Zero(basis.E);
  s.P = Eigen::MatrixXd::Zero(basis.E, basis.E);
  for (int e = 0; e < basis.E; ++e)
    s.P(e, e) = basis.spectral_densities[static_cast<std::size_t>(e)];
  s.step = 0;
  return s;
}

/// Single-measurement Kalman update. S_k is a scalar here, so the per-update
/// cost stays O(E^2) with no matrix inversion.
inline PosteriorState kgp_update(const PosteriorState& state, const Vec2& x, double y,
                                 const KernelHyperparams& hp, const BasisSet& basis) {
  const Eigen::VectorXd phi = phi_vector(x, basis);
  const double s_k = phi.dot(state.P * phi) + hp.sigma_n * hp.sigma_n;
  if (!(s_k > 0.0)) throw NumericalError("kgp_update: innovation variance not positive");
  const Eigen::VectorXd gain = (state.P * phi) / s_k;

  PosteriorState out;
  out.m = state.m + gain * (y - phi.dot(state.m));
  out.P = state.P - gain * s_k * gain.transpose();
  symmetrize(out.P);
  out.step = state.step + 1;
  return out;
}

/// Closed-form batch posterior P = (Lambda_bar^-1 + sigma_n^-2 sum phi phi^T)^-1,
/// m = P sigma_n^-2 sum phi y. Non-recursive by construction; serves as the
/// independent reference for the Kalman recursion. No readings returns the
/// initial state.
inline PosteriorState blr_batch_posterior(const std::vector<SensorReading>& readings,
                                          const BasisSet& basis,
                                          const KernelHyperparams& hp) {
  if (readings.empty()) return kgp_init(basis);
  const int E = basis.E;
  const double inv_noise = 1.0 / (hp.sigma_n * hp.sigma_n);

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(E, E);
  for (int e = 0; e < E; ++e)
    info(e, e) = 1.0 / basis.spectral_densities[static_cast<std::size_t>(e)];
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(E);
  for (const auto& r : readings) {
    const Eigen::VectorXd phi = phi_vector(r.position, basis);
    info.noalias() += inv_noise * phi * phi.transpose();
    rhs.noalias() += inv_noise * phi * r.value;
  }
  symmetrize(info);

  PosteriorState out;
  out.P = solve_spd(info, Eigen::MatrixXd::Identity(E, E));
  symmetrize(out.P);
  out.m = out.P * rhs;
  out.step = static_cast<int>(readings.size());
  return out;
}

/// Posterior field at query points: mean Phi*^T m, variance Phi*^T P Phi*.
inline Prediction posterior_predict(const PosteriorState& state,
                                    const std::vector<Vec2>& queries,
                                    const BasisSet& basis) {
  Prediction pred;
  pred.mean.reserve(queries.size());
  pred.variance.reserve(queries.size());
  for (const auto& q : queries) {
    const Eigen::VectorXd phi = phi_vector(q, basis);
    pred.mean.push_back(phi.dot(state.m));
    pred.variance.push_back(clamp_variance(phi.dot(state.P * phi)));
  }
  return pred;
}

/// Function-space GP regression with an arbitrary kernel callable. Dense
/// (K + sigma_n^2 I) solve; variance is the pointwise diagonal and can be
/// skipped when only the mean surface is needed.
inline Prediction gp_predict_with_kernel(
    const std::vector<SensorReading>& readings, const std::vector<Vec2>& queries,
    const std::function<double(const Vec2&, const Vec2&)>& kernel, double sigma_n,
    bool compute_variance = true) {
  if (readings.empty())
    throw std::invalid_argument("gp_predict_with_kernel: needs at least one reading");
  const int n = static_cast<int>(readings.size());

  Eigen::MatrixXd gram(n, n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = readings[static_cast<std::size_t>(i)].value;
    for (int j = 0; j < n; ++j)
      gram(i, j) = kernel(readings[static_cast<std::size_t>(i)].position,
                          readings[static_cast<std::size_t>(j)].position);
  }
  symmetrize(gram);
  gram.diagonal().array() += sigma_n * sigma_n;
  const auto llt = spd_factor(gram);
  const Eigen::VectorXd alpha = llt.solve(y);

  Prediction pred;
  pred.mean.reserve(queries.size());
  pred.variance.reserve(queries.size());
  Eigen::VectorXd k_star(n);
  for (const auto& q : queries) {
    for (int i = 0; i < n; ++i)
      k_star[i] = kernel(readings[static_cast<std::size_t>(i)].position, q);
    pred.mean.push_back(k_star.dot(alpha));
    if (compute_variance) {
      const double var = kernel(q, q) - k_star.dot(llt.solve(k_star));
      pred.variance.push_back(clamp_variance(var));
    }
  }
  return pred;
}

/// Classic centralized GP (the exact squared-exponential kernel).
inline Prediction classic_gp_predict(const std::vector<SensorReading>& readings,
                                     const std::vector<Vec2>& queries,
                                     const KernelHyperparams& hp,
                                     bool compute_variance = true) {
  return gp_predict_with_kernel(
      readings, queries,
      [&hp](const Vec2& a, const Vec2& b) { return se_kernel(a, b, hp); }, hp.sigma_n,
      compute_variance);
}

}  // namespace kdgp
