#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kdgp/geometry.hpp"

namespace kdgp {

/// Which closed form of the squared-exponential spectral density feeds the
/// basis weights: a (2*pi*l)^(3/2) prefactor (`kPaper`) or the usual
/// two-dimensional sigma_s^2 * (2*pi) * l^2 (`kStandard2d`). Both decay as
/// exp(-l^2 * lambda / 2); only the scale differs.
enum class SpectralForm { kStandard2d, kPaper };

/// Squared-exponential kernel hyperparameters plus the Ornstein-Uhlenbeck
/// temporal length-scale used by the dynamic prediction step.
struct KernelHyperparams {
  double sigma_s = 1.0;  ///< signal std-dev (field units)
  double l = 0.1;        ///< spatial length-scale (domain units)
  double sigma_n = 0.1;  ///< measurement-noise std-dev (field units)
  double l_k = 3600.0;   ///< temporal length-scale (sensing-step units)

  void validate() const {
    if (!(sigma_s > 0.0) || !(l > 0.0) || !(sigma_n > 0.0) || !(l_k > 0.0))
      throw std::invalid_argument("KernelHyperparams: all parameters must be > 0");
  }
};

/// Squared-exponential kernel sigma_s^2 * exp(-||x - x'||^2 / (2 l^2)).
inline double se_kernel(const Vec2& x, const Vec2& x_prime,
                        const KernelHyperparams& hp) {
  const double d2 = (x - x_prime).squaredNorm();
  return hp.sigma_s * hp.sigma_s * std::exp(-d2 / (2.0 * hp.l * hp.l));
}

/// Spectral density of the squared-exponential kernel at eigenvalue lambda_e.
inline double spectral_density(double lambda_e, const KernelHyperparams& hp,
                               SpectralForm form = SpectralForm::kStandard2d) {
  const double s2 = hp.sigma_s * hp.sigma_s;
  const double decay = std::exp(-hp.l * hp.l * lambda_e / 2.0);
  const double two_pi = 2.0 * std::numbers::pi;
  if (form == SpectralForm::kPaper)
    return s2 * std::pow(two_pi * hp.l, 1.5) * decay;
  return s2 * two_pi * hp.l * hp.l * decay;
}

}  // namespace kdgp
