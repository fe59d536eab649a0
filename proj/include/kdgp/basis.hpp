#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kdgp/errors.hpp"
#include "kdgp/kernel.hpp"

namespace kdgp {

/// Reduced-rank eigen-system of the squared-exponential kernel on the
/// centered box [-L, L]^2: Laplacian sine eigenfunctions indexed by integer
/// pairs, their eigenvalues, and the kernel's spectral density at each
/// eigenvalue (the prior variance of the matching weight).
///
/// Pairs are the E lattice points (j1, j2), j1, j2 >= 1, with the smallest
/// eigenvalues lambda_e = sum_m (pi * j_m / 2L)^2, sorted ascending with
/// lexicographic tie-break, so construction is deterministic.
struct BasisSet {
  int E = 0;
  double L = 1.0;
  std::vector<std::pair<int, int>> index_pairs;
  std::vector<double> eigenvalues;
  std::vector<double> spectral_densities;
};

/// Enumerates the E smallest-eigenvalue index pairs and fills the spectral
/// densities. The candidate window {1..J}^2 with J = ceil(2*sqrt(E)) + 2 is
/// provably wide enough: the E-th smallest lattice value is at most
/// 2*ceil(sqrt(E))^2, below the cheapest excluded candidate (J+1)^2 + 1.
inline BasisSet build_basis(int E, double L, const KernelHyperparams& hp,
                            SpectralForm form = SpectralForm::kStandard2d) {
  if (E <= 0) throw std::invalid_argument("build_basis: E must be >= 1");
  if (!(L > 0.0)) throw std::invalid_argument("build_basis: L must be > 0");
  hp.validate();

  const int J = static_cast<int>(std::ceil(2.0 * std::sqrt(static_cast<double>(E)))) + 2;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(J) * J);
  for (int a = 1; a <= J; ++a)
    for (int b = 1; b <= J; ++b) pairs.emplace_back(a, b);
  std::sort(pairs.begin(), pairs.end(), [](const auto& p, const auto& q) {
    const std::int64_t lp = std::int64_t(p.first) * p.first + std::int64_t(p.second) * p.second;
    const std::int64_t lq = std::int64_t(q.first) * q.first + std::int64_t(q.second) * q.second;
    return lp != lq ? lp < lq : p < q;
  });
  pairs.resize(static_cast<std::size_t>(E));

  BasisSet basis;
  basis.E = E;
  basis.L = L;
  basis.index_pairs = std::move(pairs);
  basis.eigenvalues.reserve(E);
  basis.spectral_densities.reserve(E);
  const double c = std::numbers::pi / (2.0 * L);
  for (const auto& [j1, j2] : basis.index_pairs) {
    const double lambda = c * c * (double(j1) * j1 + double(j2) * j2);
    basis.eigenvalues.push_back(lambda);
    basis.spectral_densities.push_back(spectral_density(lambda, hp, form));
  }
  return basis;
}

namespace detail {
inline void check_in_box(const Vec2& x, double L) {
  const double tol = 1e-12 * std::max(1.0, L);
  if (std::abs(x.x()) > L + tol || std::abs(x.y()) > L + tol)
    throw OutOfDomainError("point outside the Hilbert box [-L, L]^2");
}
}  // namespace detail

/// Eigenfunction e (1-based) at a centered point: the Hilbert expansion is
/// only valid inside [-L, L]^2, so points outside raise.
inline double eigenfunction(int e, const Vec2& x, const BasisSet& basis) {
  if (e < 1 || e > basis.E) throw std::invalid_argument("eigenfunction: index out of range");
  detail::check_in_box(x, basis.L);
  const auto& [j1, j2] = basis.index_pairs[static_cast<std::size_t>(e - 1)];
  const double L = basis.L;
  const double inv_sqrt_L = 1.0 / std::sqrt(L);
  const double s1 = std::sin(std::numbers::pi * j1 * (x.x() + L) / (2.0 * L));
  const double s2 = std::sin(std::numbers::pi * j2 * (x.y() + L) / (2.0 * L));
  return inv_sqrt_L * s1 * inv_sqrt_L * s2;
}

/// Phi(x): all E eigenfunctions stacked into a column vector.
inline Eigen::VectorXd phi_vector(const Vec2& x, const BasisSet& basis) {
  detail::check_in_box(x, basis.L);
  Eigen::VectorXd phi(basis.E);
  const double L = basis.L;
  const double inv_L = 1.0 / L;
  const double cx = std::numbers::pi * (x.x() + L) / (2.0 * L);
  const double cy = std::numbers::pi * (x.y() + L) / (2.0 * L);
  for (int e = 0; e < basis.E; ++e) {
    const auto& [j1, j2] = basis.index_pairs[static_cast<std::size_t>(e)];
    phi[e] = inv_L * std::sin(j1 * cx) * std::sin(j2 * cy);
  }
  return phi;
}

/// Reduced-rank kernel surrogate sum_e S(lambda_e) * phi_e(x) * phi_e(x').
/// The spectral densities double as the K-GP prior variances, so this equals
/// Phi(x)^T * P0 * Phi(x') for the initial posterior.
inline double approx_kernel(const Vec2& x, const Vec2& x_prime, const BasisSet& basis) {
  const Eigen::VectorXd a = phi_vector(x, basis);
  const Eigen::VectorXd b = phi_vector(x_prime, basis);
  double sum = 0.0;
  // grouping (a*b) first keeps the result exactly symmetric in the arguments
  for (int e = 0; e < basis.E; ++e)
    sum += basis.spectral_densities[static_cast<std::size_t>(e)] * (a[e] * b[e]);
  return sum;
}

}  // namespace kdgp
