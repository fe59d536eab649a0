#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kdgp/basis.hpp"
#include "kdgp/errors.hpp"
#include "kdgp/geometry.hpp"
#include "kdgp/linalg.hpp"

namespace kdgp {

/// Node-centered scalar field on a rectangle: values(i, j) sits at
/// (xmin + i*dx, ymin + j*dy), boundary nodes included.
struct FieldGrid {
  Rect domain;
  int nx = 0, ny = 0;
  Eigen::MatrixXd values;  ///< nx x ny
  double time = 0.0;

  double dx() const { return domain.width() / (nx - 1); }
  double dy() const { return domain.height() / (ny - 1); }
  Vec2 node(int i, int j) const {
    return {domain.xmin + i * dx(), domain.ymin + j * dy()};
  }

  static FieldGrid zero(const Rect& domain, int nx, int ny) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("FieldGrid: need at least 2x2 nodes");
    FieldGrid g;
    g.domain = domain;
    g.nx = nx;
    g.ny = ny;
    g.values = Eigen::MatrixXd::Zero(nx, ny);
    return g;
  }
};

// --- convection-diffusion coefficients --------------------------------------

/// Diffusivity D(x) = 0.005 (x1^2 + x2^2) + 0.01 x1 x2 + 0.02.
inline double diffusivity(const Vec2& x) {
  return 0.005 * (x.x() * x.x() + x.y() * x.y()) + 0.01 * x.x() * x.y() + 0.02;
}

/// Velocity v(x, t) = [2 (x1 + x2 - t), x2 - x1 + t].
inline Vec2 velocity(const Vec2& x, double t) {
  return {2.0 * (x.x() + x.y() - t), x.y() - x.x() + t};
}

/// Gaussian source C(x) peaked at c, squared width 0.007.
inline double source(const Vec2& x, const Vec2& c) {
  const double d2 = (x - c).squaredNorm();
  return std::exp(-d2 / 0.007);
}

/// Coefficient set of the PDE df/dt = div(D grad f) + div(v f) + C. The
/// defaults are the dynamic scenario's forms; tests inject simpler ones.
struct PdeCoefficients {
  std::function<double(const Vec2&)> diffusivity_fn;
  std::function<Vec2(const Vec2&, double)> velocity_fn;
  std::function<double(const Vec2&)> source_fn;

  static PdeCoefficients scenario(const Vec2& source_location) {
    PdeCoefficients c;
    c.diffusivity_fn = [](const Vec2& x) { return diffusivity(x); };
    c.velocity_fn = [](const Vec2& x, double t) { return velocity(x, t); };
    c.source_fn = [source_location](const Vec2& x) { return source(x, source_location); };
    return c;
  }
};

namespace detail {

struct PdeBounds {
  double d_max = 0.0;
  double v1_max = 0.0;
  double v2_max = 0.0;
};

inline PdeBounds pde_bounds(const FieldGrid& g, double t, const PdeCoefficients& coeff) {
  PdeBounds b;
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j) {
      const Vec2 p = g.node(i, j);
      b.d_max = std::max(b.d_max, coeff.diffusivity_fn(p));
      const Vec2 v = coeff.velocity_fn(p, t);
      b.v1_max = std::max(b.v1_max, std::abs(v.x()));
      b.v2_max = std::max(b.v2_max, std::abs(v.y()));
    }
  return b;
}

}  // namespace detail

/// The per-axis bound dt <= 0.9 * min(dx^2/(4 D_max), dx/||v||_max);
/// convection_diffusion_step's precondition.
inline double stability_bound(const FieldGrid& g, double t,
                              const PdeCoefficients& coeff) {
  const auto b = detail::pde_bounds(g, t, coeff);
  const double dx = std::min(g.dx(), g.dy());
  const double v_norm = std::hypot(b.v1_max, b.v2_max);
  const double diff =
      b.d_max > 0.0 ? dx * dx / (4.0 * b.d_max) : std::numeric_limits<double>::infinity();
  const double adv = v_norm > 0.0 ? dx / v_norm : std::numeric_limits<double>::infinity();
  return 0.9 * std::min(diff, adv);
}

/// Time step used when substepping: the combined explicit operator needs the
/// summed advective + diffusive limit, sharper than the per-axis bound above.
inline double stable_dt(const FieldGrid& g, double t, const PdeCoefficients& coeff) {
  const auto b = detail::pde_bounds(g, t, coeff);
  const double dx = g.dx(), dy = g.dy();
  const double denom = 4.0 * b.d_max / (dx * dx) + b.v1_max / dx + b.v2_max / dy;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return 0.9 / denom;
}

/// One explicit-Euler step of df/dt = div(D grad f) + div(v f) + C with
/// zero-Dirichlet boundaries: central differences for diffusion, first-order
/// upwind fluxes for the convection term (the +div(v f) sign makes the flux
/// velocity -v).
inline FieldGrid convection_diffusion_step(const FieldGrid& grid, double dt,
                                           const PdeCoefficients& coeff) {
  if (!(dt > 0.0)) throw std::invalid_argument("convection_diffusion_step: dt must be > 0");
  if (dt > stability_bound(grid, grid.time, coeff) * (1.0 + 1e-12))
    throw std::invalid_argument("convection_diffusion_step: dt violates the stability bound");

  const int nx = grid.nx, ny = grid.ny;
  const double dx = grid.dx(), dy = grid.dy();
  const double t = grid.time;
  const auto& f = grid.values;

  FieldGrid out = grid;
  for (int i = 1; i < nx - 1; ++i) {
    for (int j = 1; j < ny - 1; ++j) {
      const Vec2 p = grid.node(i, j);

      // div(v f) written as -div(w f) with w = -v; upwind fluxes at faces.
      const auto flux_x = [&](int ia, int ib) {
        const double w = -0.5 * (coeff.velocity_fn(grid.node(ia, j), t).x() +
                                 coeff.velocity_fn(grid.node(ib, j), t).x());
        return w > 0.0 ? w * f(ia, j) : w * f(ib, j);
      };
      const auto flux_y = [&](int ja, int jb) {
        const double w = -0.5 * (coeff.velocity_fn(grid.node(i, ja), t).y() +
                                 coeff.velocity_fn(grid.node(i, jb), t).y());
        return w > 0.0 ? w * f(i, ja) : w * f(i, jb);
      };
      const double adv = -(flux_x(i, i + 1) - flux_x(i - 1, i)) / dx -
                         (flux_y(j, j + 1) - flux_y(j - 1, j)) / dy;

      // div(D grad f) with face-averaged diffusivity.
      const double d_c = coeff.diffusivity_fn(p);
      const double d_e = 0.5 * (d_c + coeff.diffusivity_fn(grid.node(i + 1, j)));
      const double d_w = 0.5 * (d_c + coeff.diffusivity_fn(grid.node(i - 1, j)));
      const double d_n = 0.5 * (d_c + coeff.diffusivity_fn(grid.node(i, j + 1)));
      const double d_s = 0.5 * (d_c + coeff.diffusivity_fn(grid.node(i, j - 1)));
      const double diff =
          (d_e * (f(i + 1, j) - f(i, j)) - d_w * (f(i, j) - f(i - 1, j))) / (dx * dx) +
          (d_n * (f(i, j + 1) - f(i, j)) - d_s * (f(i, j) - f(i, j - 1))) / (dy * dy);

      out.values(i, j) = f(i, j) + dt * (adv + diff + coeff.source_fn(p));
      if (!std::isfinite(out.values(i, j)))
        throw NumericalError("convection_diffusion_step: non-finite value");
    }
  }
  out.values.row(0).setZero();
  out.values.row(nx - 1).setZero();
  out.values.col(0).setZero();
  out.values.col(ny - 1).setZero();
  out.time = t + dt;
  return out;
}

/// Scenario-coefficient step with the source at c.
inline FieldGrid convection_diffusion_step(const FieldGrid& grid, double dt, const Vec2& c) {
  return convection_diffusion_step(grid, dt, PdeCoefficients::scenario(c));
}

/// Advances the field by `duration`, substepping at the combined-operator
/// stable dt.
inline FieldGrid advance_field(FieldGrid grid, double duration, const PdeCoefficients& coeff) {
  double remaining = duration;
  while (remaining > 1e-12) {
    const double dt = std::min(stable_dt(grid, grid.time, coeff), remaining);
    grid = convection_diffusion_step(grid, dt, coeff);
    remaining -= dt;
  }
  return grid;
}

inline FieldGrid advance_field(FieldGrid grid, double duration, const Vec2& c) {
  return advance_field(std::move(grid), duration, PdeCoefficients::scenario(c));
}

// --- ground-truth samplers ---------------------------------------------------

/// Draw from the reduced-rank prior: f = sum_e w_e phi_e, w_e ~ N(0, S(lambda_e)).
/// The basis should be built for this grid's domain (same DomainMap).
inline FieldGrid sample_gp_field_basis(const Rect& domain, int nx, int ny,
                                       const BasisSet& basis, const DomainMap& map,
                                       std::mt19937_64& rng) {
  FieldGrid g = FieldGrid::zero(domain, nx, ny);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd w(basis.E);
  for (int e = 0; e < basis.E; ++e)
    w[e] = gauss(rng) * std::sqrt(basis.spectral_densities[static_cast<std::size_t>(e)]);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      g.values(i, j) = phi_vector(map.to_centered(g.node(i, j)), basis).dot(w);
  return g;
}

/// Exact draw through a dense Cholesky of the kernel Gram matrix over all
/// grid nodes. Only for grids small enough to factor (about 70x70).
inline FieldGrid sample_gp_field_dense(const Rect& domain, int nx, int ny,
                                       const KernelHyperparams& hp, std::mt19937_64& rng) {
  if (static_cast<long>(nx) * ny > 70L * 70L)
    throw std::invalid_argument("sample_gp_field_dense: grid too large for dense factorization");
  FieldGrid g = FieldGrid::zero(domain, nx, ny);
  const int n = nx * ny;
  Eigen::MatrixXd gram(n, n);
  for (int a = 0; a < n; ++a) {
    const Vec2 pa = g.node(a / ny, a % ny);
    for (int b = 0; b <= a; ++b) {
      const Vec2 pb = g.node(b / ny, b % ny);
      gram(a, b) = gram(b, a) = se_kernel(pa, pb, hp);
    }
  }
  gram.diagonal().array() += 1e-8 * hp.sigma_s * hp.sigma_s;
  const auto llt = spd_factor(gram);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (int a = 0; a < n; ++a) z[a] = gauss(rng);
  const Eigen::VectorXd f = Eigen::MatrixXd(llt.matrixL()) * z;
  for (int a = 0; a < n; ++a) g.values(a / ny, a % ny) = f[a];
  return g;
}

// --- measurement --------------------------------------------------------------

/// Bilinear interpolation of the grid at an interior point.
inline double interpolate(const FieldGrid& g, const Vec2& x) {
  if (!g.domain.contains(x, 1e-12 * g.domain.diagonal()))
    throw std::invalid_argument("interpolate: point outside the field domain");
  const double gx = std::clamp((x.x() - g.domain.xmin) / g.dx(), 0.0, double(g.nx - 1));
  const double gy = std::clamp((x.y() - g.domain.ymin) / g.dy(), 0.0, double(g.ny - 1));
  const int i0 = std::min(static_cast<int>(gx), g.nx - 2);
  const int j0 = std::min(static_cast<int>(gy), g.ny - 2);
  const double fx = gx - i0, fy = gy - j0;
  return g.values(i0, j0) * (1 - fx) * (1 - fy) + g.values(i0 + 1, j0) * fx * (1 - fy) +
         g.values(i0, j0 + 1) * (1 - fx) * fy + g.values(i0 + 1, j0 + 1) * fx * fy;
}

/// Noisy point measurement: bilinear field value plus N(0, sigma_n^2).
inline double measure(const FieldGrid& g, const Vec2& x, double sigma_n,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, sigma_n);
  const double clean = interpolate(g, x);
  return sigma_n > 0.0 ? clean + gauss(rng) : clean;
}

// --- export --------------------------------------------------------------------

/// CSV snapshot: header "nx,ny,xmin,xmax,ymin,ymax,t" then the values,
/// row-major (one line per x index).
inline void write_grid_csv(const FieldGrid& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_grid_csv: cannot open " + path);
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", g.nx, g.ny,
                g.domain.xmin, g.domain.xmax, g.domain.ymin, g.domain.ymax, g.time);
  out << buf;
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j) {
      std::snprintf(buf, sizeof(buf), j + 1 < g.ny ? "%.17g," : "%.17g\n", g.values(i, j));
      out << buf;
    }
  }
}

}  // namespace kdgp
