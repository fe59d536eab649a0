#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kdgp/field.hpp"

using namespace kdgp;
using Catch::Approx;

namespace {

const KernelHyperparams kHp{4.0, 0.2, 0.1, 3600.0};

}  // namespace

TEST_CASE("scenario coefficients") {
  CHECK(diffusivity({0.0, 0.0}) == Approx(0.02));
  CHECK(diffusivity({1.0, 2.0}) == Approx(0.005 * 5.0 + 0.01 * 2.0 + 0.02));
  CHECK(source({6.0, 6.0}, {6.0, 6.0}) == Approx(1.0));
  CHECK(source({7.0, 6.0}, {6.0, 6.0}) == Approx(std::exp(-1.0 / 0.007)));
  const Vec2 v0 = velocity({0.0, 0.0}, 0.0);
  CHECK(v0.x() == Approx(0.0));
  CHECK(v0.y() == Approx(0.0));
  const Vec2 v1 = velocity({1.0, 2.0}, 0.5);
  CHECK(v1.x() == Approx(2.0 * 2.5));
  CHECK(v1.y() == Approx(2.0 - 1.0 + 0.5));
}

TEST_CASE("convection_diffusion_step") {
  const Rect domain{0.0, 10.0, 0.0, 10.0};

  SECTION("zero source and zero field stays zero") {
    // a source this far away underflows to exactly 0 at every node
    FieldGrid f = FieldGrid::zero(domain, 20, 20);
    f = advance_field(std::move(f), 0.05, Vec2(1e6, 1e6));
    CHECK(f.values.isZero(0.0));
    CHECK(f.time == Approx(0.05));
  }

  SECTION("dt beyond the stability bound raises") {
    FieldGrid f = FieldGrid::zero(domain, 20, 20);
    const auto coeff = PdeCoefficients::scenario({6.0, 6.0});
    const double bound = stability_bound(f, 0.0, coeff);
    CHECK_THROWS_AS(convection_diffusion_step(f, bound * 1.5, coeff), std::invalid_argument);
    CHECK_NOTHROW(convection_diffusion_step(f, bound * 0.5, coeff));
    CHECK_THROWS_AS(convection_diffusion_step(f, 0.0, coeff), std::invalid_argument);
  }

  SECTION("diffusion-only mass never grows under Dirichlet walls") {
    PdeCoefficients coeff;
    coeff.diffusivity_fn = [](const Vec2&) { return 0.1; };
    coeff.velocity_fn = [](const Vec2&, double) { return Vec2(0.0, 0.0); };
    coeff.source_fn = [](const Vec2&) { return 0.0; };

    FieldGrid f = FieldGrid::zero({0, 1, 0, 1}, 25, 25);
    for (int i = 8; i < 17; ++i)
      for (int j = 8; j < 17; ++j) f.values(i, j) = 2.0;
    double mass = f.values.sum();
    for (int s = 0; s < 30; ++s) {
      f = convection_diffusion_step(f, stable_dt(f, f.time, coeff), coeff);
      const double now = f.values.sum();
      CHECK(now <= mass + 1e-12);
      mass = now;
    }
    CHECK(f.values.minCoeff() >= 0.0);
  }

  SECTION("the maximum forms at the source and is advected away") {
    FieldGrid f = FieldGrid::zero(domain, 50, 50);
    const Vec2 c(6.0, 6.0);
    f = advance_field(std::move(f), 0.05, c);
    int i0 = 0, j0 = 0;
    f.values.maxCoeff(&i0, &j0);
    CHECK((f.node(i0, j0) - c).norm() < 0.5);

    f = advance_field(std::move(f), 4.0, c);
    int i1 = 0, j1 = 0;
    f.values.maxCoeff(&i1, &j1);
    CHECK((f.node(i1, j1) - c).norm() > 1.0);  // the plume has moved
    CHECK(f.values.allFinite());
  }

  SECTION("first-order grid refinement") {
    PdeCoefficients coeff;
    coeff.diffusivity_fn = [](const Vec2&) { return 0.05; };
    coeff.velocity_fn = [](const Vec2&, double) { return Vec2(0.6, -0.4); };
    coeff.source_fn = [](const Vec2& x) {
      return std::exp(-((x - Vec2(0.5, 0.5)).squaredNorm()) / 0.02);
    };
    const double horizon = 0.05;
    const auto solve = [&](int n) {
      FieldGrid f = FieldGrid::zero({0, 1, 0, 1}, n, n);
      return advance_field(std::move(f), horizon, coeff);
    };
    const FieldGrid coarse = solve(21);
    const FieldGrid mid = solve(41);
    const FieldGrid fine = solve(81);
    // compare at the shared coarse nodes
    const auto diff_at_coarse = [&](const FieldGrid& a, const FieldGrid& b, int stride_a,
                                    int stride_b) {
      double worst = 0.0;
      for (int i = 0; i < 21; ++i)
        for (int j = 0; j < 21; ++j)
          worst = std::max(worst, std::abs(a.values(i * stride_a, j * stride_a) -
                                           b.values(i * stride_b, j * stride_b)));
      return worst;
    };
    const double d1 = diff_at_coarse(coarse, mid, 1, 2);
    const double d2 = diff_at_coarse(mid, fine, 2, 4);
    CHECK(d2 < d1);          // refinement converges
    CHECK(d1 / d2 > 1.2);    // roughly first order
    CHECK(d1 / d2 < 8.0);
  }
}

TEST_CASE("gp field samplers") {
  const Rect domain{0.0, 1.0, 0.0, 1.0};
  const DomainMap map = DomainMap::from_domain(domain, 1.2);

  SECTION("vanishing signal variance gives the zero field") {
    KernelHyperparams hp = kHp;
    hp.sigma_s = 1e-12;
    const BasisSet basis = build_basis(50, map.half_width, hp);
    std::mt19937_64 rng(2);
    const FieldGrid f = sample_gp_field_basis(domain, 20, 20, basis, map, rng);
    CHECK(f.values.cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("identical seeds give identical draws") {
    const BasisSet basis = build_basis(60, map.half_width, kHp);
    std::mt19937_64 a(77), b(77);
    const FieldGrid fa = sample_gp_field_basis(domain, 15, 15, basis, map, a);
    const FieldGrid fb = sample_gp_field_basis(domain, 15, 15, basis, map, b);
    CHECK(fa.values == fb.values);

    std::mt19937_64 c(77), d(77);
    const FieldGrid fc = sample_gp_field_dense(domain, 10, 10, kHp, c);
    const FieldGrid fd = sample_gp_field_dense(domain, 10, 10, kHp, d);
    CHECK(fc.values == fd.values);
  }

  SECTION("basis-draw variance matches the surrogate kernel") {
    const BasisSet basis = build_basis(80, map.half_width, kHp);
    std::mt19937_64 rng(5);
    const int draws = 200;
    double sum = 0.0, sq = 0.0;
    Vec2 probe;
    for (int i = 0; i < draws; ++i) {
      const FieldGrid f = sample_gp_field_basis(domain, 11, 11, basis, map, rng);
      probe = f.node(4, 6);
      const double v = f.values(4, 6);
      sum += v;
      sq += v * v;
    }
    const double var = sq / draws - (sum / draws) * (sum / draws);
    CHECK(var == Approx(approx_kernel(map.to_centered(probe), map.to_centered(probe), basis))
                     .epsilon(0.15));
  }

  SECTION("dense sampler rejects oversized grids") {
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(sample_gp_field_dense(domain, 80, 80, kHp, rng), std::invalid_argument);
  }
}

TEST_CASE("measurement") {
  FieldGrid f = FieldGrid::zero({0, 1, 0, 1}, 11, 11);
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) f.values(i, j) = i + 10.0 * j;
  std::mt19937_64 rng(8);

  SECTION("noiseless measurement at a node is the node value") {
    CHECK(measure(f, f.node(3, 7), 0.0, rng) == Approx(3.0 + 70.0));
  }

  SECTION("cell-center measurement averages the four corners") {
    const Vec2 center = 0.5 * (f.node(4, 4) + f.node(5, 5));
    const double want =
        0.25 * (f.values(4, 4) + f.values(5, 4) + f.values(4, 5) + f.values(5, 5));
    CHECK(measure(f, center, 0.0, rng) == Approx(want));
  }

  SECTION("noise standard deviation is calibrated") {
    const double sigma = 0.37;
    const Vec2 x(0.52, 0.18);
    const double clean = interpolate(f, x);
    double sq = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double d = measure(f, x, sigma, rng) - clean;
      sq += d * d;
    }
    CHECK(std::sqrt(sq / n) == Approx(sigma).epsilon(0.05));
  }

  SECTION("out-of-domain measurement raises") {
    CHECK_THROWS_AS(measure(f, {1.5, 0.5}, 0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(interpolate(f, {0.5, -0.2}), std::invalid_argument);
  }
}
