#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace kdgp {

using Vec2 = Eigen::Vector2d;

/// Axis-aligned rectangle, the coordinate frame experiments live in.
struct Rect {
  double xmin = 0.0, xmax = 1.0;
  double ymin = 0.0, ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  Vec2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
  double diagonal() const { return std::hypot(width(), height()); }

  bool contains(const Vec2& p, double tol = 0.0) const {
    return p.x() >= xmin - tol && p.x() <= xmax + tol &&
           p.y() >= ymin - tol && p.y() <= ymax + tol;
  }
};

/// Affine embedding of an experiment domain into the centered square
/// [-L, L]^2 the Hilbert expansion is built on. Translation only: the
/// kernel length-scale keeps its meaning in domain units. L is the
/// mapped half-width inflated by a margin factor, since the sine basis
/// pins the field to zero on the box boundary.
struct DomainMap {
  Vec2 center{0.0, 0.0};
  double half_width = 1.0;  ///< L

  static DomainMap from_domain(const Rect& domain, double margin = 1.2) {
    DomainMap m;
    m.center = domain.center();
    m.half_width = 0.5 * std::max(domain.width(), domain.height()) * margin;
    return m;
  }

  Vec2 to_centered(const Vec2& p) const { return p - center; }
};

}  // namespace kdgp
