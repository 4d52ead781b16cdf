// Quadrature rules exact for polynomials on the domains the method
// integrates over: intervals, convex polygons (centroid fan), and their
// tensor products with time handled at the call site.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace stvem {

// Points are stored in the domain's own coordinates, one row per point.
struct QuadratureRule {
  Eigen::MatrixXd points;  // npts x nvars
  Eigen::VectorXd weights; // npts

  int size() const { return static_cast<int>(weights.size()); }
  double total_weight() const { return weights.sum(); }
};

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre_ref(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

inline int gauss_points_for_degree(int degree) {
  return degree / 2 + 1;
}

} // namespace detail

// Gauss rule on [-1, 1] with n points (exact for degree 2n-1).
inline QuadratureRule gauss_legendre(int npts) {
  if (npts < 1) throw std::invalid_argument("gauss_legendre: npts >= 1 required");
  std::vector<double> x, w;
  detail::gauss_legendre_ref(npts, x, w);
  QuadratureRule rule;
  rule.points.resize(npts, 1);
  rule.weights.resize(npts);
  for (int i = 0; i < npts; ++i) {
    rule.points(i, 0) = x[i];
    rule.weights(i) = w[i];
  }
  return rule;
}

// Gauss rule on [a, b] exact for polynomials of degree <= target_degree.
inline QuadratureRule interval_rule(double a, double b, int target_degree) {
  if (!(b > a)) throw std::invalid_argument("interval_rule: degenerate interval");
  QuadratureRule ref = gauss_legendre(detail::gauss_points_for_degree(target_degree));
  QuadratureRule rule;
  const int n = ref.size();
  rule.points.resize(n, 1);
  rule.weights.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.points(i, 0) = mid + half * ref.points(i, 0);
    rule.weights(i) = half * ref.weights(i);
  }
  return rule;
}

// Composite rule on [a, b], geometrically graded towards a: nsub
// subintervals with length ratio `ratio` (< 1 refines near a), each
// carrying a Gauss rule for target_degree. Used where integrands have
// unbounded derivatives at a.
inline QuadratureRule graded_interval_rule(double a, double b, int target_degree,
                                           int nsub, double ratio) {
  if (!(b > a)) throw std::invalid_argument("graded_interval_rule: degenerate interval");
  if (nsub < 1 || !(ratio > 0.0) || !(ratio < 1.0))
    throw std::invalid_argument("graded_interval_rule: need nsub >= 1 and ratio in (0,1)");
  // Breakpoints a + (b-a) * ratio^k, k = nsub-1 .. 0.
  std::vector<double> knots{a};
  for (int k = nsub - 1; k >= 0; --k)
    knots.push_back(a + (b - a) * std::pow(ratio, k));
  const int nper = detail::gauss_points_for_degree(target_degree);
  QuadratureRule rule;
  rule.points.resize(nper * nsub, 1);
  rule.weights.resize(nper * nsub);
  int at = 0;
  for (int s = 0; s < nsub; ++s) {
    QuadratureRule sub = interval_rule(knots[s], knots[s + 1], target_degree);
    for (int i = 0; i < sub.size(); ++i, ++at) {
      rule.points(at, 0) = sub.points(i, 0);
      rule.weights(at) = sub.weights(i);
    }
  }
  return rule;
}

// Rule on the triangle (v0, v1, v2), exact for degree <= target_degree.
// Built by collapsing a tensor Gauss rule onto the reference triangle
// (the collapse keeps polynomials polynomial, so exactness is preserved
// with one extra point in the collapsed direction).
inline QuadratureRule triangle_rule(const Eigen::Vector2d& v0, const Eigen::Vector2d& v1,
                                    const Eigen::Vector2d& v2, int target_degree) {
  const double jac2 = (v1.x() - v0.x()) * (v2.y() - v0.y()) -
                      (v2.x() - v0.x()) * (v1.y() - v0.y());
  const double area = 0.5 * jac2;
  if (!(area > 0.0)) throw std::invalid_argument("triangle_rule: degenerate or inverted triangle");
  const int nu = detail::gauss_points_for_degree(target_degree + 1);
  const int nv = detail::gauss_points_for_degree(target_degree);
  QuadratureRule gu = gauss_legendre(nu), gv = gauss_legendre(nv);
  QuadratureRule rule;
  rule.points.resize(nu * nv, 2);
  rule.weights.resize(nu * nv);
  int at = 0;
  for (int i = 0; i < nu; ++i) {
    const double u = 0.5 * (gu.points(i, 0) + 1.0);
    const double wu = 0.5 * gu.weights(i);
    for (int j = 0; j < nv; ++j, ++at) {
      const double v = 0.5 * (gv.points(j, 0) + 1.0);
      const double wv = 0.5 * gv.weights(j);
      const double xi = u * (1.0 - v), eta = u * v; // reference triangle
      rule.points.row(at) = (v0 + xi * (v1 - v0) + eta * (v2 - v0)).transpose();
      rule.weights(at) = wu * wv * u * jac2;
    }
  }
  return rule;
}

// Rule on a convex (star-shaped w.r.t. centroid) polygon with CCW
// vertices: fan of triangles from the area centroid. Exact for
// polynomials of degree <= target_degree.
inline QuadratureRule polygon_rule(const std::vector<Eigen::Vector2d>& verts,
                                   int target_degree) {
  const int nv = static_cast<int>(verts.size());
  if (nv < 3) throw std::invalid_argument("polygon_rule: need at least 3 vertices");
  double area2 = 0.0;
  Eigen::Vector2d c(0.0, 0.0);
  for (int i = 0; i < nv; ++i) {
    const auto& a = verts[i];
    const auto& b = verts[(i + 1) % nv];
    const double cross = a.x() * b.y() - b.x() * a.y();
    area2 += cross;
    c += cross * (a + b);
  }
  if (!(area2 > 0.0)) throw std::invalid_argument("polygon_rule: degenerate or clockwise polygon");
  c /= (3.0 * area2);

  std::vector<QuadratureRule> tris;
  int total = 0;
  for (int i = 0; i < nv; ++i) {
    tris.push_back(triangle_rule(c, verts[i], verts[(i + 1) % nv], target_degree));
    total += tris.back().size();
  }
  QuadratureRule rule;
  rule.points.resize(total, 2);
  rule.weights.resize(total);
  int at = 0;
  for (const auto& tri : tris)
    for (int i = 0; i < tri.size(); ++i, ++at) {
      rule.points.row(at) = tri.points.row(i);
      rule.weights(at) = tri.weights(i);
    }
  return rule;
}

} // namespace stvem
