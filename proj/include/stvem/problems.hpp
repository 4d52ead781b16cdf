// Registry of manufactured and reference heat-equation problems on the
// unit space-time domain: polynomial solutions for the patch test, a
// smooth sine solution, solutions with a temporal singularity t^alpha, a
// Fourier-series solution with incompatible initial and boundary data,
// and a smooth (2+1)-dimensional solution.

#pragma once

#include "errors.hpp"

#include <cmath>
#include <string>

namespace stvem {

// u_p(x,t) = t^{p/2} x^{p/2} (p even),
//            t^{(p-1)/2} x^{(p+1)/2} + t^{(p+1)/2} x^{(p-1)/2} (p odd)
inline ExactSolution patch_solution(int p, const PhysicalCoefficients& coeffs = {}) {
  struct Term {
    int a; // x exponent
    int b; // t exponent
  };
  std::vector<Term> terms;
  if (p % 2 == 0)
    terms = {{p / 2, p / 2}};
  else
    terms = {{(p + 1) / 2, (p - 1) / 2}, {(p - 1) / 2, (p + 1) / 2}};

  auto powi = [](double z, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= z;
    return r;
  };
  ExactSolution sol;
  sol.tag = Smoothness::Smooth;
  sol.u = [terms, powi](const Eigen::Vector2d& x, double t) {
    double v = 0.0;
    for (const auto& tm : terms) v += powi(t, tm.b) * powi(x[0], tm.a);
    return v;
  };
  sol.grad_u = [terms, powi](const Eigen::Vector2d& x, double t) {
    double v = 0.0;
    for (const auto& tm : terms)
      if (tm.a >= 1) v += tm.a * powi(t, tm.b) * powi(x[0], tm.a - 1);
    return Eigen::Vector2d(v, 0.0);
  };
  sol.dt_u = [terms, powi](const Eigen::Vector2d& x, double t) {
    double v = 0.0;
    for (const auto& tm : terms)
      if (tm.b >= 1) v += tm.b * powi(t, tm.b - 1) * powi(x[0], tm.a);
    return v;
  };
  sol.lap_u = [terms, powi](const Eigen::Vector2d& x, double t) {
    double v = 0.0;
    for (const auto& tm : terms)
      if (tm.a >= 2) v += tm.a * (tm.a - 1) * powi(t, tm.b) * powi(x[0], tm.a - 2);
    return v;
  };
  sol.f = [sol, coeffs](const Eigen::Vector2d& x, double t) {
    return coeffs.c_H * sol.dt_u(x, t) - coeffs.nu * sol.lap_u(x, t);
  };
  sol.g = sol.u;
  auto u = sol.u;
  sol.u0 = [u](const Eigen::Vector2d& x) { return u(x, 0.0); };
  return sol;
}

// u(x,t) = sin(t) sin(3 pi x)
inline ExactSolution smooth_1d_solution(const PhysicalCoefficients& coeffs = {}) {
  const double k = 3.0 * M_PI;
  ExactSolution sol;
  sol.tag = Smoothness::Smooth;
  sol.u = [k](const Eigen::Vector2d& x, double t) { return std::sin(t) * std::sin(k * x[0]); };
  sol.grad_u = [k](const Eigen::Vector2d& x, double t) {
    return Eigen::Vector2d(k * std::sin(t) * std::cos(k * x[0]), 0.0);
  };
  sol.dt_u = [k](const Eigen::Vector2d& x, double t) { return std::cos(t) * std::sin(k * x[0]); };
  sol.lap_u = [k](const Eigen::Vector2d& x, double t) {
    return -k * k * std::sin(t) * std::sin(k * x[0]);
  };
  sol.f = [k, coeffs](const Eigen::Vector2d& x, double t) {
    return (coeffs.c_H * std::cos(t) + coeffs.nu * k * k * std::sin(t)) * std::sin(k * x[0]);
  };
  sol.g = nullptr;
  sol.u0 = nullptr;
  return sol;
}

// u_alpha(x,t) = t^alpha sin(pi x); the time derivative is unbounded at
// t = 0 for alpha < 1.
inline ExactSolution singular_solution(double alpha, const PhysicalCoefficients& coeffs = {}) {
  if (!(alpha > -0.5)) throw std::invalid_argument("singular_solution: alpha > -1/2 required");
  ExactSolution sol;
  sol.tag = Smoothness::SingularInTime;
  sol.u = [alpha](const Eigen::Vector2d& x, double t) {
    return std::pow(t, alpha) * std::sin(M_PI * x[0]);
  };
  sol.grad_u = [alpha](const Eigen::Vector2d& x, double t) {
    return Eigen::Vector2d(M_PI * std::pow(t, alpha) * std::cos(M_PI * x[0]), 0.0);
  };
  sol.dt_u = [alpha](const Eigen::Vector2d& x, double t) {
    return alpha * std::pow(t, alpha - 1.0) * std::sin(M_PI * x[0]);
  };
  sol.lap_u = [alpha](const Eigen::Vector2d& x, double t) {
    return -M_PI * M_PI * std::pow(t, alpha) * std::sin(M_PI * x[0]);
  };
  sol.f = [alpha, coeffs](const Eigen::Vector2d& x, double t) {
    return (coeffs.c_H * alpha * std::pow(t, alpha - 1.0) +
            coeffs.nu * M_PI * M_PI * std::pow(t, alpha)) *
           std::sin(M_PI * x[0]);
  };
  sol.g = nullptr;
  sol.u0 = nullptr;
  return sol;
}

namespace detail {

// Fourier series of the heat solution with u0 = 1, g = 0, f = 0,
// truncated at n = 250, Kahan-compensated. The factor exp(-(2n+1)^2 pi^2 t)
// is monotone in n; once it underflows 1e-30 the tail is dropped.
template <typename TermFn>
double incompatible_series_sum(double t, TermFn&& term) {
  double sum = 0.0, comp = 0.0;
  for (int n = 0; n <= 250; ++n) {
    const double lambda = (2 * n + 1) * M_PI;
    const double damp = std::exp(-lambda * lambda * t);
    if (damp < 1e-30) break;
    const double y = term(n, lambda, damp) - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  return sum;
}

} // namespace detail

// Incompatible data: f = 0, u0 = 1, g = 0.
inline ExactSolution incompatible_solution() {
  ExactSolution sol;
  sol.tag = Smoothness::Series;
  sol.u = [](const Eigen::Vector2d& x, double t) {
    return detail::incompatible_series_sum(t, [&](int, double lambda, double damp) {
      return 4.0 / lambda * std::sin(lambda * x[0]) * damp;
    });
  };
  sol.grad_u = [](const Eigen::Vector2d& x, double t) {
    const double v = detail::incompatible_series_sum(t, [&](int, double lambda, double damp) {
      return 4.0 * std::cos(lambda * x[0]) * damp;
    });
    return Eigen::Vector2d(v, 0.0);
  };
  sol.dt_u = nullptr;
  sol.lap_u = nullptr;
  sol.f = nullptr;
  sol.g = nullptr;
  sol.u0 = [](const Eigen::Vector2d&) { return 1.0; };
  return sol;
}

// u(x,t) = exp(-t) sin(pi x1) sin(pi x2)
inline ExactSolution smooth_2d_solution(const PhysicalCoefficients& coeffs = {}) {
  ExactSolution sol;
  sol.tag = Smoothness::Smooth;
  auto shape = [](const Eigen::Vector2d& x) {
    return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
  };
  sol.u = [shape](const Eigen::Vector2d& x, double t) { return std::exp(-t) * shape(x); };
  sol.grad_u = [](const Eigen::Vector2d& x, double t) {
    return Eigen::Vector2d(
        M_PI * std::exp(-t) * std::cos(M_PI * x[0]) * std::sin(M_PI * x[1]),
        M_PI * std::exp(-t) * std::sin(M_PI * x[0]) * std::cos(M_PI * x[1]));
  };
  sol.dt_u = [shape](const Eigen::Vector2d& x, double t) { return -std::exp(-t) * shape(x); };
  sol.lap_u = [shape](const Eigen::Vector2d& x, double t) {
    return -2.0 * M_PI * M_PI * std::exp(-t) * shape(x);
  };
  sol.f = [shape, coeffs](const Eigen::Vector2d& x, double t) {
    return (-coeffs.c_H + 2.0 * coeffs.nu * M_PI * M_PI) * std::exp(-t) * shape(x);
  };
  sol.g = nullptr;
  sol.u0 = [shape](const Eigen::Vector2d& x) { return shape(x); };
  return sol;
}

struct Problem {
  std::string name;
  int dim = 1;
  ExactSolution exact;
};

// name in {patch, smooth-1d, singular, incompatible, smooth-2d}; p feeds
// the patch family, alpha the singular one.
inline Problem make_problem(const std::string& name, int p, double alpha) {
  if (name == "patch") return {name, 1, patch_solution(p)};
  if (name == "smooth-1d") return {name, 1, smooth_1d_solution()};
  if (name == "singular") return {name, 1, singular_solution(alpha)};
  if (name == "incompatible") return {name, 1, incompatible_solution()};
  if (name == "smooth-2d") return {name, 2, smooth_2d_solution()};
  throw std::invalid_argument("make_problem: unknown problem '" + name + "'");
}

} // namespace stvem
