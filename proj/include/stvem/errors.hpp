// Computable error quantities of a marched solution against a known
// exact solution: the broken Y-norm error of the Pi^N projection, the
// Newton-potential error, the upwind trace error, and the L2 error of
// the Pi^* projection, plus experimental orders of convergence.

#pragma once

#include "newton.hpp"
#include "slab_system.hpp"

#include <cmath>
#include <limits>

namespace stvem {

enum class Smoothness { Smooth, SingularInTime, Series };

struct ExactSolution {
  ElementOps::SpaceTimeFn u;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, double)> grad_u; // spatial gradient
  ElementOps::SpaceTimeFn dt_u;  // optional, used by consistency checks
  ElementOps::SpaceTimeFn lap_u; // optional
  ElementOps::SpaceTimeFn f;
  ElementOps::SpaceTimeFn g;  // Dirichlet datum (null = zero)
  ElementOps::SpaceFn u0;     // initial datum (null = zero)
  Smoothness tag = Smoothness::Smooth;

  ProblemData problem() const { return ProblemData{f, g, u0, tag != Smoothness::Smooth}; }
};

struct ErrorReport {
  int level = 0;
  double h = 0.0, h_x = 0.0, h_t = 0.0;
  long n_dofs = 0;
  double EY = 0.0, EN = 0.0, EU = 0.0, EL = 0.0;
  // filled by eoc_table; NaN on the first level
  double eocY = std::numeric_limits<double>::quiet_NaN();
  double eocN = std::numeric_limits<double>::quiet_NaN();
  double eocU = std::numeric_limits<double>::quiet_NaN();
  double eocL = std::numeric_limits<double>::quiet_NaN();
};

inline ErrorReport compute_errors(const SpaceTimeMesh& st, int p,
                                  const PhysicalCoefficients& coeffs, const Solution& sol,
                                  const ExactSolution& exact, const SolveOptions& opts) {
  const SpatialMesh& mesh = st.spatial;
  const int n_slabs = st.time.num_slabs();
  if (static_cast<int>(sol.slab_dofs.size()) != n_slabs)
    throw std::invalid_argument("compute_errors: solution does not match the mesh");
  GlobalDofMap map(mesh, p);

  ErrorReport report;
  report.h_x = mesh.max_diameter();
  report.h_t = st.time.max_length();
  report.h = st.max_diameter();
  report.n_dofs = sol.total_free_dofs;

  const int err_degree = 2 * p + 4 + opts.quad_bump;
  const bool singular = exact.tag != Smoothness::Smooth;

  double EY2 = 0.0, EL2 = 0.0, EU2 = 0.0;
  std::vector<Eigen::MatrixXd> phi(n_slabs); // Pi*(u - u_h) per slab/element
  Eigen::MatrixXd prev_top;                  // top traces of phi on the previous slab

  SlabOps ops;
  for (int n = 0; n < n_slabs; ++n) {
    const double h_t = st.time.slab_length(n);
    if (ops.cells.empty() || h_t != ops.h_t)
      ops = build_slab_ops(mesh, h_t, p, coeffs, opts.threads);
    const double t_mid = 0.5 * (st.time.slab_start(n) + st.time.slab_end(n));
    const bool graded = singular && n == 0;
    DataQuadrature dq{err_degree, graded, opts.graded_subintervals, opts.graded_ratio};

    phi[n].resize(ops.cells[0].dim_Pp(), mesh.n_cells());
    Eigen::MatrixXd top_now(map.n_bottom_each(), mesh.n_cells());
    std::vector<double> ey_parts(mesh.n_cells()), el_parts(mesh.n_cells());
    std::vector<double> eu_bottom_parts(mesh.n_cells());

    parallel_for(
        mesh.n_cells(),
        [&](std::size_t start, std::size_t end) {
          for (std::size_t ic = start; ic < end; ++ic) {
            const ElementOps& el = ops.cells[ic];
            const auto& dofs = map.cell_dofs(ic);
            Eigen::VectorXd local(dofs.size());
            for (std::size_t i = 0; i < dofs.size(); ++i)
              local(i) = sol.slab_dofs[n](dofs[i]);

            Eigen::VectorXd piN_uh = el.PiN * local;
            Eigen::VectorXd piStar_uh = el.PiStar * local;
            Eigen::VectorXd piStar_u = el.pistar_of_function(exact.u, t_mid, dq);
            phi[n].col(ic) = piStar_u - piStar_uh;

            // quadrature for E^Y and E^L
            QuadratureRule srule = el.space_rule_with_degree(err_degree);
            QuadratureRule trule =
                el.time_rule(err_degree, graded, opts.graded_subintervals, opts.graded_ratio);
            ElementOps::PrismRule rule = el.prism_rule(srule, trule);
            Eigen::MatrixXd vals = el.prism_basis.eval(rule.points);
            std::vector<Eigen::MatrixXd> grads(el.dim);
            for (int v = 0; v < el.dim; ++v)
              grads[v] = el.prism_basis.eval_derivative(rule.points, v);

            double ey = 0.0, elerr = 0.0;
            for (int q = 0; q < rule.weights.size(); ++q) {
              Eigen::Vector2d x = Eigen::Vector2d::Zero();
              for (int v = 0; v < el.dim; ++v) x[v] = rule.points(q, v);
              const double t = t_mid + rule.points(q, el.dim);
              const Eigen::Vector2d gu = exact.grad_u(x, t);
              double grad_err = 0.0;
              for (int v = 0; v < el.dim; ++v) {
                const double diff = gu[v] - (grads[v].row(q) * piN_uh)(0);
                grad_err += diff * diff;
              }
              ey += rule.weights(q) * coeffs.nu * grad_err;
              const double udiff = exact.u(x, t) - (vals.row(q) * piStar_uh)(0);
              elerr += rule.weights(q) * udiff * udiff;
            }
            ey_parts[ic] = ey;
            el_parts[ic] = elerr;

            Eigen::VectorXd dbot = el.PolyTraceBottom * phi[n].col(ic);
            eu_bottom_parts[ic] = dbot.dot(el.MassBottom * dbot);
            top_now.col(ic) = el.PolyTraceTop * phi[n].col(ic);
          }
        },
        opts.threads);

    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      EY2 += ey_parts[ic];
      EL2 += el_parts[ic];
    }
    if (n == 0) {
      for (int ic = 0; ic < mesh.n_cells(); ++ic) EU2 += eu_bottom_parts[ic];
    } else {
      for (int ic = 0; ic < mesh.n_cells(); ++ic) {
        const ElementOps& el = ops.cells[ic];
        Eigen::VectorXd dbot = el.PolyTraceBottom * phi[n].col(ic);
        Eigen::VectorXd jump = dbot - prev_top.col(ic);
        EU2 += jump.dot(el.MassBottom * jump);
      }
    }
    if (n == n_slabs - 1)
      for (int ic = 0; ic < mesh.n_cells(); ++ic)
        EU2 += top_now.col(ic).dot(ops.cells[ic].MassBottom * top_now.col(ic));
    prev_top = top_now;
  }

  // E^N: Y-norm of Pi^N of the Newton potential of Pi*(u - u_h)
  std::vector<Eigen::VectorXd> potential = newton_solve(st, p, coeffs, phi, opts);
  double EN2 = 0.0;
  ops = SlabOps{};
  for (int n = 0; n < n_slabs; ++n) {
    const double h_t = st.time.slab_length(n);
    if (ops.cells.empty() || h_t != ops.h_t)
      ops = build_slab_ops(mesh, h_t, p, coeffs, opts.threads);
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      const ElementOps& el = ops.cells[ic];
      const auto& dofs = map.cell_dofs(ic);
      Eigen::VectorXd local(dofs.size());
      for (std::size_t i = 0; i < dofs.size(); ++i) local(i) = potential[n](dofs[i]);
      Eigen::VectorXd piN_w = el.PiN * local;
      EN2 += coeffs.nu * piN_w.dot(el.GradGram * piN_w);
    }
  }

  report.EY = std::sqrt(EY2);
  report.EL = std::sqrt(EL2);
  report.EU = std::sqrt(0.5 * coeffs.c_H * EU2);
  report.EN = std::sqrt(EN2);
  return report;
}

// Pairwise experimental orders of convergence; the EOC of level i sits on
// the row of level i+1. Reports must come with strictly decreasing h.
inline std::vector<ErrorReport> eoc_table(std::vector<ErrorReport> reports) {
  if (reports.size() < 2)
    throw std::invalid_argument("eoc_table: at least two refinement levels required");
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (!(reports[i].h < reports[i - 1].h))
      throw std::invalid_argument("eoc_table: mesh sizes must decrease strictly");
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const double ratio = std::log(reports[i - 1].h / reports[i].h);
    auto eoc = [&](double coarse, double fine) { return std::log(coarse / fine) / ratio; };
    reports[i].eocY = eoc(reports[i - 1].EY, reports[i].EY);
    reports[i].eocN = eoc(reports[i - 1].EN, reports[i].EN);
    reports[i].eocU = eoc(reports[i - 1].EU, reports[i].EU);
    reports[i].eocL = eoc(reports[i - 1].EL, reports[i].EL);
  }
  return reports;
}

} // namespace stvem
