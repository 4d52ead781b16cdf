// Discrete Newton potential: given a piecewise degree-p space-time
// polynomial phi, solve a_h(N_h phi, v_h) = c_H [ (dt phi, v_h)_{Q_T}
// + initial and interface trace pairings ] on the boundary-constrained
// space. a_h carries no time coupling, so the solves decouple per slab.

#pragma once

#include "slab_system.hpp"

#include <Eigen/SparseCholesky>

namespace stvem {

// phi: one matrix per slab, column ic = prism-basis coefficients of the
// polynomial on element ic. Returns the potential's full DoF vector per
// slab (boundary facet moments zero).
inline std::vector<Eigen::VectorXd> newton_solve(const SpaceTimeMesh& st, int p,
                                                 const PhysicalCoefficients& coeffs,
                                                 const std::vector<Eigen::MatrixXd>& phi,
                                                 const SolveOptions& opts) {
  const SpatialMesh& mesh = st.spatial;
  const int n_slabs = st.time.num_slabs();
  if (static_cast<int>(phi.size()) != n_slabs)
    throw std::invalid_argument("newton_solve: one coefficient matrix per slab required");
  GlobalDofMap map(mesh, p);

  // boundary facet DoFs constrained to zero; everything else free
  std::vector<char> constrained(map.n_total(), 0);
  for (int fi = 0; fi < mesh.n_facets(); ++fi)
    if (mesh.facets[fi].boundary)
      for (int b = 0; b < map.n_facet_each(); ++b) constrained[map.facet_block(fi) + b] = 1;
  std::vector<long> active_to_full, full_to_active(map.n_total(), -1);
  for (long i = 0; i < map.n_total(); ++i)
    if (!constrained[i]) {
      full_to_active[i] = static_cast<long>(active_to_full.size());
      active_to_full.push_back(i);
    }
  const long n_active = static_cast<long>(active_to_full.size());

  std::vector<Eigen::VectorXd> potential;
  potential.reserve(n_slabs);
  SlabOps ops;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  Eigen::SparseMatrix<double> A_cached;
  double cached_ht = -1.0;

  for (int n = 0; n < n_slabs; ++n) {
    const double h_t = st.time.slab_length(n);
    if (ops.cells.empty() || h_t != ops.h_t)
      ops = build_slab_ops(mesh, h_t, p, coeffs, opts.threads);

    if (h_t != cached_ht) {
      std::vector<Eigen::Triplet<double>> triplets;
      for (int ic = 0; ic < mesh.n_cells(); ++ic) {
        const ElementOps& el = ops.cells[ic];
        const auto& dofs = map.cell_dofs(ic);
        for (int i = 0; i < el.n_dofs(); ++i) {
          if (constrained[dofs[i]]) continue;
          for (int j = 0; j < el.n_dofs(); ++j) {
            if (constrained[dofs[j]]) continue;
            const double a = el.Ah(i, j);
            if (a != 0.0)
              triplets.emplace_back(static_cast<int>(full_to_active[dofs[i]]),
                                    static_cast<int>(full_to_active[dofs[j]]), a);
          }
        }
      }
      A_cached.resize(n_active, n_active);
      A_cached.setFromTriplets(triplets.begin(), triplets.end());
      solver.compute(A_cached);
      if (solver.info() != Eigen::Success)
        throw std::runtime_error("newton_solve: a_h slab matrix is not SPD in slab " +
                                 std::to_string(n + 1));
      cached_ht = h_t;
    }

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_active);
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      const ElementOps& el = ops.cells[ic];
      const auto& dofs = map.cell_dofs(ic);
      Eigen::VectorXd local = Eigen::VectorXd::Zero(el.n_dofs());
      // (dt phi, v)_K through the bulk moments of v
      local.segment(el.layout.bulk_offset(), el.layout.n_bulk) =
          coeffs.c_H * el.meas_K * (el.Dt * phi[n].col(ic));
      // trace pairing at the slab's initial time
      Eigen::VectorXd jump = el.PolyTraceBottom * phi[n].col(ic);
      if (n >= 1) jump -= el.PolyTraceTop * phi[n - 1].col(ic);
      local += coeffs.c_H * el.BottomTrace.transpose() * (el.MassBottom * jump);
      for (int i = 0; i < el.n_dofs(); ++i)
        if (!constrained[dofs[i]]) rhs(full_to_active[dofs[i]]) += local(i);
    }

    Eigen::VectorXd active = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("newton_solve: solve failed in slab " + std::to_string(n + 1));
    const double residual = (A_cached * active - rhs).norm();
    if (!(residual <= 1e-10 * (1.0 + rhs.norm())))
      throw std::runtime_error("newton_solve: residual exceeds contract in slab " +
                               std::to_string(n + 1));
    Eigen::VectorXd full = Eigen::VectorXd::Zero(map.n_total());
    for (long a = 0; a < n_active; ++a) full(active_to_full[a]) = active(a);
    potential.push_back(full);
  }
  return potential;
}

} // namespace stvem
