// Slab-wise assembly and sequential time marching: scatter of the local
// upwind bilinear forms into one sparse system per time slab, lifting of
// Dirichlet/initial data by moment prescription, and transfer of the
// Pi*-top traces to the next slab.

#pragma once

#include "dof_map.hpp"
#include "element.hpp"
#include "mesh.hpp"
#include "parallel.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>

namespace stvem {

enum class InitialConditionMode { Strong, Weak };

struct ProblemData {
  ElementOps::SpaceTimeFn f;  // source term
  ElementOps::SpaceTimeFn g;  // Dirichlet datum (null means zero)
  ElementOps::SpaceFn u0;     // initial datum (null means zero)
  bool singular_initial_data = false; // grade slab-1 time quadrature of data integrals
};

struct SolveOptions {
  InitialConditionMode ic_mode = InitialConditionMode::Strong;
  int threads = 1;
  int quad_bump = 0; // added to every data/error quadrature degree
  int graded_subintervals = 8;
  double graded_ratio = 0.25;
};

// Local operators of every element of one slab shape.
struct SlabOps {
  double h_t = 0.0;
  std::vector<ElementOps> cells;
};

inline SlabOps build_slab_ops(const SpatialMesh& mesh, double h_t, int p,
                              const PhysicalCoefficients& coeffs, int threads,
                              int quad_degree = -1) {
  SlabOps ops;
  ops.h_t = h_t;
  ops.cells.resize(mesh.n_cells());
  parallel_for(
      mesh.n_cells(),
      [&](std::size_t start, std::size_t end) {
        for (std::size_t ic = start; ic < end; ++ic)
          ops.cells[ic] = ElementOps(mesh, static_cast<int>(ic), h_t, p, coeffs, quad_degree);
      },
      threads);
  return ops;
}

struct SlabSystem {
  int slab = 0;
  Eigen::SparseMatrix<double> matrix;     // over active DoFs
  Eigen::VectorXd rhs;                    // over active DoFs
  Eigen::VectorXd lift;                   // full-length; values on constrained DoFs
  std::vector<char> constrained;          // full-length mask
  std::vector<long> active_to_full;
  std::vector<long> full_to_active;       // -1 on constrained DoFs
};

struct Solution {
  std::vector<Eigen::VectorXd> slab_dofs;  // full DoF vector per slab
  std::vector<Eigen::MatrixXd> top_traces; // per slab: n_bottom x n_cells
  long n_free_per_slab = 0;
  long total_free_dofs = 0;
};

// Direct sparse solve with a residual contract of 1e-10 * (1 + ||rhs||).
class SparseDirectSolver {
public:
  void factorize(const Eigen::SparseMatrix<double>& A, int slab) {
    solver_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    solver_->analyzePattern(A);
    solver_->factorize(A);
    if (solver_->info() != Eigen::Success)
      throw std::runtime_error("solve_linear: singular slab matrix in slab " +
                               std::to_string(slab + 1) + " (" + solver_->lastErrorMessage() +
                               ")");
    matrix_ = A;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, int slab) const {
    if (!solver_) throw std::logic_error("solve_linear: factorize first");
    Eigen::VectorXd x = solver_->solve(rhs);
    const double residual = (matrix_ * x - rhs).norm();
    if (!(residual <= 1e-10 * (1.0 + rhs.norm())))
      throw std::runtime_error("solve_linear: residual " + std::to_string(residual) +
                               " exceeds contract in slab " + std::to_string(slab + 1));
    return x;
  }

private:
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> solver_;
  Eigen::SparseMatrix<double> matrix_;
};

inline Eigen::VectorXd solve_linear(const SlabSystem& system) {
  SparseDirectSolver solver;
  solver.factorize(system.matrix, system.slab);
  return solver.solve(system.rhs, system.slab);
}

namespace detail {

// Plain 2p+2(+bump) rules; on the slab touching t = 0 the time rule is
// upgraded to the composite graded rule when the data are singular
// there, so that quadrature error stays below discretization error.
inline DataQuadrature data_quadrature(int p, const SolveOptions& opts, bool first_slab,
                                      bool singular) {
  DataQuadrature dq;
  dq.degree = 2 * p + 2 + opts.quad_bump;
  dq.graded = first_slab && singular;
  dq.graded_subintervals = opts.graded_subintervals;
  dq.graded_ratio = opts.graded_ratio;
  return dq;
}

} // namespace detail

// Constraint mask and lifted values for one slab: boundary facet moments
// always; first-slab initial moments under the strong mode.
inline void build_constraints(const SpatialMesh& mesh, const GlobalDofMap& map,
                              const SlabOps& ops, const ProblemData& data, int slab,
                              double t_mid, const SolveOptions& opts, SlabSystem& out) {
  const long n_total = map.n_total();
  out.constrained.assign(n_total, 0);
  out.lift = Eigen::VectorXd::Zero(n_total);
  const DataQuadrature dq =
      detail::data_quadrature(map.degree(), opts, slab == 0, data.singular_initial_data);

  for (int ic = 0; ic < mesh.n_cells(); ++ic) {
    const ElementOps& el = ops.cells[ic];
    for (int f = 0; f < el.layout.n_facets; ++f) {
      const int fi = el.facet_ids[f];
      if (!mesh.facets[fi].boundary) continue;
      const long base = map.facet_block(fi);
      for (int b = 0; b < map.n_facet_each(); ++b) out.constrained[base + b] = 1;
      if (data.g) {
        Eigen::VectorXd gdofs = el.facet_data_dofs(f, data.g, t_mid, dq.degree);
        out.lift.segment(base, map.n_facet_each()) = gdofs;
      }
    }
    if (slab == 0 && opts.ic_mode == InitialConditionMode::Strong) {
      const long base = map.bottom_block(ic);
      for (int g = 0; g < map.n_bottom_each(); ++g) out.constrained[base + g] = 1;
      if (data.u0)
        out.lift.segment(base, map.n_bottom_each()) =
            el.bottom_data_moments(data.u0, dq.degree) / el.meas_Kx;
    }
  }

  out.active_to_full.clear();
  out.full_to_active.assign(n_total, -1);
  for (long i = 0; i < n_total; ++i)
    if (!out.constrained[i]) {
      out.full_to_active[i] = static_cast<long>(out.active_to_full.size());
      out.active_to_full.push_back(i);
    }
}

// Assemble the slab system. prev_traces must be present exactly for
// slabs n >= 2 (1-based); its columns are the previous slab's Pi* top
// trace coefficients per element.
inline SlabSystem assemble_slab(const SpaceTimeMesh& st, const GlobalDofMap& map,
                                const SlabOps& ops, const ProblemData& data, int slab,
                                const std::optional<Eigen::MatrixXd>& prev_traces,
                                const SolveOptions& opts) {
  const SpatialMesh& mesh = st.spatial;
  if ((slab >= 1) != prev_traces.has_value())
    throw std::invalid_argument("assemble_slab: previous traces required iff slab >= 2");
  const double t_mid = 0.5 * (st.time.slab_start(slab) + st.time.slab_end(slab));

  SlabSystem sys;
  sys.slab = slab;
  build_constraints(mesh, map, ops, data, slab, t_mid, opts, sys);
  const long n_active = static_cast<long>(sys.active_to_full.size());
  sys.rhs = Eigen::VectorXd::Zero(n_active);

  // element loads in parallel, scatter in element order
  const DataQuadrature dq =
      detail::data_quadrature(map.degree(), opts, slab == 0, data.singular_initial_data);
  std::vector<Eigen::VectorXd> loads(mesh.n_cells());
  parallel_for(
      mesh.n_cells(),
      [&](std::size_t start, std::size_t end) {
        for (std::size_t ic = start; ic < end; ++ic)
          loads[ic] = data.f ? ops.cells[ic].load_vector(data.f, t_mid, dq)
                             : Eigen::VectorXd::Zero(ops.cells[ic].n_dofs());
      },
      opts.threads);

  std::vector<Eigen::Triplet<double>> triplets;
  for (int ic = 0; ic < mesh.n_cells(); ++ic) {
    const ElementOps& el = ops.cells[ic];
    const auto& dofs = map.cell_dofs(ic);
    const int nd = el.n_dofs();

    Eigen::VectorXd local_rhs = loads[ic];
    if (slab >= 1) {
      // upwind datum from the previous slab
      local_rhs -= el.Bh_prev_trace * prev_traces->col(ic);
    } else if (opts.ic_mode == InitialConditionMode::Weak && data.u0) {
      // weak imposition: c_H (u0, v(.,0))_{K_x}
      Eigen::VectorXd q = el.bottom_data_moments(data.u0, dq.degree);
      local_rhs += el.coeffs.c_H * el.BottomTrace.transpose() * q;
    }

    for (int i = 0; i < nd; ++i) {
      const long I = dofs[i];
      if (sys.constrained[I]) continue;
      const long Ia = sys.full_to_active[I];
      double r = local_rhs(i);
      for (int j = 0; j < nd; ++j) {
        const long J = dofs[j];
        const double a = el.Bh_in(i, j);
        if (a == 0.0) continue;
        if (sys.constrained[J])
          r -= a * sys.lift(J);
        else
          triplets.emplace_back(static_cast<int>(Ia), static_cast<int>(sys.full_to_active[J]), a);
      }
      sys.rhs(Ia) += r;
    }
  }
  sys.matrix.resize(n_active, n_active);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

// Sequential march over the slabs. The factorization is reused whenever
// consecutive slabs share their length and constraint pattern (uniform
// partitions reuse a single factorization from slab 2 on).
inline Solution march(const SpaceTimeMesh& st, int p, const PhysicalCoefficients& coeffs,
                      const ProblemData& data, const SolveOptions& opts) {
  const SpatialMesh& mesh = st.spatial;
  const int n_slabs = st.time.num_slabs();
  GlobalDofMap map(mesh, p);

  Solution sol;
  sol.n_free_per_slab = map.n_free();
  sol.total_free_dofs = map.n_free() * static_cast<long>(n_slabs);
  sol.slab_dofs.reserve(n_slabs);
  sol.top_traces.reserve(n_slabs);

  SlabOps ops;
  SparseDirectSolver solver;
  std::vector<char> cached_mask;
  double cached_ht = -1.0;
  bool have_factorization = false;

  std::optional<Eigen::MatrixXd> prev_traces;
  for (int n = 0; n < n_slabs; ++n) {
    const double h_t = st.time.slab_length(n);
    if (ops.cells.empty() || h_t != ops.h_t)
      ops = build_slab_ops(mesh, h_t, p, coeffs, opts.threads);

    SlabSystem sys = assemble_slab(st, map, ops, data, n, prev_traces, opts);
    if (!have_factorization || h_t != cached_ht || sys.constrained != cached_mask) {
      solver.factorize(sys.matrix, n);
      cached_mask = sys.constrained;
      cached_ht = h_t;
      have_factorization = true;
    }
    Eigen::VectorXd active = solver.solve(sys.rhs, n);

    Eigen::VectorXd full = sys.lift;
    for (long a = 0; a < active.size(); ++a) full(sys.active_to_full[a]) = active(a);
    sol.slab_dofs.push_back(full);

    Eigen::MatrixXd traces(map.n_bottom_each(), mesh.n_cells());
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      const auto& dofs = map.cell_dofs(ic);
      Eigen::VectorXd local(dofs.size());
      for (std::size_t i = 0; i < dofs.size(); ++i) local(i) = full(dofs[i]);
      traces.col(ic) = ops.cells[ic].TraceTop * local;
    }
    sol.top_traces.push_back(traces);
    prev_traces = traces;
  }
  return sol;
}

// Columnar text dump of a solution: per slab and element, the local DoF
// values and the Pi^N / Pi^* coefficient vectors.
inline void write_solution(std::ostream& out, const SpaceTimeMesh& st, int p,
                           const PhysicalCoefficients& coeffs, const Solution& sol) {
  const SpatialMesh& mesh = st.spatial;
  GlobalDofMap map(mesh, p);
  out.precision(17);
  out << "stvem-solution 1\n";
  out << "p " << p << " slabs " << st.time.num_slabs() << " cells " << mesh.n_cells() << "\n";
  out << "# slab cell kind index value   (kind: dof | piN | piStar)\n";
  SlabOps ops;
  for (int n = 0; n < st.time.num_slabs(); ++n) {
    const double h_t = st.time.slab_length(n);
    if (ops.cells.empty() || h_t != ops.h_t)
      ops = build_slab_ops(mesh, h_t, p, coeffs, 1);
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      const auto& dofs = map.cell_dofs(ic);
      Eigen::VectorXd local(dofs.size());
      for (std::size_t i = 0; i < dofs.size(); ++i) local(i) = sol.slab_dofs[n](dofs[i]);
      Eigen::VectorXd piN = ops.cells[ic].PiN * local;
      Eigen::VectorXd piStar = ops.cells[ic].PiStar * local;
      for (long i = 0; i < local.size(); ++i)
        out << n << " " << ic << " dof " << i << " " << local(i) << "\n";
      for (long i = 0; i < piN.size(); ++i)
        out << n << " " << ic << " piN " << i << " " << piN(i) << "\n";
      for (long i = 0; i < piStar.size(); ++i)
        out << n << " " << ic << " piStar " << i << " " << piStar(i) << "\n";
    }
  }
}

} // namespace stvem
