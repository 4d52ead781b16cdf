// Element-local operators of the space-time virtual element method on a
// prism K = K_x x I_n: degrees of freedom (bulk, time-like facet, and
// initial-time moments), the projector matrices computed from them, the
// stabilization, and the local bilinear forms with upwind coupling.
//
// All operators are built in a local time frame centered at the slab
// midpoint, so they depend on the cell geometry and the slab length but
// not on the slab position; one operator set serves every slab of equal
// length.

#pragma once

#include "mesh.hpp"
#include "monomials.hpp"
#include "quadrature.hpp"

#include <Eigen/Dense>
#include <functional>
#include <map>

namespace stvem {

struct PhysicalCoefficients {
  double c_H = 1.0; // volumetric heat capacity
  double nu = 1.0;  // thermal conductivity
};

// Scalings c~_H = h_In and nu~ = h_Kx^2 of the local heat problem whose
// solutions form the (never constructed) virtual space. They identify
// the space the DoFs describe; no computable operator below depends on
// them, and none should be made to.
struct ElementScalings {
  double c_H_tilde = 0.0; // = h_In
  double nu_tilde = 0.0;  // = h_Kx^2
};

// Local DoF vector layout: bulk moments against P_{p-1}(K), then one
// block of moments against P_p(F) per facet in cell facet order, then
// initial-time moments against P_p(K_x). The functionals carry the
// measure scalings 1/|K|, 1/|F|, 1/|K_x|.
struct DofLayout {
  int p = 1;
  int dim = 1;
  int n_bulk = 0;
  int n_facet_each = 0;
  int n_facets = 0;
  int n_bottom = 0;

  int total() const { return n_bulk + n_facets * n_facet_each + n_bottom; }
  int bulk_offset() const { return 0; }
  int facet_offset(int f) const { return n_bulk + f * n_facet_each; }
  int bottom_offset() const { return n_bulk + n_facets * n_facet_each; }
};

// Quadrature choices for integrals of non-polynomial data. The graded
// flag upgrades the time rule on the slab touching t = 0 to a composite
// geometrically graded rule (for data with a singularity there).
struct DataQuadrature {
  int degree = 4;
  bool graded = false;
  int graded_subintervals = 8;
  double graded_ratio = 0.25;
};

class ElementOps {
public:
  // Geometry
  int dim = 1;
  int p = 1;
  int cell = -1;
  double h_x = 0.0, h_t = 0.0;
  double meas_Kx = 0.0, meas_K = 0.0;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  std::vector<int> facet_ids;       // global facet indices, cell facet order
  std::vector<double> facet_orient; // +1 if global facet normal is outward
  std::vector<double> facet_meas;   // |F| = |F_x| * h_In
  PhysicalCoefficients coeffs;
  ElementScalings scalings;
  DofLayout layout;

  // Bases (prism basis spatial part and the bottom basis share the same
  // centering/scaling, so degree-p traces re-expand index-by-index)
  ScaledMonomialBasis prism_basis;  // P_p(K), variables (x[, y], t_local)
  ScaledMonomialBasis bottom_basis; // P_p(K_x)
  std::vector<ScaledMonomialBasis> facet_bases;

  // Gram/mass matrices (exact, quadrature of degree 2p+2 by default)
  Eigen::MatrixXd MassPrism;  // dim P_p(K) square
  Eigen::MatrixXd GradGram;   // spatial-gradient Gram on P_p(K), no nu
  Eigen::MatrixXd MassBottom; // dim P_p(K_x) square
  std::vector<Eigen::MatrixXd> MassFacet;

  // DoF-of-polynomial matrix and projectors (all from DoFs only)
  Eigen::MatrixXd D;           // #DoFs x dim P_p(K)
  Eigen::MatrixXd PiN;         // dim P_p(K) x #DoFs
  Eigen::MatrixXd PiStar;      // dim P_p(K) x #DoFs
  Eigen::MatrixXd PiBulk;      // L2 projection onto P_{p-1}(K)
  std::vector<Eigen::MatrixXd> PiFacet; // L2 projection onto P_p(F)
  Eigen::MatrixXd PiTime;      // L2(K) projection onto P_{p-1}(I_n), time-only coeffs
  Eigen::RowVectorXd PiMeanBottom; // mean of the initial-time trace
  Eigen::MatrixXd BottomTrace; // trace v(.,t_{n-1}) in P_p(K_x) coeffs
  Eigen::MatrixXd TraceTop;    // (Pi* v)(.,t_n) in P_p(K_x) coeffs

  // Polynomial trace/derivative maps on coefficients
  Eigen::MatrixXd PolyTraceBottom; // P_p(K) -> P_p(K_x) at t_{n-1}
  Eigen::MatrixXd PolyTraceTop;    // P_p(K) -> P_p(K_x) at t_n
  Eigen::MatrixXd Dt;              // P_p(K) -> P_{p-1}(K), time derivative

  // Discrete forms
  Eigen::MatrixXd S;            // stabilization, symmetric PSD
  Eigen::MatrixXd Ah;           // local a_h
  Eigen::MatrixXd Bh_in;        // in-slab b_h block (same matrix for every slab)
  Eigen::MatrixXd Bh_prev_trace;// pairs previous-slab top-trace coefficients with tests

  // Reciprocal condition estimates of the projector condition systems.
  double pin_system_rcond = 0.0;
  double pistar_system_rcond = 0.0;

  ElementOps() = default;

  ElementOps(const SpatialMesh& mesh, int cell_index, double slab_length, int degree,
             const PhysicalCoefficients& physical, int quad_degree = -1)
      : dim(mesh.dim), p(degree), cell(cell_index), h_t(slab_length), coeffs(physical) {
    if (p < 1) throw std::invalid_argument("ElementOps: p >= 1 required");
    if (!(h_t > 0.0)) throw std::invalid_argument("ElementOps: slab length must be positive");
    const auto& geom = mesh.cell_geom[cell];
    h_x = geom.diameter;
    meas_Kx = geom.measure;
    meas_K = meas_Kx * h_t;
    centroid = geom.centroid;
    facet_ids = geom.facet_ids;
    facet_orient = geom.facet_orientation;
    scalings = ElementScalings{h_t, h_x * h_x};
    const int nf = static_cast<int>(facet_ids.size());
    facet_meas.resize(nf);
    for (int f = 0; f < nf; ++f)
      facet_meas[f] = mesh.facets[facet_ids[f]].measure * h_t;

    layout.p = p;
    layout.dim = dim;
    layout.n_bulk = dim_poly_space(p - 1, dim + 1);
    layout.n_facet_each = dim_poly_space(p, dim); // facet variables: (s,)t
    layout.n_facets = nf;
    layout.n_bottom = dim_poly_space(p, dim);

    build_bases(mesh);
    build_quadrature(mesh, quad_degree < 0 ? 2 * p + 2 : quad_degree);
    build_grams();
    build_dof_matrix();
    build_poly_maps();
    build_projectors();
    build_stabilization();
    build_forms();
  }

  int n_dofs() const { return layout.total(); }
  int dim_Pp() const { return prism_basis.size(); }

  //--------------------------------------------------------------------------
  // Quadrature access (local time coordinates in [-h_t/2, h_t/2])
  //--------------------------------------------------------------------------

  const QuadratureRule& space_rule() const { return space_rule_; }

  QuadratureRule space_rule_with_degree(int degree) const {
    return make_space_rule(cell_vertices_, degree);
  }

  QuadratureRule time_rule(int degree, bool graded = false, int nsub = 8,
                           double ratio = 0.25) const {
    if (graded) return graded_interval_rule(-0.5 * h_t, 0.5 * h_t, degree, nsub, ratio);
    return interval_rule(-0.5 * h_t, 0.5 * h_t, degree);
  }

  // Tensor prism rule: rows (x[, y], t_local)
  struct PrismRule {
    Eigen::MatrixXd points;
    Eigen::VectorXd weights;
  };

  PrismRule prism_rule(const QuadratureRule& srule, const QuadratureRule& trule) const {
    PrismRule rule;
    const int ns = srule.size(), nt = trule.size();
    rule.points.resize(ns * nt, dim + 1);
    rule.weights.resize(ns * nt);
    int at = 0;
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < nt; ++j, ++at) {
        for (int v = 0; v < dim; ++v) rule.points(at, v) = srule.points(i, v);
        rule.points(at, dim) = trule.points(j, 0);
        rule.weights(at) = srule.weights(i) * trule.weights(j);
      }
    return rule;
  }

  //--------------------------------------------------------------------------
  // Data integration. t_mid is the physical midpoint of the slab; all
  // stored rules use local time, data callables receive physical time.
  //--------------------------------------------------------------------------

  using SpaceTimeFn = std::function<double(const Eigen::Vector2d&, double)>;
  using SpaceFn = std::function<double(const Eigen::Vector2d&)>;

  // Moments of f against the leading n_request prism monomials.
  Eigen::VectorXd prism_data_moments(const SpaceTimeFn& f, double t_mid, int n_request,
                                     const DataQuadrature& dq) const {
    QuadratureRule srule = space_rule_with_degree(dq.degree);
    QuadratureRule trule = time_rule(dq.degree, dq.graded, dq.graded_subintervals, dq.graded_ratio);
    PrismRule rule = prism_rule(srule, trule);
    Eigen::MatrixXd vals = prism_basis.eval(rule.points);
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(n_request);
    for (int q = 0; q < rule.weights.size(); ++q) {
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      for (int v = 0; v < dim; ++v) x[v] = rule.points(q, v);
      const double fv = f(x, t_mid + rule.points(q, dim));
      if (!std::isfinite(fv))
        throw std::runtime_error("ElementOps: non-finite data value in cell " + std::to_string(cell));
      mom += rule.weights(q) * fv * vals.row(q).head(n_request).transpose();
    }
    return mom;
  }

  // Load vector: l_i = (f, Pi^0_{p-1} phi_i)_{0,K}; only bulk DoFs load.
  Eigen::VectorXd load_vector(const SpaceTimeFn& f, double t_mid, const DataQuadrature& dq) const {
    Eigen::VectorXd mom = prism_data_moments(f, t_mid, layout.n_bulk, dq);
    Eigen::VectorXd l = Eigen::VectorXd::Zero(n_dofs());
    l.segment(layout.bulk_offset(), layout.n_bulk) = meas_K * bulk_mass_ldlt_.solve(mom);
    return l;
  }

  // Unscaled moments of u0 against the bottom basis.
  Eigen::VectorXd bottom_data_moments(const SpaceFn& u0, int degree) const {
    QuadratureRule srule = space_rule_with_degree(degree);
    Eigen::MatrixXd vals = bottom_basis.eval(srule.points);
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(layout.n_bottom);
    for (int q = 0; q < srule.weights.size(); ++q) {
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      for (int v = 0; v < dim; ++v) x[v] = srule.points(q, v);
      const double uv = u0(x);
      if (!std::isfinite(uv))
        throw std::runtime_error("ElementOps: non-finite initial data in cell " + std::to_string(cell));
      mom += srule.weights(q) * uv * vals.row(q).transpose();
    }
    return mom;
  }

  // Scaled DoF values of boundary data on a local facet:
  // (1/|F|) int_F g m_beta.
  Eigen::VectorXd facet_data_dofs(int local_facet, const SpaceTimeFn& g, double t_mid,
                                  int degree) const {
    const FacetRule fr = make_facet_rule(local_facet, degree);
    Eigen::MatrixXd vals = facet_bases[local_facet].eval(fr.facet_points);
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(layout.n_facet_each);
    for (int q = 0; q < fr.weights.size(); ++q) {
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      for (int v = 0; v < dim; ++v) x[v] = fr.prism_points(q, v);
      const double gv = g(x, t_mid + fr.prism_points(q, dim));
      if (!std::isfinite(gv))
        throw std::runtime_error("ElementOps: non-finite boundary data in cell " +
                                 std::to_string(cell));
      mom += fr.weights(q) * gv * vals.row(q).transpose();
    }
    return mom / facet_meas[local_facet];
  }

  // DoF interpolant of a space-time function.
  Eigen::VectorXd interpolate(const SpaceTimeFn& u, double t_mid, const DataQuadrature& dq) const {
    Eigen::VectorXd dofs(n_dofs());
    dofs.segment(layout.bulk_offset(), layout.n_bulk) =
        prism_data_moments(u, t_mid, layout.n_bulk, dq) / meas_K;
    for (int f = 0; f < layout.n_facets; ++f)
      dofs.segment(layout.facet_offset(f), layout.n_facet_each) =
          facet_data_dofs(f, u, t_mid, dq.degree);
    auto u_bottom = [&](const Eigen::Vector2d& x) { return u(x, t_mid - 0.5 * h_t); };
    dofs.segment(layout.bottom_offset(), layout.n_bottom) =
        bottom_data_moments(u_bottom, dq.degree) / meas_Kx;
    return dofs;
  }

  // Pi*_p of a function known in closed form: same condition system as
  // PiStar with the right-hand data integrated by quadrature.
  Eigen::VectorXd pistar_of_function(const SpaceTimeFn& u, double t_mid,
                                     const DataQuadrature& dq) const {
    Eigen::VectorXd rhs(dim_Pp());
    rhs.head(layout.n_bulk) = prism_data_moments(u, t_mid, layout.n_bulk, dq);
    auto u_bottom = [&](const Eigen::Vector2d& x) { return u(x, t_mid - 0.5 * h_t); };
    rhs.tail(layout.n_bottom) = bottom_data_moments(u_bottom, dq.degree);
    return pistar_system_lu_.solve(rhs);
  }

  // Coefficients of a degree-p space-time polynomial in the prism basis,
  // from its values (least-squares via the mass matrix; exact for
  // polynomials of degree <= p).
  Eigen::VectorXd expand_polynomial(const SpaceTimeFn& q, double t_mid) const {
    Eigen::MatrixXd vals = prism_basis.eval(prism_rule_.points);
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(dim_Pp());
    for (int i = 0; i < prism_rule_.weights.size(); ++i) {
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      for (int v = 0; v < dim; ++v) x[v] = prism_rule_.points(i, v);
      mom += prism_rule_.weights(i) * q(x, t_mid + prism_rule_.points(i, dim)) *
             vals.row(i).transpose();
    }
    return prism_mass_ldlt_.solve(mom);
  }

  const ElementOps::PrismRule& base_prism_rule() const { return prism_rule_; }

  struct FacetRule {
    Eigen::MatrixXd facet_points; // facet coordinates ((s,) t_local)
    Eigen::MatrixXd prism_points; // (x[, y], t_local)
    Eigen::VectorXd weights;
  };

  FacetRule make_facet_rule(int local_facet, int degree) const {
    const auto& facet = mesh_facets_->at(facet_ids[local_facet]);
    QuadratureRule trule = time_rule(degree);
    FacetRule fr;
    if (dim == 1) {
      const int nt = trule.size();
      fr.facet_points.resize(nt, 1);
      fr.prism_points.resize(nt, 2);
      fr.weights.resize(nt);
      for (int j = 0; j < nt; ++j) {
        fr.facet_points(j, 0) = trule.points(j, 0);
        fr.prism_points(j, 0) = facet.barycenter.x();
        fr.prism_points(j, 1) = trule.points(j, 0);
        fr.weights(j) = trule.weights(j); // point facets have unit spatial measure
      }
    } else {
      QuadratureRule srule = interval_rule(-0.5 * facet.measure, 0.5 * facet.measure, degree);
      const int ns = srule.size(), nt = trule.size();
      fr.facet_points.resize(ns * nt, 2);
      fr.prism_points.resize(ns * nt, 3);
      fr.weights.resize(ns * nt);
      int at = 0;
      for (int i = 0; i < ns; ++i) {
        const Eigen::Vector2d x = facet.barycenter + srule.points(i, 0) * facet.tangent;
        for (int j = 0; j < nt; ++j, ++at) {
          fr.facet_points(at, 0) = srule.points(i, 0);
          fr.facet_points(at, 1) = trule.points(j, 0);
          fr.prism_points(at, 0) = x.x();
          fr.prism_points(at, 1) = x.y();
          fr.prism_points(at, 2) = trule.points(j, 0);
          fr.weights(at) = srule.weights(i) * trule.weights(j);
        }
      }
    }
    return fr;
  }

private:
  void build_bases(const SpatialMesh& mesh) {
    Eigen::Vector3d pc = Eigen::Vector3d::Zero(), ps = Eigen::Vector3d::Ones();
    for (int v = 0; v < dim; ++v) {
      pc[v] = centroid[v];
      ps[v] = h_x;
    }
    pc[dim] = 0.0;
    ps[dim] = h_t;
    prism_basis = ScaledMonomialBasis(DomainKind::Prism, dim + 1, p, pc, ps);
    bottom_basis = ScaledMonomialBasis(DomainKind::SpatialCell, dim, p, pc, ps);

    facet_bases.clear();
    for (int f = 0; f < layout.n_facets; ++f) {
      const auto& facet = mesh.facets[facet_ids[f]];
      Eigen::Vector3d fc = Eigen::Vector3d::Zero(), fs = Eigen::Vector3d::Ones();
      if (dim == 1) {
        fs[0] = h_t; // single variable: local time
      } else {
        fs[0] = facet.measure; // arc length about the facet midpoint
        fs[1] = h_t;
      }
      facet_bases.emplace_back(DomainKind::TimeLikeFacet, dim, p, fc, fs);
    }
    cell_vertices_ = mesh.cell_vertices(cell);
    mesh_facets_ = &mesh.facets;
  }

  static QuadratureRule make_space_rule(const std::vector<Eigen::Vector2d>& verts, int degree) {
    if (verts.size() == 2) { // 1D segment
      QuadratureRule r = interval_rule(verts[0].x(), verts[1].x(), degree);
      return r;
    }
    return polygon_rule(verts, degree);
  }

  void build_quadrature(const SpatialMesh& mesh, int degree) {
    (void)mesh;
    quad_degree_ = degree;
    space_rule_ = make_space_rule(cell_vertices_, degree);
    if (dim == 1 && space_rule_.points.cols() == 1) {
      // promote to two columns (x, unused) for uniform indexing
      Eigen::MatrixXd pts(space_rule_.points.rows(), 2);
      pts.col(0) = space_rule_.points.col(0);
      pts.col(1).setZero();
      space_rule_.points = pts;
    }
    time_rule_ = time_rule(degree);
    prism_rule_ = prism_rule(space_rule_, time_rule_);
    facet_rules_.clear();
    for (int f = 0; f < layout.n_facets; ++f)
      facet_rules_.push_back(make_facet_rule(f, degree));
  }

  void build_grams() {
    const int np = dim_Pp();
    Eigen::MatrixXd vals = prism_basis.eval(prism_rule_.points);
    MassPrism.setZero(np, np);
    GradGram.setZero(np, np);
    std::vector<Eigen::MatrixXd> grads(dim);
    for (int v = 0; v < dim; ++v) grads[v] = prism_basis.eval_derivative(prism_rule_.points, v);
    for (int q = 0; q < prism_rule_.weights.size(); ++q) {
      const double w = prism_rule_.weights(q);
      MassPrism.noalias() += w * vals.row(q).transpose() * vals.row(q);
      for (int v = 0; v < dim; ++v)
        GradGram.noalias() += w * grads[v].row(q).transpose() * grads[v].row(q);
    }
    prism_mass_ldlt_.compute(MassPrism);
    bulk_mass_ldlt_.compute(MassPrism.topLeftCorner(layout.n_bulk, layout.n_bulk));

    Eigen::MatrixXd bvals = bottom_basis.eval(space_rule_.points.leftCols(std::max(dim, 1)));
    MassBottom.setZero(layout.n_bottom, layout.n_bottom);
    for (int q = 0; q < space_rule_.weights.size(); ++q)
      MassBottom.noalias() +=
          space_rule_.weights(q) * bvals.row(q).transpose() * bvals.row(q);
    bottom_mass_ldlt_.compute(MassBottom);

    MassFacet.assign(layout.n_facets, Eigen::MatrixXd());
    for (int f = 0; f < layout.n_facets; ++f) {
      const auto& fr = facet_rules_[f];
      Eigen::MatrixXd fvals = facet_bases[f].eval(fr.facet_points);
      MassFacet[f].setZero(layout.n_facet_each, layout.n_facet_each);
      for (int q = 0; q < fr.weights.size(); ++q)
        MassFacet[f].noalias() += fr.weights(q) * fvals.row(q).transpose() * fvals.row(q);
    }
  }

  void build_dof_matrix() {
    const int np = dim_Pp();
    D.setZero(n_dofs(), np);
    D.middleRows(layout.bulk_offset(), layout.n_bulk) =
        MassPrism.topRows(layout.n_bulk) / meas_K;
    for (int f = 0; f < layout.n_facets; ++f) {
      const auto& fr = facet_rules_[f];
      Eigen::MatrixXd fvals = facet_bases[f].eval(fr.facet_points);
      Eigen::MatrixXd pvals = prism_basis.eval(fr.prism_points);
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(layout.n_facet_each, np);
      for (int q = 0; q < fr.weights.size(); ++q)
        block.noalias() += fr.weights(q) * fvals.row(q).transpose() * pvals.row(q);
      D.middleRows(layout.facet_offset(f), layout.n_facet_each) = block / facet_meas[f];
    }
    // initial-time rows: evaluate prism monomials at t_local = -h_t/2
    Eigen::MatrixXd bvals = bottom_basis.eval(space_rule_.points.leftCols(std::max(dim, 1)));
    Eigen::MatrixXd pts(space_rule_.points.rows(), dim + 1);
    for (int v = 0; v < dim; ++v) pts.col(v) = space_rule_.points.col(v);
    pts.col(dim).setConstant(-0.5 * h_t);
    Eigen::MatrixXd pvals = prism_basis.eval(pts);
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(layout.n_bottom, np);
    for (int q = 0; q < space_rule_.weights.size(); ++q)
      block.noalias() += space_rule_.weights(q) * bvals.row(q).transpose() * pvals.row(q);
    D.middleRows(layout.bottom_offset(), layout.n_bottom) = block / meas_Kx;
  }

  void build_poly_maps() {
    const int np = dim_Pp();
    // index of a spatial exponent tuple in the bottom basis
    std::map<std::array<int, 3>, int> bottom_index;
    for (int g = 0; g < bottom_basis.size(); ++g)
      bottom_index[bottom_basis.exponents()[g].e] = g;
    std::map<std::array<int, 3>, int> prism_index;
    for (int j = 0; j < np; ++j)
      prism_index[prism_basis.exponents()[j].e] = j;
    prism_index_ = prism_index;

    PolyTraceBottom.setZero(layout.n_bottom, np);
    PolyTraceTop.setZero(layout.n_bottom, np);
    Dt.setZero(layout.n_bulk, np);
    for (int j = 0; j < np; ++j) {
      MultiIndex mi = prism_basis.exponents()[j];
      const int k = mi.e[dim];
      std::array<int, 3> spatial = mi.e;
      spatial[dim] = 0;
      const int g = bottom_index.at(spatial);
      PolyTraceBottom(g, j) += std::pow(-0.5, k);
      PolyTraceTop(g, j) += std::pow(0.5, k);
      if (k >= 1) {
        std::array<int, 3> lower = mi.e;
        lower[dim] = k - 1;
        Dt(prism_index_.at(lower), j) = k / h_t;
      }
    }
  }

  // index of the time-only prism monomial tau^k
  int time_only_idx(int k) const {
    std::array<int, 3> e{0, 0, 0};
    e[dim] = k;
    return prism_index_.at(e);
  }

  void build_projectors() {
    const int np = dim_Pp();
    const int nd = n_dofs();

    // --- Pi^N: gradient-matching rows for monomials with nonzero spatial
    // degree (the gradient conditions are void for time-only monomials),
    // closed by time-moment rows and the initial-mean row.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(np, np);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(np, nd);
    int row = 0;
    for (int r = 0; r < np; ++r) {
      MultiIndex mi = prism_basis.exponents()[r];
      int sdeg = 0;
      for (int v = 0; v < dim; ++v) sdeg += mi.e[v];
      if (sdeg == 0) continue;
      G.row(row) = GradGram.row(r);
      // v-side by parts: -(Delta_x q, v)_K + sum_F (n_out . grad q, v)_F
      for (int v = 0; v < dim; ++v) {
        const int ev = mi.e[v];
        if (ev < 2) continue;
        std::array<int, 3> low = mi.e;
        low[v] = ev - 2;
        const double coef = ev * (ev - 1) / (h_x * h_x);
        const int bulk_idx = prism_index_.at(low); // degree <= p-2, in the bulk range
        B(row, layout.bulk_offset() + bulk_idx) -= coef * meas_K;
      }
      for (int f = 0; f < layout.n_facets; ++f) {
        const auto& fr = facet_rules_[f];
        const auto& facet = mesh_facets_->at(facet_ids[f]);
        const Eigen::Vector2d n_out = facet_orient[f] * facet.normal;
        Eigen::MatrixXd fvals = facet_bases[f].eval(fr.facet_points);
        Eigen::VectorXd mom = Eigen::VectorXd::Zero(layout.n_facet_each);
        for (int v = 0; v < dim; ++v) {
          if (std::abs(n_out[v]) < 1e-15) continue;
          Eigen::MatrixXd dvals = prism_basis.eval_derivative(fr.prism_points, v);
          for (int q = 0; q < fr.weights.size(); ++q)
            mom += fr.weights(q) * n_out[v] * dvals(q, r) * fvals.row(q).transpose();
        }
        Eigen::VectorXd c = facet_mass_solve(f, mom);
        B.row(row).segment(layout.facet_offset(f), layout.n_facet_each) +=
            facet_meas[f] * c.transpose();
      }
      ++row;
    }
    for (int k = 0; k <= p - 1; ++k, ++row) { // time-moment rows
      const int idx = time_only_idx(k);
      G.row(row) = MassPrism.row(idx);
      B(row, layout.bulk_offset() + idx) = meas_K;
    }
    // initial-mean row
    G.row(row) = MassBottom.row(0) * PolyTraceBottom;
    B(row, layout.bottom_offset()) = meas_Kx;
    ++row;
    if (row != np) throw std::logic_error("ElementOps: Pi^N condition count mismatch");
    Eigen::PartialPivLU<Eigen::MatrixXd> glu(G);
    pin_system_rcond = glu.rcond();
    if (!(pin_system_rcond > 0.0))
      throw std::runtime_error("ElementOps: singular Pi^N condition system in cell " +
                               std::to_string(cell));
    PiN = glu.solve(B);

    // --- Pi^*: bulk moments up to p-1 plus the full initial trace.
    Eigen::MatrixXd Gs = Eigen::MatrixXd::Zero(np, np);
    Eigen::MatrixXd Bs = Eigen::MatrixXd::Zero(np, nd);
    Gs.topRows(layout.n_bulk) = MassPrism.topRows(layout.n_bulk);
    Bs.block(0, layout.bulk_offset(), layout.n_bulk, layout.n_bulk) =
        meas_K * Eigen::MatrixXd::Identity(layout.n_bulk, layout.n_bulk);
    Gs.bottomRows(layout.n_bottom) = MassBottom * PolyTraceBottom;
    Bs.block(layout.n_bulk, layout.bottom_offset(), layout.n_bottom, layout.n_bottom) =
        meas_Kx * Eigen::MatrixXd::Identity(layout.n_bottom, layout.n_bottom);
    pistar_system_lu_.compute(Gs);
    pistar_system_rcond = pistar_system_lu_.rcond();
    if (!(pistar_system_rcond > 0.0))
      throw std::runtime_error("ElementOps: singular Pi^* condition system in cell " +
                               std::to_string(cell));
    PiStar = pistar_system_lu_.solve(Bs);

    // --- L2 projectors out of single DoF blocks
    PiBulk.setZero(layout.n_bulk, nd);
    PiBulk.middleCols(layout.bulk_offset(), layout.n_bulk) =
        meas_K * bulk_mass_ldlt_.solve(Eigen::MatrixXd::Identity(layout.n_bulk, layout.n_bulk));
    PiFacet.assign(layout.n_facets, Eigen::MatrixXd());
    for (int f = 0; f < layout.n_facets; ++f) {
      PiFacet[f].setZero(layout.n_facet_each, nd);
      PiFacet[f].middleCols(layout.facet_offset(f), layout.n_facet_each) =
          facet_meas[f] * facet_mass_solve(f, Eigen::MatrixXd::Identity(layout.n_facet_each,
                                                                        layout.n_facet_each));
    }
    BottomTrace.setZero(layout.n_bottom, nd);
    BottomTrace.middleCols(layout.bottom_offset(), layout.n_bottom) =
        meas_Kx *
        bottom_mass_ldlt_.solve(Eigen::MatrixXd::Identity(layout.n_bottom, layout.n_bottom));

    Eigen::MatrixXd Tgram(p, p);
    std::vector<int> tidx(p);
    for (int k = 0; k < p; ++k) tidx[k] = time_only_idx(k);
    for (int k = 0; k < p; ++k)
      for (int l = 0; l < p; ++l) Tgram(k, l) = MassPrism(tidx[k], tidx[l]);
    Eigen::MatrixXd Tmom = Eigen::MatrixXd::Zero(p, nd);
    for (int k = 0; k < p; ++k) Tmom(k, layout.bulk_offset() + tidx[k]) = meas_K;
    PiTime = Tgram.ldlt().solve(Tmom);

    PiMeanBottom.setZero(nd);
    PiMeanBottom(layout.bottom_offset()) = 1.0;

    TraceTop = PolyTraceTop * PiStar;
  }

  void build_stabilization() {
    S = (PiBulk.transpose() * MassPrism.topLeftCorner(layout.n_bulk, layout.n_bulk) * PiBulk) /
        (h_x * h_x);
    for (int f = 0; f < layout.n_facets; ++f)
      S.noalias() += (PiFacet[f].transpose() * MassFacet[f] * PiFacet[f]) / h_x;
    S.noalias() +=
        (h_t / (h_x * h_x)) * BottomTrace.transpose() * MassBottom * BottomTrace;
    S = 0.5 * (S + S.transpose()); // symmetrize round-off
  }

  void build_forms() {
    const int nd = n_dofs();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nd, nd);
    Eigen::MatrixXd R = I - D * PiN; // (I - Pi^N) in DoF coordinates
    Ah = coeffs.nu * (PiN.transpose() * GradGram * PiN + R.transpose() * S * R);
    Ah = 0.5 * (Ah + Ah.transpose());

    // (d_t Pi* u, v)_K through the bulk moments of v
    Eigen::MatrixXd DtPiStar = Dt * PiStar;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(nd, nd);
    T.middleRows(layout.bulk_offset(), layout.n_bulk) = meas_K * DtPiStar;

    // trial/test initial-trace pairing (the upwind term's in-slab part,
    // identical for n = 1 and n >= 2)
    Eigen::MatrixXd U = BottomTrace.transpose() * MassBottom * BottomTrace;

    Bh_in = coeffs.c_H * (T + U) + Ah;
    Bh_prev_trace = -coeffs.c_H * BottomTrace.transpose() * MassBottom;
  }

  Eigen::MatrixXd facet_mass_solve(int f, const Eigen::MatrixXd& rhs) const {
    return MassFacet[f].ldlt().solve(rhs);
  }

  QuadratureRule space_rule_;
  QuadratureRule time_rule_;
  PrismRule prism_rule_;
  std::vector<FacetRule> facet_rules_;
  std::vector<Eigen::Vector2d> cell_vertices_;
  const std::vector<SpatialFacet>* mesh_facets_ = nullptr;
  std::map<std::array<int, 3>, int> prism_index_;
  Eigen::LDLT<Eigen::MatrixXd> prism_mass_ldlt_;
  Eigen::LDLT<Eigen::MatrixXd> bulk_mass_ldlt_;
  Eigen::LDLT<Eigen::MatrixXd> bottom_mass_ldlt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> pistar_system_lu_;
  int quad_degree_ = 0;
};

} // namespace stvem
