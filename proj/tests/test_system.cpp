#include <catch2/catch_amalgamated.hpp>

#include "stvem/problems.hpp"
#include "stvem/slab_system.hpp"

#include <random>

using namespace stvem;

namespace {

SpaceTimeMesh small_mesh(int cells, int slabs) {
  return {build_cartesian_1d(cells, 0.0, 1.0), build_time_partition(slabs, 1.0)};
}

// global b_h(u, v) from per-slab full DoF vectors
double global_bh(const SpaceTimeMesh& st, const GlobalDofMap& map, const SlabOps& ops,
                 const std::vector<Eigen::VectorXd>& u, const std::vector<Eigen::VectorXd>& v) {
  double total = 0.0;
  const int ncells = st.spatial.n_cells();
  for (int n = 0; n < st.time.num_slabs(); ++n)
    for (int ic = 0; ic < ncells; ++ic) {
      const ElementOps& el = ops.cells[ic];
      const auto& dofs = map.cell_dofs(ic);
      Eigen::VectorXd ul(dofs.size()), vl(dofs.size());
      for (std::size_t i = 0; i < dofs.size(); ++i) {
        ul(i) = u[n](dofs[i]);
        vl(i) = v[n](dofs[i]);
      }
      total += vl.dot(el.Bh_in * ul);
      if (n >= 1) {
        Eigen::VectorXd up(dofs.size());
        for (std::size_t i = 0; i < dofs.size(); ++i) up(i) = u[n - 1](dofs[i]);
        total += vl.dot(el.Bh_prev_trace * (el.TraceTop * up));
      }
    }
  return total;
}

double global_ah(const SpaceTimeMesh& st, const GlobalDofMap& map, const SlabOps& ops,
                 const std::vector<Eigen::VectorXd>& v) {
  double total = 0.0;
  for (int n = 0; n < st.time.num_slabs(); ++n)
    for (int ic = 0; ic < st.spatial.n_cells(); ++ic) {
      const ElementOps& el = ops.cells[ic];
      const auto& dofs = map.cell_dofs(ic);
      Eigen::VectorXd vl(dofs.size());
      for (std::size_t i = 0; i < dofs.size(); ++i) vl(i) = v[n](dofs[i]);
      total += vl.dot(el.Ah * vl);
    }
  return total;
}

} // namespace

TEST_CASE("free DoF counts") {
  {
    GlobalDofMap map(build_cartesian_1d(4, 0.0, 1.0), 1);
    CHECK(map.n_free() == 18); // 3 facets x 2 + 4 bulk x 1 + 4 bottom x 2
  }
  {
    GlobalDofMap map(build_cartesian_1d(1, 0.0, 1.0), 1);
    CHECK(map.n_free() == 3);
  }
  {
    GlobalDofMap map(build_quad_2d(2, 2, 0.0, 1.0, 0.0, 1.0), 1);
    CHECK(map.n_free() == 28); // 4 interior facets x 3 + 4 x 1 + 4 x 3
  }
}

TEST_CASE("numbering is deterministic and shared on interior facets") {
  SpatialMesh mesh = build_cartesian_1d(3, 0.0, 1.0);
  GlobalDofMap map(mesh, 2);
  int fi = -1;
  for (int f = 0; f < mesh.n_facets(); ++f)
    if (!mesh.facets[f].boundary && mesh.facets[f].cell[0] == 0) fi = f;
  REQUIRE(fi >= 0);
  const long block = map.facet_block(fi);
  bool seen0 = false, seen1 = false;
  for (long g : map.cell_dofs(0)) seen0 |= (g == block);
  for (long g : map.cell_dofs(1)) seen1 |= (g == block);
  CHECK(seen0);
  CHECK(seen1);
  CHECK(block < map.n_free());
  // boundary facet blocks live in the constrained tail
  for (int f = 0; f < mesh.n_facets(); ++f)
    if (mesh.facets[f].boundary) CHECK(map.facet_block(f) >= map.n_free());
}

TEST_CASE("homogeneous data produce the zero solution") {
  SpaceTimeMesh st = small_mesh(4, 3);
  for (auto mode : {InitialConditionMode::Strong, InitialConditionMode::Weak}) {
    SolveOptions opts;
    opts.ic_mode = mode;
    ProblemData data; // all callables empty = zero data
    Solution sol = march(st, 2, PhysicalCoefficients{1.0, 1.0}, data, opts);
    for (const auto& v : sol.slab_dofs) CHECK(v.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("polynomial solutions are reproduced to interpolation accuracy") {
  for (int p : {1, 2, 3}) {
    ExactSolution exact = patch_solution(p);
    SpaceTimeMesh st = small_mesh(4, 4);
    PhysicalCoefficients coeffs;
    for (auto mode : {InitialConditionMode::Strong, InitialConditionMode::Weak}) {
      SolveOptions opts;
      opts.ic_mode = mode;
      Solution sol = march(st, p, coeffs, exact.problem(), opts);

      GlobalDofMap map(st.spatial, p);
      SlabOps ops = build_slab_ops(st.spatial, st.time.slab_length(0), p, coeffs, 1);
      DataQuadrature dq{2 * p + 2, false, 8, 0.25};
      for (int n = 0; n < st.time.num_slabs(); ++n) {
        const double t_mid = 0.5 * (st.time.slab_start(n) + st.time.slab_end(n));
        for (int ic = 0; ic < st.spatial.n_cells(); ++ic) {
          Eigen::VectorXd interp = ops.cells[ic].interpolate(exact.u, t_mid, dq);
          const auto& dofs = map.cell_dofs(ic);
          for (std::size_t i = 0; i < dofs.size(); ++i) {
            INFO("p=" << p << " slab=" << n << " cell=" << ic << " dof=" << i
                      << (mode == InitialConditionMode::Strong ? " strong" : " weak"));
            CHECK(sol.slab_dofs[n](dofs[i]) == Catch::Approx(interp(i)).margin(1e-8));
          }
        }
      }
    }
  }
}

TEST_CASE("polynomial reproduction on perturbed quads (2+1D)") {
  SpaceTimeMesh st{build_quad_2d(3, 3, 0.0, 1.0, 0.0, 1.0, 0.15, 5),
                   build_time_partition(3, 1.0)};
  PhysicalCoefficients coeffs;

  ExactSolution exact;
  SECTION("p = 1") {
    exact.u = [](const Eigen::Vector2d& x, double t) { return x[0] + 2.0 * x[1] - 3.0 * t + 1.0; };
    exact.grad_u = [](const Eigen::Vector2d&, double) { return Eigen::Vector2d(1.0, 2.0); };
    exact.f = [&](const Eigen::Vector2d&, double) { return -3.0 * coeffs.c_H; };
    exact.g = exact.u;
    exact.u0 = [u = exact.u](const Eigen::Vector2d& x) { return u(x, 0.0); };
    Solution sol = march(st, 1, coeffs, exact.problem(), SolveOptions{});
    ErrorReport r = compute_errors(st, 1, coeffs, sol, exact, SolveOptions{});
    CHECK(r.EY <= 1e-9);
    CHECK(r.EL <= 1e-9);
    CHECK(r.EU <= 1e-9);
    CHECK(r.EN <= 1e-9);
  }
  SECTION("p = 2") {
    exact.u = [](const Eigen::Vector2d& x, double t) {
      return x[0] * x[1] + t * (x[0] + x[1]) + t * t;
    };
    exact.grad_u = [](const Eigen::Vector2d& x, double t) {
      return Eigen::Vector2d(x[1] + t, x[0] + t);
    };
    exact.f = [&](const Eigen::Vector2d& x, double t) {
      return coeffs.c_H * (x[0] + x[1] + 2.0 * t);
    };
    exact.g = exact.u;
    exact.u0 = [u = exact.u](const Eigen::Vector2d& x) { return u(x, 0.0); };
    Solution sol = march(st, 2, coeffs, exact.problem(), SolveOptions{});
    ErrorReport r = compute_errors(st, 2, coeffs, sol, exact, SolveOptions{});
    CHECK(r.EY <= 1e-9);
    CHECK(r.EL <= 1e-9);
    CHECK(r.EU <= 1e-9);
    CHECK(r.EN <= 1e-9);
  }
}

TEST_CASE("slab matrices are nonsingular and factorize") {
  for (int p : {1, 2, 3}) {
    SpaceTimeMesh st = small_mesh(6, 2);
    GlobalDofMap map(st.spatial, p);
    SlabOps ops = build_slab_ops(st.spatial, st.time.slab_length(0), p,
                                 PhysicalCoefficients{1.0, 1.0}, 1);
    ProblemData data;
    SlabSystem sys = assemble_slab(st, map, ops, data, 0, std::nullopt, SolveOptions{});
    Eigen::MatrixXd dense = Eigen::MatrixXd(sys.matrix);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
    INFO("p=" << p << " rcond=" << lu.rcond());
    CHECK(lu.rcond() > 1e-14);
    // the time derivative makes the element blocks nonsymmetric; for
    // p = 1 the skew parts cancel under facet sharing, so the assembled
    // in-slab block only shows it from p = 2 on
    CHECK((ops.cells[0].Bh_in - ops.cells[0].Bh_in.transpose()).cwiseAbs().maxCoeff() > 1e-10);
    if (p >= 2) CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() > 1e-10);
  }
}

TEST_CASE("solve_linear basics") {
  SECTION("identity system returns the right-hand side") {
    SlabSystem sys;
    sys.matrix.resize(5, 5);
    sys.matrix.setIdentity();
    sys.rhs = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
    Eigen::VectorXd x = solve_linear(sys);
    CHECK((x - sys.rhs).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("random sparse SPD system meets the residual contract") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 100;
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) {
      trip.emplace_back(i, i, 4.0 + u(rng));
      if (i + 1 < n) {
        const double off = u(rng);
        trip.emplace_back(i, i + 1, off);
        trip.emplace_back(i + 1, i, off);
      }
    }
    SlabSystem sys;
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.rhs.resize(n);
    for (int i = 0; i < n; ++i) sys.rhs(i) = u(rng);
    Eigen::VectorXd x = solve_linear(sys);
    CHECK((sys.matrix * x - sys.rhs).norm() < 1e-11 * (1.0 + sys.rhs.norm()));
  }
  SECTION("singular matrix raises with slab index") {
    SlabSystem sys;
    sys.slab = 3;
    sys.matrix.resize(2, 2);
    std::vector<Eigen::Triplet<double>> trip{{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}};
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.rhs = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_WITH(solve_linear(sys), Catch::Matchers::ContainsSubstring("slab 4"));
  }
}

TEST_CASE("previous traces are required exactly for later slabs") {
  SpaceTimeMesh st = small_mesh(2, 2);
  GlobalDofMap map(st.spatial, 1);
  SlabOps ops =
      build_slab_ops(st.spatial, st.time.slab_length(0), 1, PhysicalCoefficients{1.0, 1.0}, 1);
  ProblemData data;
  CHECK_THROWS_AS(assemble_slab(st, map, ops, data, 1, std::nullopt, SolveOptions{}),
                  std::invalid_argument);
  Eigen::MatrixXd traces = Eigen::MatrixXd::Zero(map.n_bottom_each(), st.spatial.n_cells());
  CHECK_THROWS_AS(assemble_slab(st, map, ops, data, 0, traces, SolveOptions{}),
                  std::invalid_argument);
}

TEST_CASE("causality: early slabs ignore later data") {
  ExactSolution exact = smooth_1d_solution();
  SpaceTimeMesh st = small_mesh(5, 4);
  SolveOptions opts;
  ProblemData data = exact.problem();
  Solution base = march(st, 2, PhysicalCoefficients{}, data, opts);

  ProblemData tampered = data;
  auto f = exact.f;
  tampered.f = [f](const Eigen::Vector2d& x, double t) {
    return f(x, t) + (t > 0.6 ? 10.0 * std::sin(5.0 * x[0]) : 0.0);
  };
  Solution mod = march(st, 2, PhysicalCoefficients{}, tampered, opts);
  // slabs 1 and 2 end before t = 0.6 and match bitwise
  for (int n = 0; n < 2; ++n)
    CHECK((base.slab_dofs[n] - mod.slab_dofs[n]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((base.slab_dofs[3] - mod.slab_dofs[3]).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("single-slab march equals the monolithic solve") {
  ExactSolution exact = smooth_1d_solution();
  SpaceTimeMesh st = small_mesh(6, 1);
  SolveOptions opts;
  Solution sol = march(st, 2, PhysicalCoefficients{}, exact.problem(), opts);

  GlobalDofMap map(st.spatial, 2);
  SlabOps ops = build_slab_ops(st.spatial, 1.0, 2, PhysicalCoefficients{}, 1);
  SlabSystem sys = assemble_slab(st, map, ops, exact.problem(), 0, std::nullopt, opts);
  Eigen::VectorXd x = solve_linear(sys);
  for (long a = 0; a < x.size(); ++a)
    CHECK(sol.slab_dofs[0](sys.active_to_full[a]) == x(a));
}

TEST_CASE("Galerkin residual of the marched solution vanishes") {
  ExactSolution exact = smooth_1d_solution();
  SpaceTimeMesh st = small_mesh(4, 3);
  SolveOptions opts;
  Solution sol = march(st, 2, PhysicalCoefficients{}, exact.problem(), opts);
  GlobalDofMap map(st.spatial, 2);
  SlabOps ops = build_slab_ops(st.spatial, st.time.slab_length(0), 2, PhysicalCoefficients{}, 1);
  for (int n = 0; n < st.time.num_slabs(); ++n) {
    std::optional<Eigen::MatrixXd> prev;
    if (n >= 1) prev = sol.top_traces[n - 1];
    SlabSystem sys = assemble_slab(st, map, ops, exact.problem(), n, prev, opts);
    Eigen::VectorXd active(sys.active_to_full.size());
    for (std::size_t a = 0; a < sys.active_to_full.size(); ++a)
      active(a) = sol.slab_dofs[n](sys.active_to_full[a]);
    CHECK((sys.matrix * active - sys.rhs).norm() < 1e-10 * (1.0 + sys.rhs.norm()));
  }
}

TEST_CASE("discrete energy identity") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int p : {1, 2}) {
    SpaceTimeMesh st = small_mesh(8, 8);
    PhysicalCoefficients coeffs{1.3, 0.8};
    GlobalDofMap map(st.spatial, p);
    SlabOps ops = build_slab_ops(st.spatial, st.time.slab_length(0), p, coeffs, 1);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Eigen::VectorXd> v(st.time.num_slabs());
      for (auto& vn : v) {
        vn.resize(map.n_total());
        for (long i = 0; i < map.n_free(); ++i) vn(i) = u(rng);
        vn.tail(map.n_total() - map.n_free()).setZero(); // boundary constrained
      }
      const double bh = global_bh(st, map, ops, v, v);
      const double ah = global_ah(st, map, ops, v);

      double traces = 0.0;
      for (int ic = 0; ic < st.spatial.n_cells(); ++ic) {
        const ElementOps& el = ops.cells[ic];
        const auto& dofs = map.cell_dofs(ic);
        auto local = [&](int n) {
          Eigen::VectorXd w(dofs.size());
          for (std::size_t i = 0; i < dofs.size(); ++i) w(i) = v[n](dofs[i]);
          return w;
        };
        Eigen::VectorXd first = el.BottomTrace * local(0);
        traces += first.dot(el.MassBottom * first);
        for (int n = 1; n < st.time.num_slabs(); ++n) {
          Eigen::VectorXd jump = el.BottomTrace * local(n) - el.TraceTop * local(n - 1);
          traces += jump.dot(el.MassBottom * jump);
        }
        Eigen::VectorXd last = el.TraceTop * local(st.time.num_slabs() - 1);
        traces += last.dot(el.MassBottom * last);
      }
      const double rhs = 0.5 * coeffs.c_H * traces;
      const double scale = std::abs(bh) + std::abs(ah) + std::abs(rhs);
      CHECK(std::abs(bh - ah - rhs) < 1e-10 * scale);
    }
  }
}

TEST_CASE("assembled a_h block is SPD on the constrained space") {
  for (int p : {1, 2}) {
    SpatialMesh mesh = build_cartesian_1d(6, 0.0, 1.0);
    GlobalDofMap map(mesh, p);
    SlabOps ops = build_slab_ops(mesh, 0.25, p, PhysicalCoefficients{1.0, 1.0}, 1);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(map.n_free(), map.n_free());
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      const auto& dofs = map.cell_dofs(ic);
      const ElementOps& el = ops.cells[ic];
      for (std::size_t i = 0; i < dofs.size(); ++i) {
        if (dofs[i] >= map.n_free()) continue;
        for (std::size_t j = 0; j < dofs.size(); ++j) {
          if (dofs[j] >= map.n_free()) continue;
          A(dofs[i], dofs[j]) += el.Ah(i, j);
        }
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    INFO("p=" << p << " min eig=" << es.eigenvalues().minCoeff());
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("solution dump is readable and complete") {
  SpaceTimeMesh st = small_mesh(2, 2);
  Solution sol =
      march(st, 1, PhysicalCoefficients{}, smooth_1d_solution().problem(), SolveOptions{});
  std::stringstream out;
  write_solution(out, st, 1, PhysicalCoefficients{}, sol);
  std::string header;
  std::getline(out, header);
  CHECK(header == "stvem-solution 1");
  int lines = 0;
  std::string line;
  while (std::getline(out, line)) ++lines;
  GlobalDofMap map(st.spatial, 1);
  const int per_cell = static_cast<int>(map.cell_dofs(0).size()) + 2 * dim_poly_space(1, 2);
  CHECK(lines == 2 + 2 * 2 * per_cell);
}
