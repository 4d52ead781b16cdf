// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Criteria can be selected by number on the command line, e.g.
//   acceptance 1 2 3
// runs only the first three. Everything runs single-threaded.

#include "oracles.hpp"
#include "stvem/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

using namespace stvem;
using namespace stvem_test;

namespace {

struct Criterion {
  int id;
  std::string description;
  bool passed = true;
  std::vector<std::string> notes;

  void fail(const std::string& note) {
    passed = false;
    notes.push_back(note);
  }
};

struct RandomElement {
  SpatialMesh mesh;
  int cell;
  double h_t;
};

RandomElement random_element(int dim, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomElement re;
  if (dim == 1) {
    const double a = -1.0 + 2.0 * u(rng);
    const double h = 0.05 + 1.95 * u(rng);
    re.mesh = build_cartesian_1d(1, a, a + h);
    re.cell = 0;
    re.h_t = (0.2 + 1.8 * u(rng)) * h;
  } else {
    const double w = 0.2 + 1.8 * u(rng);
    re.mesh = build_quad_2d(2, 2, 0.0, w, 0.0, w * (0.5 + u(rng)), 0.25 * u(rng), rng());
    re.cell = static_cast<int>(4 * u(rng)) % 4;
    re.h_t = (0.2 + 1.8 * u(rng)) * re.mesh.cell_geom[re.cell].diameter;
  }
  return re;
}

Eigen::VectorXd random_vector(long n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (long i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

//------------------------------------------------------------------------
// 1. Unisolvence and polynomial reproduction
//------------------------------------------------------------------------
void criterion_unisolvence(Criterion& c) {
  std::mt19937 rng(101);
  for (int dim : {1, 2})
    for (int p = 1; p <= 4; ++p)
      for (int trial = 0; trial < 20; ++trial) {
        RandomElement re = random_element(dim, rng);
        ElementOps ops(re.mesh, re.cell, re.h_t, p, PhysicalCoefficients{});
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ops.D);
        if (qr.rank() != ops.dim_Pp())
          c.fail("rank(D) deficient at dim=" + std::to_string(dim) + " p=" + std::to_string(p));
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(ops.dim_Pp(), ops.dim_Pp());
        const double errN = (ops.PiN * ops.D - I).cwiseAbs().maxCoeff();
        const double errS = (ops.PiStar * ops.D - I).cwiseAbs().maxCoeff();
        if (!(errN < 1e-10))
          c.fail("PiN*D deviates by " + fmt(errN) + " at dim=" + std::to_string(dim) +
                 " p=" + std::to_string(p));
        if (!(errS < 1e-10))
          c.fail("PiStar*D deviates by " + fmt(errS) + " at dim=" + std::to_string(dim) +
                 " p=" + std::to_string(p));
      }
}

//------------------------------------------------------------------------
// 2. Consistency identity against the quadrature oracle
//------------------------------------------------------------------------
void criterion_consistency(Criterion& c) {
  std::mt19937 rng(202);
  for (int dim : {1, 2})
    for (int p = 1; p <= 4; ++p) {
      RandomElement re = random_element(dim, rng);
      PhysicalCoefficients coeffs{1.5, 0.8};
      ElementOps ops(re.mesh, re.cell, re.h_t, p, coeffs);
      for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd q1 = random_vector(ops.dim_Pp(), rng);
        Eigen::VectorXd q2 = random_vector(ops.dim_Pp(), rng);
        Eigen::VectorXd v = random_vector(ops.dim_Pp(), rng);
        Eigen::VectorXd dv = ops.D * v;
        const double bh1 = dv.dot(ops.Bh_in * (ops.D * q2));
        const double o1 = bK_oracle(ops, q2, v) + jK_first_slab_oracle(ops, q2, v);
        const double bh2 = dv.dot(ops.Bh_in * (ops.D * q2) +
                                  ops.Bh_prev_trace * (ops.TraceTop * (ops.D * q1)));
        const double o2 = bK_oracle(ops, q2, v) + jK_interface_oracle(ops, ops, q1, q2, v);
        const double s1 = std::max({1.0, std::abs(bh1), std::abs(o1)});
        const double s2 = std::max({1.0, std::abs(bh2), std::abs(o2)});
        if (!(std::abs(bh1 - o1) < 1e-10 * s1))
          c.fail("first-slab identity off by " + fmt(std::abs(bh1 - o1) / s1) + " at dim=" +
                 std::to_string(dim) + " p=" + std::to_string(p));
        if (!(std::abs(bh2 - o2) < 1e-10 * s2))
          c.fail("interface identity off by " + fmt(std::abs(bh2 - o2) / s2) + " at dim=" +
                 std::to_string(dim) + " p=" + std::to_string(p));
      }
    }
}

//------------------------------------------------------------------------
// 3. Global discrete energy identity
//------------------------------------------------------------------------
void criterion_energy(Criterion& c) {
  std::mt19937 rng(303);
  SpaceTimeMesh st{build_cartesian_1d(8, 0.0, 1.0), build_time_partition(8, 1.0)};
  PhysicalCoefficients coeffs{1.0, 1.0};
  for (int p = 1; p <= 3; ++p) {
    GlobalDofMap map(st.spatial, p);
    SlabOps ops = build_slab_ops(st.spatial, st.time.slab_length(0), p, coeffs, 1);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Eigen::VectorXd> v(st.time.num_slabs());
      for (auto& vn : v) {
        vn = Eigen::VectorXd::Zero(map.n_total());
        vn.head(map.n_free()) = random_vector(map.n_free(), rng);
      }
      double bh = 0.0, ah = 0.0, traces = 0.0;
      for (int ic = 0; ic < st.spatial.n_cells(); ++ic) {
        const ElementOps& el = ops.cells[ic];
        const auto& dofs = map.cell_dofs(ic);
        auto local = [&](int n) {
          Eigen::VectorXd w(dofs.size());
          for (std::size_t i = 0; i < dofs.size(); ++i) w(i) = v[n](dofs[i]);
          return w;
        };
        for (int n = 0; n < st.time.num_slabs(); ++n) {
          Eigen::VectorXd vn = local(n);
          bh += vn.dot(el.Bh_in * vn);
          ah += vn.dot(el.Ah * vn);
          if (n >= 1) bh += vn.dot(el.Bh_prev_trace * (el.TraceTop * local(n - 1)));
        }
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
      if (!(std::abs(bh - ah - rhs) < 1e-10 * scale))
        c.fail("energy identity off by " + fmt(std::abs(bh - ah - rhs) / scale) +
               " at p=" + std::to_string(p));
    }
  }
}

//------------------------------------------------------------------------
// 4. Patch test
//------------------------------------------------------------------------
void criterion_patch(Criterion& c) {
  for (int p = 1; p <= 5; ++p) {
    ExperimentConfig config;
    config.experiment = "patch";
    config.p = p;
    config.levels = 4;
    ExperimentResult result = run_patch(config);
    for (const auto& note : result.failures) c.fail(note);
    double worst = 0.0;
    for (const auto& r : result.reports)
      worst = std::max({worst, r.EY, r.EN, r.EU, r.EL});
    c.notes.push_back("p=" + std::to_string(p) + " max error " + fmt(worst));
  }
}

//------------------------------------------------------------------------
// 5. Smooth h-convergence. The homogeneous experiments run with the
// weak (upwind) imposition of the zero initial datum, the form of the
// method whose rates the reference experiments report; the strong
// lifting mode must agree on the EY/EU/EL orders.
//------------------------------------------------------------------------
void criterion_smooth(Criterion& c) {
  for (int p = 1; p <= 3; ++p) {
    ExperimentConfig config;
    config.experiment = "smooth-1d";
    config.p = p;
    config.levels = p == 3 ? 4 : 5;
    config.ic_mode = InitialConditionMode::Weak;
    ExperimentResult result = run_convergence(config);
    const ErrorReport& last = result.reports.back();

    if (p <= 2) { // both modes agree on the EY/EU/EL orders
      ExperimentConfig strong = config;
      strong.ic_mode = InitialConditionMode::Strong;
      strong.levels = 3;
      ExperimentConfig weak3 = config;
      weak3.levels = 3;
      const ErrorReport& rs = run_convergence(strong).reports.back();
      const ErrorReport& rw = run_convergence(weak3).reports.back();
      if (std::abs(rs.eocY - rw.eocY) > 0.05 || std::abs(rs.eocU - rw.eocU) > 0.05 ||
          std::abs(rs.eocL - rw.eocL) > 0.05)
        c.fail("strong/weak modes disagree on EY/EU/EL orders at p=" + std::to_string(p));
    }
    const struct {
      const char* name;
      double eoc, expected;
    } targets[] = {{"EY", last.eocY, double(p)},
                   {"EU", last.eocU, p + 0.5},
                   {"EN", last.eocN, p + 1.0},
                   {"EL", last.eocL, p + 1.0}};
    for (const auto& t : targets) {
      c.notes.push_back("p=" + std::to_string(p) + " eoc(" + t.name + ")=" + fmt(t.eoc) +
                        " target " + fmt(t.expected));
      if (!(std::abs(t.eoc - t.expected) <= 0.2))
        c.fail("smooth-1d p=" + std::to_string(p) + ": eoc(" + t.name + ")=" + fmt(t.eoc) +
               " not within 0.2 of " + fmt(t.expected));
    }
  }
}

//------------------------------------------------------------------------
// 6. Singular h-convergence
//------------------------------------------------------------------------
void criterion_singular(Criterion& c) {
  for (double alpha : {0.55, 0.75})
    for (int p = 1; p <= 2; ++p) {
      ExperimentConfig config;
      config.experiment = "singular";
      config.p = p;
      config.alpha = alpha;
      config.levels = 5; // the asymptotic orders need one refinement past the
                         // 4-level display family (see the EL transient at
                         // alpha = 0.75, p = 1: even the Pi* projection of the
                         // exact solution is preasymptotic there)
      config.ic_mode = InitialConditionMode::Weak;
      ExperimentResult result = run_convergence(config);
      const ErrorReport& last = result.reports.back();
      const struct {
        const char* name;
        double eoc, expected;
      } targets[] = {{"EY", last.eocY, std::min(double(p), alpha + 0.5)},
                     {"EN", last.eocN, alpha - 0.5},
                     {"EU", last.eocU, alpha},
                     {"EL", last.eocL, alpha + 0.5}};
      for (const auto& t : targets) {
        c.notes.push_back("alpha=" + fmt(alpha) + " p=" + std::to_string(p) + " eoc(" +
                          t.name + ")=" + fmt(t.eoc) + " target " + fmt(t.expected));
        if (!(std::abs(t.eoc - t.expected) <= 0.2))
          c.fail("singular alpha=" + fmt(alpha) + " p=" + std::to_string(p) + ": eoc(" +
                 t.name + ")=" + fmt(t.eoc) + " not within 0.2 of " + fmt(t.expected));
      }
    }
}

//------------------------------------------------------------------------
// 7. Incompatible initial and boundary data
//------------------------------------------------------------------------
void criterion_incompatible(Criterion& c) {
  for (int p = 1; p <= 2; ++p) {
    ExperimentConfig config;
    config.experiment = "incompatible";
    config.p = p;
    config.levels = 4;
    config.ic_mode = InitialConditionMode::Weak;
    ExperimentResult result = run_convergence(config);
    const double eoc = result.reports.back().eocY;
    c.notes.push_back("p=" + std::to_string(p) + " eoc(EY)=" + fmt(eoc) + " target 0.25");
    if (!(std::abs(eoc - 0.25) <= 0.1))
      c.fail("incompatible p=" + std::to_string(p) + ": eoc(EY)=" + fmt(eoc) +
             " not within 0.1 of 0.25");
  }
}

//------------------------------------------------------------------------
// 8. p-version
//------------------------------------------------------------------------
void criterion_pversion(Criterion& c) {
  ExperimentConfig config;
  config.experiment = "pversion";
  config.p = 4;
  config.ic_mode = InitialConditionMode::Weak;
  PVersionResult result = run_pversion(config);
  for (const auto& note : result.failures) c.fail(note);
  for (int which = 0; which < 4; ++which)
    c.notes.push_back("slope=" + fmt(result.slope[which]) +
                      " R2=" + fmt(result.r_squared[which]));
}

//------------------------------------------------------------------------
// 9. (2+1)-dimensional smooth convergence
//------------------------------------------------------------------------
void criterion_2plus1(Criterion& c) {
  for (int p = 1; p <= 2; ++p) {
    ExperimentConfig config;
    config.experiment = "smooth-2d";
    config.p = p;
    config.levels = 3;
    config.seed = 7;
    ExperimentResult result = run_convergence(config);
    const double eoc = result.reports.back().eocY;
    c.notes.push_back("p=" + std::to_string(p) + " eoc(EY)=" + fmt(eoc) + " target " +
                      std::to_string(p));
    if (!(std::abs(eoc - p) <= 0.25))
      c.fail("smooth-2d p=" + std::to_string(p) + ": eoc(EY)=" + fmt(eoc) +
             " not within 0.25 of " + std::to_string(p));
  }
}

//------------------------------------------------------------------------
// 10. Well-posedness witnesses
//------------------------------------------------------------------------
void criterion_wellposedness(Criterion& c) {
  // slab factorization across representative experiment configurations
  for (const std::string& name : {std::string("smooth-1d"), std::string("smooth-2d")}) {
    ExperimentConfig config;
    config.experiment = name;
    config.p = name == "smooth-1d" ? 2 : 1;
    config.levels = name == "smooth-1d" ? 2 : 1;
    try {
      run_convergence(config);
    } catch (const std::exception& e) {
      c.fail(name + " march failed: " + e.what());
    }
  }
  // a_h slab blocks SPD on the constrained space, meshes up to 16 cells
  for (int dim : {1, 2})
    for (int p = 1; p <= 3; ++p) {
      SpatialMesh mesh =
          dim == 1 ? build_cartesian_1d(16, 0.0, 1.0) : build_quad_2d(4, 4, 0.0, 1.0, 0.0, 1.0);
      GlobalDofMap map(mesh, p);
      SlabOps ops = build_slab_ops(mesh, 1.0 / 16.0, p, PhysicalCoefficients{}, 1);
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(map.n_free(), map.n_free());
      for (int ic = 0; ic < mesh.n_cells(); ++ic) {
        const auto& dofs = map.cell_dofs(ic);
        for (std::size_t i = 0; i < dofs.size(); ++i) {
          if (dofs[i] >= map.n_free()) continue;
          for (std::size_t j = 0; j < dofs.size(); ++j)
            if (dofs[j] < map.n_free()) A(dofs[i], dofs[j]) += ops.cells[ic].Ah(i, j);
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
      const double lmin = es.eigenvalues().minCoeff();
      c.notes.push_back("a_h min eig dim=" + std::to_string(dim) + " p=" + std::to_string(p) +
                        ": " + fmt(lmin));
      if (!(lmin > 0.0))
        c.fail("a_h block not SPD at dim=" + std::to_string(dim) + " p=" + std::to_string(p));
    }
}

} // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::vector<Criterion> criteria = {
      {1, "unisolvence and polynomial reproduction (rank D, PiN*D = I, PiStar*D = I)"},
      {2, "consistency identity b_h = b + J against the quadrature oracle"},
      {3, "discrete energy identity on a 1D 8x8 mesh, p = 1..3"},
      {4, "patch test: degree-p solutions reproduced to 1e-8, p = 1..5"},
      {5, "smooth 1D h-convergence rates (EY~p, EU~p+1/2, EN,EL~p+1)"},
      {6, "singular h-convergence rates, alpha = 0.55 and 0.75, p = 1..2"},
      {7, "incompatible-data convergence: eoc(EY) = 0.25 +- 0.1"},
      {8, "p-version: monotone decrease, log-linear fit in sqrt(#DoFs)"},
      {9, "(2+1)D quad-mesh convergence: eoc(EY) within 0.25 of p"},
      {10, "well-posedness witnesses: slab factorizations, a_h SPD"},
  };

  using Runner = void (*)(Criterion&);
  const Runner runners[] = {criterion_unisolvence, criterion_consistency, criterion_energy,
                            criterion_patch,       criterion_smooth,      criterion_singular,
                            criterion_incompatible, criterion_pversion,   criterion_2plus1,
                            criterion_wellposedness};

  bool all_passed = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Criterion& c = criteria[i];
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    try {
      runners[i](c);
    } catch (const std::exception& e) {
      c.fail(std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s (%.1fs)\n", c.passed ? "PASS" : "FAIL", c.id,
                c.description.c_str(), seconds);
    for (const auto& note : c.notes) std::printf("         %s\n", note.c_str());
    all_passed &= c.passed;
    std::fflush(stdout);
  }
  std::printf("%s\n", all_passed ? "acceptance: all criteria passed"
                                 : "acceptance: FAILURES present");
  return all_passed ? 0 : 1;
}
