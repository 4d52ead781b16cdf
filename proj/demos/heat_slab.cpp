// Minimal end-to-end use of the library: solve the heat equation with a
// manufactured smooth solution on a small space-time mesh, report the
// error quantities, and dump the mesh and solution to text files.

#include "stvem/problems.hpp"
#include "stvem/slab_system.hpp"

#include <cstdio>
#include <fstream>

using namespace stvem;

int main() {
  const int p = 2;
  SpaceTimeMesh st{build_cartesian_1d(16, 0.0, 1.0), build_time_partition(16, 1.0)};
  PhysicalCoefficients coeffs{1.0, 1.0};
  ExactSolution exact = smooth_1d_solution(coeffs);

  SolveOptions opts;
  opts.ic_mode = InitialConditionMode::Weak;
  Solution sol = march(st, p, coeffs, exact.problem(), opts);
  ErrorReport report = compute_errors(st, p, coeffs, sol, exact, opts);

  std::printf("p = %d, %d cells x %d slabs, %ld free DoFs per slab\n", p,
              st.spatial.n_cells(), st.time.num_slabs(), sol.n_free_per_slab);
  std::printf("EY = %.4e  EN = %.4e  EU = %.4e  EL = %.4e\n", report.EY, report.EN,
              report.EU, report.EL);

  std::ofstream mesh_file("heat_slab_mesh.txt");
  write_mesh(mesh_file, st.spatial);
  std::ofstream sol_file("heat_slab_solution.txt");
  write_solution(sol_file, st, p, coeffs, sol);
  std::printf("wrote heat_slab_mesh.txt and heat_slab_solution.txt\n");
  return 0;
}
