// Experiment drivers: h-convergence studies on the built-in mesh
// families, the polynomial patch test, the p-version study on a fixed
// mesh, and CSV emission of the error tables.

#pragma once

#include "problems.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace stvem {

struct ExperimentConfig {
  std::string experiment = "smooth-1d"; // registry name or "pversion"
  int p = 1;             // degree (maximum degree for pversion)
  int levels = 0;        // 0 = experiment default
  double alpha = 0.75;   // singular exponent
  InitialConditionMode ic_mode = InitialConditionMode::Strong;
  int quad_bump = 0;
  std::string out_path;  // CSV output; empty = none
  int threads = 1;
  unsigned seed = 0;     // seeds the 2D mesh perturbation
};

struct ExperimentResult {
  std::vector<ErrorReport> reports;
  bool assertions_passed = true;
  std::vector<std::string> failures;
};

namespace detail {

inline SolveOptions solve_options(const ExperimentConfig& config) {
  SolveOptions opts;
  opts.ic_mode = config.ic_mode;
  opts.threads = config.threads;
  opts.quad_bump = config.quad_bump;
  return opts;
}

// Level meshes (1-based level i):
//  - smooth-1d:                   h = 0.2 * 2^{-i}
//  - patch / singular / incompatible: h = 5e-2 / 2^{i-1}
//  - smooth-2d: (4*2^{i-1})^2 perturbed quads, h_In = max h_Kx
inline SpaceTimeMesh level_mesh(const std::string& experiment, int level, unsigned seed) {
  if (experiment == "smooth-2d") {
    const int n = 4 << (level - 1);
    SpatialMesh spatial = build_quad_2d(n, n, 0.0, 1.0, 0.0, 1.0, 0.10, seed + level);
    const double hx = spatial.max_diameter();
    const int slabs = std::max(1, static_cast<int>(std::lround(1.0 / hx)));
    return {std::move(spatial), build_time_partition(slabs, 1.0)};
  }
  double h = 0.0;
  if (experiment == "smooth-1d")
    h = 0.2 * std::pow(2.0, -level);
  else
    h = 5e-2 / std::pow(2.0, level - 1);
  const int cells = static_cast<int>(std::lround(1.0 / h));
  return {build_cartesian_1d(cells, 0.0, 1.0), build_time_partition(cells, 1.0)};
}

inline int default_levels(const std::string& experiment) {
  if (experiment == "smooth-1d") return 5;
  if (experiment == "smooth-2d") return 3;
  return 4;
}

} // namespace detail

// One h-convergence study: march every level, report the four errors and
// their pairwise EOCs.
inline ExperimentResult run_convergence(const ExperimentConfig& config) {
  Problem problem = make_problem(config.experiment, config.p, config.alpha);
  const SolveOptions opts = detail::solve_options(config);
  const int levels =
      config.levels > 0 ? config.levels : detail::default_levels(config.experiment);
  if (levels < 1) throw std::invalid_argument("run_convergence: levels >= 1 required");

  ExperimentResult result;
  for (int level = 1; level <= levels; ++level) {
    SpaceTimeMesh st = detail::level_mesh(config.experiment, level, config.seed);
    PhysicalCoefficients coeffs;
    Solution sol = march(st, config.p, coeffs, problem.exact.problem(), opts);
    ErrorReport report = compute_errors(st, config.p, coeffs, sol, problem.exact, opts);
    report.level = level;
    result.reports.push_back(report);
  }
  if (result.reports.size() >= 2) result.reports = eoc_table(result.reports);
  return result;
}

// Patch test: degree-p polynomial solutions must be reproduced to 1e-8
// on every level of the patch mesh family.
inline ExperimentResult run_patch(const ExperimentConfig& config) {
  if (config.p < 1 || config.p > 5)
    throw std::invalid_argument("run_patch: p must lie in 1..5");
  ExperimentConfig patch_config = config;
  patch_config.experiment = "patch";
  ExperimentResult result = run_convergence(patch_config);
  for (const ErrorReport& r : result.reports) {
    const struct {
      const char* name;
      double value;
    } entries[] = {{"EY", r.EY}, {"EN", r.EN}, {"EU", r.EU}, {"EL", r.EL}};
    for (const auto& e : entries)
      if (!(e.value <= 1e-8)) {
        result.assertions_passed = false;
        std::ostringstream msg;
        msg << "patch p=" << config.p << " level " << r.level << ": " << e.name << " = "
            << e.value << " exceeds 1e-8";
        result.failures.push_back(msg.str());
      }
  }
  return result;
}

struct PVersionResult {
  std::vector<ErrorReport> reports; // level column holds p
  bool assertions_passed = true;
  std::vector<std::string> failures;
  // least-squares fit of log(error) against sqrt(#DoFs)
  double slope[4] = {0, 0, 0, 0};
  double r_squared[4] = {0, 0, 0, 0};
};

// p-version on the fixed mesh h_Kx = h_In = 0.1, p = 1..config.p: errors
// must decrease strictly and fit a negative log-linear slope in
// sqrt(#DoFs) with R^2 >= 0.95.
inline PVersionResult run_pversion(const ExperimentConfig& config) {
  if (config.p < 2) throw std::invalid_argument("run_pversion: need a degree range (p >= 2)");
  Problem problem = make_problem("smooth-1d", 1, config.alpha);
  const SolveOptions opts = detail::solve_options(config);
  SpaceTimeMesh st{build_cartesian_1d(10, 0.0, 1.0), build_time_partition(10, 1.0)};

  PVersionResult result;
  for (int p = 1; p <= config.p; ++p) {
    PhysicalCoefficients coeffs;
    Solution sol = march(st, p, coeffs, problem.exact.problem(), opts);
    ErrorReport report = compute_errors(st, p, coeffs, sol, problem.exact, opts);
    report.level = p;
    result.reports.push_back(report);
  }

  auto error_of = [](const ErrorReport& r, int which) {
    switch (which) {
      case 0: return r.EY;
      case 1: return r.EN;
      case 2: return r.EU;
      default: return r.EL;
    }
  };
  const char* names[] = {"EY", "EN", "EU", "EL"};
  for (int which = 0; which < 4; ++which) {
    std::vector<double> xs, ys;
    for (const auto& r : result.reports) {
      xs.push_back(std::sqrt(static_cast<double>(r.n_dofs)));
      ys.push_back(std::log(error_of(r, which)));
    }
    for (std::size_t i = 1; i < result.reports.size(); ++i)
      if (!(error_of(result.reports[i], which) < error_of(result.reports[i - 1], which))) {
        result.assertions_passed = false;
        result.failures.push_back(std::string(names[which]) +
                                  " does not decrease monotonically in p");
        break;
      }
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
      syy += ys[i] * ys[i];
    }
    const double cov = sxy - sx * sy / n;
    const double varx = sxx - sx * sx / n;
    const double vary = syy - sy * sy / n;
    result.slope[which] = cov / varx;
    result.r_squared[which] = (cov * cov) / (varx * vary);
    if (!(result.slope[which] < 0.0) || !(result.r_squared[which] >= 0.95)) {
      result.assertions_passed = false;
      std::ostringstream msg;
      msg << names[which] << ": log-linear fit slope " << result.slope[which] << ", R^2 "
          << result.r_squared[which] << " fails slope < 0 with R^2 >= 0.95";
      result.failures.push_back(msg.str());
    }
  }
  return result;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

} // namespace detail

// Fixed schema: level,h,hx,ht,ndofs,EY,EN,EU,EL,eocY,eocN,eocU,eocL with
// round-trip floats and empty EOC cells where undefined.
inline void emit_csv(const std::vector<ErrorReport>& reports, std::ostream& out) {
  if (reports.empty()) throw std::invalid_argument("emit_csv: empty report list");
  out << "level,h,hx,ht,ndofs,EY,EN,EU,EL,eocY,eocN,eocU,eocL\n";
  for (const ErrorReport& r : reports) {
    out << r.level << ',' << detail::format_double(r.h) << ',' << detail::format_double(r.h_x)
        << ',' << detail::format_double(r.h_t) << ',' << r.n_dofs << ','
        << detail::format_double(r.EY) << ',' << detail::format_double(r.EN) << ','
        << detail::format_double(r.EU) << ',' << detail::format_double(r.EL);
    for (double eoc : {r.eocY, r.eocN, r.eocU, r.eocL}) {
      out << ',';
      if (!std::isnan(eoc)) out << detail::format_double(eoc);
    }
    out << '\n';
  }
}

inline void emit_csv(const std::vector<ErrorReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "'");
  emit_csv(reports, out);
  if (!out.good()) throw std::runtime_error("emit_csv: write to '" + path + "' failed");
}

} // namespace stvem
