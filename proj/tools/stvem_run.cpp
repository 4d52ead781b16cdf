// Experiment runner: h-convergence studies, the polynomial patch test,
// and the p-version study, with CSV output of the error tables.
//
// Exit codes: 0 all configured assertions passed, 1 assertion failure,
// 2 usage/config error, 3 numerical failure.

#include "stvem/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>

using namespace stvem;

namespace {

void print_table(const std::vector<ErrorReport>& reports) {
  std::printf("%5s %12s %12s %12s %9s %11s %11s %11s %11s %7s %7s %7s %7s\n", "level", "h",
              "hx", "ht", "ndofs", "EY", "EN", "EU", "EL", "eocY", "eocN", "eocU", "eocL");
  for (const auto& r : reports) {
    std::printf("%5d %12.5e %12.5e %12.5e %9ld %11.4e %11.4e %11.4e %11.4e", r.level, r.h,
                r.h_x, r.h_t, r.n_dofs, r.EY, r.EN, r.EU, r.EL);
    for (double eoc : {r.eocY, r.eocN, r.eocU, r.eocL})
      if (std::isnan(eoc))
        std::printf(" %7s", "-");
      else
        std::printf(" %7.3f", eoc);
    std::printf("\n");
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time virtual element experiments for the heat equation"};
  app.set_config("--config", "", "Configuration file (key = value lines, flags override)");

  ExperimentConfig config;
  std::string ic_mode = "strong";
  app.add_option("--experiment", config.experiment,
                 "One of: patch, smooth-1d, singular, incompatible, smooth-2d, pversion")
      ->required();
  app.add_option("--p", config.p, "Polynomial degree (maximum degree for pversion)")
      ->check(CLI::PositiveNumber);
  app.add_option("--levels", config.levels, "Refinement levels (0 = experiment default)");
  app.add_option("--alpha", config.alpha, "Exponent of the singular solution");
  app.add_option("--ic-mode", ic_mode, "Initial-condition imposition: strong | weak")
      ->check(CLI::IsMember({"strong", "weak"}));
  app.add_option("--out", config.out_path, "CSV output path");
  app.add_option("--threads", config.threads, "Threads for element-parallel assembly")
      ->check(CLI::PositiveNumber);
  app.add_option("--quad-bump", config.quad_bump, "Increase of every quadrature degree");
  app.add_option("--seed", config.seed, "Seed of the 2D mesh perturbation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  config.ic_mode =
      ic_mode == "weak" ? InitialConditionMode::Weak : InitialConditionMode::Strong;

  try {
    bool passed = true;
    std::vector<std::string> failures;
    std::vector<ErrorReport> reports;

    if (config.experiment == "pversion") {
      PVersionResult result = run_pversion(config);
      reports = result.reports;
      passed = result.assertions_passed;
      failures = result.failures;
      print_table(reports);
      const char* names[] = {"EY", "EN", "EU", "EL"};
      for (int w = 0; w < 4; ++w)
        std::printf("fit %s: slope %.4f vs sqrt(#DoFs), R^2 %.4f\n", names[w],
                    result.slope[w], result.r_squared[w]);
    } else if (config.experiment == "patch") {
      ExperimentResult result = run_patch(config);
      reports = result.reports;
      passed = result.assertions_passed;
      failures = result.failures;
      print_table(reports);
    } else {
      ExperimentResult result = run_convergence(config);
      reports = result.reports;
      passed = result.assertions_passed;
      failures = result.failures;
      print_table(reports);
    }

    if (!config.out_path.empty()) {
      try {
        emit_csv(reports, config.out_path);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
      }
      std::printf("wrote %s\n", config.out_path.c_str());
    }
    for (const auto& f : failures) std::fprintf(stderr, "assertion failed: %s\n", f.c_str());
    return passed ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
}
