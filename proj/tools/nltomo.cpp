#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "nltomo/error.hpp"
#include "nltomo/harness.hpp"

using namespace nltomo;
using harness::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string scenario;
  std::optional<unsigned> seed;
  std::string out = "out";
};

void addCommon(CLI::App* sub, Common& c, bool need_scenario = true) {
  auto* opt = sub->add_option("-s,--scenario", c.scenario, "scenario JSON file");
  if (need_scenario) opt->required();
  sub->add_option("--seed", c.seed, "override the scenario seed");
  sub->add_option("-o,--out", c.out, "output directory");
}

harness::Scenario load(const Common& c) {
  auto s = harness::loadScenario(c.scenario);
  if (c.seed) s.seed = *c.seed;
  return s;
}

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void printErrors(const harness::RunReport& r) {
  for (const auto& f : r.failures)
    std::cerr << "stage " << f.stage << " failed (" << f.kind << "): " << f.what << '\n';
  for (const auto& m : r.missed) std::cerr << "object '" << m << "' missed\n";
}

void printNewton(const harness::RunReport& r) {
  for (const auto& n : r.newton) {
    std::printf("%-12s iterations %2d  residual %.3e  cond %.1f  stop %s\n", n.schedule.c_str(),
                n.iterations, n.residual_history.empty() ? 0.0 : n.residual_history.back(),
                n.final_condition, n.stop_reason.c_str());
    if (!n.final_errors) continue;
    for (std::size_t k = 0; k < n.final_errors->radial_l2.size(); ++k)
      std::printf("  object %zu  radial L2 %.4f  sym diff %.4f\n", k, n.final_errors->radial_l2[k],
                  n.final_errors->sym_diff_relative[k]);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear ultrasound tomography: inclusion reconstruction from harmonic data"};
  app.require_subcommand(1);

  Common simulate_c, pdap_c, recon_c, diag_c, sweep_c, abs_c;
  auto* simulate = app.add_subcommand("simulate", "generate (noisy) harmonic boundary data");
  addCommon(simulate, simulate_c);
  auto* pdap = app.add_subcommand("pdap", "point sources and equivalent discs");
  addCommon(pdap, pdap_c);
  auto* recon = app.add_subcommand("reconstruct", "full pipeline with every Newton schedule");
  addCommon(recon, recon_c);
  auto* diag = app.add_subcommand("diagnose", "Jacobian conditioning against data completion");
  addCommon(diag, diag_c);
  auto* sweep = app.add_subcommand("sweep", "run the scenario's sweep, one directory per value");
  addCommon(sweep, sweep_c);
  int jobs = 1;
  sweep->add_option("-j,--jobs", jobs, "parallel jobs")->check(CLI::PositiveNumber);

  auto* abs = app.add_subcommand("abstract", "frozen Newton on the abstract multiharmonic model");
  addCommon(abs, abs_c, false);
  harness::AbstractStudy study;
  std::string variant = "a";
  abs->add_option("--variant", variant, "nonlinearity variant: a or b");
  abs->add_option("--modes", study.reference.modes, "eigenfunctions J");
  abs->add_option("--harmonics", study.reference.harmonics, "harmonics M");
  abs->add_option("--obs-points", study.reference.obs_points, "observation points");
  abs->add_option("--noise", study.noise_levels, "relative noise levels");
  abs->add_option("--hankel-max", study.hankel_max, "largest Hankel matrix size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (*simulate) {
      const auto s = load(simulate_c);
      const auto r = harness::runScenario(s, simulate_c.out, harness::LastStage::Data);
      printErrors(r);
      std::printf("%s: data written to %s, |p3|/|p2| on Sigma %.3e (%.1f s)\n", s.name.c_str(),
                  simulate_c.out.c_str(), r.third_to_second, seconds(t0));
      return r.ok() ? 0 : 1;
    }
    if (*pdap) {
      const auto s = load(pdap_c);
      const auto r = harness::runScenario(s, pdap_c.out, harness::LastStage::Discs);
      printErrors(r);
      if (r.pdap)
        std::printf("%s: %zu sources, %d iterations, stop %s\n", s.name.c_str(),
                    r.pdap->measure.size(), r.pdap->iterations, r.pdap->stop_reason.c_str());
      if (r.start) std::printf("%zu objects (%.1f s)\n", r.start->curves.size(), seconds(t0));
      return r.ok() ? 0 : 1;
    }
    if (*recon) {
      const auto s = load(recon_c);
      const auto r = harness::runScenario(s, recon_c.out);
      printErrors(r);
      printNewton(r);
      std::printf("%s: written to %s (%.1f s)\n", s.name.c_str(), recon_c.out.c_str(), seconds(t0));
      return r.ok() ? 0 : 1;
    }
    if (*diag) {
      const auto s = load(diag_c);
      const auto rows = harness::conditioningReport(s, diag_c.out);
      std::printf("%8s %12s %12s %12s %10s %10s\n", "arc", "cond(J)", "c_N obs", "c_N miss",
                  "ref cond", "ref c_N");
      for (const auto& r : rows)
        std::printf("%8.2f %12.1f %12.3e %12.3e %10.1f %10.1e\n", r.arc_fraction, r.cond,
                    r.slepian_observed, r.slepian_missing, r.reference_cond, r.reference_cn);
      std::printf("(%.1f s)\n", seconds(t0));
      return 0;
    }
    if (*sweep) {
      const auto s = load(sweep_c);
      const auto pts = harness::runSweep(s, sweep_c.out, jobs);
      bool ok = true;
      for (const auto& p : pts) {
        std::printf("%s = %g\n", s.sweep->parameter.c_str(), p.value);
        printErrors(p.report);
        printNewton(p.report);
        ok = ok && p.report.ok();
      }
      std::printf("(%.1f s)\n", seconds(t0));
      return ok ? 0 : 1;
    }
    if (*abs) {
      study.reference.variant = abstract::parseVariant(variant);
      if (abs_c.seed) study.seed = *abs_c.seed;
      const auto j = harness::abstractReport(study, abs_c.out);
      std::printf("noise-free final error %.3e\n", j["noise_free_final_error"].get<double>());
      for (const auto& n : j["noise_study"])
        std::printf("delta %.0e  stop %d  error %.3e\n", n["delta"].get<double>(),
                    n["stop_index"].get<int>(), n["error"].get<double>());
      std::printf("(%.1f s)\n", seconds(t0));
      return 0;
    }
  } catch (const Error& e) {
    std::cout << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << '\n';
    return e.kind() == "config" ? 2 : 1;
  } catch (const std::exception& e) {
    std::cout << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}
