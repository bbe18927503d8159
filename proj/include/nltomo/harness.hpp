#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nltomo/abstract_newton.hpp"
#include "nltomo/eqdiscs.hpp"
#include "nltomo/forward.hpp"
#include "nltomo/io.hpp"
#include "nltomo/pdap.hpp"
#include "nltomo/shape_newton.hpp"

namespace nltomo::harness {

using io::json;
namespace fs = std::filesystem;

struct PhantomObject {
  std::string label;
  geometry::StarCurve curve;
};

struct Sweep {
  /// arc_fraction, noise, seed, objectK.center_x, objectK.center_y,
  /// objectK.polar_radius, objectK.polar_turns (polar angle / 2 pi)
  std::string parameter;
  std::vector<double> values;
};

struct Conditioning {
  std::vector<double> arc_fractions;
  int basis = 9;
};

struct Scenario {
  std::string name = "scenario";
  std::string description;
  /// Inversion resolution and physical constants.
  forward::DomainConfig physics;
  /// Data are generated at physics.refined(data_factor) and subsampled; >= 2.
  int data_factor = 2;
  forward::Excitation excitation;
  std::vector<PhantomObject> phantom;
  int harmonics = 2;
  double arc_fraction = 1.0;
  double arc_center = 0.0;
  double noise = 0.0;  // relative, per harmonic
  unsigned seed = 1;
  std::vector<shape::Schedule> schedules{shape::Schedule::SecondOnly};
  int order = 4;
  shape::NewtonOptions newton;
  pdap::PdapConfig pdap;
  bool clamp_to_branch = true;
  std::optional<Sweep> sweep;
  std::optional<Conditioning> conditioning;

  Scenario();
  /// Throws ConfigError on any violated invariant.
  void validate() const;
  std::vector<geometry::StarCurve> phantomCurves() const;
  Scenario withParameter(const std::string& parameter, double value) const;
};

Scenario scenarioFromJson(const json& j);
json toJson(const Scenario& s);
Scenario loadScenario(const fs::path& p);

/// trace + delta ||trace|| n / ||n|| with n a complex Gaussian vector drawn from `seed`.
forward::BoundaryTrace addNoise(const forward::BoundaryTrace& t, double delta, unsigned seed);

/// Which arc the angle in the data-completion estimate refers to.
enum class SlepianReading { Observed, Missing };
double slepianAlpha(double arc_fraction, SlepianReading r);
/// log((sqrt 2 + sqrt(1 + cos a)) / (sqrt 2 - sqrt(1 + cos a))); DomainError as a -> 0.
double slepianGamma(double alpha);
double slepianConditionNumber(int n, double alpha);

struct DataBundle {
  std::vector<forward::BoundaryTrace> clean;  // Neumann traces on Sigma, m = 2..M
  std::vector<forward::BoundaryTrace> noisy;
  /// ||p3|| / ||p2|| of the Dirichlet traces on Sigma; NaN for M = 2.
  double third_to_second = 0.0;
  const forward::BoundaryTrace& noisyTrace(int m) const;
};
DataBundle generateData(const Scenario& s);

enum class LastStage { Data, Points, Discs, Newton };

struct StageFailure {
  std::string stage;
  std::string kind;
  std::string what;
};

struct RunReport {
  std::string scenario;
  double third_to_second = 0.0;
  std::optional<pdap::PdapState> pdap;
  std::optional<eqdiscs::StartingGuess> start;
  std::optional<shape::ShapeErrors> start_errors;
  std::vector<cplx> phantom_weights;
  std::vector<shape::NewtonReport> newton;
  std::vector<StageFailure> failures;
  /// Phantom labels without a reconstructed object at the disc stage.
  std::vector<std::string> missed;

  const shape::NewtonReport* find(shape::Schedule s) const;
  bool ok() const { return failures.empty(); }
  json toJson() const;
};

/// Data, PDAP points, equivalent discs and one Newton run per schedule. Stage
/// failures are recorded and the remaining artifacts still written. An empty
/// `out` skips file output.
RunReport runScenario(const Scenario& s, const fs::path& out = {},
                      LastStage last = LastStage::Newton);

struct ConditioningRow {
  double arc_fraction = 1.0;
  double cond = 0.0;
  double slepian_observed = 0.0;
  double slepian_missing = 0.0;
  /// Published reference columns, NaN where none exists.
  double reference_cond = 0.0;
  double reference_cn = 0.0;
  double radial_l2 = 0.0;
  int iterations = 0;
  std::string stop_reason;
};

/// Single-inclusion Newton (second harmonic) from the circle of equal area at
/// the phantom centroid, per arc fraction of s.conditioning.
std::vector<ConditioningRow> conditioningReport(const Scenario& s, const fs::path& out = {});

struct SweepPoint {
  double value = 0.0;
  fs::path dir;
  RunReport report;
};
/// One runScenario per sweep value in its own directory, `jobs` at a time.
std::vector<SweepPoint> runSweep(const Scenario& s, const fs::path& out, int jobs = 1);

struct AbstractStudy {
  abstract::ReferenceOptions reference;
  std::vector<double> noise_levels{1e-2, 1e-3, 1e-4};
  int hankel_max = 20;
  unsigned seed = 5;
};
json abstractReport(const AbstractStudy& study, const fs::path& out = {});

}  // namespace nltomo::harness
