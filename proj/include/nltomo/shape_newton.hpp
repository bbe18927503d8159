#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "nltomo/forward.hpp"
#include "nltomo/geometry.hpp"

namespace nltomo::shape {

using geometry::StarCurve;

/// Radial coefficients of all objects with centres frozen. Packing is
/// object-major, [a0, a1..aK, b1..bK] per object.
struct ShapeUnknowns {
  std::vector<StarCurve> curves;

  /// Copies the curves, padding or truncating every one to order K.
  static ShapeUnknowns fromCurves(std::vector<StarCurve> curves, int order);

  int order() const;
  int perObject() const { return 1 + 2 * order(); }
  Eigen::Index size() const;
  Eigen::VectorXd pack() const;
  ShapeUnknowns withCoefficients(const Eigen::VectorXd& x) const;
  geometry::InclusionSet inclusionSet(int radial, int angular) const;
  /// "object 1 b3" style label of a packed index.
  std::string label(Eigen::Index i) const;
};

enum class Schedule { SecondOnly, Sequential, Simultaneous };
Schedule parseSchedule(const std::string& s);
std::string scheduleName(Schedule s);

enum class JacobianMode { FiniteDifference, Analytic };

/// Flux (or Dirichlet) data for a set of harmonics together with the forward
/// model used to predict them. Each harmonic block of the residual is
/// weighted by sqrt(node weight) and divided by the L2(Sigma) norm of its
/// data, so residual norms are relative misfits.
class ShapeProblem {
 public:
  ShapeProblem(forward::DomainConfig cfg, forward::Excitation exc,
               std::vector<forward::BoundaryTrace> data, int radial_order = 32,
               int angular_order = 64);

  const forward::DomainConfig& config() const { return cascade_.config(); }
  const forward::Cascade& cascade() const { return cascade_; }
  bool hasHarmonic(int m) const;
  const forward::BoundaryTrace& data(int m) const;
  /// Number of residual rows for the harmonic set.
  Eigen::Index rows(const std::vector<int>& harmonics) const;

  /// Stacked [Re; Im] of the weighted mismatch, harmonic blocks in the order given.
  Eigen::VectorXd residual(const ShapeUnknowns& u, const std::vector<int>& harmonics) const;

  /// Central differences with step 1e-6 max(1, |a0|); the analytic mode is only
  /// available for the second harmonic alone.
  Eigen::MatrixXd jacobian(const ShapeUnknowns& u, const std::vector<int>& harmonics,
                           JacobianMode mode = JacobianMode::FiniteDifference) const;

 private:
  const forward::BoundaryTrace& dataOrThrow(int m) const;
  /// Weighted [Re; Im] block of harmonic m; the data is subtracted unless the
  /// field is a linearised perturbation.
  Eigen::VectorXd block(int m, const forward::HarmonicField& h, bool subtract_data) const;
  forward::FreeTraces objectFreeTraces(const StarCurve& c) const;
  Eigen::MatrixXd secondHarmonicJacobianFd(const ShapeUnknowns& u) const;
  Eigen::MatrixXd secondHarmonicJacobianAnalytic(const ShapeUnknowns& u) const;
  /// Central differences of the full cascade, reusing every per-object
  /// contribution that a perturbation of one object leaves unchanged.
  Eigen::MatrixXd cascadeJacobianFd(const ShapeUnknowns& u,
                                    const std::vector<int>& harmonics) const;

  forward::Cascade cascade_;
  std::vector<forward::BoundaryTrace> data_;
  std::vector<double> data_norm_;
  int radial_, angular_;
};

/// (J^T J + damping diag(J^T J)) delta = -J^T r.
Eigen::VectorXd levenbergMarquardtDirection(const Eigen::MatrixXd& J, const Eigen::VectorXd& r,
                                            double damping);

struct StepGuard {
  double min_radius = 1e-3;
  double domain_margin = 1e-3;
  int max_halvings = 20;
};

/// True if every curve keeps r(t) > min_radius and stays inside the domain.
bool admissible(const ShapeUnknowns& u, double domain_radius, const StepGuard& g);

struct StepResult {
  bool accepted = false;
  ShapeUnknowns curves;
  Eigen::VectorXd residual;
  double step_norm = 0.0;
  int halvings = 0;
};

/// One damped step with backtracking on the residual norm. A rejected step
/// returns the input curves unchanged.
StepResult gaussNewtonStep(const ShapeProblem& p, const ShapeUnknowns& u,
                           const Eigen::VectorXd& residual, const Eigen::MatrixXd& J,
                           double damping, const std::vector<int>& harmonics,
                           const StepGuard& guard = {});

struct NewtonOptions {
  int max_iterations = 30;
  double step_tolerance = 1e-8;
  double initial_damping = 1e-3;
  double max_damping = 1e10;
  JacobianMode mode = JacobianMode::FiniteDifference;
  StepGuard guard;
  bool keep_curves = true;  // store curves of every iteration in the report
};

struct NewtonIteration {
  std::string stage;  // "m2", "m3" or "m2+m3"
  int iteration = 0;
  double residual_norm = 0.0;
  double step_norm = 0.0;
  double damping = 0.0;
  double jacobian_condition = 0.0;
  int halvings = 0;
  bool accepted = false;
  std::vector<StarCurve> curves;
};

struct ShapeErrors {
  std::vector<int> match;          // reconstructed index per phantom, -1 if missed
  std::vector<double> radial_l2;   // relative, rotation aligned
  std::vector<double> sym_diff;    // absolute area
  std::vector<double> sym_diff_relative;  // divided by phantom area
};

struct NewtonReport {
  std::string schedule;
  std::vector<StarCurve> start_curves;
  std::vector<StarCurve> final_curves;
  std::vector<NewtonIteration> history;
  std::vector<double> residual_history;  // start value plus one per accepted step
  double final_condition = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  std::string stop_reason;
  std::optional<ShapeErrors> start_errors;
  std::optional<ShapeErrors> final_errors;
};

/// Pairs each phantom with the nearest unused reconstruction by centroid.
ShapeErrors compareShapes(const std::vector<StarCurve>& phantom,
                          const std::vector<StarCurve>& reconstruction);

NewtonReport runNewton(const ShapeProblem& p, const ShapeUnknowns& start, Schedule schedule,
                       const NewtonOptions& opts = {},
                       const std::vector<StarCurve>& phantom = {});

/// Flux moments against circular waves w_n = J_|n|(kappa rho) e^{i n theta},
/// n = -nw..nw, minus the constant-source prediction i kappa^3 f int_D w_n.
/// `trace` must cover the full boundary. Rows are [Re; Im] over n.
Eigen::VectorXd momentMatchResidual(const std::vector<StarCurve>& curves,
                                    const forward::BoundaryTrace& trace, int nw, cplx f,
                                    double kappa, int radial_order = 32,
                                    int angular_order = 64);

/// Least-squares moment matching for constant background: Levenberg-Marquardt
/// on the radial coefficients with finite-difference derivatives.
NewtonReport runMomentNewton(const std::vector<StarCurve>& start,
                             const forward::BoundaryTrace& trace, int nw, cplx f,
                             double kappa, const NewtonOptions& opts = {},
                             const std::vector<StarCurve>& phantom = {});

}  // namespace nltomo::shape
