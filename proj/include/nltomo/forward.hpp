#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nltomo/geometry.hpp"

namespace nltomo::forward {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// Weighted point sources sum_k lambda_k delta_{S_k}.
struct DiscreteMeasure {
  std::vector<Point> points;
  std::vector<cplx> weights;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void add(const Point& p, cplx w) {
    points.push_back(p);
    weights.push_back(w);
  }
};

/// Phi(x, y) = -(i/4) H_0(kappa |x - y|), so that (Delta + kappa^2) Phi(., y) = delta_y.
cplx fundamentalSolution(double kappa, const Point& x, const Point& y);

struct DomainConfig {
  double domain_radius = 1.0;
  double omega = 5.0;
  double sound_speed = 1.0;
  double eta0 = 1.0;
  double gamma = 0.0;
  int boundary_nodes = 256;
  // Nodes inside each object carrying the second harmonic for the third one.
  int target_radial = 12;
  int target_angular = 32;
  // Rule used when a target sits in a different object.
  int cross_radial = 16;
  int cross_angular = 48;
  // Target-centred polar rule used when a target sits in the source object.
  int singular_rays = 48;
  int singular_radial = 16;
  // Trigonometric upsampling of boundary densities for interior evaluation.
  int upsample = 2;

  double kappa1() const { return omega / sound_speed; }
  double kappa(int m) const { return m * kappa1(); }
  void validate() const;
  /// All quadrature orders multiplied by `factor`.
  DomainConfig refined(int factor) const;
};

struct FreeTraces {
  VectorXcd dirichlet;
  VectorXcd flux;
};

/// Nystrom solver for the interior impedance problem on the disc of radius R:
/// u = S phi with (1/2 I + K' + i kappa S) phi = g, S the single layer with
/// kernel (i/4) H_0, log singularities handled by trigonometric product
/// quadrature. Densities are stored as psi = R phi.
class BoundarySolver {
 public:
  BoundarySolver(double kappa, double radius, int nodes, int upsample = 2);

  /// Shared instance per (kappa, radius, nodes, upsample).
  static std::shared_ptr<const BoundarySolver> cached(double kappa, double radius, int nodes,
                                                      int upsample = 2);

  double kappa() const { return kappa_; }
  double radius() const { return radius_; }
  int size() const { return n_; }
  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<double>& angles() const { return angles_; }
  Point normal(int i) const { return nodes_[i] / radius_; }
  /// Trapezoid arc-length weight of each boundary node.
  double nodeWeight() const;
  double conditionNumber() const { return cond_; }

  VectorXcd density(const VectorXcd& g) const;
  VectorXcd boundaryValues(const VectorXcd& psi) const;
  VectorXcd interiorValues(const VectorXcd& psi, const std::vector<Point>& x) const;
  /// Dirichlet trace of the total field u_free + u_d from the free-field traces.
  VectorXcd totalDirichlet(const FreeTraces& free) const;
  /// Linear map from impedance data g to the boundary values of u_d.
  const MatrixXcd& impedanceToDirichlet() const { return impedance_to_dirichlet_; }

 private:
  double kappa_, radius_;
  int n_, upsample_;
  std::vector<Point> nodes_;
  std::vector<double> angles_;
  std::vector<Point> fine_nodes_;
  MatrixXcd single_layer_;
  MatrixXcd impedance_to_dirichlet_;
  Eigen::MatrixXd upsampler_;
  Eigen::PartialPivLU<MatrixXcd> lu_;
  double cond_ = 0.0;
};

FreeTraces freeSpaceTraces(const DiscreteMeasure& mu, double kappa, const BoundarySolver& bs);

/// u(x) = sum_k lambda_k Phi(x, S_k). Throws SingularityError at a source point.
VectorXcd freeSpaceField(const DiscreteMeasure& mu, double kappa, const std::vector<Point>& x);

/// Point-source surrogate of the volume source kappa^2 f chi_D on a quadrature rule.
DiscreteMeasure volumeSource(const std::vector<geometry::QuadNode>& rule,
                             const std::function<cplx(const Point&)>& f, double kappa);

/// Volume potential int_D density(y) Phi(x, y) dy at arbitrary targets. Targets
/// inside an object use a polar rule centred at the target for that object.
VectorXcd volumePotential(const geometry::InclusionSet& s,
                          const std::function<cplx(const Point&)>& density, double kappa,
                          const std::vector<Point>& targets, const DomainConfig& cfg);

struct HarmonicField {
  int harmonic = 1;
  double kappa = 0.0;
  std::vector<Point> nodes;
  VectorXcd values;
  std::vector<double> boundary_angles;
  VectorXcd dirichlet;
  VectorXcd neumann;
  VectorXcd density;  // boundary density of the correction, empty if not needed
};

/// Correction u^d with (Delta + kappa^2) u^d = 0 and d_nu u^d + i kappa u^d = g,
/// g = -d_nu u_free - i kappa u_free.
HarmonicField impedanceCorrection(const FreeTraces& free, double kappa, const DomainConfig& cfg,
                                  const std::vector<Point>& eval = {});

HarmonicField solveSourceProblem(const DiscreteMeasure& mu, double kappa,
                                 const DomainConfig& cfg, const std::vector<Point>& eval = {});

/// Source kappa^2 f chi_D with D the inclusion set.
HarmonicField solveSourceProblem(const geometry::InclusionSet& s,
                                 const std::function<cplx(const Point&)>& f, double kappa,
                                 const DomainConfig& cfg, const std::vector<Point>& eval = {});

struct Excitation {
  enum class Kind { PlaneWave, Sources };
  Kind kind = Kind::PlaneWave;
  Point direction = Point(1.0, 0.0);
  cplx amplitude = 1.0;
  /// Point sources driving the fundamental harmonic when kind == Sources.
  DiscreteMeasure sources;
};

/// Sequential solves of the harmonic system with sources restricted to D:
/// harmonic m has wave number m kappa1 and source (m kappa1)^2 f_m chi_D with
/// f_2 = (eta0/4) p1^2, f_3 = (eta0/4) 2 p1 p2.
class Cascade {
 public:
  Cascade(DomainConfig cfg, Excitation exc);

  const DomainConfig& config() const { return cfg_; }
  const BoundarySolver& solver(int m) const;

  cplx incident(const Point& y) const;
  cplx secondHarmonicSource(const Point& y) const;  // f_2

  /// Free-space traces of the second harmonic generated by one object.
  FreeTraces secondHarmonicFreeTraces(const geometry::StarCurve& c, int radial,
                                      int angular) const;
  /// Boundary traces of the full field from free traces (impedance corrected).
  HarmonicField complete(int m, const FreeTraces& free, bool keep_density = false) const;
  /// Second harmonic at targets (inside or outside D) given its boundary density.
  VectorXcd secondHarmonicAt(const geometry::InclusionSet& s, const VectorXcd& psi2,
                             const std::vector<Point>& targets) const;
  /// Free traces of the third harmonic; psi2 is the second-harmonic density.
  FreeTraces thirdHarmonicFreeTraces(const geometry::InclusionSet& s,
                                     const VectorXcd& psi2) const;

  /// Fields for m = 1..M (M in {1, 2, 3}); interior values at `eval` if given.
  std::vector<HarmonicField> run(const geometry::InclusionSet& s, int M,
                                 const std::vector<Point>& eval = {}) const;

 private:
  DomainConfig cfg_;
  Excitation exc_;
  HarmonicField fundamental_;  // only for Kind::Sources
  std::vector<std::shared_ptr<const BoundarySolver>> solvers_;
};

std::vector<HarmonicField> harmonicCascade(const DomainConfig& cfg,
                                           const geometry::InclusionSet& incl,
                                           const Excitation& exc, int M,
                                           const std::vector<Point>& eval = {});

enum class TraceKind { Dirichlet, Neumann };

struct BoundaryTrace {
  int harmonic = 2;
  TraceKind kind = TraceKind::Neumann;
  double arc_fraction = 1.0;
  double arc_center = 0.0;
  double domain_radius = 1.0;
  double node_weight = 0.0;   // arc-length quadrature weight per sample
  std::vector<int> indices;   // positions in the full boundary grid
  std::vector<double> angles;
  VectorXcd samples;

  double l2Norm() const;
};

/// Half-open angular window [center - pi f, center + pi f) of the boundary grid.
std::vector<int> arcIndices(const std::vector<double>& angles, double arc_fraction,
                            double arc_center);

BoundaryTrace extractTrace(const HarmonicField& field, double arc_fraction, TraceKind kind,
                           double arc_center = 0.0, double domain_radius = 1.0);

/// Keeps samples whose grid index is a multiple of `factor` and re-indexes
/// them on the grid coarsened by that factor.
BoundaryTrace subsampleTrace(const BoundaryTrace& t, int factor);

/// Dirichlet <-> Neumann under the impedance relation g = -(i m kappa1 + gamma) y.
BoundaryTrace convertTrace(const BoundaryTrace& t, double kappa1, double gamma);

std::string traceKindName(TraceKind k);

}  // namespace nltomo::forward
