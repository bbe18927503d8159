#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "nltomo/forward.hpp"

namespace nltomo::pdap {

using forward::BoundaryTrace;
using forward::DiscreteMeasure;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// Flux on the observation arc of the impedance problem with point sources:
/// F: mu -> d_nu u|_Sigma.
class FluxOperator {
 public:
  FluxOperator(const forward::DomainConfig& dom, double kappa, std::vector<int> arc_indices);

  double kappa() const { return kappa_; }
  int rows() const { return static_cast<int>(arc_.size()); }
  const std::vector<int>& arcIndices() const { return arc_; }
  double nodeWeight() const { return solver_->nodeWeight(); }
  double domainRadius() const { return solver_->radius(); }

  /// Flux on the arc of a unit source at x.
  VectorXcd column(const Point& x) const;
  MatrixXcd columns(const std::vector<Point>& xs) const;
  VectorXcd apply(const DiscreteMeasure& mu) const;

 private:
  double kappa_;
  std::vector<int> arc_;
  std::shared_ptr<const forward::BoundarySolver> solver_;
};

enum class DualSelection {
  Raw,        // argmax |xi(x)|
  Normalized  // argmax |xi(x)| / ||F delta_x||
};

struct PdapConfig {
  int grid_radii = 48;
  int grid_angles = 96;
  double grid_max_radius = 0.9;  // fraction of the domain radius
  int max_iterations = 30;
  double tolerance = 1e-8;        // relative residual target
  double noise_level = 0.0;       // > 0: stop at 1.2 * noise_level * ||g||
  double prune_threshold = 1e-3;  // relative to max |lambda|
  int refine_steps = 3;
  DualSelection selection = DualSelection::Normalized;
  /// Joint position/weight least-squares polish of the active points after
  /// every weight fit.
  bool slide = true;
  int max_support = 40;
  void validate() const;
};

/// Candidate grid: polar nodes (i+1)/n_r * r_max, 2 pi j / n_a.
std::vector<Point> candidateGrid(const PdapConfig& cfg, double domain_radius);

BoundaryTrace applyF(const DiscreteMeasure& mu, const FluxOperator& op, int harmonic = 2);

/// xi(x) = sum_s w conj(K(s, x)) res(s) for every x in the grid, with the
/// kernel matrix K given by the operator columns.
VectorXcd applyFstar(const VectorXcd& residual, const MatrixXcd& kernel, double node_weight);
VectorXcd applyFstar(const BoundaryTrace& residual, const FluxOperator& op,
                     const std::vector<Point>& grid);

struct PdapState {
  DiscreteMeasure measure;
  std::vector<double> residual_history;  // relative residual after each weight fit
  VectorXcd dual;                        // dual field on the grid at the last iteration
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;
  std::string stop_reason;
};

PdapState pdapRun(const BoundaryTrace& g, const PdapConfig& cfg, const FluxOperator& op);
PdapState pdapRun(const BoundaryTrace& g, const PdapConfig& cfg,
                  const forward::DomainConfig& dom);

}  // namespace nltomo::pdap
