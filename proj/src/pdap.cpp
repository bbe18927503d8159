#include "nltomo/pdap.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

namespace nltomo::pdap {

using specfun::kPi;

namespace {
const cplx kI(0.0, 1.0);
}

FluxOperator::FluxOperator(const forward::DomainConfig& dom, double kappa,
                           std::vector<int> arc_indices)
    : kappa_(kappa), arc_(std::move(arc_indices)) {
  dom.validate();
  solver_ = forward::BoundarySolver::cached(kappa, dom.domain_radius, dom.boundary_nodes,
                                            dom.upsample);
  if (arc_.empty()) throw DomainError("observation arc has no nodes");
  for (int i : arc_) {
    if (i < 0 || i >= solver_->size()) throw DomainError("arc index outside boundary grid");
  }
}

MatrixXcd FluxOperator::columns(const std::vector<Point>& xs) const {
  const int n = solver_->size();
  const int m = static_cast<int>(xs.size());
  MatrixXcd dir(n, m), g(n, m);
  for (int k = 0; k < m; ++k) {
    if (!(xs[k].norm() < solver_->radius())) throw DomainError("point source outside domain");
    for (int i = 0; i < n; ++i) {
      const Point d = solver_->nodes()[i] - xs[k];
      const double r = d.norm();
      const auto h = specfun::hankel01Fast(kappa_ * r);
      const cplx u = -0.25 * kI * h.h0;
      const cplx du = 0.25 * kI * kappa_ * h.h1 * (d.dot(solver_->normal(i)) / r);
      dir(i, k) = u;
      g(i, k) = -du - kI * kappa_ * u;
    }
  }
  const MatrixXcd total = dir + solver_->impedanceToDirichlet() * g;
  MatrixXcd out(arc_.size(), m);
  for (std::size_t s = 0; s < arc_.size(); ++s) out.row(s) = -kI * kappa_ * total.row(arc_[s]);
  return out;
}

VectorXcd FluxOperator::column(const Point& x) const { return columns({x}).col(0); }

VectorXcd FluxOperator::apply(const DiscreteMeasure& mu) const {
  if (mu.empty()) return VectorXcd::Zero(rows());
  const MatrixXcd k = columns(mu.points);
  return k * Eigen::Map<const VectorXcd>(mu.weights.data(), mu.weights.size());
}

void PdapConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (grid_radii < 1 || grid_angles < 3) throw ConfigError("candidate grid too small");
  if (!(grid_max_radius > 0.0 && grid_max_radius < 1.0)) {
    throw ConfigError("grid radius fraction must lie in (0, 1)");
  }
  if (prune_threshold < 0.0) throw ConfigError("prune threshold must be nonnegative");
}

std::vector<Point> candidateGrid(const PdapConfig& cfg, double domain_radius) {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(cfg.grid_radii) * cfg.grid_angles);
  const double rmax = cfg.grid_max_radius * domain_radius;
  for (int i = 0; i < cfg.grid_radii; ++i) {
    const double r = rmax * (i + 1) / cfg.grid_radii;
    for (int j = 0; j < cfg.grid_angles; ++j) {
      const double t = 2.0 * kPi * j / cfg.grid_angles;
      out.emplace_back(r * std::cos(t), r * std::sin(t));
    }
  }
  return out;
}

BoundaryTrace applyF(const DiscreteMeasure& mu, const FluxOperator& op, int harmonic) {
  BoundaryTrace t;
  t.harmonic = harmonic;
  t.kind = forward::TraceKind::Neumann;
  t.domain_radius = op.domainRadius();
  t.node_weight = op.nodeWeight();
  t.indices = op.arcIndices();
  const int n = static_cast<int>(std::lround(2.0 * kPi * op.domainRadius() / op.nodeWeight()));
  for (int i : t.indices) t.angles.push_back(2.0 * kPi * i / n);
  t.arc_fraction = static_cast<double>(t.indices.size()) / n;
  t.samples = op.apply(mu);
  return t;
}

VectorXcd applyFstar(const VectorXcd& residual, const MatrixXcd& kernel, double node_weight) {
  return node_weight * (kernel.adjoint() * residual);
}

VectorXcd applyFstar(const BoundaryTrace& residual, const FluxOperator& op,
                     const std::vector<Point>& grid) {
  if (residual.samples.size() != op.rows()) throw DomainError("residual length mismatch");
  return applyFstar(residual.samples, op.columns(grid), op.nodeWeight());
}

namespace {

struct Fit {
  VectorXcd weights;
  VectorXcd residual;  // K lambda - g
};

Fit fitWeights(const MatrixXcd& k, const VectorXcd& g) {
  Fit f;
  if (k.cols() == 0) {
    f.weights = VectorXcd();
    f.residual = -g;
    return f;
  }
  f.weights = k.colPivHouseholderQr().solve(g);
  f.residual = k * f.weights - g;
  return f;
}

// Variable-projection Levenberg-Marquardt on the point positions: the weights
// are eliminated by the linear least-squares fit at every evaluation.
void slidePoints(std::vector<Point>& pts, const FluxOperator& op, const VectorXcd& g,
                 double rmax) {
  const int n = static_cast<int>(pts.size());
  if (n == 0) return;
  auto residualOf = [&](const std::vector<Point>& p) {
    return fitWeights(op.columns(p), g).residual;
  };
  auto stack = [](const VectorXcd& r) {
    Eigen::VectorXd v(2 * r.size());
    v << r.real(), r.imag();
    return v;
  };
  Eigen::VectorXd r = stack(residualOf(pts));
  double cost = r.squaredNorm();
  double mu = 1e-3;
  for (int it = 0; it < 60; ++it) {
    Eigen::MatrixXd J(r.size(), 2 * n);
    for (int k = 0; k < n; ++k) {
      for (int c = 0; c < 2; ++c) {
        const double h = 1e-7 * op.domainRadius();
        auto plus = pts, minus = pts;
        plus[k](c) += h;
        minus[k](c) -= h;
        J.col(2 * k + c) = (stack(residualOf(plus)) - stack(residualOf(minus))) / (2.0 * h);
      }
    }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-30);
      const Eigen::VectorXd step = A.ldlt().solve(-Jtr);
      auto trial = pts;
      bool inside = true;
      for (int k = 0; k < n; ++k) {
        trial[k] += step.segment<2>(2 * k);
        inside = inside && trial[k].norm() < rmax;
      }
      if (inside && step.allFinite()) {
        const Eigen::VectorXd rt = stack(residualOf(trial));
        const double ct = rt.squaredNorm();
        if (ct < cost) {
          const double gain = cost - ct;
          pts = trial;
          r = rt;
          accepted = true;
          mu = std::max(mu / 3.0, 1e-12);
          if (gain < 1e-14 * cost || step.norm() < 1e-13) return;
          cost = ct;
          break;
        }
      }
      mu *= 10.0;
    }
    if (!accepted) return;
  }
}

}  // namespace

PdapState pdapRun(const BoundaryTrace& g, const PdapConfig& cfg, const FluxOperator& op) {
  cfg.validate();
  if (g.samples.size() != op.rows()) throw DomainError("data length does not match the arc");
  PdapState st;
  const double gnorm = g.samples.norm();
  if (gnorm == 0.0) {
    st.converged = true;
    st.stop_reason = "zero data";
    return st;
  }
  const double target =
      cfg.noise_level > 0.0 ? 1.2 * cfg.noise_level : cfg.tolerance;
  const double R = op.domainRadius();
  const double rmax = cfg.grid_max_radius * R;
  const double dr = rmax / cfg.grid_radii;
  const double dth = 2.0 * kPi / cfg.grid_angles;

  const std::vector<Point> grid = candidateGrid(cfg, R);
  const MatrixXcd kernel = op.columns(grid);
  Eigen::VectorXd colnorm(kernel.cols());
  for (Eigen::Index j = 0; j < kernel.cols(); ++j) colnorm(j) = kernel.col(j).norm();

  std::vector<Point> pts;
  VectorXcd res = -g.samples;
  double best = 1.0;
  DiscreteMeasure best_measure;

  auto score = [&](const Point& x) {
    const VectorXcd k = op.column(x);
    const double v = std::abs(k.dot(res));  // conj(k)^T res
    return cfg.selection == DualSelection::Normalized ? v / k.norm() : v;
  };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    st.iterations = it + 1;
    // (1) dual field and its maximiser
    st.dual = applyFstar(res, kernel, op.nodeWeight());
    Eigen::Index jbest = 0;
    double vbest = -1.0;
    for (Eigen::Index j = 0; j < st.dual.size(); ++j) {
      double v = std::abs(st.dual(j));
      if (cfg.selection == DualSelection::Normalized) v /= colnorm(j);
      if (v > vbest) {
        vbest = v;
        jbest = j;
      }
    }
    // golden-section refinement in radius and angle around the grid node
    double rho = grid[jbest].norm();
    double th = std::atan2(grid[jbest].y(), grid[jbest].x());
    auto at = [](double r, double t) { return Point(r * std::cos(t), r * std::sin(t)); };
    for (int step = 0; step < cfg.refine_steps; ++step) {
      for (int coord = 0; coord < 2; ++coord) {
        double a = coord == 0 ? std::max(1e-6, rho - dr) : th - dth;
        double b = coord == 0 ? std::min(rmax, rho + dr) : th + dth;
        auto f = [&](double v) { return coord == 0 ? score(at(v, th)) : score(at(rho, v)); };
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = f(c), fd = f(d);
        for (int k = 0; k < 30; ++k) {
          if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
          } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
          }
        }
        const double v = 0.5 * (a + b);
        if (f(v) > score(at(rho, th))) (coord == 0 ? rho : th) = v;
      }
    }
    const Point xnew = at(rho, th);

    // (2) support augmentation
    bool duplicate = false;
    for (const Point& p : pts) duplicate = duplicate || (p - xnew).norm() < 1e-9 * R;
    if (!duplicate) pts.push_back(xnew);

    // (3) weight fit, optional sliding, (4) pruning
    if (cfg.slide) slidePoints(pts, op, g.samples, 0.98 * R);
    Fit fit = fitWeights(op.columns(pts), g.samples);
    const double wmax = fit.weights.size() ? fit.weights.cwiseAbs().maxCoeff() : 0.0;
    std::vector<Point> kept;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (std::abs(fit.weights(k)) >= cfg.prune_threshold * wmax) kept.push_back(pts[k]);
    }
    if (kept.size() != pts.size()) {
      pts = kept;
      fit = fitWeights(op.columns(pts), g.samples);
    }
    res = fit.residual;
    const double rel = res.norm() / gnorm;
    const double prev = st.residual_history.empty() ? 1.0 : st.residual_history.back();
    st.residual_history.push_back(rel);
    if (rel < best) {
      best = rel;
      best_measure = DiscreteMeasure{};
      for (std::size_t k = 0; k < pts.size(); ++k) best_measure.add(pts[k], fit.weights(k));
    }
    if (rel <= target) {
      st.converged = true;
      st.stop_reason = "residual below tolerance";
      break;
    }
    if (!(rel < prev)) {
      st.stagnated = true;
      st.stop_reason = "no residual decrease";
      break;
    }
    if (static_cast<int>(pts.size()) >= cfg.max_support) {
      st.stop_reason = "support limit";
      break;
    }
  }
  if (st.stop_reason.empty()) st.stop_reason = "iteration limit";
  st.measure = best_measure;
  return st;
}

PdapState pdapRun(const BoundaryTrace& g, const PdapConfig& cfg,
                  const forward::DomainConfig& dom) {
  const FluxOperator op(dom, dom.kappa(g.harmonic), g.indices);
  return pdapRun(g, cfg, op);
}

}  // namespace nltomo::pdap
