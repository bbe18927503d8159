#include "nltomo/shape_newton.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

namespace nltomo::shape {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using forward::BoundaryTrace;
using forward::FreeTraces;
using forward::HarmonicField;
using forward::TraceKind;
using specfun::kPi;

namespace {

constexpr cplx kI(0.0, 1.0);
// Boundary nodes of the trapezoid rule for the shape derivative integral.
constexpr int kShapeDerivativeNodes = 256;

double basis(int k_packed, int order, double t) {
  if (k_packed == 0) return 1.0;
  if (k_packed <= order) return std::cos(k_packed * t);
  return std::sin((k_packed - order) * t);
}

double conditionNumber(const MatrixXd& J) {
  if (J.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(J);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

std::string stageName(const std::vector<int>& harmonics) {
  std::string out;
  for (int m : harmonics) out += (out.empty() ? "m" : "+m") + std::to_string(m);
  return out;
}

using ResidualFn = std::function<VectorXd(const ShapeUnknowns&)>;
using JacobianFn = std::function<MatrixXd(const ShapeUnknowns&)>;
using AdmissibleFn = std::function<bool(const ShapeUnknowns&)>;

StepResult dampedStep(const ResidualFn& residual, const AdmissibleFn& ok, const ShapeUnknowns& u,
                      const VectorXd& r, const MatrixXd& J, double damping, int max_halvings) {
  StepResult out;
  out.curves = u;
  out.residual = r;
  const double r0 = r.norm();
  if (r0 == 0.0) {
    out.accepted = true;
    return out;
  }
  const VectorXd delta = levenbergMarquardtDirection(J, r, damping);
  const VectorXd x = u.pack();
  double alpha = 1.0;
  for (int h = 0; h <= max_halvings; ++h, alpha *= 0.5) {
    const ShapeUnknowns trial = u.withCoefficients(x + alpha * delta);
    if (!ok(trial)) continue;
    VectorXd rt;
    try {
      rt = residual(trial);
    } catch (const Error&) {
      continue;
    }
    if (rt.allFinite() && rt.norm() < r0) {
      out.accepted = true;
      out.curves = trial;
      out.residual = std::move(rt);
      out.step_norm = alpha * delta.norm();
      out.halvings = h;
      return out;
    }
  }
  out.halvings = max_halvings;
  return out;
}

// Levenberg-Marquardt loop shared by flux and moment matching. Appends to `rep`
// and returns the final iterate.
ShapeUnknowns lmStage(const std::string& stage, const ResidualFn& residual,
                      const JacobianFn& jacobian, const AdmissibleFn& ok, ShapeUnknowns u,
                      const NewtonOptions& opts, NewtonReport& rep) {
  VectorXd r = residual(u);
  if (rep.residual_history.empty()) rep.residual_history.push_back(r.norm());
  double damping = opts.initial_damping;
  MatrixXd J;
  bool fresh = false;  // J evaluated at the current iterate
  rep.converged = false;
  rep.stop_reason = "iteration limit";
  for (int it = 1; it <= opts.max_iterations; ++it) {
    if (!fresh) {
      J = jacobian(u);
      fresh = true;
    }
    NewtonIteration rec;
    rec.stage = stage;
    rec.iteration = it;
    rec.damping = damping;
    rec.jacobian_condition = conditionNumber(J);
    ++rep.iterations;

    // Nothing left to gain: the Gauss-Newton model predicts no decrease above
    // roundoff.
    const VectorXd gn = levenbergMarquardtDirection(J, r, 0.0);
    const double predicted = r.squaredNorm() - (r + J * gn).squaredNorm();
    if (r.norm() == 0.0 || predicted <= 1e-14 * r.squaredNorm()) {
      rec.residual_norm = r.norm();
      rec.accepted = false;
      if (opts.keep_curves) rec.curves = u.curves;
      rep.history.push_back(std::move(rec));
      rep.converged = true;
      rep.stop_reason = "stationary";
      break;
    }

    const StepResult step = dampedStep(residual, ok, u, r, J, damping, opts.guard.max_halvings);
    rec.accepted = step.accepted;
    rec.halvings = step.halvings;
    if (step.accepted) {
      u = step.curves;
      r = step.residual;
      fresh = false;
      damping = std::max(damping / 3.0, 1e-12);
      rec.step_norm = step.step_norm;
      rep.residual_history.push_back(r.norm());
    } else {
      damping *= 10.0;
    }
    rec.residual_norm = r.norm();
    if (opts.keep_curves) rec.curves = u.curves;
    rep.history.push_back(std::move(rec));
    if (step.accepted && step.step_norm < opts.step_tolerance) {
      rep.converged = true;
      rep.stop_reason = "step tolerance";
      break;
    }
    if (damping > opts.max_damping) {
      rep.stop_reason = "damping limit";
      break;
    }
  }
  if (!fresh) J = jacobian(u);
  rep.final_condition = conditionNumber(J);
  return u;
}

}  // namespace

// ---------------------------------------------------------------- unknowns

ShapeUnknowns ShapeUnknowns::fromCurves(std::vector<StarCurve> curves, int order) {
  if (order < 0) throw DomainError("shape order must be nonnegative");
  for (auto& c : curves) {
    c.a.resize(order, 0.0);
    c.b.resize(order, 0.0);
  }
  return ShapeUnknowns{std::move(curves)};
}

int ShapeUnknowns::order() const { return curves.empty() ? 0 : curves.front().order(); }

Index ShapeUnknowns::size() const {
  return static_cast<Index>(curves.size()) * perObject();
}

VectorXd ShapeUnknowns::pack() const {
  VectorXd x(size());
  Index i = 0;
  for (const auto& c : curves) {
    if (c.order() != order()) throw DomainError("all curves must share one order");
    for (double v : c.coefficients()) x(i++) = v;
  }
  return x;
}

ShapeUnknowns ShapeUnknowns::withCoefficients(const VectorXd& x) const {
  if (x.size() != size()) throw DomainError("coefficient vector has the wrong length");
  ShapeUnknowns out;
  const int p = perObject();
  for (std::size_t l = 0; l < curves.size(); ++l) {
    out.curves.push_back(StarCurve::fromCoefficients(
        curves[l].center, std::span<const double>(x.data() + l * p, p)));
  }
  return out;
}

geometry::InclusionSet ShapeUnknowns::inclusionSet(int radial, int angular) const {
  geometry::InclusionSet s;
  s.objects = curves;
  s.radial_order = radial;
  s.angular_order = angular;
  return s;
}

std::string ShapeUnknowns::label(Index i) const {
  const int p = perObject();
  const int l = static_cast<int>(i / p);
  const int k = static_cast<int>(i % p);
  std::string name = k == 0 ? "a0" : k <= order() ? "a" + std::to_string(k)
                                                  : "b" + std::to_string(k - order());
  return "object " + std::to_string(l) + " " + name;
}

Schedule parseSchedule(const std::string& s) {
  if (s == "m2") return Schedule::SecondOnly;
  if (s == "sequential") return Schedule::Sequential;
  if (s == "simultaneous") return Schedule::Simultaneous;
  throw ConfigError("unknown Newton schedule '" + s + "' (m2, sequential, simultaneous)");
}

std::string scheduleName(Schedule s) {
  switch (s) {
    case Schedule::SecondOnly:
      return "m2";
    case Schedule::Sequential:
      return "sequential";
    case Schedule::Simultaneous:
      return "simultaneous";
  }
  return "?";
}

// ---------------------------------------------------------------- problem

ShapeProblem::ShapeProblem(forward::DomainConfig cfg, forward::Excitation exc,
                           std::vector<BoundaryTrace> data, int radial_order, int angular_order)
    : cascade_(cfg, std::move(exc)),
      data_(std::move(data)),
      radial_(radial_order),
      angular_(angular_order) {
  if (radial_ < 2 || angular_ < 4) throw DomainError("inclusion quadrature too coarse");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const auto& t = data_[i];
    if (t.harmonic != 2 && t.harmonic != 3) throw DomainError("data harmonic must be 2 or 3");
    for (std::size_t j = 0; j < i; ++j) {
      if (data_[j].harmonic == t.harmonic) throw DomainError("duplicate harmonic in data");
    }
    if (t.samples.size() != static_cast<Index>(t.indices.size()) || t.indices.empty()) {
      throw DomainError("trace samples and indices disagree");
    }
    for (int idx : t.indices) {
      if (idx < 0 || idx >= cfg.boundary_nodes) {
        throw DomainError("trace index outside the inversion boundary grid");
      }
    }
    if (!(t.node_weight > 0.0)) throw DomainError("trace node weight must be positive");
    const double norm = t.l2Norm();
    if (!(norm > 0.0)) throw DomainError("data trace vanishes");
    data_norm_.push_back(norm);
  }
}

bool ShapeProblem::hasHarmonic(int m) const {
  return std::any_of(data_.begin(), data_.end(), [m](const auto& t) { return t.harmonic == m; });
}

const BoundaryTrace& ShapeProblem::dataOrThrow(int m) const {
  for (const auto& t : data_) {
    if (t.harmonic == m) return t;
  }
  throw DomainError("no data for harmonic " + std::to_string(m));
}

const BoundaryTrace& ShapeProblem::data(int m) const { return dataOrThrow(m); }

Index ShapeProblem::rows(const std::vector<int>& harmonics) const {
  Index n = 0;
  for (int m : harmonics) n += 2 * static_cast<Index>(dataOrThrow(m).indices.size());
  return n;
}

VectorXd ShapeProblem::block(int m, const HarmonicField& h, bool subtract_data) const {
  std::size_t which = 0;
  while (data_[which].harmonic != m) ++which;
  const BoundaryTrace& t = data_[which];
  const VectorXcd& full = t.kind == TraceKind::Neumann ? h.neumann : h.dirichlet;
  const Index n = static_cast<Index>(t.indices.size());
  const double scale = std::sqrt(t.node_weight) / data_norm_[which];
  VectorXd out(2 * n);
  for (Index i = 0; i < n; ++i) {
    cplx v = full(t.indices[i]);
    if (subtract_data) v -= t.samples(i);
    out(i) = scale * v.real();
    out(n + i) = scale * v.imag();
  }
  return out;
}

FreeTraces ShapeProblem::objectFreeTraces(const StarCurve& c) const {
  return cascade_.secondHarmonicFreeTraces(c, radial_, angular_);
}

VectorXd ShapeProblem::residual(const ShapeUnknowns& u,
                                const std::vector<int>& harmonics) const {
  VectorXd out(rows(harmonics));
  if (harmonics.empty()) return out;
  const bool third = std::find(harmonics.begin(), harmonics.end(), 3) != harmonics.end();
  std::vector<HarmonicField> fields;
  if (third) {
    fields = cascade_.run(u.inclusionSet(radial_, angular_), 3);
  } else {
    for (const auto& c : u.curves) {
      c.validate();
      if (!(c.center.norm() + c.maxRadius() < config().domain_radius)) {
        throw DomainError("inclusion not strictly inside the domain");
      }
    }
    const int n = config().boundary_nodes;
    FreeTraces free{VectorXcd::Zero(n), VectorXcd::Zero(n)};
    for (const auto& c : u.curves) {
      const FreeTraces t = objectFreeTraces(c);
      free.dirichlet += t.dirichlet;
      free.flux += t.flux;
    }
    fields.resize(2);
    fields[1] = cascade_.complete(2, free);
  }
  Index row = 0;
  for (int m : harmonics) {
    const VectorXd b = block(m, fields[m - 1], true);
    out.segment(row, b.size()) = b;
    row += b.size();
  }
  return out;
}

MatrixXd ShapeProblem::secondHarmonicJacobianFd(const ShapeUnknowns& u) const {
  const int n = config().boundary_nodes;
  std::vector<FreeTraces> parts;
  FreeTraces total{VectorXcd::Zero(n), VectorXcd::Zero(n)};
  for (const auto& c : u.curves) {
    parts.push_back(objectFreeTraces(c));
    total.dirichlet += parts.back().dirichlet;
    total.flux += parts.back().flux;
  }
  const int p = u.perObject();
  MatrixXd J(rows({2}), u.size());
  for (std::size_t l = 0; l < u.curves.size(); ++l) {
    std::vector<double> coeffs = u.curves[l].coefficients();
    const double h = 1e-6 * std::max(1.0, std::fabs(coeffs[0]));
    for (int k = 0; k < p; ++k) {
      VectorXd col = VectorXd::Zero(J.rows());
      for (int sgn : {1, -1}) {
        std::vector<double> c = coeffs;
        c[k] += sgn * h;
        const FreeTraces t = objectFreeTraces(StarCurve::fromCoefficients(u.curves[l].center, c));
        FreeTraces free{total.dirichlet - parts[l].dirichlet + t.dirichlet,
                        total.flux - parts[l].flux + t.flux};
        col += sgn * block(2, cascade_.complete(2, free), false);
      }
      J.col(static_cast<Index>(l) * p + k) = col / (2.0 * h);
    }
  }
  return J;
}

// d/dr of int_D kappa^2 f Phi(x, y) dy along r -> r + eps dr is the boundary
// integral of kappa^2 f(q) Phi(x, q) r(t) dr(t) dt, pushed through the linear
// impedance completion.
MatrixXd ShapeProblem::secondHarmonicJacobianAnalytic(const ShapeUnknowns& u) const {
  const double k2 = config().kappa(2);
  const auto& bs = cascade_.solver(2);
  const int n = bs.size();
  const int nt = kShapeDerivativeNodes;
  const double dt = 2.0 * kPi / nt;
  const int p = u.perObject();
  const int order = u.order();
  MatrixXd J(rows({2}), u.size());
  for (std::size_t l = 0; l < u.curves.size(); ++l) {
    const StarCurve& c = u.curves[l];
    // Free traces of a unit point source at each boundary node of the curve.
    Eigen::MatrixXcd gd(n, nt), gf(n, nt);
    VectorXcd w(nt);
    std::vector<double> ts(nt);
    for (int j = 0; j < nt; ++j) {
      ts[j] = dt * j;
      const Point q = c.point(ts[j]);
      forward::DiscreteMeasure one;
      one.add(q, 1.0);
      const FreeTraces t = forward::freeSpaceTraces(one, k2, bs);
      gd.col(j) = t.dirichlet;
      gf.col(j) = t.flux;
      w(j) = k2 * k2 * cascade_.secondHarmonicSource(q) * c.radius(ts[j]) * dt;
    }
    for (int k = 0; k < p; ++k) {
      VectorXcd wk(nt);
      for (int j = 0; j < nt; ++j) wk(j) = w(j) * basis(k, order, ts[j]);
      const FreeTraces dfree{gd * wk, gf * wk};
      J.col(static_cast<Index>(l) * p + k) = block(2, cascade_.complete(2, dfree), false);
    }
  }
  return J;
}

// Harmonic 3 is built from per-object pieces: the second-harmonic free traces
// of each object, and the volume potential of each object's second-harmonic
// source at the third-harmonic nodes of each object. Moving object l changes
// only the pieces that involve l; the boundary correction of the second
// harmonic and the third-harmonic sources are cheap and always recomputed.
MatrixXd ShapeProblem::cascadeJacobianFd(const ShapeUnknowns& u,
                                         const std::vector<int>& harmonics) const {
  const auto& cfg = config();
  const double k2 = cfg.kappa(2), k3 = cfg.kappa(3);
  const int n = cfg.boundary_nodes;
  const std::size_t L = u.curves.size();
  auto density2 = [this, k2](const Point& y) {
    return k2 * k2 * cascade_.secondHarmonicSource(y);
  };
  auto single = [](const StarCurve& c) {
    geometry::InclusionSet s;
    s.objects = {c};
    return s;
  };
  struct Nodes {
    std::vector<geometry::QuadNode> rule;
    std::vector<Point> pts;
  };
  auto nodesOf = [&](const StarCurve& c) {
    Nodes out;
    out.rule = geometry::interiorQuadrature(c, cfg.target_radial, cfg.target_angular);
    for (const auto& q : out.rule) out.pts.push_back(q.node);
    return out;
  };

  std::vector<FreeTraces> f2(L);
  std::vector<Nodes> nodes(L);
  // pot[k][j]: potential of object k's source at the nodes of object j.
  std::vector<std::vector<VectorXcd>> pot(L, std::vector<VectorXcd>(L));
  for (std::size_t l = 0; l < L; ++l) {
    f2[l] = objectFreeTraces(u.curves[l]);
    nodes[l] = nodesOf(u.curves[l]);
  }
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t j = 0; j < L; ++j) {
      pot[k][j] = forward::volumePotential(single(u.curves[k]), density2, k2, nodes[j].pts, cfg);
    }
  }

  // Residual with object l replaced by c.
  auto perturbed = [&](std::size_t l, const StarCurve& c) {
    const FreeTraces fl = objectFreeTraces(c);
    FreeTraces free2{VectorXcd::Zero(n), VectorXcd::Zero(n)};
    for (std::size_t k = 0; k < L; ++k) {
      free2.dirichlet += k == l ? fl.dirichlet : f2[k].dirichlet;
      free2.flux += k == l ? fl.flux : f2[k].flux;
    }
    const HarmonicField h2 = cascade_.complete(2, free2, true);
    const Nodes nl = nodesOf(c);
    const auto sl = single(c);
    FreeTraces free3{VectorXcd::Zero(n), VectorXcd::Zero(n)};
    for (std::size_t j = 0; j < L; ++j) {
      const Nodes& nj = j == l ? nl : nodes[j];
      VectorXcd p2 = cascade_.solver(2).interiorValues(h2.density, nj.pts);
      for (std::size_t k = 0; k < L; ++k) {
        if (k == l || j == l) {
          p2 += forward::volumePotential(k == l ? sl : single(u.curves[k]), density2, k2, nj.pts,
                                         cfg);
        } else {
          p2 += pot[k][j];
        }
      }
      forward::DiscreteMeasure mu;
      for (std::size_t q = 0; q < nj.pts.size(); ++q) {
        const cplx f3 = 0.25 * cfg.eta0 * 2.0 * cascade_.incident(nj.pts[q]) * p2(q);
        mu.add(nj.pts[q], nj.rule[q].weight * k3 * k3 * f3);
      }
      const FreeTraces t = forward::freeSpaceTraces(mu, k3, cascade_.solver(3));
      free3.dirichlet += t.dirichlet;
      free3.flux += t.flux;
    }
    std::vector<HarmonicField> fields{HarmonicField{}, h2, cascade_.complete(3, free3)};
    VectorXd out(rows(harmonics));
    Index row = 0;
    for (int m : harmonics) {
      const VectorXd b = block(m, fields[m - 1], true);
      out.segment(row, b.size()) = b;
      row += b.size();
    }
    return out;
  };

  const int p = u.perObject();
  MatrixXd J(rows(harmonics), u.size());
  for (std::size_t l = 0; l < L; ++l) {
    const std::vector<double> coeffs = u.curves[l].coefficients();
    const double h = 1e-6 * std::max(1.0, std::fabs(coeffs[0]));
    for (int k = 0; k < p; ++k) {
      std::vector<double> cp = coeffs, cm = coeffs;
      cp[k] += h;
      cm[k] -= h;
      const StarCurve up = StarCurve::fromCoefficients(u.curves[l].center, cp);
      const StarCurve dn = StarCurve::fromCoefficients(u.curves[l].center, cm);
      up.validate();
      dn.validate();
      J.col(static_cast<Index>(l) * p + k) = (perturbed(l, up) - perturbed(l, dn)) / (2.0 * h);
    }
  }
  return J;
}

MatrixXd ShapeProblem::jacobian(const ShapeUnknowns& u, const std::vector<int>& harmonics,
                                JacobianMode mode) const {
  MatrixXd J;
  const bool only_second = harmonics.size() == 1 && harmonics[0] == 2;
  if (harmonics.empty()) {
    J.resize(0, u.size());
  } else if (only_second) {
    J = mode == JacobianMode::Analytic ? secondHarmonicJacobianAnalytic(u)
                                       : secondHarmonicJacobianFd(u);
  } else {
    if (mode == JacobianMode::Analytic) {
      throw DomainError("analytic Jacobian is only available for the second harmonic");
    }
    J = cascadeJacobianFd(u, harmonics);
  }
  for (Index i = 0; i < J.cols(); ++i) {
    if (!J.col(i).allFinite()) {
      throw SolverError("non-finite Jacobian column for " + u.label(i));
    }
  }
  return J;
}

// ---------------------------------------------------------------- steps

VectorXd levenbergMarquardtDirection(const MatrixXd& J, const VectorXd& r, double damping) {
  if (J.rows() != r.size()) throw DomainError("Jacobian and residual sizes differ");
  if (!(damping >= 0.0)) throw DomainError("damping must be nonnegative");
  MatrixXd A = J.transpose() * J;
  const VectorXd g = -J.transpose() * r;
  if (A.size() == 0) return VectorXd::Zero(J.cols());
  const double floor = 1e-14 * std::max(A.diagonal().maxCoeff(), 1e-300);
  for (Index i = 0; i < A.rows(); ++i) A(i, i) += damping * std::max(A(i, i), floor);
  if (damping == 0.0) {
    // Minimum-norm Gauss-Newton direction, robust to rank deficiency.
    return J.completeOrthogonalDecomposition().solve(-r);
  }
  return A.ldlt().solve(g);
}

bool admissible(const ShapeUnknowns& u, double domain_radius, const StepGuard& g) {
  for (const auto& c : u.curves) {
    if (!(c.minRadius() > g.min_radius)) return false;
    if (!(c.center.norm() + c.maxRadius() < domain_radius - g.domain_margin)) return false;
  }
  return true;
}

StepResult gaussNewtonStep(const ShapeProblem& p, const ShapeUnknowns& u, const VectorXd& residual,
                           const MatrixXd& J, double damping, const std::vector<int>& harmonics,
                           const StepGuard& guard) {
  const double R = p.config().domain_radius;
  return dampedStep([&](const ShapeUnknowns& v) { return p.residual(v, harmonics); },
                    [&](const ShapeUnknowns& v) { return admissible(v, R, guard); }, u, residual,
                    J, damping, guard.max_halvings);
}

// ---------------------------------------------------------------- runs

ShapeErrors compareShapes(const std::vector<StarCurve>& phantom,
                          const std::vector<StarCurve>& reconstruction) {
  ShapeErrors e;
  std::vector<Point> rc;
  for (const auto& c : reconstruction) rc.push_back(geometry::areaCentroid(c).centroid);
  std::vector<bool> used(reconstruction.size(), false);
  for (const auto& ph : phantom) {
    const auto ac = geometry::areaCentroid(ph);
    int best = -1;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rc.size(); ++j) {
      const double d = (rc[j] - ac.centroid).norm();
      if (!used[j] && d < dist) {
        dist = d;
        best = static_cast<int>(j);
      }
    }
    e.match.push_back(best);
    if (best < 0) {
      e.radial_l2.push_back(std::numeric_limits<double>::quiet_NaN());
      e.sym_diff.push_back(std::numeric_limits<double>::quiet_NaN());
      e.sym_diff_relative.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    used[best] = true;
    e.radial_l2.push_back(geometry::radialL2Error(ph, reconstruction[best]));
    const double sd = geometry::symmetricDifferenceArea(ph, reconstruction[best]);
    e.sym_diff.push_back(sd);
    e.sym_diff_relative.push_back(sd / ac.area);
  }
  return e;
}

NewtonReport runNewton(const ShapeProblem& p, const ShapeUnknowns& start, Schedule schedule,
                       const NewtonOptions& opts, const std::vector<StarCurve>& phantom) {
  if (opts.max_iterations < 1) throw DomainError("max_iterations must be positive");
  NewtonReport rep;
  rep.schedule = scheduleName(schedule);
  rep.start_curves = start.curves;
  const double R = p.config().domain_radius;
  auto ok = [&](const ShapeUnknowns& v) { return admissible(v, R, opts.guard); };
  auto stage = [&](const std::vector<int>& hs, const ShapeUnknowns& u0) {
    const JacobianMode mode =
        hs.size() == 1 && hs[0] == 2 ? opts.mode : JacobianMode::FiniteDifference;
    return lmStage(
        stageName(hs), [&](const ShapeUnknowns& v) { return p.residual(v, hs); },
        [&](const ShapeUnknowns& v) { return p.jacobian(v, hs, mode); }, ok, u0, opts, rep);
  };
  ShapeUnknowns u = start;
  try {
    switch (schedule) {
      case Schedule::SecondOnly:
        u = stage({2}, u);
        break;
      case Schedule::Sequential:
        u = stage({2}, u);
        // The residual of the second stage is measured on other data, so its
        // history restarts.
        rep.residual_history.clear();
        u = stage({3}, u);
        break;
      case Schedule::Simultaneous:
        u = stage({2, 3}, u);
        break;
    }
  } catch (const Error& e) {
    rep.diverged = true;
    rep.converged = false;
    rep.stop_reason = std::string("aborted: ") + e.what();
  }
  rep.final_curves = u.curves;
  if (!phantom.empty()) {
    rep.start_errors = compareShapes(phantom, start.curves);
    rep.final_errors = compareShapes(phantom, u.curves);
  }
  return rep;
}

VectorXd momentMatchResidual(const std::vector<StarCurve>& curves, const BoundaryTrace& trace,
                             int nw, cplx f, double kappa, int radial_order, int angular_order) {
  if (nw < 0) throw DomainError("moment family size must be nonnegative");
  if (trace.kind != TraceKind::Neumann) throw DomainError("moment matching needs flux data");
  if (trace.arc_fraction < 1.0) throw DomainError("moment matching needs full boundary data");
  if (!(kappa > 0.0)) throw DomainError("wave number must be positive");
  const double R = trace.domain_radius;
  const auto jR = specfun::besselJSequence(nw + 1, kappa * R);
  const int nm = 2 * nw + 1;
  Eigen::VectorXcd mom = Eigen::VectorXcd::Zero(nm);
  for (Index j = 0; j < trace.samples.size(); ++j) {
    const double th = trace.angles[j];
    for (int n = -nw; n <= nw; ++n) {
      const int a = std::abs(n);
      const double jn = jR[a];
      const double dj = a == 0 ? -jR[1] : 0.5 * (jR[a - 1] - jR[a + 1]);
      // w_{-n} = J_n e^{-i n theta} with J_|n|, so the sign of n only enters the phase.
      const cplx e = std::polar(1.0, n * th);
      mom(n + nw) += trace.samples(j) * (kappa * dj + kI * kappa * jn) * e;
    }
  }
  mom *= trace.node_weight;
  for (std::size_t l = 0; l < curves.size(); ++l) {
    for (const auto& q : geometry::interiorQuadrature(curves[l], radial_order, angular_order)) {
      const double rho = q.node.norm();
      const double th = std::atan2(q.node.y(), q.node.x());
      const auto jq = specfun::besselJSequence(nw, kappa * rho);
      for (int n = -nw; n <= nw; ++n) {
        mom(n + nw) -= kI * kappa * kappa * kappa * f * q.weight * jq[std::abs(n)] *
                       std::polar(1.0, n * th);
      }
    }
  }
  VectorXd out(2 * nm);
  out.head(nm) = mom.real();
  out.tail(nm) = mom.imag();
  return out;
}

NewtonReport runMomentNewton(const std::vector<StarCurve>& start, const BoundaryTrace& trace,
                             int nw, cplx f, double kappa, const NewtonOptions& opts,
                             const std::vector<StarCurve>& phantom) {
  NewtonReport rep;
  rep.schedule = "moments";
  rep.start_curves = start;
  const ShapeUnknowns u0 = ShapeUnknowns::fromCurves(start, start.empty() ? 0 : start[0].order());
  const double R = trace.domain_radius;
  auto residual = [&](const ShapeUnknowns& v) {
    return momentMatchResidual(v.curves, trace, nw, f, kappa);
  };
  auto jacobian = [&](const ShapeUnknowns& v) {
    const VectorXd x = v.pack();
    const int p = v.perObject();
    MatrixXd J(2 * (2 * nw + 1), x.size());
    for (Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::fabs(x((i / p) * p)));
      VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      J.col(i) = (residual(v.withCoefficients(xp)) - residual(v.withCoefficients(xm))) / (2 * h);
    }
    return J;
  };
  auto ok = [&](const ShapeUnknowns& v) { return admissible(v, R, opts.guard); };
  ShapeUnknowns u = u0;
  try {
    u = lmStage("moments", residual, jacobian, ok, u0, opts, rep);
  } catch (const Error& e) {
    rep.diverged = true;
    rep.stop_reason = std::string("aborted: ") + e.what();
  }
  rep.final_curves = u.curves;
  if (!phantom.empty()) {
    rep.start_errors = compareShapes(phantom, start);
    rep.final_errors = compareShapes(phantom, u.curves);
  }
  return rep;
}

}  // namespace nltomo::shape
