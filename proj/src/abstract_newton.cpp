#include "nltomo/abstract_newton.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nltomo/error.hpp"

namespace nltomo::abstract {

namespace {

constexpr cplx I{0.0, 1.0};

int obsCount(const SpectralSystem& s) { return static_cast<int>(s.obs_points.size()); }

MatrixXd basisAtNodes(const SpectralSystem& s) {
  const int nq = s.collocationPoints();
  MatrixXd phi(nq, s.modes);
  for (int q = 0; q < nq; ++q) {
    const double x = (q + 0.5) / nq;
    for (int j = 0; j < s.modes; ++j) phi(q, j) = SpectralSystem::basis(j, x);
  }
  return phi;
}

// Values of every harmonic at the collocation nodes, one column per harmonic.
MatrixXcd nodeValues(const MatrixXd& phi, const std::vector<VectorXcd>& p) {
  MatrixXcd v(phi.rows(), static_cast<Eigen::Index>(p.size()));
  for (size_t m = 0; m < p.size(); ++m) v.col(static_cast<Eigen::Index>(m)) = phi * p[m];
  return v;
}

std::vector<cplx> rowTuple(const MatrixXcd& v, Eigen::Index q) {
  std::vector<cplx> c(static_cast<size_t>(v.cols()));
  for (Eigen::Index m = 0; m < v.cols(); ++m) c[static_cast<size_t>(m)] = v(q, m);
  return c;
}

// d B~_m / d c_n (holomorphic part), n one-based.
cplx bTildeDc(Variant v, int m, int n, const std::vector<cplx>& c) {
  cplx d = 0.0;
  if (n >= 1 && n <= m - 1) d += 0.5 * c[static_cast<size_t>(m - n - 1)];
  if (v == Variant::A && n - m >= 1) d += 0.5 * std::conj(c[static_cast<size_t>(n - m - 1)]);
  return d;
}

// d B~_m / d conj(c_n), nonzero only for variant (a).
cplx bTildeDcBar(Variant v, int m, int n, const std::vector<cplx>& c) {
  const int M = static_cast<int>(c.size());
  if (v != Variant::A || n + m > M) return 0.0;
  return 0.5 * c[static_cast<size_t>(n + m - 1)];
}

double sigmaMin(const MatrixXcd& a) {
  if (a.rows() < a.cols()) return 0.0;
  Eigen::JacobiSVD<MatrixXcd> svd(a);
  return svd.singularValues().minCoeff();
}

}  // namespace

SpectralSystem SpectralSystem::cosine(int modes, double omega, double c, double b,
                                      std::vector<double> obs_points) {
  if (modes < 1) throw ConfigError("spectral system needs at least one mode");
  std::vector<cplx> lambda, mu, rho;
  for (int j = 0; j < modes; ++j) {
    const double l = std::pow(j * std::numbers::pi, 2);
    lambda.emplace_back(l);
    mu.emplace_back(1.0);
    rho.emplace_back(b * l);
  }
  auto s = fromTriples(std::move(lambda), std::move(mu), std::move(rho), omega, c,
                       std::move(obs_points), true);
  s.b = b;
  return s;
}

SpectralSystem SpectralSystem::fromTriples(std::vector<cplx> lambda, std::vector<cplx> mu,
                                           std::vector<cplx> rho, double omega, double c,
                                           std::vector<double> obs_points,
                                           bool enforce_separation) {
  if (lambda.size() != mu.size() || lambda.size() != rho.size() || lambda.empty())
    throw ConfigError("eigen-triples must be non-empty and of equal length");
  if (obs_points.empty()) throw ConfigError("at least one observation point is required");
  for (double x : obs_points)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("observation points must lie in [0, 1]");
  SpectralSystem s;
  s.modes = static_cast<int>(lambda.size());
  s.lambda = std::move(lambda);
  s.mu = std::move(mu);
  s.rho = std::move(rho);
  s.omega = omega;
  s.c = c;
  s.obs_points = std::move(obs_points);
  if (enforce_separation && !s.separated())
    throw HypothesisError("two modes share rho/lambda and mu/lambda^2");
  return s;
}

bool SpectralSystem::separated(double tol) const {
  for (int j = 0; j < modes; ++j)
    for (int l = j + 1; l < modes; ++l) {
      const auto js = static_cast<size_t>(j), ls = static_cast<size_t>(l);
      const double s1 = std::abs(rho[js] * lambda[ls]) + std::abs(rho[ls] * lambda[js]) + 1.0;
      const double s2 = std::abs(mu[js] * lambda[ls] * lambda[ls]) +
                        std::abs(mu[ls] * lambda[js] * lambda[js]) + 1.0;
      const bool same_rho = std::abs(rho[js] * lambda[ls] - rho[ls] * lambda[js]) <= tol * s1;
      const bool same_mu = std::abs(mu[js] * lambda[ls] * lambda[ls] -
                                    mu[ls] * lambda[js] * lambda[js]) <= tol * s2;
      if (same_rho && same_mu) return false;
    }
  return true;
}

cplx SpectralSystem::symbol(int m, int j) const {
  const auto js = static_cast<size_t>(j);
  const double mw = m * omega;
  return -mw * mw * mu[js] + c * c * lambda[js] + I * mw * rho[js];
}

double SpectralSystem::basis(int j, double x) {
  return j == 0 ? 1.0 : std::numbers::sqrt2 * std::cos(j * std::numbers::pi * x);
}

MatrixXd SpectralSystem::observationMatrix() const {
  MatrixXd c(obsCount(*this), modes);
  for (int k = 0; k < obsCount(*this); ++k)
    for (int j = 0; j < modes; ++j) c(k, j) = basis(j, obs_points[static_cast<size_t>(k)]);
  return c;
}

Variant parseVariant(const std::string& s) {
  if (s == "a" || s == "A") return Variant::A;
  if (s == "b" || s == "B") return Variant::B;
  throw ConfigError("unknown coupling variant '" + s + "' (expected a or b)");
}

cplx bTilde(Variant v, int m, const std::vector<cplx>& c) {
  const int M = static_cast<int>(c.size());
  cplx s = 0.0;
  for (int l = 1; l <= m - 1 && m - l <= M && l <= M; ++l)
    s += 0.25 * c[static_cast<size_t>(l - 1)] * c[static_cast<size_t>(m - l - 1)];
  if (v == Variant::A)
    for (int a = 1; a + m <= M; ++a)
      s += 0.5 * std::conj(c[static_cast<size_t>(a - 1)]) * c[static_cast<size_t>(a + m - 1)];
  return s;
}

AbstractState AbstractState::zeros(int M, int J) {
  AbstractState x;
  x.eta.assign(static_cast<size_t>(M), VectorXcd::Zero(J));
  x.p.assign(static_cast<size_t>(M), VectorXcd::Zero(J));
  return x;
}

VectorXcd AbstractState::flatten() const {
  const int M = harmonics();
  const auto J = M ? p[0].size() : 0;
  VectorXcd x(2 * M * J);
  for (int m = 0; m < M; ++m) {
    x.segment(m * J, J) = eta[static_cast<size_t>(m)];
    x.segment((M + m) * J, J) = p[static_cast<size_t>(m)];
  }
  return x;
}

AbstractState AbstractState::unflatten(const VectorXcd& x, int M, int J) {
  if (x.size() != 2 * M * J) throw ConfigError("flattened state has the wrong length");
  AbstractState s = zeros(M, J);
  for (int m = 0; m < M; ++m) {
    s.eta[static_cast<size_t>(m)] = x.segment(m * J, J);
    s.p[static_cast<size_t>(m)] = x.segment((M + m) * J, J);
  }
  return s;
}

AbstractState AbstractState::operator-(const AbstractState& o) const {
  AbstractState r = *this;
  for (size_t m = 0; m < p.size(); ++m) {
    r.eta[m] -= o.eta[m];
    r.p[m] -= o.p[m];
  }
  return r;
}

AbstractState AbstractState::operator+(const AbstractState& o) const {
  AbstractState r = *this;
  for (size_t m = 0; m < p.size(); ++m) {
    r.eta[m] += o.eta[m];
    r.p[m] += o.p[m];
  }
  return r;
}

double etaNorm(const std::vector<VectorXcd>& eta) {
  double s = 0.0;
  for (size_t m = 0; m < eta.size(); ++m) s += eta[m].squaredNorm() / double((m + 1) * (m + 1));
  return std::sqrt(s);
}

double stateNorm(const AbstractState& x) {
  double s = std::pow(etaNorm(x.eta), 2);
  for (const auto& pm : x.p) s += pm.squaredNorm();
  return std::sqrt(s);
}

VectorXcd applyDm(const SpectralSystem& s, int m, const VectorXcd& pm) {
  VectorXcd r(pm.size());
  for (int j = 0; j < s.modes; ++j) r(j) = s.symbol(m, j) * pm(j);
  return r;
}

MatrixXcd multiplicationMatrix(const SpectralSystem& s, const VectorXcd& g_nodes) {
  const MatrixXd phi = basisAtNodes(s);
  const double w = 1.0 / static_cast<double>(phi.rows());
  return phi.transpose().cast<cplx>() * (g_nodes * w).asDiagonal() * phi.cast<cplx>();
}

MatrixXcd bMatrix(const SpectralSystem& s, Variant v, int m, const std::vector<VectorXcd>& p) {
  const MatrixXd phi = basisAtNodes(s);
  const MatrixXcd vals = nodeValues(phi, p);
  VectorXcd g(phi.rows());
  const double scale = std::pow(m * s.omega, 2);
  for (Eigen::Index q = 0; q < phi.rows(); ++q) g(q) = scale * bTilde(v, m, rowTuple(vals, q));
  return multiplicationMatrix(s, g);
}

VectorXcd applyBm(const SpectralSystem& s, Variant v, int m, const std::vector<VectorXcd>& p,
                  const VectorXcd& eta_m) {
  return bMatrix(s, v, m, p) * eta_m;
}

VectorXcd ForwardValue::stacked() const {
  Eigen::Index n = 0;
  for (const auto& g : model) n += g.size();
  for (const auto& y : obs) n += y.size();
  VectorXcd out(n);
  Eigen::Index k = 0;
  for (const auto& g : model) {
    out.segment(k, g.size()) = g;
    k += g.size();
  }
  for (const auto& y : obs) {
    out.segment(k, y.size()) = y;
    k += y.size();
  }
  return out;
}

ForwardValue forwardOp(const SpectralSystem& s, Variant v, const AbstractState& x) {
  const int M = x.harmonics();
  const MatrixXcd C = s.observationMatrix().cast<cplx>();
  ForwardValue f;
  for (int m = 1; m <= M; ++m) {
    const auto& pm = x.p[static_cast<size_t>(m - 1)];
    f.model.push_back(applyDm(s, m, pm) + applyBm(s, v, m, x.p, x.eta[static_cast<size_t>(m - 1)]));
    f.obs.push_back(C * pm);
  }
  return f;
}

VectorXcd Linearization::apply(const VectorXcd& dx) const {
  return A * dx + B * dx.conjugate();
}

MatrixXd Linearization::realMatrix() const {
  const MatrixXcd sum = A + B, diff = A - B;
  MatrixXd r(2 * A.rows(), 2 * A.cols());
  r << sum.real(), -diff.imag(), sum.imag(), diff.real();
  return r;
}

Linearization linearize(const SpectralSystem& s, Variant v, const AbstractState& x0) {
  const int M = x0.harmonics();
  const int J = s.modes;
  const int nobs = obsCount(s);
  const Eigen::Index rows = M * J + M * nobs, cols = 2 * M * J;
  Linearization L{MatrixXcd::Zero(rows, cols), MatrixXcd::Zero(rows, cols)};
  const MatrixXd phi = basisAtNodes(s);
  const MatrixXcd vals = nodeValues(phi, x0.p);
  const MatrixXd C = s.observationMatrix();
  for (int m = 1; m <= M; ++m) {
    const Eigen::Index r0 = (m - 1) * J;
    const double scale = std::pow(m * s.omega, 2);
    L.A.block(r0, (m - 1) * J, J, J) = bMatrix(s, v, m, x0.p);
    for (int j = 0; j < J; ++j) L.A(r0 + j, (M + m - 1) * J + j) += s.symbol(m, j);
    const VectorXcd eta_nodes = phi * x0.eta[static_cast<size_t>(m - 1)];
    for (int n = 1; n <= M; ++n) {
      VectorXcd ga(phi.rows()), gb(phi.rows());
      for (Eigen::Index q = 0; q < phi.rows(); ++q) {
        const auto c = rowTuple(vals, q);
        ga(q) = scale * bTildeDc(v, m, n, c) * eta_nodes(q);
        gb(q) = scale * bTildeDcBar(v, m, n, c) * eta_nodes(q);
      }
      L.A.block(r0, (M + n - 1) * J, J, J) += multiplicationMatrix(s, ga);
      if (v == Variant::A) L.B.block(r0, (M + n - 1) * J, J, J) += multiplicationMatrix(s, gb);
    }
    L.A.block(M * J + (m - 1) * nobs, (M + m - 1) * J, nobs, J) = C.cast<cplx>();
  }
  return L;
}

AbstractState rangeInvarRemainder(const SpectralSystem& s, Variant v, const AbstractState& x0,
                                  const AbstractState& x) {
  const int M = x0.harmonics();
  const int J = s.modes;
  const AbstractState dx = x - x0;
  AbstractState dp_only = AbstractState::zeros(M, J);
  dp_only.p = dx.p;
  const Linearization L = linearize(s, v, x0);
  const VectorXcd lin_p = L.apply(dp_only.flatten());
  AbstractState r = dx;
  for (int m = 1; m <= M; ++m) {
    const auto ms = static_cast<size_t>(m - 1);
    const MatrixXcd B0 = bMatrix(s, v, m, x0.p);
    const MatrixXcd B1 = bMatrix(s, v, m, x.p);
    // variant (b) has B_1 = 0 identically; any eta-remainder reproduces it
    if (B0.norm() == 0.0 && B1.norm() == 0.0) continue;
    const double smin = sigmaMin(B0);
    if (smin < 1e-10)
      throw HypothesisError("B_" + std::to_string(m) +
                            "(p0) is not an isomorphism (sigma_min " + std::to_string(smin) + ")");
    const VectorXcd dB = lin_p.segment((m - 1) * J, J) - applyDm(s, m, dx.p[ms]);
    const VectorXcd rhs = (B1 - B0) * x.eta[ms] - dB;
    r.eta[ms] += B0.fullPivLu().solve(rhs);
  }
  return r;
}

double remainderClosenessConstant(const SpectralSystem& s, Variant v, const AbstractState& x0,
                                  double radius, int samples, unsigned seed) {
  const int M = x0.harmonics();
  const int J = s.modes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    VectorXcd d(2 * M * J);
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = cplx(nd(rng), nd(rng));
    AbstractState dx = AbstractState::unflatten(d, M, J);
    const double n = stateNorm(dx);
    for (auto& e : dx.eta) e *= radius / n;
    for (auto& p : dx.p) p *= radius / n;
    const AbstractState r = rangeInvarRemainder(s, v, x0, x0 + dx);
    worst = std::max(worst, stateNorm(r - dx) / stateNorm(dx));
  }
  return worst;
}

std::vector<VectorXcd> penaltyP(const std::vector<VectorXcd>& eta) {
  if (eta.empty()) return {};
  double wsum = 0.0;
  VectorXcd mean = VectorXcd::Zero(eta[0].size());
  for (size_t m = 0; m < eta.size(); ++m) {
    const double w = 1.0 / double((m + 1) * (m + 1));
    wsum += w;
    mean += w * eta[m];
  }
  mean /= wsum;
  std::vector<VectorXcd> out = eta;
  for (auto& e : out) e -= mean;
  return out;
}

std::vector<VectorXcd> solveState(const SpectralSystem& s, Variant v,
                                  const std::vector<VectorXcd>& eta, const VectorXcd& hhat) {
  const int M = static_cast<int>(eta.size());
  const int J = s.modes;
  std::vector<VectorXcd> p(static_cast<size_t>(M), VectorXcd::Zero(J));
  auto dInv = [&](int m, const VectorXcd& r) {
    VectorXcd out(J);
    for (int j = 0; j < J; ++j) out(j) = r(j) / s.symbol(m, j);
    return out;
  };
  for (int it = 0; it < 500; ++it) {
    double change = 0.0, size = 0.0;
    for (int m = 1; m <= M; ++m) {
      const auto ms = static_cast<size_t>(m - 1);
      VectorXcd rhs = m == 1 ? hhat : VectorXcd::Zero(J);
      rhs -= applyBm(s, v, m, p, eta[ms]);
      const VectorXcd next = dInv(m, rhs);
      change += (next - p[ms]).squaredNorm();
      size += next.squaredNorm();
      p[ms] = next;
    }
    if (it >= M && change <= 1e-28 * std::max(size, 1e-300)) return p;
    if (!std::isfinite(change)) break;
  }
  throw SolverError("state fixed-point iteration did not converge");
}

FrozenNewtonResult frozenNewtonRun(const SpectralSystem& s, Variant v, const AbstractState& x0,
                                   const AbstractData& data, const FrozenNewtonConfig& cfg,
                                   const std::optional<AbstractState>& truth) {
  const int M = x0.harmonics();
  const int J = s.modes;
  if (static_cast<int>(data.h.size()) != M || static_cast<int>(data.y.size()) != M)
    throw ConfigError("data harmonics do not match the state");
  if (!(cfg.q > 0.0 && cfg.q < 1.0) || !(cfg.alpha0 > 0.0))
    throw ConfigError("frozen Newton needs alpha0 > 0 and 0 < q < 1");

  const MatrixXd L = linearize(s, v, x0).realMatrix();
  const ForwardValue target{data.h, data.y};
  const VectorXcd hd = target.stacked();
  const Eigen::Index nc = 2 * M * J;  // complex unknowns
  const Eigen::Index ne = M * J;      // complex eta unknowns

  // Weighted eta rows (identity and penalty), real coefficients.
  MatrixXd Wid = MatrixXd::Zero(ne, nc), Wpen = MatrixXd::Zero(ne, nc);
  double wsum = 0.0;
  for (int n = 1; n <= M; ++n) wsum += 1.0 / (n * n);
  for (int m = 1; m <= M; ++m)
    for (int j = 0; j < J; ++j) {
      const Eigen::Index r = (m - 1) * J + j;
      Wid(r, r) = 1.0 / m;
      Wpen(r, r) += 1.0 / m;
      for (int n = 1; n <= M; ++n) Wpen(r, (n - 1) * J + j) -= (1.0 / m) * (1.0 / (n * n)) / wsum;
    }
  auto realBlock = [](const MatrixXd& a) {
    MatrixXd r = MatrixXd::Zero(2 * a.rows(), 2 * a.cols());
    r.topLeftCorner(a.rows(), a.cols()) = a;
    r.bottomRightCorner(a.rows(), a.cols()) = a;
    return r;
  };
  auto toReal = [](const VectorXcd& z) {
    VectorXd r(2 * z.size());
    r << z.real(), z.imag();
    return r;
  };
  auto toComplex = [](const VectorXd& r) {
    const Eigen::Index n = r.size() / 2;
    return VectorXcd(r.head(n).cast<cplx>() + I * r.tail(n).cast<cplx>());
  };
  const MatrixXd Rid = realBlock(Wid), Rpen = realBlock(Wpen);
  const VectorXd z0 = toReal(x0.flatten());
  const VectorXd eta0_w = Rid * z0;

  const double threshold = cfg.noise_level > 0.0 ? std::pow(cfg.noise_level, 2.0 / 3.0) : 0.0;
  FrozenNewtonResult res;
  AbstractState x = x0;
  auto record = [&](const AbstractState& xs) {
    res.iterates.push_back(xs);
    res.residuals.push_back((forwardOp(s, v, xs).stacked() - hd).norm());
    if (truth) res.errors.push_back(stateNorm(xs - *truth));
  };
  record(x);
  res.stop_reason = "max iterations";
  for (int n = 0; n < cfg.max_iterations; ++n) {
    const double alpha = cfg.alpha0 * std::pow(cfg.q, n);
    if (alpha < threshold) {
      res.stop_reason = "noise level";
      break;
    }
    const VectorXd zn = toReal(x.flatten());
    const VectorXd rhs_fit = toReal(hd - forwardOp(s, v, x).stacked()) + L * zn;
    const Eigen::Index rows = L.rows() + 2 * Rid.rows();
    MatrixXd K(rows, L.cols());
    VectorXd rhs(rows);
    const double sa = std::sqrt(alpha);
    K << L, sa * Rid, Rpen;
    rhs << rhs_fit, sa * eta0_w, VectorXd::Zero(Rpen.rows());
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(K);
    const VectorXd z = qr.solve(rhs);
    if (!z.allFinite() || !std::isfinite(forwardOp(s, v, AbstractState::unflatten(
                                             toComplex(z), M, J)).stacked().norm())) {
      Eigen::JacobiSVD<MatrixXd> svd(K);
      const auto& sv = svd.singularValues();
      throw SolverError("frozen Newton solve failed at iteration " + std::to_string(n) +
                        " (alpha " + std::to_string(alpha) + ", cond " +
                        std::to_string(sv(0) / sv(sv.size() - 1)) + ")");
    }
    x = AbstractState::unflatten(toComplex(z), M, J);
    res.alphas.push_back(alpha);
    record(x);
  }
  res.stop_index = static_cast<int>(res.iterates.size()) - 1;
  return res;
}

ReferenceProblem referenceProblem(const ReferenceOptions& opt) {
  const int M = opt.harmonics, J = opt.modes;
  if (M < 1 || M > 6) throw ConfigError("reference problem supports 1..6 harmonics");
  if (J < 6) throw ConfigError("reference problem needs at least 6 modes");
  if (opt.obs_points < 1) throw ConfigError("need at least one observation point");
  std::vector<double> pts;
  for (int k = 0; k < opt.obs_points; ++k)
    pts.push_back(opt.obs_points == 1 ? 1.0 : 1.0 - opt.obs_span * k / (opt.obs_points - 1));
  ReferenceProblem rp{SpectralSystem::cosine(J, 1.0, 1.0, 0.1, pts), opt.variant, {}, {}, {}};

  const std::vector<cplx> psi{1.0, {0.8, 0.3}, {0.6, -0.2}, {0.5, 0.25}, {0.4, -0.1}, {0.35, 0.2}};
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd;
  rp.truth = AbstractState::zeros(M, J);
  rp.start = rp.truth;
  VectorXcd eta = VectorXcd::Zero(J);
  eta(0) = 0.5;
  eta(1) = 0.15;
  eta(2) = -0.1;
  eta(3) = 0.05;
  eta(5) = 0.03;
  for (int m = 0; m < M; ++m) {
    const auto ms = static_cast<size_t>(m);
    rp.truth.eta[ms] = eta;
    // psi_m (1 + 0.3 cos(pi x)) plus small random smooth detail
    rp.truth.p[ms](0) = psi[ms];
    rp.truth.p[ms](1) = 0.3 / std::numbers::sqrt2 * psi[ms];
    for (int j = 2; j < J; ++j) rp.truth.p[ms](j) = 0.05 / (j * j) * cplx(nd(rng), nd(rng));
  }
  for (int m = 0; m < M; ++m) {
    const auto ms = static_cast<size_t>(m);
    rp.start.eta[ms](0) = eta(0);
    rp.start.p[ms] = rp.truth.p[ms];
    for (int j = 0; j < J; ++j) rp.start.p[ms](j) += opt.perturbation / (1 + j) * cplx(nd(rng), nd(rng));
  }
  const ForwardValue f = forwardOp(rp.system, rp.variant, rp.truth);
  rp.data = {f.model, f.obs};
  return rp;
}

AbstractData addObservationNoise(const AbstractData& d, double delta, unsigned seed,
                                 double* absolute) {
  if (delta < 0.0) throw ConfigError("noise level must be non-negative");
  AbstractData out = d;
  double ynorm = 0.0, znorm = 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<VectorXcd> z;
  for (const auto& y : d.y) {
    ynorm += y.squaredNorm();
    VectorXcd zi(y.size());
    for (auto& c : zi) c = cplx(nd(rng), nd(rng));
    znorm += zi.squaredNorm();
    z.push_back(zi);
  }
  const double level = delta * std::sqrt(ynorm);
  if (delta > 0.0)
    for (size_t m = 0; m < z.size(); ++m) out.y[m] += z[m] * (level / std::sqrt(znorm));
  if (absolute) *absolute = level;
  return out;
}

MatrixXcd hankelMatrix(const SpectralSystem& s, int m_max, int j_max) {
  if (j_max > s.modes || m_max < 1 || j_max < 1) throw ConfigError("Hankel truncation out of range");
  MatrixXcd H(m_max, j_max);
  for (int m = 1; m <= m_max; ++m)
    for (int j = 0; j < j_max; ++j) H(m - 1, j) = double(m * m) / s.symbol(m, j);
  return H;
}

HankelReport hankelSigmaMin(const SpectralSystem& s, int m_max, int j_max) {
  HankelReport rep;
  const MatrixXcd H = hankelMatrix(s, m_max, j_max);
  Eigen::JacobiSVD<MatrixXcd> svd(H);
  rep.sigma_min_double = H.rows() < H.cols() ? 0.0 : svd.singularValues().minCoeff();

  // [Re -Im; Im Re] has the singular values of H, each twice
  using Real = boost::multiprecision::cpp_bin_float_50;
  using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  MatR E(2 * m_max, 2 * j_max);
  for (int m = 1; m <= m_max; ++m)
    for (int j = 0; j < j_max; ++j) {
      const auto js = static_cast<size_t>(j);
      const Real mw = Real(m) * s.omega;
      const Real c2 = Real(s.c) * s.c;
      const Real re = -mw * mw * Real(s.mu[js].real()) + c2 * Real(s.lambda[js].real()) -
                      mw * Real(s.rho[js].imag());
      const Real im = -mw * mw * Real(s.mu[js].imag()) + c2 * Real(s.lambda[js].imag()) +
                      mw * Real(s.rho[js].real());
      const Real d = re * re + im * im;
      const Real hr = Real(m * m) * re / d, hi = -Real(m * m) * im / d;
      E(m - 1, j) = hr;
      E(m - 1, j + j_max) = -hi;
      E(m - 1 + m_max, j) = hi;
      E(m - 1 + m_max, j + j_max) = hr;
    }
  Eigen::JacobiSVD<MatR> svd_mp(E);
  rep.sigma_max = static_cast<double>(svd_mp.singularValues().maxCoeff());
  rep.sigma_min =
      m_max < j_max ? 0.0 : static_cast<double>(svd_mp.singularValues().minCoeff());
  rep.nonsingular = rep.sigma_min > 1e-40 * rep.sigma_max;

  const double w = s.omega, c2 = s.c * s.c;
  std::vector<int> owner;
  for (int k = 0; k < j_max; ++k) {
    const auto ks = static_cast<size_t>(k);
    const cplx l = s.lambda[ks], mu = s.mu[ks], rho = s.rho[ks];
    auto wk = [&](cplx t) { return -mu * w * w + c2 * l * t * t + I * w * rho * t; };
    auto scale = [&](cplx t) {
      return std::abs(mu) * w * w + c2 * std::abs(l * t * t) + w * std::abs(rho * t) + 1e-300;
    };
    if (std::abs(l) == 0.0) {
      if (std::abs(rho) == 0.0) continue;
      const cplx t = -I * mu * w / rho;
      rep.roots.push_back(t);
      owner.push_back(k);
      rep.max_root_residual = std::max(rep.max_root_residual, std::abs(wk(t)) / scale(t));
      continue;
    }
    const cplx disc = std::sqrt(rho * rho - 4.0 * c2 * l * mu);
    const cplx lit = std::sqrt(rho * rho - mu);
    for (double sg : {-1.0, 1.0}) {
      const cplx t = -(I * w / (2.0 * c2 * l)) * (rho + sg * disc);
      rep.roots.push_back(t);
      owner.push_back(k);
      rep.max_root_residual = std::max(rep.max_root_residual, std::abs(wk(t)) / scale(t));
      const cplx tl = -(I * w / (2.0 * c2)) * (rho + sg * lit) / l;
      rep.literal_roots.push_back(tl);
      rep.literal_max_residual = std::max(rep.literal_max_residual, std::abs(wk(tl)) / scale(tl));
    }
  }
  rep.min_root_separation = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < rep.roots.size(); ++a)
    for (size_t b = a + 1; b < rep.roots.size(); ++b)
      if (owner[a] != owner[b])
        rep.min_root_separation =
            std::min(rep.min_root_separation, std::abs(rep.roots[a] - rep.roots[b]));
  rep.roots_distinct = rep.min_root_separation > 1e-10;
  rep.literal_min_separation = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < rep.literal_roots.size(); ++a)
    for (size_t b = a + 1; b < rep.literal_roots.size(); ++b)
      rep.literal_min_separation =
          std::min(rep.literal_min_separation, std::abs(rep.literal_roots[a] - rep.literal_roots[b]));
  rep.literal_distinct = rep.literal_min_separation > 1e-10;
  return rep;
}

InjectivityReport linearizedInjectivitySigmaMin(const SpectralSystem& s, Variant v,
                                                const std::function<double(double)>& phi_fn,
                                                const std::vector<cplx>& psi, bool strict) {
  const int M = static_cast<int>(psi.size());
  const int J = s.modes;
  if (M < 1) throw ConfigError("injectivity check needs at least one harmonic");
  InjectivityReport rep;
  for (int m = 1; m <= M; ++m) rep.f.push_back(bTilde(v, m, psi));
  if (strict)
    // variant (b) has B~_1 = 0 structurally; only the other harmonics carry the hypothesis
    for (int m = v == Variant::B ? 2 : 1; m <= M; ++m)
      if (std::abs(rep.f[static_cast<size_t>(m - 1)]) < 1e-14)
        throw HypothesisError("B~_" + std::to_string(m) + "(psi) vanishes");

  const MatrixXd nodes_phi = basisAtNodes(s);
  const int nq = s.collocationPoints();
  VectorXd fvals(nq);
  for (int q = 0; q < nq; ++q) fvals(q) = phi_fn((q + 0.5) / nq);
  const VectorXd phi_coef = nodes_phi.transpose() * fvals / double(nq);
  std::vector<VectorXcd> p0;
  for (int m = 0; m < M; ++m) p0.push_back(phi_coef.cast<cplx>() * psi[static_cast<size_t>(m)]);

  const MatrixXcd C = s.observationMatrix().cast<cplx>();
  const int nobs = obsCount(s);
  MatrixXcd K(M * nobs, J);
  for (int m = 1; m <= M; ++m) {
    MatrixXcd DinvB = bMatrix(s, v, m, p0);
    for (int j = 0; j < J; ++j) DinvB.row(j) /= s.symbol(m, j);
    K.block((m - 1) * nobs, 0, nobs, J) = -C * DinvB;
  }
  Eigen::JacobiSVD<MatrixXcd> svd(K);
  rep.sigma_max = svd.singularValues().maxCoeff();
  rep.sigma_min = K.rows() < K.cols() ? 0.0 : svd.singularValues().minCoeff();
  return rep;
}

}  // namespace nltomo::abstract
