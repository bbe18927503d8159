#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nltomo/geometry.hpp"

namespace nltomo::abstract {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Simultaneous eigen-triples of A, M, D plus point observations. The
/// default construction is the Neumann cosine basis of (0, 1):
/// phi_0 = 1, phi_j = sqrt(2) cos(j pi x), lambda_j = (j pi)^2, mu_j = 1,
/// rho_j = b lambda_j.
struct SpectralSystem {
  int modes = 0;
  std::vector<cplx> lambda, mu, rho;
  double omega = 1.0;
  double c = 1.0;
  double b = 0.1;
  std::vector<double> obs_points;

  static SpectralSystem cosine(int modes, double omega = 1.0, double c = 1.0, double b = 0.1,
                               std::vector<double> obs_points = {1.0});
  /// Arbitrary triples on the cosine basis; the separation condition is
  /// enforced unless `enforce_separation` is false.
  static SpectralSystem fromTriples(std::vector<cplx> lambda, std::vector<cplx> mu,
                                    std::vector<cplx> rho, double omega, double c,
                                    std::vector<double> obs_points, bool enforce_separation = true);

  /// No two modes share both rho/lambda and mu/lambda^2 (compared cross-multiplied).
  bool separated(double tol = 1e-12) const;
  /// -m^2 omega^2 mu_j + c^2 lambda_j + i m omega rho_j
  cplx symbol(int m, int j) const;
  static double basis(int j, double x);
  /// n_obs x modes matrix of phi_j(x_k).
  MatrixXd observationMatrix() const;
  int collocationPoints() const { return 4 * modes; }
};

enum class Variant { A, B };
Variant parseVariant(const std::string& s);

/// Coefficient tuple c = (c_1, ..., c_M) stored zero-based.
cplx bTilde(Variant v, int m, const std::vector<cplx>& c);

/// State x = (eta_1..eta_M, p_1..p_M), each a coefficient vector of length J.
struct AbstractState {
  std::vector<VectorXcd> eta;
  std::vector<VectorXcd> p;

  int harmonics() const { return static_cast<int>(p.size()); }
  static AbstractState zeros(int M, int J);
  VectorXcd flatten() const;
  static AbstractState unflatten(const VectorXcd& x, int M, int J);
  AbstractState operator-(const AbstractState& o) const;
  AbstractState operator+(const AbstractState& o) const;
};

/// sum_m m^-2 |eta_m|^2 + sum_m |p_m|^2, square-rooted.
double stateNorm(const AbstractState& x);
double etaNorm(const std::vector<VectorXcd>& eta);

VectorXcd applyDm(const SpectralSystem& s, int m, const VectorXcd& pm);

/// Galerkin matrix of multiplication by g(x) given at the collocation nodes.
MatrixXcd multiplicationMatrix(const SpectralSystem& s, const VectorXcd& g_nodes);
/// m^2 omega^2 B~_m(p(x)) as a Galerkin multiplication matrix.
MatrixXcd bMatrix(const SpectralSystem& s, Variant v, int m, const std::vector<VectorXcd>& p);
VectorXcd applyBm(const SpectralSystem& s, Variant v, int m, const std::vector<VectorXcd>& p,
                  const VectorXcd& eta_m);

struct ForwardValue {
  std::vector<VectorXcd> model;  // G_m
  std::vector<VectorXcd> obs;    // C_m p_m
  VectorXcd stacked() const;
};
ForwardValue forwardOp(const SpectralSystem& s, Variant v, const AbstractState& x);

/// F'(x0) dx = A dx + B conj(dx) on flattened states; B vanishes for variant (b).
struct Linearization {
  MatrixXcd A, B;
  VectorXcd apply(const VectorXcd& dx) const;
  /// Real matrix acting on [Re dx; Im dx] and producing [Re; Im].
  MatrixXd realMatrix() const;
};
Linearization linearize(const SpectralSystem& s, Variant v, const AbstractState& x0);

/// r(x) with F(x) - F(x0) = F'(x0) r(x). Throws HypothesisError if some
/// B_m(p0) that does not vanish identically has smallest singular value below
/// 1e-10.
AbstractState rangeInvarRemainder(const SpectralSystem& s, Variant v, const AbstractState& x0,
                                  const AbstractState& x);

/// Largest ||r(x) - (x - x0)|| / ||x - x0|| over random x with ||x - x0|| = radius.
double remainderClosenessConstant(const SpectralSystem& s, Variant v, const AbstractState& x0,
                                  double radius, int samples = 50, unsigned seed = 1);

/// (P eta)_m = eta_m - sum_n n^-2 eta_n / sum_n n^-2.
std::vector<VectorXcd> penaltyP(const std::vector<VectorXcd>& eta);

/// Harmonics solving G_m(eta, p) = h_m with h_1 = hhat, h_m = 0 otherwise
/// (sequential for variant (b), fixed point for variant (a)).
std::vector<VectorXcd> solveState(const SpectralSystem& s, Variant v,
                                  const std::vector<VectorXcd>& eta, const VectorXcd& hhat);

struct FrozenNewtonConfig {
  double alpha0 = 1.0;
  double q = 0.5;
  int max_iterations = 60;
  /// Absolute observation noise level; 0 runs all iterations.
  double noise_level = 0.0;
};

struct FrozenNewtonResult {
  std::vector<AbstractState> iterates;  // x_0 .. x_n
  std::vector<double> alphas;
  std::vector<double> residuals;  // ||F(x_n) - h_delta||
  std::vector<double> errors;     // ||x_n - x_true|| when known
  int stop_index = 0;
  std::string stop_reason;
};

/// Data of the operator equation: model right-hand sides and observations.
struct AbstractData {
  std::vector<VectorXcd> h;
  std::vector<VectorXcd> y;
};

FrozenNewtonResult frozenNewtonRun(const SpectralSystem& s, Variant v, const AbstractState& x0,
                                   const AbstractData& data, const FrozenNewtonConfig& cfg,
                                   const std::optional<AbstractState>& truth = std::nullopt);

/// Manufactured desk-scale problem: harmonics of comparable size, data
/// h := G(x_true) and y := C p_true, start x0 with constant eta and a
/// perturbed p.
struct ReferenceProblem {
  SpectralSystem system;
  Variant variant = Variant::A;
  AbstractState truth;
  AbstractState start;
  AbstractData data;
};

struct ReferenceOptions {
  int harmonics = 3;
  int modes = 8;
  /// Observation points spread over [1 - span, 1]; one point means x = 1 only.
  int obs_points = 8;
  double obs_span = 0.5;
  double perturbation = 0.05;
  unsigned seed = 11;
  Variant variant = Variant::A;
};

ReferenceProblem referenceProblem(const ReferenceOptions& opt = {});

/// Adds delta * ||y|| times a normalized complex Gaussian vector to the
/// observations; returns the absolute noise level through `absolute`.
AbstractData addObservationNoise(const AbstractData& d, double delta, unsigned seed,
                                 double* absolute = nullptr);

struct HankelReport {
  /// Singular values from a 50-digit SVD of the real embedding; the double
  /// SVD bottoms out near 1e-17 from 16 x 16 on.
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double sigma_min_double = 0.0;
  /// sigma_min clears the 50-digit rounding floor (1e-40 sigma_max).
  bool nonsingular = false;
  /// Roots t_{k+-} of w_k(t) = -mu_k omega^2 + c^2 lambda_k t^2 + i omega rho_k t.
  std::vector<cplx> roots;
  double max_root_residual = 0.0;   // max |w_k(t_k)| / scale
  double min_root_separation = 0.0; // over roots of different modes
  bool roots_distinct = false;
  /// The closed form printed without the factor 4 c^2 lambda under the root.
  std::vector<cplx> literal_roots;
  double literal_max_residual = 0.0;
  double literal_min_separation = 0.0;
  bool literal_distinct = false;
};

/// Matrix with entries m^2 / symbol(m, j), m = 1..m_max, j < j_max.
MatrixXcd hankelMatrix(const SpectralSystem& s, int m_max, int j_max);
HankelReport hankelSigmaMin(const SpectralSystem& s, int m_max, int j_max);

struct InjectivityReport {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  std::vector<cplx> f;  // B~_m(psi)
};

/// Smallest singular value of F'(0, p0) on {P eta = 0} after eliminating dp
/// through the model rows, with p0_m = phi(x) psi_m. With `strict`, some
/// f_m = 0 raises HypothesisError; otherwise the degenerate value is reported.
InjectivityReport linearizedInjectivitySigmaMin(const SpectralSystem& s, Variant v,
                                                const std::function<double(double)>& phi,
                                                const std::vector<cplx>& psi,
                                                bool strict = true);

}  // namespace nltomo::abstract
