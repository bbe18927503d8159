#pragma once

#include <complex>
#include <vector>

namespace nltomo::specfun {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEulerGamma = 0.57721566490153286060651209;

/// Bessel function of the first kind J_n(x) for n in {0, 1, 2}.
double besselJ(int n, double x);

/// J_0(x), ..., J_nmax(x) for x >= 0 by Miller's backward recurrence,
/// normalised with J_0 + 2 sum_k J_2k = 1.
std::vector<double> besselJSequence(int nmax, double x);

/// Bessel function of the second kind Y_n(x) for n in {0, 1}, x > 0.
double besselY(int n, double x);

/// H_n^(1)(x) = J_n(x) + i Y_n(x) for n in {0, 1}. Throws DomainError for x <= 0.
std::complex<double> hankel1(int n, double x);

struct Hankel01 {
  std::complex<double> h0;
  std::complex<double> h1;
};

/// H_0^(1)(x) and H_1^(1)(x) from a single pass.
Hankel01 hankel01(double x);

/// Same as hankel01 but from piecewise Chebyshev tables of the regular parts
/// (log terms split off analytically). Used by every kernel evaluation in the
/// forward solver; agrees with hankel01 to about 1e-13.
Hankel01 hankel01Fast(double x);

/// H_0^(1) alone from the same tables.
std::complex<double> hankel0Fast(double x);

struct MeanValueFactorQuery {
  int dimension = 2;  // 2 or 3
  double z = 0.0;     // wave number times ball radius
};

/// Ratio between the ball average of a Helmholtz solution and its value at
/// the centre: Gamma(d/2+1) J_{d/2}(z) / (z/2)^{d/2}, equal to 1 at z = 0.
double meanValueFactor(const MeanValueFactorQuery& q);

}  // namespace nltomo::specfun
