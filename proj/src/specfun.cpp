#include "nltomo/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>
#include <string>

#include "nltomo/error.hpp"

namespace nltomo::specfun {

namespace {

// Beyond this argument the Hankel asymptotic expansion is accurate to
// roundoff; below it the ascending series is summed in extended precision.
constexpr double kSeriesLimit = 15.0;

struct SeriesValues {
  long double j0, j1, j2, y0, y1;
};

SeriesValues ascendingSeries(long double x, bool want_y) {
  const long double q = x * x / 4.0L;
  const long double half = x / 2.0L;
  long double t = 1.0L;  // (-1)^k q^k / (k!)^2
  long double s_j0 = 0, s_j1 = 0, s_j2 = 0, s_y0 = 0, s_y1 = 0;
  long double harmonic = 0.0L;  // H_k
  const long double two_gamma = 2.0L * static_cast<long double>(kEulerGamma);
  for (int k = 0; k < 200; ++k) {
    const long double kp1 = k + 1;
    const long double h_next = harmonic + 1.0L / kp1;
    s_j0 += t;
    s_j1 += t / kp1;
    s_j2 += t / (kp1 * (kp1 + 1.0L));
    if (want_y) {
      s_y0 -= harmonic * t;
      s_y1 += (harmonic + h_next - two_gamma) * t / kp1;
    }
    if (kp1 > half && std::fabs(t) < 1e-24L) break;
    t *= -q / (kp1 * kp1);
    harmonic = h_next;
  }
  SeriesValues v{};
  v.j0 = s_j0;
  v.j1 = half * s_j1;
  v.j2 = q * s_j2;
  if (want_y) {
    const long double pi = 3.141592653589793238462643383279502884L;
    const long double lg = std::log(half);
    v.y0 = (2.0L / pi) * (lg + static_cast<long double>(kEulerGamma)) * v.j0 +
           (2.0L / pi) * s_y0;
    v.y1 = (2.0L / pi) * lg * v.j1 - 2.0L / (pi * x) - (1.0L / pi) * half * s_y1;
  }
  return v;
}

// Hankel's expansion H_nu^(1)(x) ~ sqrt(2/(pi x)) e^{i chi} sum_k i^k a_k(nu) / x^k.
std::complex<double> hankelAsymptotic(int nu, double x) {
  const double chi = x - nu * kPi / 2.0 - kPi / 4.0;
  const double mu = 4.0 * nu * nu;
  std::complex<double> sum = 1.0;
  std::complex<double> term = 1.0;
  const std::complex<double> i_over_x(0.0, 1.0 / x);
  double last = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= i_over_x * ((mu - odd * odd) / (8.0 * k));
    const double mag = std::abs(term);
    if (mag > last) break;  // divergent tail
    sum += term;
    if (mag < 1e-17) break;
    last = mag;
  }
  return std::sqrt(2.0 / (kPi * x)) * std::polar(1.0, chi) * sum;
}

void requireOrder(int n, int max_order, const char* fn) {
  if (n < 0 || n > max_order) {
    throw DomainError(std::string(fn) + ": unsupported order " + std::to_string(n));
  }
}

}  // namespace

double besselJ(int n, double x) {
  requireOrder(n, 2, "besselJ");
  if (!std::isfinite(x)) throw DomainError("besselJ: non-finite argument");
  const double sign = (x < 0.0 && n % 2 == 1) ? -1.0 : 1.0;
  const double ax = std::fabs(x);
  if (ax < kSeriesLimit) {
    const SeriesValues v = ascendingSeries(ax, false);
    const long double vals[3] = {v.j0, v.j1, v.j2};
    return sign * static_cast<double>(vals[n]);
  }
  return sign * hankelAsymptotic(n, ax).real();
}

std::vector<double> besselJSequence(int nmax, double x) {
  if (nmax < 0) throw DomainError("besselJSequence: negative order");
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw DomainError("besselJSequence: argument must be finite and nonnegative");
  }
  std::vector<double> out(nmax + 1, 0.0);
  out[0] = 1.0;
  if (x == 0.0) return out;
  const int top = std::max(nmax, static_cast<int>(x));
  int start = top + 16 + static_cast<int>(std::sqrt(40.0 * top));
  start += start % 2;
  std::vector<long double> v(start + 2, 0.0L);
  v[start] = 1e-300L;
  long double norm = 0.0L;
  for (int k = start; k >= 1; --k) {
    v[k - 1] = 2.0L * k / x * v[k] - v[k + 1];
    if (std::fabs(v[k - 1]) > 1e250L) {
      for (int j = k - 1; j <= start; ++j) v[j] *= 1e-250L;
      norm *= 1e-250L;
    }
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0L * v[k - 1];
  }
  norm += v[0];
  for (int n = 0; n <= nmax; ++n) out[n] = static_cast<double>(v[n] / norm);
  return out;
}

double besselY(int n, double x) {
  requireOrder(n, 1, "besselY");
  if (!(x > 0.0)) throw DomainError("besselY: argument must be positive");
  return hankel1(n, x).imag();
}

std::complex<double> hankel1(int n, double x) {
  requireOrder(n, 1, "hankel1");
  const Hankel01 h = hankel01(x);
  return n == 0 ? h.h0 : h.h1;
}

Hankel01 hankel01(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("hankel1: argument must be positive and finite");
  }
  if (x < kSeriesLimit) {
    const SeriesValues v = ascendingSeries(x, true);
    return {{static_cast<double>(v.j0), static_cast<double>(v.y0)},
            {static_cast<double>(v.j1), static_cast<double>(v.y1)}};
  }
  return {hankelAsymptotic(0, x), hankelAsymptotic(1, x)};
}

namespace {

// Regular parts on [0, kTableLimit):
//   J0, J1, Y0 - (2/pi) ln(x/2) J0, Y1 - (2/pi) ln(x/2) J1 + 2/(pi x).
constexpr double kTableLimit = 48.0;
constexpr int kPanelsPerUnit = 4;
constexpr int kPanels = static_cast<int>(kTableLimit) * kPanelsPerUnit;
constexpr int kChebDegree = 11;

struct RegularParts {
  double v[4];
};

// x > 0; Chebyshev nodes never touch the panel ends.
RegularParts regularParts(double x) {
  if (x < kSeriesLimit) {
    const long double pi = 3.141592653589793238462643383279502884L;
    const SeriesValues s = ascendingSeries(x, true);
    const long double lg = std::log(static_cast<long double>(x) / 2.0L);
    return {{static_cast<double>(s.j0), static_cast<double>(s.j1),
             static_cast<double>(s.y0 - 2.0L / pi * lg * s.j0),
             static_cast<double>(s.y1 - 2.0L / pi * lg * s.j1 + 2.0L / (pi * x))}};
  }
  const std::complex<double> h0 = hankelAsymptotic(0, x);
  const std::complex<double> h1 = hankelAsymptotic(1, x);
  const double lg = std::log(x / 2.0);
  return {{h0.real(), h1.real(), h0.imag() - 2.0 / kPi * lg * h0.real(),
           h1.imag() - 2.0 / kPi * lg * h1.real() + 2.0 / (kPi * x)}};
}

struct ChebTable {
  // coeffs[panel][fn][k]
  std::vector<std::array<std::array<double, kChebDegree + 1>, 4>> coeffs;

  ChebTable() : coeffs(kPanels) {
    constexpr int n = kChebDegree + 1;
    const double h = 1.0 / kPanelsPerUnit;
    for (int p = 0; p < kPanels; ++p) {
      std::array<RegularParts, n> samples;
      for (int j = 0; j < n; ++j) {
        const double u = std::cos(kPi * (j + 0.5) / n);
        samples[j] = regularParts(h * (p + 0.5 * (u + 1.0)));
      }
      for (int f = 0; f < 4; ++f) {
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += samples[j].v[f] * std::cos(kPi * k * (j + 0.5) / n);
          coeffs[p][f][k] = (k == 0 ? 1.0 : 2.0) * acc / n;
        }
      }
    }
  }
};

const ChebTable& chebTable() {
  static const ChebTable table;
  return table;
}

}  // namespace

Hankel01 hankel01Fast(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("hankel1: argument must be positive and finite");
  }
  if (x >= kTableLimit) return {hankelAsymptotic(0, x), hankelAsymptotic(1, x)};
  const auto& table = chebTable();
  const double t = x * kPanelsPerUnit;
  const int p = std::min(static_cast<int>(t), kPanels - 1);
  const double u = 2.0 * (t - p) - 1.0;
  const auto& c = table.coeffs[p];
  // Clenshaw recurrence, four series at once.
  double b1[4] = {0, 0, 0, 0}, b2[4] = {0, 0, 0, 0};
  for (int k = kChebDegree; k >= 1; --k) {
    for (int f = 0; f < 4; ++f) {
      const double b0 = 2.0 * u * b1[f] - b2[f] + c[f][k];
      b2[f] = b1[f];
      b1[f] = b0;
    }
  }
  double v[4];
  for (int f = 0; f < 4; ++f) v[f] = u * b1[f] - b2[f] + c[f][0];
  const double lg = 2.0 / kPi * std::log(0.5 * x);
  return {{v[0], v[2] + lg * v[0]}, {v[1], v[3] + lg * v[1] - 2.0 / (kPi * x)}};
}

std::complex<double> hankel0Fast(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("hankel1: argument must be positive and finite");
  }
  if (x >= kTableLimit) return hankelAsymptotic(0, x);
  const auto& table = chebTable();
  const double t = x * kPanelsPerUnit;
  const int p = std::min(static_cast<int>(t), kPanels - 1);
  const double u = 2.0 * (t - p) - 1.0;
  const auto& c = table.coeffs[p];
  double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
  for (int k = kChebDegree; k >= 1; --k) {
    const double a0 = 2.0 * u * a1 - a2 + c[0][k];
    const double b0 = 2.0 * u * b1 - b2 + c[2][k];
    a2 = a1;
    a1 = a0;
    b2 = b1;
    b1 = b0;
  }
  const double j0 = u * a1 - a2 + c[0][0];
  const double r0 = u * b1 - b2 + c[2][0];
  return {j0, r0 + 2.0 / kPi * std::log(0.5 * x) * j0};
}

double meanValueFactor(const MeanValueFactorQuery& q) {
  if (q.dimension != 2 && q.dimension != 3) {
    throw DomainError("meanValueFactor: dimension must be 2 or 3");
  }
  if (!(q.z >= 0.0) || !std::isfinite(q.z)) {
    throw DomainError("meanValueFactor: z must be finite and nonnegative");
  }
  const double z = q.z;
  if (z == 0.0) return 1.0;
  if (z < kSeriesLimit) {
    // sum_k (-z^2/4)^k Gamma(d/2+1) / (k! Gamma(k+d/2+1))
    const long double half_d = q.dimension / 2.0L;
    const long double w = static_cast<long double>(z) * z / 4.0L;
    long double term = 1.0L, sum = 0.0L;
    for (int k = 0; k < 200; ++k) {
      sum += term;
      term *= -w / ((k + 1.0L) * (k + 1.0L + half_d));
      if (std::fabs(term) < 1e-22L && k > 2) break;
    }
    return static_cast<double>(sum);
  }
  if (q.dimension == 2) return 2.0 * besselJ(1, z) / z;
  return 3.0 * (std::sin(z) - z * std::cos(z)) / (z * z * z);
}

}  // namespace nltomo::specfun
