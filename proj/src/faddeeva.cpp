#include <array>
#include <cmath>

#include "cqad/analysis.hpp"

namespace cqad {

namespace {

constexpr int kN = 32;

struct Weideman {
  double l;
  std::array<double, kN> a;  // a[k] multiplies Z^k

  Weideman() {
    constexpr int m = 2 * kN;
    constexpr int m2 = 2 * m;
    l = std::sqrt(kN / std::sqrt(2.0));
    // f sampled at k = -m+1..m-1 with a leading zero, then fftshift-ed and transformed.
    std::array<double, m2> f{};
    for (int j = 1; j < m2; ++j) {
      const double theta = (j - m) * M_PI / m;
      const double t = l * std::tan(theta / 2);
      f[j] = std::exp(-t * t) * (l * l + t * t);
    }
    std::array<double, m2> g{};
    for (int j = 0; j < m2; ++j) g[j] = f[(j + m) % m2];
    std::array<double, kN + 1> re{};
    for (int n = 1; n <= kN; ++n) {
      double s = 0.0;
      for (int j = 0; j < m2; ++j) s += g[j] * std::cos(2 * M_PI * j * n / m2);
      re[n] = s / m2;
    }
    for (int k = 0; k < kN; ++k) a[k] = re[k + 1];
  }
};

const Weideman& table() {
  static const Weideman w;
  return w;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z) {
  const Weideman& w = table();
  const std::complex<double> iz(-z.imag(), z.real());
  const std::complex<double> den = w.l - iz;
  const std::complex<double> zz = (w.l + iz) / den;
  std::complex<double> p = 0.0;
  for (int k = kN - 1; k >= 0; --k) p = p * zz + w.a[k];
  return 2.0 * p / (den * den) + (1.0 / std::sqrt(M_PI)) / den;
}

double voigt_profile(double x, double sigma, double gamma) {
  if (sigma <= 0.0) return gamma / (M_PI * (x * x + gamma * gamma));
  const double s2 = sigma * std::sqrt(2.0);
  return faddeeva({x / s2, gamma / s2}).real() / (sigma * std::sqrt(2 * M_PI));
}

double voigt_fwhm(double sigma, double gamma) {
  const double fg = 2 * sigma * std::sqrt(2 * std::log(2.0));
  const double fl = 2 * gamma;
  return 0.5346 * fl + std::sqrt(0.2166 * fl * fl + fg * fg);
}

}  // namespace cqad
