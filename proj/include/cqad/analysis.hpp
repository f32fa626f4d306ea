#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cqad {

struct SpectrumTrace {
  std::vector<double> frequencies;  // Hz, strictly increasing
  std::vector<double> populations;
  std::map<std::string, std::string> metadata;

  void validate() const;
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> sigmas;  // one standard deviation
  double residual_norm = 0.0;
  bool converged = false;
  std::map<std::string, std::string> metadata;

  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
  bool reliable() const { return converged; }
};

// Faddeeva function w(z) for Im z >= 0 (Weideman rational series, N = 32).
std::complex<double> faddeeva(std::complex<double> z);
// Area-normalized Voigt profile: Gaussian std sigma convolved with Lorentzian HWHM gamma.
double voigt_profile(double x, double sigma, double gamma);
// Full width at half maximum (Olivero-Longbothum, 0.02% accurate).
double voigt_fwhm(double sigma, double gamma);

struct VoigtFitOptions {
  double center_hint = std::numeric_limits<double>::quiet_NaN();  // |0> peak; NaN picks the outermost peak
  double sigma_hint = 5e3;
  double gamma_hint = 15e3;
  double max_center_deviation = 0.15;  // fraction of |spacing| each peak may move off the comb
  int starts = 5;
  std::uint64_t seed = 1;
};

struct VoigtFit {
  FitResult fit;  // c0, spacing, sigma, gamma, offset, h0.., d1..
  std::vector<double> populations;
  std::vector<double> population_sigmas;
  bool overlapping = false;
};

// Peaks sit at c0 + n*spacing + d_n; heights are normalized into P_n.
VoigtFit voigt_sum_fit(const SpectrumTrace& trace, int n_peaks, double spacing_hint,
                       const VoigtFitOptions& options = {});
// ceil(nbar + 4 sqrt(nbar)) from the first moment of the trace about the |0> peak (at least 1).
int default_peak_count(const SpectrumTrace& trace, double center0, double spacing);

struct PoissonFit {
  double nbar = 0.0;
  double sigma = 0.0;
  FitResult fit;
  double beta() const;
};

PoissonFit poisson_fit(std::span<const double> p);
// (1 - exp(-2 pi kappa tau)) / (2 pi kappa tau).
double beta_decay_ratio(double kappa_total, double tau_spec);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_sigma = 0.0;
  double intercept_sigma = 0.0;
  double r_squared = 0.0;
};

LinearFit calibration_fit(std::span<const double> drive_amplitudes, std::span<const double> fitted_betas);
// Prepared |beta| per drive unit from a fitted slope and the averaging ratio.
inline double prepared_beta_scale(double fitted_slope, double decay_ratio) { return fitted_slope / decay_ratio; }

double parity_from_populations(std::span<const double> p);

enum class DecayModel { exponential, exponential_sine };

// exponential: amplitude, lifetime, offset. exponential_sine adds frequency and phase:
// y = amplitude exp(-t/lifetime) sin(2 pi frequency t + phase) + offset.
// A flat trace or a lifetime beyond 1000x the span is flagged (converged = false), lifetime = +inf.
FitResult decay_fit(std::span<const double> times, std::span<const double> values, DecayModel model);

struct WignerMap {
  std::vector<double> re_axis;  // calibrated beta
  std::vector<double> im_axis;
  Eigen::MatrixXd values;  // values(i, j) at re_axis[i] + i im_axis[j]
  double calibration_scale = 1.0;

  void validate() const;
};

// values = (2/pi) parity; axes multiplied by calibration_scale. NaN parities count as missing.
WignerMap wigner_assemble(const std::vector<double>& re_axis, const std::vector<double>& im_axis,
                          const Eigen::MatrixXd& parities, double calibration_scale = 1.0);

}  // namespace cqad
