#include "cqad/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

#include <ceres/ceres.h>

namespace cqad {

namespace {

using Model = std::function<void(const double* p, double* residuals)>;

struct ModelFunctor {
  Model model;
  bool operator()(double const* const* p, double* r) const {
    model(p[0], r);
    return true;
  }
};

struct LsqResult {
  std::vector<double> x;
  std::vector<double> sigmas;
  double cost = 0.0;  // sum of squared residuals
  bool converged = false;
};

LsqResult solve(const Model& model, int n_res, std::vector<double> x0, const std::vector<double>& lower,
                const std::vector<double>& upper, bool with_covariance = true) {
  const int np = static_cast<int>(x0.size());
  for (int k = 0; k < np; ++k) x0[k] = std::clamp(x0[k], lower[k], upper[k]);
  auto* cost = new ceres::DynamicNumericDiffCostFunction<ModelFunctor, ceres::CENTRAL>(new ModelFunctor{model});
  cost->AddParameterBlock(np);
  cost->SetNumResiduals(n_res);
  ceres::Problem problem;
  problem.AddResidualBlock(cost, nullptr, x0.data());
  for (int k = 0; k < np; ++k) {
    if (std::isfinite(lower[k])) problem.SetParameterLowerBound(x0.data(), k, lower[k]);
    if (std::isfinite(upper[k])) problem.SetParameterUpperBound(x0.data(), k, upper[k]);
  }
  ceres::Solver::Options opts;
  opts.linear_solver_type = ceres::DENSE_QR;
  opts.max_num_iterations = 500;
  opts.function_tolerance = 1e-14;
  opts.gradient_tolerance = 1e-14;
  opts.parameter_tolerance = 1e-12;
  opts.num_threads = 1;
  ceres::Solver::Summary summary;
  ceres::Solve(opts, &problem, &summary);

  LsqResult r;
  r.x = x0;
  r.cost = 2.0 * summary.final_cost;
  r.converged = summary.termination_type == ceres::CONVERGENCE && std::isfinite(r.cost);
  r.sigmas.assign(np, std::numeric_limits<double>::infinity());
  if (with_covariance && n_res > np) {
    ceres::Covariance::Options co;
    co.algorithm_type = ceres::DENSE_SVD;
    co.null_space_rank = -1;
    co.num_threads = 1;
    ceres::Covariance cov(co);
    std::vector<std::pair<const double*, const double*>> blocks{{x0.data(), x0.data()}};
    if (cov.Compute(blocks, &problem)) {
      std::vector<double> c(np * np);
      cov.GetCovarianceBlock(x0.data(), x0.data(), c.data());
      const double scale = r.cost / (n_res - np);
      for (int k = 0; k < np; ++k) r.sigmas[k] = std::sqrt(std::max(0.0, c[k * np + k] * scale));
    }
  }
  return r;
}

FitResult to_fit_result(const std::vector<std::string>& names, const LsqResult& r) {
  FitResult f;
  f.names = names;
  f.values = r.x;
  f.sigmas = r.sigmas;
  f.residual_norm = std::sqrt(r.cost);
  f.converged = r.converged;
  return f;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void SpectrumTrace::validate() const {
  if (frequencies.size() != populations.size())
    throw std::invalid_argument("SpectrumTrace: frequencies and populations differ in length");
  if (frequencies.empty()) throw std::invalid_argument("SpectrumTrace: empty trace");
  for (size_t i = 1; i < frequencies.size(); ++i)
    if (!(frequencies[i] > frequencies[i - 1]))
      throw std::invalid_argument("SpectrumTrace: frequencies must be strictly increasing");
}

double FitResult::value(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("FitResult: no parameter '" + name + "'");
  return values[it - names.begin()];
}

double FitResult::sigma(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("FitResult: no parameter '" + name + "'");
  return sigmas[it - names.begin()];
}

// ---------------------------------------------------------------------------------------------
// Voigt sums

VoigtFit voigt_sum_fit(const SpectrumTrace& trace, int n_peaks, double spacing_hint, const VoigtFitOptions& options) {
  trace.validate();
  if (n_peaks < 1) throw std::invalid_argument("voigt_sum_fit: n_peaks must be >= 1");
  if (n_peaks > 1 && spacing_hint == 0.0) throw std::invalid_argument("voigt_sum_fit: spacing_hint must be nonzero");
  const auto& f = trace.frequencies;
  const auto& y = trace.populations;
  const int m = static_cast<int>(f.size());
  const double span = f.back() - f.front();

  std::vector<std::string> names{"c0", "spacing", "sigma", "gamma", "offset"};
  for (int n = 0; n < n_peaks; ++n) names.push_back("h" + std::to_string(n));
  for (int n = 1; n < n_peaks; ++n) names.push_back("d" + std::to_string(n));
  const int np = static_cast<int>(names.size());

  VoigtFit out;
  out.fit.names = names;
  out.fit.metadata["profile"] = "voigt (Faddeeva, Weideman N=32)";
  out.populations.assign(n_peaks, 0.0);
  out.population_sigmas.assign(n_peaks, 0.0);

  const double ymax = *std::max_element(y.begin(), y.end());
  const double ymin = *std::min_element(y.begin(), y.end());
  if (!(ymax - ymin > 1e-12)) {
    out.fit.values.assign(np, 0.0);
    out.fit.sigmas.assign(np, kInf);
    out.fit.converged = false;
    out.fit.metadata["reason"] = "no signal above baseline";
    return out;
  }

  const double dir = spacing_hint < 0 ? -1.0 : 1.0;
  double c0 = options.center_hint;
  if (std::isnan(c0)) {
    // Outermost local maximum above 20% of the peak, on the side opposite to the comb direction.
    const double level = ymin + 0.2 * (ymax - ymin);
    c0 = f[std::max_element(y.begin(), y.end()) - y.begin()];
    for (int k = 1; k + 1 < m; ++k) {
      if (y[k] >= level && y[k] >= y[k - 1] && y[k] >= y[k + 1] && (f[k] - c0) * dir < 0) c0 = f[k];
    }
  }
  const double abs_sp = std::abs(spacing_hint);
  auto interp = [&](double x) {
    if (x <= f.front()) return y.front();
    if (x >= f.back()) return y.back();
    const size_t k = std::upper_bound(f.begin(), f.end(), x) - f.begin();
    const double w = (x - f[k - 1]) / (f[k] - f[k - 1]);
    return (1 - w) * y[k - 1] + w * y[k];
  };

  auto peak_shape = [](double x, double s, double g) { return voigt_profile(x, s, g) / voigt_profile(0.0, s, g); };
  auto model = [&](const double* p, double* r) {
    for (int i = 0; i < m; ++i) {
      double v = p[4];
      for (int n = 0; n < n_peaks; ++n) {
        const double c = p[0] + n * p[1] + (n > 0 ? p[5 + n_peaks + n - 1] : 0.0);
        v += p[5 + n] * peak_shape(f[i] - c, p[2], p[3]);
      }
      r[i] = v - y[i];
    }
  };

  std::vector<double> lo(np), hi(np);
  const double width_cap = std::max(span, 1.0);
  lo[0] = f.front() - 0.1 * span;
  hi[0] = f.back() + 0.1 * span;
  lo[1] = n_peaks > 1 ? (dir > 0 ? 0.5 * abs_sp : -1.5 * abs_sp) : -kInf;
  hi[1] = n_peaks > 1 ? (dir > 0 ? 1.5 * abs_sp : -0.5 * abs_sp) : kInf;
  lo[2] = 1e-6 * width_cap;
  hi[2] = width_cap;
  lo[3] = 1e-6 * width_cap;
  hi[3] = width_cap;
  lo[4] = -kInf;
  hi[4] = kInf;
  for (int n = 0; n < n_peaks; ++n) {
    lo[5 + n] = 0.0;
    hi[5 + n] = kInf;
  }
  for (int n = 1; n < n_peaks; ++n) {
    lo[4 + n_peaks + n] = -options.max_center_deviation * abs_sp;
    hi[4 + n_peaks + n] = options.max_center_deviation * abs_sp;
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LsqResult best;
  best.cost = kInf;
  const int starts = std::max(1, options.starts);
  for (int s = 0; s < starts; ++s) {
    // The first start is the unjittered guess.
    const double j = s == 0 ? 0.0 : 1.0;
    std::vector<double> x(np, 0.0);
    x[0] = c0 + j * u(rng) * 0.25 * (n_peaks > 1 ? abs_sp : options.gamma_hint);
    x[1] = n_peaks > 1 ? spacing_hint * (1.0 + j * 0.1 * u(rng)) : 0.0;
    x[2] = options.sigma_hint * std::pow(2.0, j * u(rng));
    x[3] = options.gamma_hint * std::pow(2.0, j * u(rng));
    x[4] = ymin;
    for (int n = 0; n < n_peaks; ++n) x[5 + n] = std::max(0.0, interp(x[0] + n * x[1]) - ymin);
    LsqResult r = solve(model, m, x, lo, hi, false);
    if (r.cost < best.cost) best = r;
  }
  best = solve(model, m, best.x, lo, hi, true);
  if (n_peaks == 1) best.sigmas[1] = 0.0;

  out.fit = to_fit_result(names, best);
  out.fit.metadata["profile"] = "voigt (Faddeeva, Weideman N=32)";
  const double* p = best.x.data();
  double hsum = 0.0;
  for (int n = 0; n < n_peaks; ++n) hsum += p[5 + n];
  if (!(hsum > 1e-12 * std::max(1.0, std::abs(ymax)))) {
    out.fit.converged = false;
    out.fit.metadata["reason"] = "all fitted heights vanish";
    return out;
  }
  for (int n = 0; n < n_peaks; ++n) {
    out.populations[n] = p[5 + n] / hsum;
    out.population_sigmas[n] = best.sigmas[5 + n] / hsum;
  }
  if (n_peaks > 1 && std::abs(p[1]) < 0.5 * voigt_fwhm(p[2], p[3])) {
    out.overlapping = true;
    out.fit.metadata["warning"] = "peak spacing below half-width; populations degenerate";
  }
  return out;
}

int default_peak_count(const SpectrumTrace& trace, double center0, double spacing) {
  trace.validate();
  if (spacing == 0.0) throw std::invalid_argument("default_peak_count: spacing must be nonzero");
  const auto& f = trace.frequencies;
  const auto& y = trace.populations;
  const double base = *std::min_element(y.begin(), y.end());
  // Moment of the trace sampled on the comb; line tails between teeth would bias it upwards.
  double w = 0.0, wn = 0.0;
  for (int n = 0;; ++n) {
    const double x = center0 + n * spacing;
    if (x < f.front() || x > f.back()) break;
    const size_t k = std::min<size_t>(std::lower_bound(f.begin(), f.end(), x) - f.begin(), f.size() - 1);
    const size_t j = k == 0 ? 0 : k - 1;
    const double v = (k == j ? y[k] : y[j] + (y[k] - y[j]) * (x - f[j]) / (f[k] - f[j])) - base;
    w += v;
    wn += v * n;
  }
  const double nbar = w > 0 ? std::max(0.0, wn / w) : 0.0;
  return std::max(1, static_cast<int>(std::ceil(nbar + 4.0 * std::sqrt(nbar))));
}

// ---------------------------------------------------------------------------------------------
// Populations

double PoissonFit::beta() const { return std::sqrt(nbar); }

PoissonFit poisson_fit(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("poisson_fit: empty distribution");
  double s = 0.0;
  bool any = false;
  for (double x : p) {
    s += x;
    any = any || x != 0.0;
  }
  if (!any) throw std::invalid_argument("poisson_fit: all-zero populations");
  if (std::abs(s - 1.0) > 0.02) throw std::invalid_argument("poisson_fit: populations must sum to 1 within 2%");
  const int m = static_cast<int>(p.size());
  auto model = [&](const double* x, double* r) {
    const double nb = x[0];
    double term = std::exp(-nb);
    for (int n = 0; n < m; ++n) {
      if (n > 0) term *= nb / n;
      r[n] = term - p[n];
    }
  };
  double mean = 0.0;
  for (int n = 0; n < m; ++n) mean += n * p[n];
  LsqResult r = solve(model, m, {std::max(mean / s, 1e-3)}, {0.0}, {kInf});
  PoissonFit out;
  out.nbar = r.x[0];
  out.sigma = r.sigmas[0];
  out.fit = to_fit_result({"nbar"}, r);
  return out;
}

double beta_decay_ratio(double kappa_total, double tau_spec) {
  if (kappa_total < 0.0) throw std::invalid_argument("beta_decay_ratio: kappa must be >= 0");
  if (!(tau_spec > 0.0)) throw std::invalid_argument("beta_decay_ratio: tau must be > 0");
  const double x = 2 * M_PI * kappa_total * tau_spec;
  if (x == 0.0) return 1.0;
  return -std::expm1(-x) / x;
}

LinearFit calibration_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("calibration_fit: length mismatch");
  const size_t n = x.size();
  if (n < 3) throw std::invalid_argument("calibration_fit: needs at least 3 points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("calibration_fit: drive amplitudes are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (size_t i = 0; i < n; ++i) ssr += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
  const double s2 = ssr / (n - 2);
  f.slope_sigma = std::sqrt(s2 / sxx);
  f.intercept_sigma = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  f.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

double parity_from_populations(std::span<const double> p) {
  double s = 0.0;
  for (size_t n = 0; n < p.size(); ++n) s += (n % 2 == 0 ? 1.0 : -1.0) * p[n];
  return s;
}

// ---------------------------------------------------------------------------------------------
// Decays

FitResult decay_fit(std::span<const double> t, std::span<const double> y, DecayModel model) {
  if (t.size() != y.size()) throw std::invalid_argument("decay_fit: length mismatch");
  const int m = static_cast<int>(t.size());
  if (m < 8) throw std::invalid_argument("decay_fit: needs at least 8 samples");
  const bool sine = model == DecayModel::exponential_sine;
  std::vector<std::string> names = sine ? std::vector<std::string>{"amplitude", "lifetime", "frequency", "phase", "offset"}
                                        : std::vector<std::string>{"amplitude", "lifetime", "offset"};
  const double span = t[m - 1] - t[0];
  const double ymax = *std::max_element(y.begin(), y.end());
  const double ymin = *std::min_element(y.begin(), y.end());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / m;

  auto flagged = [&](const std::string& reason, std::vector<double> values) {
    FitResult f;
    f.names = names;
    f.values = std::move(values);
    f.sigmas.assign(names.size(), kInf);
    f.converged = false;
    f.metadata["reason"] = reason;
    return f;
  };
  if (!(ymax - ymin > 1e-9 * std::max(1.0, std::abs(mean)))) {
    std::vector<double> v(names.size(), 0.0);
    v[1] = kInf;
    v.back() = mean;
    return flagged("constant trace; divergent lifetime", v);
  }

  // Lifetime is fitted as a rate so a non-decaying trace stays well conditioned.
  LsqResult best;
  best.cost = kInf;
  if (!sine) {
    auto f = [&](const double* p, double* r) {
      for (int i = 0; i < m; ++i) r[i] = p[0] * std::exp(-(t[i] - t[0]) * p[1]) + p[2] - y[i];
    };
    const double c = y[m - 1];
    const double a = y[0] - c;
    double tau = span / 2;
    for (int i = 0; i < m; ++i)
      if (std::abs(y[i] - c) < std::abs(a) / std::exp(1.0)) {
        tau = std::max(t[i] - t[0], span / m);
        break;
      }
    for (double k : {1.0, 0.3, 3.0}) {
      LsqResult r = solve(f, m, {a, 1.0 / (k * tau), c}, {-kInf, 0.0, -kInf}, {kInf, kInf, kInf}, false);
      if (r.cost < best.cost) best = r;
    }
    best = solve(f, m, best.x, {-kInf, 0.0, -kInf}, {kInf, kInf, kInf});
  } else {
    auto f = [&](const double* p, double* r) {
      for (int i = 0; i < m; ++i)
        r[i] = p[0] * std::exp(-(t[i] - t[0]) * p[1]) * std::sin(2 * M_PI * p[2] * (t[i] - t[0]) + p[3]) + p[4] - y[i];
    };
    // Coarse periodogram for the frequency guess.
    const double nyq = 0.5 * (m - 1) / span;
    double fbest = 1.0 / span, pbest = -1.0;
    for (int k = 1; k <= 4 * m; ++k) {
      const double fr = nyq * k / (4.0 * m);
      std::complex<double> s = 0.0;
      for (int i = 0; i < m; ++i) s += (y[i] - mean) * std::exp(std::complex<double>(0, -2 * M_PI * fr * (t[i] - t[0])));
      if (std::abs(s) > pbest) {
        pbest = std::abs(s);
        fbest = fr;
      }
    }
    const double amp = 0.5 * (ymax - ymin);
    for (double ph : {0.0, M_PI / 2, M_PI, 3 * M_PI / 2})
      for (double k : {0.5, 2.0}) {
        LsqResult r = solve(f, m, {amp, 1.0 / (k * span), fbest, ph, mean}, {0.0, 0.0, 0.0, -kInf, -kInf},
                            {kInf, kInf, 2 * nyq, kInf, kInf}, false);
        if (r.cost < best.cost) best = r;
      }
    best = solve(f, m, best.x, {0.0, 0.0, 0.0, -kInf, -kInf}, {kInf, kInf, 2 * nyq, kInf, kInf});
    best.x[3] = std::remainder(best.x[3], 2 * M_PI);
  }
  // Convert the rate to a lifetime.
  const double rate = best.x[1];
  const double rate_sigma = best.sigmas[1];
  FitResult out = to_fit_result(names, best);
  if (!(rate * span > 1e-3)) {
    out.values[1] = kInf;
    out.sigmas[1] = kInf;
    out.converged = false;
    out.metadata["reason"] = "divergent lifetime";
    return out;
  }
  out.values[1] = 1.0 / rate;
  out.sigmas[1] = rate_sigma / (rate * rate);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Wigner maps

void WignerMap::validate() const {
  if (values.rows() != static_cast<long>(re_axis.size()) || values.cols() != static_cast<long>(im_axis.size()))
    throw std::invalid_argument("WignerMap: value grid does not match axes");
  const double bound = 2.0 / M_PI + 0.05;
  if (values.size() > 0 && values.cwiseAbs().maxCoeff() > bound)
    throw std::invalid_argument("WignerMap: |W| exceeds 2/pi + 0.05");
}

WignerMap wigner_assemble(const std::vector<double>& re_axis, const std::vector<double>& im_axis,
                          const Eigen::MatrixXd& parities, double calibration_scale) {
  if (parities.rows() != static_cast<long>(re_axis.size()) || parities.cols() != static_cast<long>(im_axis.size()))
    throw std::invalid_argument("wigner_assemble: parity grid does not match axes");
  for (long i = 0; i < parities.rows(); ++i)
    for (long j = 0; j < parities.cols(); ++j)
      if (!std::isfinite(parities(i, j)))
        throw std::invalid_argument("wigner_assemble: missing grid point (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
  if (!(calibration_scale > 0.0)) throw std::invalid_argument("wigner_assemble: calibration scale must be positive");
  WignerMap w;
  w.calibration_scale = calibration_scale;
  for (double x : re_axis) w.re_axis.push_back(x * calibration_scale);
  for (double x : im_axis) w.im_axis.push_back(x * calibration_scale);
  w.values = (2.0 / M_PI) * parities;
  w.validate();
  return w;
}

}  // namespace cqad
