#include "cli_app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "cqad/sw_perturbation.hpp"

namespace cqad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json fit_json(const FitResult& f) {
  json params = json::object();
  for (size_t i = 0; i < f.names.size(); ++i)
    params[f.names[i]] = {{"value", round12(f.values[i])},
                          {"sigma", i < f.sigmas.size() ? round12(f.sigmas[i]) : 0.0}};
  json meta = json::object();
  for (const auto& [k, v] : f.metadata) meta[k] = v;
  return {{"converged", f.converged},
          {"residual_norm", round12(f.residual_norm)},
          {"parameters", params},
          {"metadata", meta}};
}

// A noiseless oscillation has a divergent lifetime but a valid frequency.
bool frequency_valid(const FitResult& f) {
  if (f.converged) return true;
  auto r = f.metadata.find("reason");
  return r != f.metadata.end() && r->second == "divergent lifetime";
}

// Finite numbers only; JSON has no inf/nan.
void put(json& metrics, const std::string& key, double v) {
  metrics[key] = std::isfinite(v) ? json(round12(v)) : json(nullptr);
}

size_t nearest_index(const std::vector<double>& axis, double x) {
  size_t best = 0;
  for (size_t i = 1; i < axis.size(); ++i)
    if (std::abs(axis[i] - x) < std::abs(axis[best] - x)) best = i;
  return best;
}

double uniform_step(const std::vector<double>& axis) {
  if (axis.size() < 2) return 0.0;
  const double h = (axis.back() - axis.front()) / (axis.size() - 1);
  for (size_t i = 1; i < axis.size(); ++i)
    if (std::abs(axis[i] - axis[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h))) return 0.0;
  return std::abs(h);
}

int sign_changes(const std::vector<double>& v) {
  int n = 0, last = 0;
  for (double x : v) {
    const int s = x > 0 ? 1 : (x < 0 ? -1 : 0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++n;
    last = s;
  }
  return n;
}

std::vector<double> grid_from(double lo, double hi, double step) {
  std::vector<double> g;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < n; ++i) g.push_back(lo + i * step);
  return g;
}

std::string point_label(const SystemParams& p, double delta, size_t index) {
  for (const auto& op : p.operating_points())
    if (op.delta == delta) return op.label;
  return "d" + std::to_string(index);
}

double qubit_excited(const DensityMatrix& rho) {
  CMatrix pe = CMatrix::Zero(rho.config().qubit_levels(), rho.config().qubit_levels());
  pe(1, 1) = 1.0;
  return expectation(rho, tensor(rho.config(), pe, {})).real();
}

void run_spectroscopy(const ExperimentSpec& spec, const SequenceSettings& s, const RunManifest& m, Artifacts& a,
                      json& metrics, json& warnings) {
  const auto& prep = spec.preparation;
  const double delta = spec.detuning.value_or(prep.target == PrepTarget::coherent ? s.params.delta_coherent
                                                                                  : s.params.delta_fock);
  const auto rho = prepare_state(prep, s);
  const auto pops = phonon_populations(rho, 0);
  const double f0 = spectroscopy_peak(s, delta, 0);
  const double spacing = spectroscopy_peak(s, delta, 1) - f0;

  std::vector<double> grid;
  if (auto* f = spec.axis("frequency")) {
    grid = *f;
  } else {
    int n_hi = 0;
    for (size_t n = 0; n < pops.size(); ++n)
      if (pops[n] > 0.01) n_hi = static_cast<int>(n);
    const double far = f0 + (n_hi + 1) * spacing;
    grid = grid_from(std::min(f0, far) - 60e3, std::max(f0, far) + 60e3, 5e3);
  }

  SpectroscopyOptions opt;
  opt.duration = spec.probe_duration;
  opt.amplitude = spec.probe_amplitude;
  const auto trace = qubit_spectroscopy(rho, delta, grid, s, opt);
  if (auto w = trace.metadata.find("warning"); w != trace.metadata.end()) warnings.push_back(w->second);

  int peaks = spec.peaks > 0 ? spec.peaks : default_peak_count(trace, f0, spacing);
  peaks = std::min(peaks, spec.phonon_dim);
  VoigtFitOptions vo;
  vo.center_hint = f0;
  vo.seed = m.seed;
  const auto fit = voigt_sum_fit(trace, peaks, spacing, vo);
  if (auto w = fit.fit.metadata.find("warning"); w != fit.fit.metadata.end()) warnings.push_back(w->second);
  a.fits["voigt"] = fit_json(fit.fit);

  Table raw{"results.csv", {"frequency", "pe"}, {}};
  for (size_t i = 0; i < grid.size(); ++i) raw.rows.push_back({grid[i], trace.populations[i]});
  a.tables.push_back(raw);

  double pe_max = 0.0;
  for (double p : trace.populations) pe_max = std::max(pe_max, p);
  put(metrics, "detuning", delta);
  put(metrics, "expected_c0", f0);
  put(metrics, "expected_spacing", spacing);
  put(metrics, "pe_max", pe_max);
  put(metrics, "peaks", peaks);
  put(metrics, "fit_converged", fit.fit.converged ? 1.0 : 0.0);
  double prepared_nbar = 0.0;
  for (size_t n = 0; n < pops.size(); ++n) prepared_nbar += n * pops[n];
  put(metrics, "prepared_nbar", prepared_nbar);
  if (!fit.fit.converged) {
    warnings.push_back("voigt fit did not converge");
    return;
  }
  for (const char* k : {"c0", "spacing", "sigma", "gamma"}) put(metrics, k, fit.fit.value(k));

  Table plot{"populations.csv", {"n", "p_fit", "p_sigma", "p_poisson", "p_prepared"}, {}};
  PoissonFit pf;
  bool poisson_ok = true;
  try {
    pf = poisson_fit(fit.populations);
    a.fits["poisson"] = fit_json(pf.fit);
    put(metrics, "nbar", pf.nbar);
    put(metrics, "nbar_sigma", pf.sigma);
    put(metrics, "beta_fit", pf.beta());
  } catch (const std::invalid_argument& e) {
    poisson_ok = false;
    warnings.push_back(std::string("poisson fit skipped: ") + e.what());
  }
  for (int n = 0; n < peaks; ++n) {
    const double pp = poisson_ok ? std::exp(-pf.nbar) * std::pow(pf.nbar, n) / std::tgamma(n + 1.0) : 0.0;
    plot.rows.push_back({double(n), fit.populations[n], fit.population_sigmas[n], pp,
                         n < static_cast<int>(pops.size()) ? pops[n] : 0.0});
    put(metrics, "p_" + std::to_string(n), fit.populations[n]);
  }
  put(metrics, "parity_from_spectrum", parity_from_populations(fit.populations));
  a.tables.push_back(plot);
}

void run_parity(const ExperimentSpec& spec, const SequenceSettings& s, Artifacts& a, json& metrics) {
  const bool echo = spec.kind == ExperimentKind::echo_parity;
  const auto variant = echo ? ParityVariant::echo : ParityVariant::ramsey;
  const auto rho = prepare_state(spec.preparation, s);
  std::vector<double> times = spec.axis("time") ? *spec.axis("time") : std::vector<double>{parity_time(s)};

  std::vector<ParityResult> res(times.size());
  std::vector<ParityCalibration> cals(times.size());
  for (size_t i = 0; i < times.size(); ++i) {
    cals[i] = calibrate_parity(variant, s, times[i], spec.normalize);
    if (spec.averaging == PhaseAveraging::single)
      res[i] = echo ? echo_parity(rho, spec.theta, s, cals[i]) : ramsey_parity(rho, times[i], spec.theta, s, cals[i]);
    else
      res[i] = four_phase_average(rho, s, cals[i], spec.averaging == PhaseAveraging::two_phase);
  }

  Table raw{"results.csv", {"time", "parity", "raw_sigma_z", "psi", "contrast", "baseline"}, {}};
  for (size_t i = 0; i < times.size(); ++i)
    raw.rows.push_back({times[i], res[i].value, res[i].raw_sigma_z, cals[i].psi, cals[i].contrast, cals[i].baseline});
  a.tables.push_back(raw);

  put(metrics, "interaction_time", times.front());
  put(metrics, "parity", res.front().value);
  put(metrics, "contrast", cals.front().contrast);
  put(metrics, "expected_parity", parity_from_populations(phonon_populations(rho, 0)));
  put(metrics, "phases", static_cast<double>(res.front().phases_used.size()));
  if (times.size() > 1) {
    double lo = res[0].value, hi = lo;
    for (size_t i = 0; i < times.size(); ++i) {
      lo = std::min(lo, res[i].value);
      hi = std::max(hi, res[i].value);
      put(metrics, "parity_" + std::to_string(i), res[i].value);
    }
    put(metrics, "parity_min", lo);
    put(metrics, "parity_max", hi);
  }
  if (times.size() >= 8) {
    std::vector<double> v;
    for (const auto& r : res) v.push_back(r.value);
    const auto fit = decay_fit(times, v, DecayModel::exponential_sine);
    a.fits["oscillation"] = fit_json(fit);
    if (frequency_valid(fit)) {
      put(metrics, "oscillation_frequency", fit.value("frequency"));
      put(metrics, "oscillation_lifetime", fit.value("lifetime"));
    }
  }
}

void run_wigner(const ExperimentSpec& spec, const SequenceSettings& s, Artifacts& a, json& metrics) {
  if (spec.averaging == PhaseAveraging::two_phase)
    throw ValidationError(spec.source + ": field 'averaging': wigner supports single or four_phase");
  WignerOptions o;
  o.variant = spec.wigner_variant;
  o.four_phase = spec.averaging == PhaseAveraging::four_phase;
  o.normalize = spec.normalize;
  const auto& re = *spec.axis("re");
  const auto& im = *spec.axis("im");
  const auto rho = prepare_state(spec.preparation, s);
  const auto map = wigner_scan(rho, re, im, s, o);

  Table raw{"results.csv", {"beta_re", "beta_im", "parity"}, {}};
  Table plot{"wigner.csv", {"beta_re", "beta_im", "w"}, {}};
  double lo = map.values(0, 0), hi = lo, neg = 0.0;
  for (size_t i = 0; i < re.size(); ++i)
    for (size_t j = 0; j < im.size(); ++j) {
      const double w = map.values(i, j);
      raw.rows.push_back({map.re_axis[i], map.im_axis[j], w * kPi / 2});
      plot.rows.push_back({map.re_axis[i], map.im_axis[j], w});
      lo = std::min(lo, w);
      hi = std::max(hi, w);
      neg += std::max(-w, 0.0);
    }
  a.tables.push_back(raw);
  a.tables.push_back(plot);

  const size_t i0 = nearest_index(re, 0.0), j0 = nearest_index(im, 0.0);
  put(metrics, "w_origin", map.values(i0, j0));
  put(metrics, "origin_re", re[i0]);
  put(metrics, "origin_im", im[j0]);
  put(metrics, "w_min", lo);
  put(metrics, "w_max", hi);
  const double area = uniform_step(re) * uniform_step(im);
  if (area > 0) put(metrics, "negative_volume", neg * area);
  std::vector<double> cut;
  for (size_t i = 0; i < re.size(); ++i) cut.push_back(map.values(i, j0));
  put(metrics, "cut_sign_changes", sign_changes(cut));
}

void run_fock_check(const ExperimentSpec& spec, const SequenceSettings& s, Artifacts& a, json& metrics) {
  const auto rho = prepare_state(spec.preparation, s);
  const auto pops = phonon_populations(rho, 0);
  Table raw{"results.csv", {"n", "population"}, {}};
  double nbar = 0.0;
  for (size_t n = 0; n < pops.size(); ++n) {
    raw.rows.push_back({double(n), pops[n]});
    nbar += n * pops[n];
  }
  a.tables.push_back(raw);
  const int target = spec.preparation.target == PrepTarget::fock ? spec.preparation.fock_number : 0;
  put(metrics, "target", target);
  put(metrics, "p_target", pops[target]);
  put(metrics, "nbar", nbar);
  put(metrics, "parity", parity_from_populations(pops));
  put(metrics, "qubit_excited", qubit_excited(rho));
  put(metrics, "purity", rho.purity());
}

void run_coherence(const ExperimentSpec& spec, const SequenceSettings& s, Artifacts& a, json& metrics) {
  const bool phonon = spec.subject == "phonon";
  const bool t1 = spec.kind == ExperimentKind::t1;
  const auto kind = phonon ? (t1 ? CoherenceKind::phonon_t1 : CoherenceKind::phonon_t2)
                           : (t1 ? CoherenceKind::qubit_t1 : CoherenceKind::qubit_t2);
  const auto r = coherence_protocol(kind, spec.sweep.at("delay"), s, spec.artificial_detuning);
  Table raw{"results.csv", {"delay", "signal"}, {}};
  for (size_t i = 0; i < r.times.size(); ++i) raw.rows.push_back({r.times[i], r.signal[i]});
  a.tables.push_back(raw);
  a.fits["decay"] = fit_json(r.fit);

  const auto& n = s.noise;
  const double rate = phonon ? (t1 ? n.phonon_kappa1 : n.phonon_kappa1 / 2 + n.phonon_kappa_phi)
                             : (t1 ? n.qubit_gamma1 : n.qubit_gamma1 / 2 + n.qubit_gamma_phi);
  put(metrics, "nominal_lifetime", rate > 0 ? 1 / (kTwoPi * rate) : INFINITY);
  put(metrics, "fit_converged", r.fit.converged ? 1.0 : 0.0);
  put(metrics, "lifetime", r.fit.value("lifetime"));
  put(metrics, "lifetime_sigma", r.fit.sigma("lifetime"));
  if (!t1 && frequency_valid(r.fit)) put(metrics, "frequency", r.fit.value("frequency"));
}

void run_chevron(const ExperimentSpec& spec, const SequenceSettings& s, Artifacts& a, json& metrics) {
  const auto& det = spec.sweep.at("detuning");
  const auto& times = spec.sweep.at("time");
  for (double t : times)
    if (t < 0) throw ValidationError(spec.source + ": field 'sweep.time': chevron times must be non-negative");
  HilbertConfig config(2, {spec.phonon_dim});
  const auto map = vacuum_rabi_chevron(s.params, config, s.noise, det, times, s.evolve);
  Table raw{"results.csv", {"detuning", "time", "pe"}, {}};
  for (size_t i = 0; i < det.size(); ++i)
    for (size_t j = 0; j < times.size(); ++j) raw.rows.push_back({det[i], times[j], map(i, j)});
  a.tables.push_back(raw);
  Table plot = raw;
  plot.file = "chevron.csv";
  a.tables.push_back(plot);

  const size_t i0 = nearest_index(det, 0.0);
  std::vector<double> row(times.size());
  for (size_t j = 0; j < times.size(); ++j) row[j] = map(i0, j);
  put(metrics, "row_detuning", det[i0]);
  put(metrics, "row_contrast", *std::max_element(row.begin(), row.end()) - *std::min_element(row.begin(), row.end()));
  const double expected = std::hypot(2 * s.params.g_lg00, det[i0]);
  put(metrics, "expected_rabi_frequency", expected);
  if (times.size() >= 8 && std::is_sorted(times.begin(), times.end())) {
    const auto fit = decay_fit(times, row, DecayModel::exponential_sine);
    a.fits["rabi"] = fit_json(fit);
    if (frequency_valid(fit)) {
      put(metrics, "rabi_frequency", fit.value("frequency"));
      put(metrics, "rabi_frequency_ratio", fit.value("frequency") / expected);
      put(metrics, "rabi_lifetime", fit.value("lifetime"));
    }
  }
}

void run_chi_scan(const ExperimentSpec& spec, const SystemParams& p, Artifacts& a, json& metrics) {
  std::vector<double> deltas;
  if (auto* d = spec.axis("delta")) deltas = *d;
  else deltas = {p.delta_fock, p.delta_coherent, p.delta_ramsey, p.delta_rest};
  const HilbertConfig config(3, {spec.n_max + 9});
  Table raw{"results.csv", {"delta", "n", "shift_numeric", "chi_analytic_full", "chi_analytic_approx"}, {}};
  for (size_t k = 0; k < deltas.size(); ++k) {
    const double d = deltas[k];
    const auto shifts = chi_numeric(p, config, d, spec.n_max + 1);
    const double full = chi_analytic(p.g_lg00, d, p.alpha, ChiForm::full);
    const double approx = chi_analytic(p.g_lg00, d, p.alpha, ChiForm::approximate);
    const std::string lbl = point_label(p, d, k);
    put(metrics, "chi_full_" + lbl, full);
    put(metrics, "chi_approx_" + lbl, approx);
    bool monotonic = true;
    for (size_t n = 0; n < shifts.size(); ++n) {
      raw.rows.push_back({d, double(n), shifts[n], full, approx});
      put(metrics, "shift_" + lbl + "_n" + std::to_string(n), shifts[n]);
      if (n > 0 && !(std::abs(shifts[n]) < std::abs(shifts[n - 1]))) monotonic = false;
    }
    put(metrics, "monotonic_" + lbl, monotonic ? 1.0 : 0.0);
    put(metrics, "spread_" + lbl, (std::abs(shifts.front()) - std::abs(shifts.back())) / std::abs(shifts.front()));
  }
  a.tables.push_back(raw);
  Table plot = raw;
  plot.file = "chi.csv";
  a.tables.push_back(plot);
}

std::string csv_text(const Table& t, const std::string& hash) {
  std::ostringstream os;
  for (size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << "\n# params_sha256=" << hash << "\n";
  for (const auto& r : t.rows) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_number(r[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace

double round12(double x) {
  if (!std::isfinite(x) || x == 0.0) return x == 0.0 ? 0.0 : x;
  return std::stod(format_number(x));
}

std::string format_number(double x) {
  if (x == 0.0) return "0";  // folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

Artifacts run_experiment(const ExperimentSpec& spec, const SystemParams& params, const RunManifest& manifest,
                         const Logger& log) {
  Artifacts a;
  json metrics = json::object();
  json warnings = json::array();
  const auto s = experiment_settings(spec, params, manifest.jobs);
  log("running " + to_string(spec.kind));
  switch (spec.kind) {
    case ExperimentKind::spectroscopy: run_spectroscopy(spec, s, manifest, a, metrics, warnings); break;
    case ExperimentKind::ramsey_parity:
    case ExperimentKind::echo_parity: run_parity(spec, s, a, metrics); break;
    case ExperimentKind::wigner: run_wigner(spec, s, a, metrics); break;
    case ExperimentKind::fock_prep_check: run_fock_check(spec, s, a, metrics); break;
    case ExperimentKind::t1:
    case ExperimentKind::t2_ramsey: run_coherence(spec, s, a, metrics); break;
    case ExperimentKind::rabi_chevron: run_chevron(spec, s, a, metrics); break;
    case ExperimentKind::chi_scan: run_chi_scan(spec, params, a, metrics); break;
  }
  const std::string hash = sha256_hex(params_to_text(params));
  a.summary = {{"kind", to_string(spec.kind)},
               {"params_sha256", hash},
               {"paper_defaults", manifest.paper_defaults},
               {"seed", manifest.seed},
               {"repetitions", spec.repetitions},  // recorded only; the simulation is deterministic
               {"metrics", metrics},
               {"warnings", warnings}};
  return a;
}

int run(const RunManifest& m) {
  auto log = [&](const std::string& msg) {
    if (!m.quiet) std::cerr << msg << "\n";
  };
  Artifacts a;
  SystemParams params;
  try {
    if (m.jobs < 1) throw ValidationError("--jobs must be at least 1");
    if (m.paper_defaults && !m.params_path.empty())
      throw ValidationError("--paper-defaults and --params are mutually exclusive");
    if (!m.params_path.empty()) params = load_params(KeyValueDocument::load(m.params_path));
    const auto spec = load_experiment(KeyValueDocument::load(m.experiment_path), params);
    a = run_experiment(spec, params, m, log);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }

  const std::string hash = a.summary["params_sha256"];
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& t : a.tables) files.emplace_back(t.file, csv_text(t, hash));
  files.emplace_back("fit.json", a.fits.dump(2) + "\n");
  files.emplace_back("summary.json", a.summary.dump(2) + "\n");

  const fs::path dir(m.out_dir);
  std::error_code ec;
  const bool existed = fs::exists(dir, ec);
  std::vector<fs::path> written;
  try {
    fs::create_directories(dir);
    for (const auto& [name, text] : files) {
      const fs::path p = dir / name;
      std::ofstream out(p, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
      written.push_back(p);
      out << text;
      if (!out.flush()) throw std::runtime_error("write failed for '" + p.string() + "'");
      log("wrote " + p.string());
    }
  } catch (const std::exception& e) {
    for (const auto& p : written) fs::remove(p, ec);
    if (!existed) fs::remove(dir, ec);
    std::cerr << "validation error: output directory: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}

CompareReport compare_summaries(const json& reference, const json& candidate, const KeyValueDocument& tolerances) {
  if (!reference.contains("kind") || !candidate.contains("kind"))
    throw ValidationError("summary without 'kind'");
  if (reference["kind"] != candidate["kind"])
    throw ValidationError("kind mismatch: reference '" + reference["kind"].get<std::string>() + "' vs '" +
                          candidate["kind"].get<std::string>() + "'");
  struct Tol {
    double value;
    bool relative;
  };
  auto parse_tol = [&](const std::string& key) {
    std::string s = *tolerances.get_string(key);
    const bool rel = !s.empty() && s.back() == '%';
    if (rel) s.pop_back();
    double v;
    try {
      v = parse_quantity(s);
    } catch (const std::exception& e) {
      throw ValidationError(tolerances.where(key) + ": " + e.what());
    }
    if (v < 0) throw ValidationError(tolerances.where(key) + ": tolerance must be non-negative");
    return Tol{rel ? v / 100 : v, rel};
  };
  Tol fallback{1e-9, true};
  if (tolerances.has("*")) fallback = parse_tol("*");
  const json& ref = reference.at("metrics");
  const json& cand = candidate.at("metrics");
  for (const auto& [key, entry] : tolerances.entries())
    if (key != "*" && !ref.contains(key))
      throw ValidationError(tolerances.where(key) + ": not a metric of kind '" + reference["kind"].get<std::string>() + "'");

  CompareReport rep;
  for (const auto& [name, rv] : ref.items()) {
    MetricCheck c{name, false, ""};
    const Tol tol = tolerances.has(name) ? parse_tol(name) : fallback;
    if (!cand.contains(name)) {
      c.reason = "missing metric";
    } else if (rv.is_null() || cand[name].is_null()) {
      c.pass = rv.is_null() && cand[name].is_null();
      c.reason = c.pass ? "both non-finite" : "non-finite value";
    } else {
      const double r = rv.get<double>(), v = cand[name].get<double>();
      const double bound = tol.relative ? tol.value * std::abs(r) : tol.value;
      const double diff = std::abs(v - r);
      c.pass = diff <= bound;
      std::ostringstream os;
      os << "reference " << format_number(r) << ", new " << format_number(v) << ", |diff| " << format_number(diff)
         << (c.pass ? " <= " : " > ") << format_number(bound);
      if (tol.relative) os << " (" << format_number(tol.value * 100) << "%)";
      c.reason = os.str();
    }
    rep.pass = rep.pass && c.pass;
    rep.checks.push_back(c);
  }
  return rep;
}

int compare(const std::string& reference_path, const std::string& candidate_path, const std::string& tolerance_path,
            bool quiet) {
  try {
    auto load = [](const std::string& path) {
      std::ifstream in(path);
      if (!in) throw ValidationError("cannot open '" + path + "'");
      try {
        return json::parse(in);
      } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
      }
    };
    const json ref = load(reference_path), cand = load(candidate_path);
    KeyValueDocument tol;
    if (!tolerance_path.empty()) tol = KeyValueDocument::load(tolerance_path);
    const auto rep = compare_summaries(ref, cand, tol);
    for (const auto& c : rep.checks)
      if (!quiet || !c.pass) std::cout << (c.pass ? "PASS " : "FAIL ") << c.metric << ": " << c.reason << "\n";
    std::cout << (rep.pass ? "PASS" : "FAIL") << " overall\n";
    return rep.pass ? kOk : kComparison;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "validation error: malformed summary: " << e.what() << "\n";
    return kValidation;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Circuit QAD experiment runner"};
  app.require_subcommand(1);

  RunManifest m;
  auto* run_cmd = app.add_subcommand("run", "run an experiment spec and write artifacts");
  auto* params_opt = run_cmd->add_option("--params", m.params_path, "system parameter file (key = value)");
  run_cmd->add_option("--experiment", m.experiment_path, "experiment spec file")->required();
  run_cmd->add_option("--out", m.out_dir, "output directory")->capture_default_str();
  run_cmd->add_option("--jobs", m.jobs, "worker threads for sweep points")->capture_default_str();
  run_cmd->add_option("--seed", m.seed, "seed for fit multistarts")->capture_default_str();
  run_cmd->add_flag("--paper-defaults", m.paper_defaults, "use the preset device parameters")->excludes(params_opt);
  run_cmd->add_flag("--quiet", m.quiet, "no progress output");

  std::string ref, cand, tol;
  bool quiet = false;
  auto* cmp = app.add_subcommand("compare", "compare two summary.json files metric by metric");
  cmp->add_option("reference", ref, "reference summary")->required();
  cmp->add_option("candidate", cand, "new summary")->required();
  cmp->add_option("--tolerances", tol, "tolerance file (metric = 5% or absolute value)");
  cmp->add_flag("--quiet", quiet, "print failures only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }
  if (*run_cmd) return run(m);
  return compare(ref, cand, tol, quiet);
}

}  // namespace cqad::cli
