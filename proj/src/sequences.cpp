#include "cqad/sequences.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <boost/math/tools/minima.hpp>

namespace cqad {

namespace {

Ket ground_with_modes(const HilbertConfig& config, int n0) {
  std::vector<int> occ(config.mode_count(), 0);
  occ[0] = n0;
  return fock_state(config, occ, 0);
}

OperatorMatrix excited_projector(const HilbertConfig& config) {
  CMatrix p = CMatrix::Zero(config.qubit_levels(), config.qubit_levels());
  p(1, 1) = 1.0;
  return tensor(config, p, {});
}

// Qubit frame: keep the segment list on the rest reference so kick phases stay coherent.
Schedule on_rest(const SequenceSettings& s) {
  Schedule out;
  out.initial_detuning = s.params.delta_rest;
  out.qubit_reference = s.rest_reference();
  return out;
}

void add_interaction(Schedule& s, const SequenceSettings& st, double duration, double detuning) {
  Ramp r;
  if (st.ramp_duration > 0.0) r = {RampKind::linear, std::min(st.ramp_duration, duration)};
  s.add(Segment{duration, detuning, std::nullopt, std::nullopt, r});
}

void return_to_rest(Schedule& s, const SequenceSettings& st) {
  if (st.ramp_duration > 0.0)
    s.add(Segment{st.ramp_duration, st.params.delta_rest, std::nullopt, std::nullopt,
                  Ramp{RampKind::linear, st.ramp_duration}});
}

// Energy of the dressed state with maximal overlap on |q, n>, Hz.
double dressed_level(const Eigen::SelfAdjointEigenSolver<CMatrix>& es, const HilbertConfig& c, int q, int n) {
  const int row = c.index(q, std::vector<int>{n});
  Eigen::Index best = 0;
  es.eigenvectors().row(row).cwiseAbs2().maxCoeff(&best);
  return es.eigenvalues()(best);
}

// Dressed eigenbasis: column i is the eigenstate whose dominant bare component is basis state i.
CMatrix dressed_basis(const SystemParams& params, const HilbertConfig& c, double delta) {
  const CMatrix h = full_jc_hamiltonian(params, c, delta).matrix();
  // Excitation number commutes with H; a large multiple keeps the blocks apart in the eigensolver.
  const double lift = 10.0 * (h.cwiseAbs().sum() + 1.0);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h + lift * excitation_number(c).matrix());
  const int dim = c.dimension();
  CMatrix v = CMatrix::Zero(dim, dim);
  std::vector<bool> used(dim, false);
  for (int j = 0; j < dim; ++j) {
    Eigen::Index row = 0;
    es.eigenvectors().col(j).cwiseAbs2().maxCoeff(&row);
    if (used[row]) throw NumericError("dressed basis: ambiguous labels near delta = " + std::to_string(delta) + " Hz");
    used[row] = true;
    const cplx ph = es.eigenvectors()(row, j);
    v.col(row) = es.eigenvectors().col(j) * (std::abs(ph) / ph);
  }
  return v;
}

}  // namespace

void StatePrep::validate() const {
  if (target == PrepTarget::fock && fock_number < 0) throw std::invalid_argument("StatePrep: fock number must be >= 0");
  if (target == PrepTarget::fock && method == PrepMethod::swap_sequence && fock_number > 3)
    throw std::invalid_argument("StatePrep: swap_sequence supports fock numbers up to 3");
  if (method == PrepMethod::displacement_drive && target != PrepTarget::coherent)
    throw std::invalid_argument("StatePrep: displacement_drive only prepares coherent states");
  if (method == PrepMethod::swap_sequence && target != PrepTarget::fock && target != PrepTarget::vacuum &&
      target != PrepTarget::superposition_01)
    throw std::invalid_argument("StatePrep: swap_sequence prepares fock or superposition_01 targets");
  if (target == PrepTarget::custom && (custom.size() == 0 || custom.norm() == 0.0))
    throw std::invalid_argument("StatePrep: custom ket is empty");
  if (target == PrepTarget::coherent && method == PrepMethod::swap_sequence)
    throw std::invalid_argument("StatePrep: coherent targets need ideal_injection or displacement_drive");
}

SequenceSettings SequenceSettings::paper(const HilbertConfig& config) {
  SequenceSettings s;
  s.config = config;
  s.noise = paper_noise(s.params, s.params.delta_ramsey);
  return s;
}

double SequenceSettings::rest_reference() const { return dressed_qubit_frequency(params.g_lg00, params.delta_rest); }

double SequenceSettings::interaction_detuning() const {
  return std::isnan(ramsey_detuning) ? params.delta_ramsey : ramsey_detuning;
}

Schedule qubit_rotation(const SequenceSettings& settings, double angle, double phase) {
  Schedule s = on_rest(settings);
  if (settings.ideal_pulses) {
    s.add(QubitKick{angle, phase, 0.0});
    return s;
  }
  if (!(settings.pi_pulse_duration > 0.0)) throw std::invalid_argument("pi pulse duration must be > 0");
  Pulse p;
  p.amplitude = settings.rabi_rate();
  p.phase = phase;
  s.add(Segment{std::abs(angle) / kPi * settings.pi_pulse_duration, settings.params.delta_rest, p, std::nullopt, {}});
  if (angle < 0.0) std::get<Segment>(s.steps.back()).qubit_drive->phase += kPi;
  return s;
}

DensityMatrix fock_preparation(int m, PrepMethod method, const SequenceSettings& settings) {
  if (m < 0) throw std::invalid_argument("fock_preparation: M must be >= 0");
  const int d = settings.config.phonon_dim(0);
  if (m > d - 2)
    throw std::invalid_argument("fock_preparation: M = " + std::to_string(m) + " exceeds phonon truncation " +
                                std::to_string(d) + " - 2");
  if (method == PrepMethod::ideal_injection) return DensityMatrix::from_ket(ground_with_modes(settings.config, m));
  if (method != PrepMethod::swap_sequence)
    throw std::invalid_argument("fock_preparation: method must be ideal_injection or swap_sequence");
  if (m > 3) throw std::invalid_argument("fock_preparation: swap_sequence supports M <= 3");
  Evolver ev(settings.params, settings.config, settings.noise, settings.evolve);
  DensityMatrix rho = DensityMatrix::from_ket(ground_with_modes(settings.config, 0));
  const Schedule pi = qubit_rotation(settings, kPi, 0.0);
  for (int k = 1; k <= m; ++k) {
    rho = ev.evolve(pi, rho);
    rho = swap_gate(settings.params, settings.config, settings.noise, 0, k, settings.evolve)(rho);
  }
  return rho;
}

DensityMatrix prepare_state(const StatePrep& prep, const SequenceSettings& settings) {
  prep.validate();
  const HilbertConfig& c = settings.config;
  switch (prep.target) {
    case PrepTarget::vacuum:
      return DensityMatrix::from_ket(ground_with_modes(c, 0));
    case PrepTarget::fock:
      return fock_preparation(prep.fock_number, prep.method, settings);
    case PrepTarget::coherent: {
      if (prep.method == PrepMethod::ideal_injection) {
        if (c.mode_count() != 1) throw std::invalid_argument("prepare_state: coherent injection needs one mode");
        return DensityMatrix::from_ket(coherent_state(c, 0, prep.beta));
      }
      const double dur = settings.displacement_duration;
      const double amp = std::abs(prep.beta) / displacement_per_amplitude(dur);
      auto drive = displacement_drive(settings.params, c, settings.noise, amp, std::arg(prep.beta), dur,
                                      settings.evolve);
      return drive(DensityMatrix::from_ket(ground_with_modes(c, 0)));
    }
    case PrepTarget::superposition_01: {
      if (prep.method == PrepMethod::ideal_injection) {
        CVector v = (ground_with_modes(c, 0).amplitudes() + ground_with_modes(c, 1).amplitudes()) / std::sqrt(2.0);
        return DensityMatrix::from_ket(Ket(c, v));
      }
      Evolver ev(settings.params, c, settings.noise, settings.evolve);
      DensityMatrix rho = ev.evolve(qubit_rotation(settings, kPi / 2, 0.0),
                                    DensityMatrix::from_ket(ground_with_modes(c, 0)));
      return swap_gate(settings.params, c, settings.noise, 0, 1, settings.evolve)(rho);
    }
    case PrepTarget::custom: {
      if (prep.method != PrepMethod::ideal_injection)
        throw std::invalid_argument("prepare_state: custom kets are injected ideally");
      if (c.mode_count() != 1 || prep.custom.size() != c.phonon_dim(0))
        throw std::invalid_argument("prepare_state: custom ket length must equal the phonon dimension");
      CVector v = CVector::Zero(c.dimension());
      for (int n = 0; n < c.phonon_dim(0); ++n) v(c.index(0, std::vector<int>{n})) = prep.custom(n);
      return DensityMatrix::from_ket(Ket(c, v / v.norm()));
    }
  }
  throw std::invalid_argument("prepare_state: unknown target");
}

Schedule ramsey_schedule(const SequenceSettings& settings, double t, double theta, double psi) {
  if (!(t > 0.0)) throw std::invalid_argument("ramsey: interaction time must be > 0");
  Schedule s = qubit_rotation(settings, kPi / 2, theta);
  add_interaction(s, settings, t, settings.interaction_detuning());
  return_to_rest(s, settings);
  s.append(qubit_rotation(settings, kPi / 2, theta + psi));
  return s;
}

Schedule echo_schedule(const SequenceSettings& settings, double t, double theta, double psi) {
  if (!(t > 0.0)) throw std::invalid_argument("echo: interaction time must be > 0");
  const double dr = settings.interaction_detuning();
  Schedule s = qubit_rotation(settings, kPi / 2, theta);
  add_interaction(s, settings, t / 2, dr);
  return_to_rest(s, settings);
  s.append(qubit_rotation(settings, kPi, theta));
  add_interaction(s, settings, t / 2, -dr);
  return_to_rest(s, settings);
  s.append(qubit_rotation(settings, kPi / 2, theta + psi));
  return s;
}

Schedule parity_schedule(ParityVariant v, const SequenceSettings& settings, double t, double theta, double psi) {
  return v == ParityVariant::ramsey ? ramsey_schedule(settings, t, theta, psi)
                                    : echo_schedule(settings, t, theta, psi);
}

double parity_time(const SequenceSettings& settings) {
  const double chi =
      chi_analytic(settings.params.g_lg00, settings.interaction_detuning(), settings.params.alpha, ChiForm::approximate);
  return 0.5 / std::abs(chi);
}

ParityCalibration calibrate_parity(ParityVariant variant, const SequenceSettings& settings, double t, bool normalize) {
  // The reference is the vacuum: its result is independent of theta, so theta = 0 suffices. The state
  // before the last pulse is shared by every psi.
  Evolver ev(settings.params, settings.config, settings.noise, settings.evolve);
  const OperatorMatrix sz = qubit_operator(settings.config, QubitOp::sigma_z);
  Schedule pre = parity_schedule(variant, settings, t, 0.0, 0.0);
  pre.steps.pop_back();
  const DensityMatrix before =
      ev.evolve(pre, DensityMatrix::from_ket(ground_with_modes(settings.config, 0)));
  const double lag = kTwoPi * pre.qubit_reference * pre.total_duration();
  auto y = [&](double psi) {
    return expectation(ev.evolve(qubit_rotation(settings, kPi / 2, psi - lag), before), sz).real();
  };

  // Eight phases keep harmonics up to the seventh out of the mean and the first-harmonic estimate.
  constexpr int kPhases = 8;
  double samples[kPhases];
  parallel_for(kPhases, settings.jobs, [&](int k) { samples[k] = y(kTwoPi * k / kPhases); });
  cplx z = 0.0;
  double mean = 0.0;
  for (int k = 0; k < kPhases; ++k) {
    z += samples[k] * std::polar(1.0, -kTwoPi * k / kPhases);
    mean += samples[k] / kPhases;
  }
  if (!(std::abs(z) * 2.0 / kPhases > 1e-6)) throw NumericError("calibrate_parity: vacuum reference shows no contrast");
  const double guess = -std::arg(z);
  const auto best = boost::math::tools::brent_find_minima([&](double p) { return -y(p); }, guess - 0.5, guess + 0.5,
                                                          std::numeric_limits<double>::digits / 2);
  ParityCalibration cal;
  cal.variant = variant;
  cal.interaction_time = t;
  cal.psi = best.first;
  cal.baseline = mean;
  cal.contrast = -best.second - mean;
  cal.normalize = normalize;
  return cal;
}

namespace {

void check_calibration(const ParityCalibration& cal, ParityVariant v, double t) {
  if (cal.variant != v) throw std::invalid_argument("parity calibration was taken for a different sequence");
  if (std::abs(cal.interaction_time - t) > 1e-12 * std::max(1.0, std::abs(t)) + 1e-15)
    throw std::invalid_argument("parity calibration was taken at a different interaction time");
}

ParityResult run_parity(const DensityMatrix& prepared, ParityVariant v, double t, const std::vector<double>& thetas,
                        const SequenceSettings& settings, const ParityCalibration& cal) {
  check_calibration(cal, v, t);
  Evolver ev(settings.params, settings.config, settings.noise, settings.evolve);
  const OperatorMatrix sz = qubit_operator(settings.config, QubitOp::sigma_z);
  std::vector<double> raw(thetas.size());
  parallel_for(static_cast<int>(thetas.size()), settings.jobs, [&](int i) {
    raw[i] = expectation(ev.evolve(parity_schedule(v, settings, t, thetas[i], cal.psi), prepared), sz).real();
  });
  ParityResult r;
  for (double x : raw) r.raw_sigma_z += x / raw.size();
  r.value = cal.apply(r.raw_sigma_z);
  r.interaction_time = t;
  r.phases_used = thetas;
  return r;
}

std::vector<double> theta_set(bool four, bool two_phase, double theta0 = 0.0) {
  if (!four) return {theta0};
  if (two_phase) return {theta0, theta0 + kPi};
  return {theta0, theta0 + kPi / 2, theta0 + kPi, theta0 + 3 * kPi / 2};
}

}  // namespace

ParityResult ramsey_parity(const DensityMatrix& prepared, double t, double theta, const SequenceSettings& settings,
                           const ParityCalibration& calibration) {
  if (!(t > 0.0)) throw std::invalid_argument("ramsey_parity: t must be > 0");
  return run_parity(prepared, ParityVariant::ramsey, t, {theta}, settings, calibration);
}

ParityResult echo_parity(const DensityMatrix& prepared, double theta, const SequenceSettings& settings,
                         const ParityCalibration& calibration) {
  return run_parity(prepared, ParityVariant::echo, calibration.interaction_time, {theta}, settings, calibration);
}

ParityResult four_phase_average(const DensityMatrix& prepared, const SequenceSettings& settings,
                                const ParityCalibration& calibration, bool two_phase) {
  return run_parity(prepared, calibration.variant, calibration.interaction_time, theta_set(true, two_phase), settings,
                    calibration);
}

double spectroscopy_peak(const SequenceSettings& settings, double delta_operate, int n) {
  if (n < 0) throw std::invalid_argument("spectroscopy_peak: n must be >= 0");
  HilbertConfig c(settings.config.qubit_levels(), {n + 6});
  SystemParams p = settings.params;
  const CMatrix h = full_jc_hamiltonian(p, c, delta_operate).matrix() / kTwoPi;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  return dressed_level(es, c, 1, n) - dressed_level(es, c, 0, n);
}

SpectrumTrace qubit_spectroscopy(const DensityMatrix& prepared, double delta_operate,
                                 const std::vector<double>& freq_grid, const SequenceSettings& settings,
                                 const SpectroscopyOptions& options) {
  if (freq_grid.size() < 2) throw std::invalid_argument("qubit_spectroscopy: frequency grid needs >= 2 points");
  if (!(options.duration > 0.0) || !(options.amplitude > 0.0))
    throw std::invalid_argument("qubit_spectroscopy: probe duration and amplitude must be > 0");
  Evolver ev(settings.params, settings.config, settings.noise, settings.evolve);
  OperatorMatrix pe = excited_projector(settings.config);
  DensityMatrix start = prepared;
  if (options.adiabatic_stark) {
    const HilbertConfig& c = settings.config;
    const CMatrix v_op = dressed_basis(settings.params, c, delta_operate);
    const CMatrix w = v_op * dressed_basis(settings.params, c, settings.params.delta_rest).adjoint();
    start = DensityMatrix(c, w * prepared.matrix() * w.adjoint());
    CMatrix p = CMatrix::Zero(c.dimension(), c.dimension());
    for (int i = 0; i < c.dimension(); ++i)
      if (c.qubit_level_of(i) == 1) p += v_op.col(i) * v_op.col(i).adjoint();
    pe = OperatorMatrix(c, p);
  }
  SpectrumTrace trace;
  trace.frequencies = freq_grid;
  trace.populations.assign(freq_grid.size(), 0.0);
  trace.validate();
  parallel_for(static_cast<int>(freq_grid.size()), settings.jobs, [&](int i) {
    Pulse probe;
    probe.amplitude = options.amplitude;
    probe.carrier_detuning = freq_grid[i];
    Schedule s;
    s.initial_detuning = delta_operate;
    s.add(Segment{options.duration, delta_operate, probe, std::nullopt, {}});
    trace.populations[i] = expectation(ev.evolve(s, start), pe).real();
  });

  std::ostringstream det;
  det.precision(12);
  det << delta_operate;
  trace.metadata["detuning"] = det.str();
  trace.metadata["probe_duration"] = std::to_string(options.duration);
  trace.metadata["probe_amplitude"] = std::to_string(options.amplitude);
  std::string warn;
  const double pmax = *std::max_element(trace.populations.begin(), trace.populations.end());
  if (pmax > 0.4) warn += "peak excitation " + std::to_string(pmax) + " > 0.4 (outside linear response); ";
  const auto pops = phonon_populations(prepared, 0);
  int n_hi = 0;
  for (int n = 0; n < static_cast<int>(pops.size()); ++n)
    if (pops[n] > 0.01) n_hi = n;
  const double a = spectroscopy_peak(settings, delta_operate, 0);
  const double b = spectroscopy_peak(settings, delta_operate, n_hi);
  const double lo = std::min(a, b), hi = std::max(a, b);
  if (freq_grid.front() > lo || freq_grid.back() < hi)
    warn += "frequency grid does not span the expected peaks n = 0.." + std::to_string(n_hi) + "; ";
  if (!warn.empty()) trace.metadata["warning"] = warn.substr(0, warn.size() - 2);
  return trace;
}

namespace {

OperatorMatrix averaged_parity_observable(const SequenceSettings& settings, const ParityCalibration& cal,
                                          const std::vector<double>& thetas) {
  Evolver ev(settings.params, settings.config, settings.noise, settings.evolve);
  const OperatorMatrix sz = qubit_operator(settings.config, QubitOp::sigma_z);
  std::vector<CMatrix> parts(thetas.size());
  parallel_for(static_cast<int>(thetas.size()), settings.jobs, [&](int i) {
    parts[i] =
        ev.heisenberg(parity_schedule(cal.variant, settings, cal.interaction_time, thetas[i], cal.psi), sz).matrix();
  });
  CMatrix acc = CMatrix::Zero(settings.config.dimension(), settings.config.dimension());
  for (const auto& p : parts) acc += p;
  return OperatorMatrix(settings.config, acc / static_cast<double>(thetas.size()));
}

double displaced_parity(const OperatorMatrix& obs, const CMatrix& rho, const HilbertConfig& c, cplx beta,
                        const ParityCalibration& cal) {
  const CMatrix d = displacement_operator(c, 0, -beta).matrix();
  const CMatrix shifted = d * rho * d.adjoint();
  return cal.apply((obs.matrix().cwiseProduct(shifted.transpose())).sum().real());
}

void check_displacement_guard(const HilbertConfig& c, double max_abs_beta) {
  const int need = required_dimension(cplx(max_abs_beta, 0.0));
  if (c.phonon_dim(0) < need)
    throw std::invalid_argument("wigner_scan: |beta| = " + std::to_string(max_abs_beta) +
                                " exceeds the truncation guard; requires dimension >= " + std::to_string(need));
}

}  // namespace

WignerMap wigner_scan(const DensityMatrix& prepared, const std::vector<double>& re_axis,
                      const std::vector<double>& im_axis, const SequenceSettings& settings,
                      const WignerOptions& options) {
  if (re_axis.empty() || im_axis.empty()) throw std::invalid_argument("wigner_scan: empty grid");
  double bmax = 0.0;
  for (double x : re_axis)
    for (double y : im_axis) bmax = std::max(bmax, std::hypot(x, y));
  check_displacement_guard(settings.config, bmax);
  const double t = options.interaction_time > 0.0 ? options.interaction_time : parity_time(settings);
  const ParityCalibration cal = calibrate_parity(options.variant, settings, t, options.normalize);
  const OperatorMatrix obs = averaged_parity_observable(settings, cal, theta_set(options.four_phase, false));
  const int nr = static_cast<int>(re_axis.size()), ni = static_cast<int>(im_axis.size());
  Eigen::MatrixXd par(nr, ni);
  const CMatrix& rho = prepared.matrix();
  parallel_for(nr * ni, settings.jobs, [&](int k) {
    const int i = k / ni, j = k % ni;
    par(i, j) = displaced_parity(obs, rho, settings.config, cplx(re_axis[i], im_axis[j]), cal);
  });
  return wigner_assemble(re_axis, im_axis, par, 1.0);
}

OffsetScan interaction_time_offset_scan(const std::vector<double>& times, const SequenceSettings& settings,
                                        const WignerOptions& options, double ring_radius, int ring_points) {
  if (times.size() < 8) throw std::invalid_argument("offset scan: need >= 8 interaction times");
  if (!std::is_sorted(times.begin(), times.end())) throw std::invalid_argument("offset scan: times must be sorted");
  if (ring_points < 1 || !(ring_radius > 0.0)) throw std::invalid_argument("offset scan: bad ring");
  check_displacement_guard(settings.config, ring_radius);
  const DensityMatrix vac = DensityMatrix::from_ket(ground_with_modes(settings.config, 0));
  OffsetScan out;
  out.times = times;
  out.offsets.assign(times.size(), 0.0);
  SequenceSettings inner = settings;
  inner.jobs = 1;
  parallel_for(static_cast<int>(times.size()), settings.jobs, [&](int k) {
    const ParityCalibration cal = calibrate_parity(options.variant, inner, times[k], options.normalize);
    const OperatorMatrix obs = averaged_parity_observable(inner, cal, theta_set(options.four_phase, false));
    double acc = 0.0;
    for (int j = 0; j < ring_points; ++j)
      acc += displaced_parity(obs, vac.matrix(), inner.config, std::polar(ring_radius, 2 * kPi * j / ring_points), cal);
    out.offsets[k] = 2.0 / kPi * acc / ring_points;
  });

  out.predicted_frequency = std::abs(delta_prime(settings.params.g_lg00, settings.interaction_detuning()));
  // Dominant frequency from a dense DFT of the mean-removed trace.
  const double span = times.back() - times.front();
  double mean = 0.0;
  for (double v : out.offsets) mean += v / out.offsets.size();
  const double f_nyq = 0.5 * (times.size() - 1) / span;
  double best_f = 0.0, best_p = -1.0;
  for (double f = 0.5 / span; f <= f_nyq; f += 0.02 / span) {
    cplx acc = 0.0;
    for (size_t i = 0; i < times.size(); ++i) acc += (out.offsets[i] - mean) * std::polar(1.0, -kTwoPi * f * times[i]);
    if (std::norm(acc) > best_p) {
      best_p = std::norm(acc);
      best_f = f;
    }
  }
  out.oscillation_frequency = best_f;
  out.double_frequency = std::abs(best_f - 2 * out.predicted_frequency) < 0.25 * out.predicted_frequency;

  // Zero crossings of the offset are the |offset| minima; pick the one closest to pi/|chi|.
  const double t0 = parity_time(settings);
  std::vector<double> candidates;
  for (size_t i = 0; i + 1 < times.size(); ++i) {
    const double a = out.offsets[i], b = out.offsets[i + 1];
    if (a == 0.0) candidates.push_back(times[i]);
    else if (a * b < 0.0) candidates.push_back(times[i] + (times[i + 1] - times[i]) * a / (a - b));
  }
  if (candidates.empty()) {
    size_t k = 0;
    for (size_t i = 1; i < times.size(); ++i)
      if (std::abs(out.offsets[i]) < std::abs(out.offsets[k])) k = i;
    candidates.push_back(times[k]);
  }
  out.best_time = *std::min_element(candidates.begin(), candidates.end(), [&](double x, double y) {
    return std::abs(x - t0) < std::abs(y - t0);
  });
  return out;
}

CoherenceResult coherence_protocol(CoherenceKind kind, const std::vector<double>& delays,
                                   const SequenceSettings& settings, double artificial_detuning) {
  if (delays.size() < 8) throw std::invalid_argument("coherence_protocol: need >= 8 delays");
  if (!std::is_sorted(delays.begin(), delays.end()) || delays.front() < 0.0)
    throw std::invalid_argument("coherence_protocol: delays must be sorted and >= 0");
  if (!(delays.back() > 0.0)) throw std::invalid_argument("coherence_protocol: longest delay must be > 0");
  const HilbertConfig& c = settings.config;
  Evolver ev(settings.params, c, settings.noise, settings.evolve);
  const bool phonon = kind == CoherenceKind::phonon_t1 || kind == CoherenceKind::phonon_t2;
  const bool ramsey = kind == CoherenceKind::qubit_t2 || kind == CoherenceKind::phonon_t2;

  Schedule prep = qubit_rotation(settings, ramsey ? kPi / 2 : kPi, 0.0);
  if (phonon) {
    Schedule sw = swap_gate(settings.params, c, settings.noise, 0, 1, settings.evolve).schedule;
    sw.qubit_reference = prep.qubit_reference;
    prep.append(sw);
  }
  const double t_prep = prep.total_duration();
  Schedule s = prep;
  s.add(Segment{delays.back(), settings.params.delta_rest, std::nullopt, std::nullopt, {}});
  std::vector<double> at(delays.size());
  for (size_t i = 0; i < delays.size(); ++i) at[i] = t_prep + delays[i];
  const auto states = ev.evolve_sampled(s, DensityMatrix::from_ket(ground_with_modes(c, 0)), at);

  const OperatorMatrix pe = excited_projector(c);
  const auto swap_back = swap_gate(settings.params, c, settings.noise, 0, 1, settings.evolve);
  const double ref = settings.rest_reference();
  CoherenceResult out;
  out.times = delays;
  out.signal.assign(delays.size(), 0.0);
  parallel_for(static_cast<int>(delays.size()), settings.jobs, [&](int i) {
    DensityMatrix rho = states[i];
    double phase = kTwoPi * artificial_detuning * delays[i];
    if (phonon) {
      rho = swap_back(rho);
    } else {
      // The qubit coherence rotated with the drive reference during the wait.
      phase -= kTwoPi * ref * at[i];
    }
    if (ramsey) rho = ev.evolve(qubit_rotation(settings, kPi / 2, phase), rho);
    out.signal[i] = expectation(rho, pe).real();
  });
  out.fit = decay_fit(out.times, out.signal, ramsey ? DecayModel::exponential_sine : DecayModel::exponential);
  return out;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& f) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cqad
