#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cqad/analysis.hpp"
#include "cqad/dynamics.hpp"

namespace cqad {

enum class PrepTarget { vacuum, fock, coherent, superposition_01, custom };
enum class PrepMethod { ideal_injection, swap_sequence, displacement_drive };

struct StatePrep {
  PrepTarget target = PrepTarget::vacuum;
  int fock_number = 0;
  cplx beta = 0.0;
  CVector custom;  // phonon amplitudes, qubit in |g>
  PrepMethod method = PrepMethod::ideal_injection;

  // fock M <= 3 via swap_sequence; displacement_drive only for coherent targets.
  void validate() const;
};

struct SequenceSettings {
  SystemParams params;
  HilbertConfig config{2, {8}};
  NoiseModel noise;
  EvolveOptions evolve;
  bool ideal_pulses = false;        // instantaneous kicks instead of square pulses
  double pi_pulse_duration = 50e-9;  // s, square, Rabi rate 1/(2 duration)
  double ramp_duration = 0.0;       // s, linear Stark ramps into and out of interaction segments
  double displacement_duration = 1e-6;
  double ramsey_detuning = std::numeric_limits<double>::quiet_NaN();  // NaN: params.delta_ramsey
  int jobs = 1;

  static SequenceSettings paper(const HilbertConfig& config);  // preset noise at Delta_Ramsey
  double rest_reference() const;  // dressed vacuum qubit frequency at Delta_rest, Hz
  double interaction_detuning() const;
  double rabi_rate() const { return 0.5 / pi_pulse_duration; }
};

struct ParityResult {
  double value = 0.0;
  double raw_sigma_z = 0.0;
  double interaction_time = 0.0;
  std::vector<double> phases_used;
};

enum class ParityVariant { ramsey, echo };

// Second-pulse calibration from the vacuum reference: psi maximizes <sz>(psi), baseline is its mean
// over psi and contrast = max - baseline, so the vacuum reads +1.
struct ParityCalibration {
  ParityVariant variant = ParityVariant::ramsey;
  double interaction_time = 0.0;
  double psi = 0.0;
  double contrast = 1.0;
  double baseline = 0.0;
  bool normalize = true;  // report (sz - baseline)/contrast instead of raw sz

  double apply(double sigma_z) const { return normalize ? (sigma_z - baseline) / contrast : sigma_z; }
};

DensityMatrix fock_preparation(int m, PrepMethod method, const SequenceSettings& settings);
DensityMatrix prepare_state(const StatePrep& prep, const SequenceSettings& settings);

// Qubit pi/2 / pi operations at Delta_rest, on the rest reference.
Schedule qubit_rotation(const SequenceSettings& settings, double angle, double phase);

// pi/2|theta - Delta_R for t - pi/2|theta+psi.
Schedule ramsey_schedule(const SequenceSettings& settings, double t, double theta, double psi);
// pi/2|theta - Delta_R for t/2 - pi|theta - (-Delta_R) for t/2 - pi/2|theta+psi.
Schedule echo_schedule(const SequenceSettings& settings, double t, double theta, double psi);
Schedule parity_schedule(ParityVariant v, const SequenceSettings& settings, double t, double theta, double psi);

// pi/|chi_approx(Delta_R)|.
double parity_time(const SequenceSettings& settings);

ParityCalibration calibrate_parity(ParityVariant variant, const SequenceSettings& settings, double t,
                                   bool normalize = true);

ParityResult ramsey_parity(const DensityMatrix& prepared, double t, double theta, const SequenceSettings& settings,
                           const ParityCalibration& calibration);
ParityResult echo_parity(const DensityMatrix& prepared, double theta, const SequenceSettings& settings,
                         const ParityCalibration& calibration);
// Average over theta in {0, pi/2, pi, 3pi/2} ({theta, theta+pi} when two_phase).
ParityResult four_phase_average(const DensityMatrix& prepared, const SequenceSettings& settings,
                                const ParityCalibration& calibration, bool two_phase = false);

struct SpectroscopyOptions {
  double duration = 15e-6;
  double amplitude = 6e3;  // Hz Rabi rate
  // Move the prepared state (taken at Delta_rest) to delta_operate and back for readout along
  // ideal adiabatic Stark ramps. Sudden jumps leave an epsilon^2 n qubit excitation under every peak.
  bool adiabatic_stark = true;
};

// P_e after a square probe at each frequency (Hz, qubit frequency in the phonon frame) with the
// qubit parked at delta_operate. Metadata warns when the grid misses the expected comb or P_e > 0.4.
SpectrumTrace qubit_spectroscopy(const DensityMatrix& prepared, double delta_operate,
                                 const std::vector<double>& freq_grid, const SequenceSettings& settings,
                                 const SpectroscopyOptions& options = {});
// Expected |n> peak position at delta_operate, Hz.
double spectroscopy_peak(const SequenceSettings& settings, double delta_operate, int n);

struct WignerOptions {
  ParityVariant variant = ParityVariant::echo;
  bool four_phase = true;
  bool normalize = true;
  double interaction_time = 0.0;  // 0: parity_time
};

// W(beta) = (2/pi) parity of D(-beta) rho D(-beta)^dag.
WignerMap wigner_scan(const DensityMatrix& prepared, const std::vector<double>& re_axis,
                      const std::vector<double>& im_axis, const SequenceSettings& settings,
                      const WignerOptions& options = {});

struct OffsetScan {
  std::vector<double> times;
  std::vector<double> offsets;
  double oscillation_frequency = 0.0;  // Hz, from the scan
  double predicted_frequency = 0.0;    // Delta'
  bool double_frequency = false;       // measured ~ 2 Delta'
  double best_time = 0.0;              // |offset| minimum nearest pi/|chi|
};

// Far-field Wigner offset of the vacuum: mean W over ring_points on |beta| = ring_radius.
OffsetScan interaction_time_offset_scan(const std::vector<double>& times, const SequenceSettings& settings,
                                        const WignerOptions& options = {}, double ring_radius = 2.0,
                                        int ring_points = 12);

enum class CoherenceKind { qubit_t1, qubit_t2, phonon_t1, phonon_t2 };

struct CoherenceResult {
  std::vector<double> times;
  std::vector<double> signal;
  FitResult fit;
};

// Qubit-T2 and phonon-T2 use an artificial detuning so the trace oscillates.
CoherenceResult coherence_protocol(CoherenceKind kind, const std::vector<double>& delays,
                                   const SequenceSettings& settings, double artificial_detuning = 50e3);

// Runs f(i) for i in [0, n) on up to `jobs` threads; results are written by index.
void parallel_for(int n, int jobs, const std::function<void(int)>& f);

}  // namespace cqad
