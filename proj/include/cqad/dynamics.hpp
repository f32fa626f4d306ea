#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "cqad/device_model.hpp"
#include "cqad/hilbert.hpp"

namespace cqad {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rates in Hz. Collapse operators: sqrt(g1) b, sqrt(gphi/2) sz, sqrt(k1) a, sqrt(2 kphi) n.
struct NoiseModel {
  double qubit_gamma1 = 0.0;
  double qubit_gamma_phi = 0.0;
  double phonon_kappa1 = 0.0;
  double phonon_kappa_phi = 0.0;
  double static_qubit_offset = 0.0;  // Hz, added to the qubit detuning everywhere

  static NoiseModel none() { return {}; }
  // gamma_phi = gamma2* - gamma1/2 and kappa_phi = kappa2* - kappa1/2; negative values throw.
  static NoiseModel from_rates(const CoherenceRates& rates);

  bool dissipative() const;
  void validate() const;
};

// Noise using the measured linewidths nearest to the given detuning.
NoiseModel paper_noise(const SystemParams& params, double delta);

std::vector<OperatorMatrix> collapse_operators(const HilbertConfig& config, const NoiseModel& noise);

enum class PulseShape { square, gaussian };

// Qubit drive: (amplitude/2)(i e^{i phi} b^dag - i e^{-i phi} b), amplitude = Rabi rate in Hz.
// Phonon drive: amplitude (i e^{i phi} a^dag - i e^{-i phi} a), so beta = 2 pi amplitude T e^{i phi}.
// phi = phase - 2 pi f_carrier t with t the absolute schedule time.
struct Pulse {
  PulseShape shape = PulseShape::square;
  double sigma = 0.0;  // s, gaussian only; centred in the segment and cut at +-4 sigma
  double amplitude = 0.0;
  double phase = 0.0;
  double carrier_detuning = 0.0;  // Hz, relative to the schedule reference (qubit) or LG-00 (phonon)
  int mode = 0;                   // phonon drives only

  double envelope(double t_local, double duration) const;
};

enum class RampKind { instantaneous, linear };

struct Ramp {
  RampKind kind = RampKind::instantaneous;
  double duration = 0.0;
};

struct Segment {
  double duration = 0.0;
  double detuning = 0.0;  // Hz, target qubit-phonon detuning
  std::optional<Pulse> qubit_drive;
  std::optional<Pulse> phonon_drive;
  Ramp ramp;
};

// Instantaneous rotation exp(-i angle/2 (i e^{i phi} b^dag - i e^{-i phi} b)).
struct QubitKick {
  double angle = 0.0;
  double phase = 0.0;
  double carrier_detuning = 0.0;
};

// Ideal displacement D(beta) on one mode.
struct DisplacementKick {
  int mode = 0;
  cplx beta = 0.0;
};

using Step = std::variant<Segment, QubitKick, DisplacementKick>;

struct Schedule {
  std::vector<Step> steps;
  double initial_detuning = 0.0;  // Hz, origin of the first ramp
  double qubit_reference = 0.0;   // Hz, qubit drive oscillator in the phonon frame

  double total_duration() const;
  double final_detuning() const;
  void validate() const;

  Schedule& add(Step step);
  Schedule& append(const Schedule& other);
};

struct EvolveOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  long max_steps = 2'000'000;
  bool exact_constant_segments = true;
  bool validate_states = true;
};

class Evolver {
 public:
  Evolver(SystemParams params, HilbertConfig config, NoiseModel noise = {},
          EvolveOptions options = {});

  const SystemParams& params() const { return params_; }
  const HilbertConfig& config() const { return config_; }
  const NoiseModel& noise() const { return noise_; }
  const EvolveOptions& options() const { return options_; }

  DensityMatrix evolve(const Schedule& schedule, const DensityMatrix& rho0) const;
  // States at the requested absolute times (sorted, within the schedule). A sample at t
  // includes every kick placed at time t.
  std::vector<DensityMatrix> evolve_sampled(const Schedule& schedule, const DensityMatrix& rho0,
                                            const std::vector<double>& times) const;
  // Heisenberg-picture observable O such that Tr[O rho0] = Tr[observable rho(T)].
  OperatorMatrix heisenberg(const Schedule& schedule, const OperatorMatrix& observable) const;
  // Unitary of a noiseless schedule.
  OperatorMatrix propagator(const Schedule& schedule) const;

 private:
  SystemParams params_;
  HilbertConfig config_;
  NoiseModel noise_;
  EvolveOptions options_;
};

using HamiltonianFn = std::function<OperatorMatrix(double)>;

// Direct master-equation integration with a dense, user-supplied H(t) in rad/s.
std::vector<DensityMatrix> lindblad_evolve(const DensityMatrix& rho0, const HamiltonianFn& hamiltonian,
                                           const NoiseModel& noise, const std::vector<double>& t_span,
                                           const EvolveOptions& options = {});

// Exact dressed qubit frequency (Hz, phonon frame) with the phonon mode in vacuum.
double dressed_qubit_frequency(double g, double delta);
// Exact dressed single-phonon frequency (Hz, phonon frame) with the qubit in |g>.
double dressed_phonon_frequency(double g, double delta);

// A schedule fragment bound to the evolver that runs it.
struct StateTransformer {
  Schedule schedule;
  Evolver evolver;
  DensityMatrix operator()(const DensityMatrix& rho) const { return evolver.evolve(schedule, rho); }
};

// Resonant exchange of duration 1/(4 g sqrt(k)) entered from Delta_rest with an instantaneous jump.
// The fragment ends on resonance; the next segment jumps back.
StateTransformer swap_gate(const SystemParams& params, const HilbertConfig& config, const NoiseModel& noise,
                           int mode_index, int phonon_number = 1, const EvolveOptions& options = {});
// Square phonon drive with the qubit parked at Delta_rest, on the dressed phonon frequency.
StateTransformer displacement_drive(const SystemParams& params, const HilbertConfig& config,
                                    const NoiseModel& noise, double amplitude, double phase, double duration,
                                    const EvolveOptions& options = {});
// |beta| produced per Hz of phonon-drive amplitude in the noiseless, undressed limit.
inline double displacement_per_amplitude(double duration) { return kTwoPi * duration; }

// P_e(delta, t) for |e,0> start. Rows follow detuning_grid, columns time_grid.
Eigen::MatrixXd vacuum_rabi_chevron(const SystemParams& params, const HilbertConfig& config,
                                    const NoiseModel& noise, const std::vector<double>& detuning_grid,
                                    const std::vector<double>& time_grid,
                                    const EvolveOptions& options = {});

}  // namespace cqad
