#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cqad/params_io.hpp"
#include "cqad/sequences.hpp"

namespace cqad {

enum class ExperimentKind {
  spectroscopy,
  ramsey_parity,
  echo_parity,
  wigner,
  fock_prep_check,
  t1,
  t2_ramsey,
  rabi_chevron,
  chi_scan,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

enum class PhaseAveraging { single, two_phase, four_phase };

// Key/value form (values take unit suffixes; detunings also accept rest/coherent/fock/ramsey):
//   kind = wigner
//   prep.target = fock            prep.fock_number = 1     prep.method = swap_sequence
//   prep.beta = 0.8               prep.beta_phase = 0      prep.custom = 1, 0, 1  (real amplitudes)
//   phonon_dim = 10               noise = paper | none     ideal_pulses = false
//   sweep.re = linspace(-2, 2, 9) sweep.im = 0
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::chi_scan;
  std::string source;
  StatePrep preparation;
  std::map<std::string, std::vector<double>> sweep;

  int phonon_dim = 8;
  bool paper_noise = true;
  bool ideal_pulses = false;
  double rtol = 1e-6;
  std::optional<double> detuning;  // Hz; kind-dependent default

  PhaseAveraging averaging = PhaseAveraging::four_phase;
  double theta = 0.0;
  ParityVariant wigner_variant = ParityVariant::echo;
  bool normalize = true;

  double probe_duration = 15e-6;
  double probe_amplitude = 6e3;
  int peaks = 0;  // 0: default_peak_count

  std::string subject = "qubit";  // t1 / t2_ramsey: qubit or phonon
  double artificial_detuning = 50e3;
  int n_max = 3;  // chi_scan: shifts for n = 0..n_max
  int repetitions = 1;

  const std::vector<double>* axis(const std::string& name) const;
};

// "linspace(a, b, n)" or a comma-separated list.
std::vector<double> parse_grid(const std::string& text);

// Unknown keys, missing kind-specific fields and malformed values throw ValidationError naming
// the source line and field.
ExperimentSpec load_experiment(const KeyValueDocument& doc, const SystemParams& params);

SequenceSettings experiment_settings(const ExperimentSpec& spec, const SystemParams& params, int jobs);

}  // namespace cqad
