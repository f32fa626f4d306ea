#pragma once

#include <string>
#include <vector>

#include "cqad/hilbert.hpp"

namespace cqad {

// Linewidths in Hz (ordinary frequency). A rate r decays as exp(-2 pi r t).
struct CoherenceRates {
  double gamma1 = 0.0;
  double gamma2_star = 0.0;
  double gamma2_echo = 0.0;
  double kappa1 = 0.0;
  double kappa2_star = 0.0;
};

struct RatePoint {
  std::string label;
  double delta = 0.0;  // Hz
  CoherenceRates rates;
};

struct DetuningPoint {
  std::string label;
  double delta = 0.0;  // Hz, qubit minus LG-00 phonon frequency
};

// All frequencies in Hz. Hamiltonian builders return angular units (rad/s).
struct SystemParams {
  double omega_q = 5.9762e9;
  double omega_m_lg00 = 5.9741e9;
  double omega_m_lg10 = 5.9752e9;
  double g_lg00 = 259.5e3;
  double g_lg10 = 91.3e3;
  double alpha = 214e6;  // positive magnitude
  double fsr = 12e6;
  double e_c = 214e6;
  double e_j = 22.4e9;

  double delta_rest = -4.1e6;
  double delta_coherent = -1.2e6;
  double delta_fock = -0.8e6;
  double delta_ramsey = -1.9e6;

  // Measured linewidths; looked up by nearest detuning, never interpolated.
  std::vector<RatePoint> rate_table = {
      {"rest", -4.1e6, {15.6e3, 15.1e3, 13.7e3, 2.0e3, 1.2e3}},
      {"ramsey", -1.9e6, {12.1e3, 15.7e3, 12.7e3, 2.6e3, 2.1e3}},
  };

  static SystemParams paper_defaults() { return {}; }

  void validate() const;
  const RatePoint& rate_point_at(double delta) const;
  CoherenceRates rates_at(double delta) const { return rate_point_at(delta).rates; }
  std::vector<DetuningPoint> operating_points() const;
  // LG-10 frequency relative to LG-00, Hz.
  double lg10_offset() const { return omega_m_lg10 - omega_m_lg00; }
  double coupling(int mode) const;
};

enum class Frame { lab, qubit_rotating, phonon_rotating };
enum class ChiForm { full, approximate };

// Energies of the bare qubit ladder in the phonon frame (Hz, relative):
// level k sits at k*delta - delta/2 - alpha*k*(k-1)/2.
OperatorMatrix full_jc_hamiltonian(const SystemParams& params, const HilbertConfig& config,
                                   double delta, Frame frame = Frame::phonon_rotating);
OperatorMatrix dispersive_hamiltonian(const SystemParams& params, const HilbertConfig& config,
                                      double delta, Frame frame = Frame::phonon_rotating,
                                      ChiForm form = ChiForm::full);
// Excitation number sigma+sigma- (or b^dagger b) plus total phonon number.
OperatorMatrix excitation_number(const HilbertConfig& config);

double chi_analytic(double g, double delta, double alpha, ChiForm form);
double delta_prime(double g, double delta);
double purcell_rate(double g, double delta, double gamma1, double kappa1_intrinsic);
double purcell_rate(const SystemParams& params, double delta);

}  // namespace cqad
