#pragma once

#include <limits>
#include <vector>

#include "cqad/device_model.hpp"
#include "cqad/dynamics.hpp"
#include "cqad/hilbert.hpp"

namespace cqad {

// Two-level JC model in the phonon frame, H = 2 pi [delta/2 sz + g (s+ a + s- a^dag)].
// Generator A = eps s+ a - eps* s- a^dag with eps = g/delta, U = exp(A).
struct SWExpansion {
  cplx epsilon;
  int order = 2;
  OperatorMatrix generator;
  // U_k H U_k^dag with U truncated at order k in A: 1 + A (+ A^2/2).
  OperatorMatrix transformed_h;

  // Frobenius norm of the qubit-flip block of transformed_h.
  double off_diagonal_norm() const;
};

SWExpansion sw_expansion(const SystemParams& params, const HilbertConfig& config, double delta, int order = 2);

// Exact exp(A) as a matrix, built in a padded space and truncated.
OperatorMatrix sw_unitary(const HilbertConfig& config, cplx epsilon);

// diag(-Delta' n + (chi/2) sz n), rad/s, approximate chi = 2 g^2/delta.
OperatorMatrix sw_rotating_hamiltonian(const SystemParams& params, const HilbertConfig& config, double delta);

// Second-order (or first-order) series of U|psi>, not renormalized.
Ket sw_transform_state(const Ket& ket, cplx epsilon, int order);

enum class EnergyModel { sw_second_order, exact_dressed };

struct RamseyTerms {
  double order0 = 0.0;
  double order1 = 0.0;
  double order2 = 0.0;
  double total() const { return order0 + order1 + order2; }
};

struct RamseyAnalyticOptions {
  EnergyModel energies = EnergyModel::sw_second_order;
  // Qubit frame of both pulses, Hz; NaN selects Delta'.
  double frame = std::numeric_limits<double>::quiet_NaN();
  double psi = 0.0;  // extra phase of the second pulse
};

// <sz> after pi/2|theta - wait t at delta - pi/2|theta+psi, starting from |g> (x) sum c_n |n>.
// chi_sign must equal sign(delta).
RamseyTerms ramsey_sigma_z_terms(const std::vector<cplx>& c, double theta, double t, const SystemParams& params,
                                 double delta, int chi_sign, const RamseyAnalyticOptions& options = {});
double ramsey_sigma_z_analytic(const std::vector<cplx>& c, double theta, double t, const SystemParams& params,
                               double delta, int chi_sign, const RamseyAnalyticOptions& options = {});

// Four-phase average of ramsey_sigma_z_analytic at a given time.
double ramsey_four_phase_analytic(const std::vector<cplx>& c, double t, const SystemParams& params, double delta,
                                  int chi_sign, const RamseyAnalyticOptions& options = {});

// Closed form of the four-phase average at t = pi/|chi|:
// Pi - eps^2 sgn sin(Delta' t) - eps^2 sum (2n+1)(-1)^n |c_n|^2.
double four_phase_closed_form(const std::vector<cplx>& c, const SystemParams& params, double delta);

// Perturbative propagation of a kick/segment schedule with the second-order dressed basis in each
// segment. Segments must be constant (no ramps, no drives); the mode is LG-00 and the qubit two-level.
// Returns <sz> at the end for the initial state |g> (x) sum c_n |n>.
double sw_series_sigma_z(const SystemParams& params, const Schedule& schedule, const std::vector<cplx>& c,
                         EnergyModel energies = EnergyModel::exact_dressed);

// Per-phonon qubit-frequency steps from exact diagonalization, Hz: shift_n = f_q(n+1) - f_q(n).
std::vector<double> chi_numeric(const SystemParams& params, const HilbertConfig& config, double delta, int n_max);

}  // namespace cqad
