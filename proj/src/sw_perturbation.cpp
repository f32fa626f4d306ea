#include "cqad/sw_perturbation.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace cqad {

namespace {

void require_two_level_single_mode(const HilbertConfig& c, const char* who) {
  if (c.qubit_levels() != 2 || c.phonon_dims().size() != 1)
    throw std::invalid_argument(std::string(who) + ": requires a two-level qubit and one phonon mode");
}

// Top-left block of a padded single-mode operator, keeping the first d levels of each qubit block.
CMatrix truncate_padded(const CMatrix& m, int dp, int d) {
  CMatrix out(2 * d, 2 * d);
  for (int qi = 0; qi < 2; ++qi)
    for (int qj = 0; qj < 2; ++qj) out.block(qi * d, qj * d, d, d) = m.block(qi * dp, qj * dp, d, d);
  return out;
}

CMatrix generator_matrix(const HilbertConfig& c, cplx eps) {
  const CMatrix sp = qubit_operator(c, QubitOp::sigma_plus).matrix();
  const CMatrix a = annihilation(c, 0).matrix();
  const CMatrix spa = sp * a;
  return eps * spa - std::conj(eps) * CMatrix(spa.adjoint());
}

int sign_of(double x) { return x > 0 ? 1 : -1; }

void check_chi_sign(double delta, int chi_sign) {
  if (delta == 0.0) throw std::invalid_argument("delta must be nonzero");
  if (chi_sign != 1 && chi_sign != -1) throw std::invalid_argument("chi_sign must be +1 or -1");
  if (chi_sign != sign_of(delta))
    throw std::invalid_argument("chi_sign disagrees with sign(delta): chi = 2g^2/delta carries the sign of delta");
}

void check_normalized(const std::vector<cplx>& c) {
  double s = 0.0;
  for (const cplx& x : c) s += std::norm(x);
  if (c.empty() || std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("Fock amplitudes must be normalized to 1 within 1e-9");
}

// Dressed energies in the phonon frame, Hz.
struct Energies {
  double g, delta;
  EnergyModel model;
  // Lower-branch state of manifold n-1, or bare |g,0>.
  double ground(int n) const {
    if (n == 0) return -delta / 2;
    if (model == EnergyModel::sw_second_order) return -delta / 2 - g * g / delta * n;
    return -sign_of(delta) * 0.5 * std::sqrt(delta * delta + 4 * g * g * n);
  }
  // Upper-branch state of manifold n.
  double excited(int n) const {
    if (model == EnergyModel::sw_second_order) return delta / 2 + g * g / delta * (n + 1);
    return sign_of(delta) * 0.5 * std::sqrt(delta * delta + 4 * g * g * (n + 1));
  }
};

}  // namespace

double SWExpansion::off_diagonal_norm() const {
  const int d = transformed_h.config().phonon_dims()[0];
  const CMatrix& m = transformed_h.matrix();
  return std::hypot(m.block(0, d, d, d).norm(), m.block(d, 0, d, d).norm());
}

SWExpansion sw_expansion(const SystemParams& params, const HilbertConfig& config, double delta, int order) {
  require_two_level_single_mode(config, "sw_expansion");
  if (order != 1 && order != 2) throw std::invalid_argument("sw_expansion: order must be 1 or 2");
  if (delta == 0.0) throw std::invalid_argument("sw_expansion: delta must be nonzero");
  const int d = config.phonon_dims()[0];
  const int dp = d + 3;
  HilbertConfig padded(2, {dp});
  const cplx eps = params.g_lg00 / delta;
  const CMatrix a = generator_matrix(padded, eps);
  const CMatrix h = full_jc_hamiltonian(params, padded, delta).matrix();
  CMatrix u = CMatrix::Identity(a.rows(), a.cols()) + a;
  if (order == 2) u += 0.5 * a * a;
  const CMatrix out = u * h * u.adjoint();
  return SWExpansion{eps, order, OperatorMatrix(config, truncate_padded(a, dp, d)),
                     OperatorMatrix(config, truncate_padded(out, dp, d))};
}

OperatorMatrix sw_unitary(const HilbertConfig& config, cplx epsilon) {
  require_two_level_single_mode(config, "sw_unitary");
  const int d = config.phonon_dims()[0];
  const int dp = d + 12;
  HilbertConfig padded(2, {dp});
  return OperatorMatrix(config, truncate_padded(expm(generator_matrix(padded, epsilon)), dp, d));
}

OperatorMatrix sw_rotating_hamiltonian(const SystemParams& params, const HilbertConfig& config, double delta) {
  require_two_level_single_mode(config, "sw_rotating_hamiltonian");
  if (delta == 0.0) throw std::invalid_argument("sw_rotating_hamiltonian: delta must be nonzero");
  const double dp = delta_prime(params.g_lg00, delta);
  const double chi = chi_analytic(params.g_lg00, delta, params.alpha, ChiForm::approximate);
  const int d = config.phonon_dims()[0];
  CMatrix h = CMatrix::Zero(2 * d, 2 * d);
  for (int q = 0; q < 2; ++q)
    for (int n = 0; n < d; ++n) h(q * d + n, q * d + n) = kTwoPi * n * (-dp + (q == 1 ? 0.5 : -0.5) * chi);
  return OperatorMatrix(config, h);
}

Ket sw_transform_state(const Ket& ket, cplx epsilon, int order) {
  const HilbertConfig& c = ket.config();
  require_two_level_single_mode(c, "sw_transform_state");
  if (order != 1 && order != 2) throw std::invalid_argument("sw_transform_state: order must be 1 or 2");
  const int d = c.phonon_dims()[0];
  const CVector& in = ket.amplitudes();
  if (std::abs(in(2 * d - 1)) > 1e-14)
    throw std::invalid_argument("sw_transform_state: |e," + std::to_string(d - 1) +
                                "> populated; the expansion needs one spare phonon level");
  const double e2 = order == 2 ? std::norm(epsilon) : 0.0;
  CVector out = CVector::Zero(2 * d);
  for (int n = 0; n < d; ++n) {
    const cplx cg = in(n), ce = in(d + n);
    out(n) += cg * (1.0 - 0.5 * e2 * n);
    if (n > 0) out(d + n - 1) += epsilon * std::sqrt(double(n)) * cg;
    out(d + n) += ce * (1.0 - 0.5 * e2 * (n + 1));
    if (n + 1 < d) out(n + 1) -= std::conj(epsilon) * std::sqrt(n + 1.0) * ce;
  }
  return Ket(c, out);
}

RamseyTerms ramsey_sigma_z_terms(const std::vector<cplx>& c, double theta, double t, const SystemParams& params,
                                 double delta, int chi_sign, const RamseyAnalyticOptions& options) {
  check_chi_sign(delta, chi_sign);
  check_normalized(c);
  if (!(t > 0.0)) throw std::invalid_argument("ramsey_sigma_z_analytic: t must be positive");
  const double g = params.g_lg00;
  const double eps = g / delta;
  const double w = std::isnan(options.frame) ? delta_prime(g, delta) : options.frame;
  const Energies en{g, delta, options.energies};
  const int n_c = static_cast<int>(c.size());
  // Phase factors of |g,n> and |e,n> in the qubit frame at w.
  std::vector<cplx> a(n_c + 2), b(n_c + 2);
  for (int n = 0; n < n_c + 2; ++n) {
    const double alpha = en.ground(n) + w / 2 - w * n;
    const double beta = en.excited(n) - w / 2 - w * n;
    a[n] = std::exp(cplx(0, -kTwoPi * alpha * t));
    b[n] = std::exp(cplx(0, -kTwoPi * beta * t));
  }
  auto cc = [&](int n) { return n >= 0 && n < n_c ? c[n] : cplx(0.0); };
  const cplx e_psi = std::exp(cplx(0, options.psi));
  const cplx e_1 = std::exp(cplx(0, theta + options.psi));
  const cplx e_2 = std::exp(cplx(0, 2 * theta + options.psi));

  RamseyTerms r;
  for (int n = 0; n < n_c; ++n) {
    const double p = std::norm(c[n]);
    r.order0 += p * std::real(e_psi * a[n] * std::conj(b[n]));
    const cplx x = c[n] * std::conj(cc(n + 1));
    r.order1 += std::sqrt(n + 1.0) *
                std::real(e_1 * x *
                          (b[n] * std::conj(b[n + 1]) - a[n + 1] * std::conj(b[n + 1]) + a[n] * std::conj(b[n]) -
                           a[n] * std::conj(a[n + 1])));
    if (n > 0) r.order2 += n * p * std::real(e_psi * (b[n - 1] - a[n]) * std::conj(b[n]));
    r.order2 += (n + 1) * p * std::real(e_psi * a[n] * (std::conj(a[n + 1]) - std::conj(b[n])));
    if (n > 0)
      r.order2 += std::sqrt(double(n) * (n + 1)) *
                  std::real(e_2 * cc(n - 1) * std::conj(cc(n + 1)) * (b[n - 1] - a[n]) *
                            (std::conj(b[n]) - std::conj(a[n + 1])));
  }
  r.order1 *= eps;
  r.order2 *= eps * eps;
  return r;
}

double ramsey_sigma_z_analytic(const std::vector<cplx>& c, double theta, double t, const SystemParams& params,
                               double delta, int chi_sign, const RamseyAnalyticOptions& options) {
  return ramsey_sigma_z_terms(c, theta, t, params, delta, chi_sign, options).total();
}

double ramsey_four_phase_analytic(const std::vector<cplx>& c, double t, const SystemParams& params, double delta,
                                  int chi_sign, const RamseyAnalyticOptions& options) {
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += ramsey_sigma_z_analytic(c, k * kPi / 2, t, params, delta, chi_sign, options);
  return s / 4;
}

double four_phase_closed_form(const std::vector<cplx>& c, const SystemParams& params, double delta) {
  check_normalized(c);
  const double g = params.g_lg00;
  const double eps = g / delta;
  const double chi = chi_analytic(g, delta, params.alpha, ChiForm::approximate);
  const double t0 = 0.5 / std::abs(chi);
  const double phi = kTwoPi * delta_prime(g, delta) * t0;
  double parity = 0.0, weighted = 0.0;
  for (size_t n = 0; n < c.size(); ++n) {
    const double sgn = n % 2 == 0 ? 1.0 : -1.0;
    parity += sgn * std::norm(c[n]);
    weighted += (2.0 * n + 1.0) * sgn * std::norm(c[n]);
  }
  return parity - eps * eps * (sign_of(delta) * std::sin(phi) + weighted);
}

double sw_series_sigma_z(const SystemParams& params, const Schedule& schedule, const std::vector<cplx>& c,
                         EnergyModel energies) {
  check_normalized(c);
  schedule.validate();
  const double g = params.g_lg00;
  const int n_c = static_cast<int>(c.size());
  // Each segment spreads the state by one phonon level at most.
  int n_segments = 0;
  for (const Step& step : schedule.steps) n_segments += std::holds_alternative<Segment>(step);
  const int d = n_c + n_segments + 1;
  // Layout: [g,0..d-1, e,0..d-1].
  CVector psi = CVector::Zero(2 * d);
  for (int n = 0; n < n_c; ++n) psi(n) = c[n];

  auto kick = [&](const QubitKick& k, double t) {
    const double phi = k.phase - kTwoPi * (schedule.qubit_reference + k.carrier_detuning) * t;
    const double h = k.angle / 2;
    const cplx e = std::exp(cplx(0, phi));
    for (int n = 0; n < d; ++n) {
      const cplx xg = psi(n), xe = psi(d + n);
      psi(n) = std::cos(h) * xg - std::sin(h) * std::conj(e) * xe;
      psi(d + n) = std::sin(h) * e * xg + std::cos(h) * xe;
    }
  };
  auto wait = [&](double delta, double tau) {
    if (delta == 0.0) throw std::invalid_argument("sw_series_sigma_z: resonant segment");
    const Energies en{g, delta, energies};
    psi(0) *= std::exp(cplx(0, -kTwoPi * en.ground(0) * tau));
    for (int k = 0; k + 1 < d; ++k) {
      // Manifold (e,k ; g,k+1). U_block maps bare to dressed to second order.
      const double s = g / delta * std::sqrt(k + 1.0);
      const double diag = 1.0 - 0.5 * s * s;
      Eigen::Matrix2cd u;
      u << diag, s, -s, diag;
      Eigen::Matrix2cd ph = Eigen::Matrix2cd::Zero();
      ph(0, 0) = std::exp(cplx(0, -kTwoPi * en.excited(k) * tau));
      ph(1, 1) = std::exp(cplx(0, -kTwoPi * en.ground(k + 1) * tau));
      const Eigen::Matrix2cd prop = u.adjoint() * ph * u;
      Eigen::Vector2cd v(psi(d + k), psi(k + 1));
      v = prop * v;
      psi(d + k) = v(0);
      psi(k + 1) = v(1);
    }
    // |e,d-1> lies outside every tracked manifold; the level budget keeps it empty.
  };

  double t = 0.0;
  for (const Step& step : schedule.steps) {
    if (const auto* k = std::get_if<QubitKick>(&step)) {
      kick(*k, t);
    } else if (const auto* seg = std::get_if<Segment>(&step)) {
      if (seg->qubit_drive || seg->phonon_drive || seg->ramp.kind != RampKind::instantaneous)
        throw std::invalid_argument("sw_series_sigma_z: only constant undriven segments are supported");
      wait(seg->detuning, seg->duration);
      t += seg->duration;
    } else {
      throw std::invalid_argument("sw_series_sigma_z: displacement kicks are not supported");
    }
  }
  double sz = 0.0;
  for (int n = 0; n < d; ++n) sz += std::norm(psi(d + n)) - std::norm(psi(n));
  return sz;
}

std::vector<double> chi_numeric(const SystemParams& params, const HilbertConfig& config, double delta, int n_max) {
  if (config.phonon_dims().size() != 1) throw std::invalid_argument("chi_numeric: requires a single phonon mode");
  if (n_max < 1) throw std::invalid_argument("chi_numeric: n_max must be >= 1");
  const int d = config.phonon_dims()[0];
  if (d < n_max + 5)
    throw std::invalid_argument("chi_numeric: phonon dimension " + std::to_string(d) + " < n_max + 5 = " +
                                std::to_string(n_max + 5));
  const CMatrix h = full_jc_hamiltonian(params, config, delta).matrix() / kTwoPi;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const CMatrix& vecs = es.eigenvectors();

  auto dressed_energy = [&](int q, int n) {
    const int row = config.index(q, std::vector<int>{n});
    int best = 0;
    double best_overlap = -1.0;
    for (int j = 0; j < vecs.cols(); ++j) {
      const double o = std::norm(vecs(row, j));
      if (o > best_overlap) {
        best_overlap = o;
        best = j;
      }
    }
    if (best_overlap < 0.5 + 1e-9) {
      std::ostringstream msg;
      msg << "chi_numeric: ambiguous dressed state for |" << (q == 0 ? 'g' : 'e') << "," << n
          << "> (max overlap " << best_overlap << ") near delta = " << delta << " Hz; bare levels nearly degenerate";
      throw std::runtime_error(msg.str());
    }
    return ev(best);
  };

  std::vector<double> fq(n_max + 1);
  for (int n = 0; n <= n_max; ++n) fq[n] = dressed_energy(1, n) - dressed_energy(0, n);
  std::vector<double> shifts(n_max);
  for (int n = 0; n < n_max; ++n) shifts[n] = fq[n + 1] - fq[n];
  return shifts;
}

}  // namespace cqad
