#include "cqad/device_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cqad {

namespace {

void require_positive_rate(double v, const std::string& name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(name + " must be >= 0");
}

// Diagonal energy (Hz) of a basis state in the requested frame.
double bare_energy(const SystemParams& p, const HilbertConfig& c, int idx, double delta,
                   Frame frame) {
  const int k = c.qubit_level_of(idx);
  const double anh = -p.alpha * k * (k - 1) / 2.0;
  double e = 0.0;
  switch (frame) {
    case Frame::phonon_rotating:
      e = k * delta - delta / 2.0 + anh;
      if (c.mode_count() > 1) e += p.lg10_offset() * c.occupation_of(idx, 1);
      break;
    case Frame::qubit_rotating:
      e = anh - delta * c.occupation_of(idx, 0);
      if (c.mode_count() > 1) e += (p.lg10_offset() - delta) * c.occupation_of(idx, 1);
      break;
    case Frame::lab: {
      const double wq = p.omega_m_lg00 + delta;
      e = k * wq - wq / 2.0 + anh + p.omega_m_lg00 * c.occupation_of(idx, 0);
      if (c.mode_count() > 1) e += p.omega_m_lg10 * c.occupation_of(idx, 1);
      break;
    }
  }
  return e;
}

}  // namespace

void SystemParams::validate() const {
  if (!(g_lg00 > 0.0) || !(g_lg10 > 0.0)) throw std::invalid_argument("couplings must be > 0");
  if (!(fsr > 0.0)) throw std::invalid_argument("fsr must be > 0");
  if (g_lg00 >= fsr || g_lg10 >= fsr) throw std::invalid_argument("coupling must be below fsr");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be a positive magnitude");
  if (rate_table.empty()) throw std::invalid_argument("rate table is empty");
  for (const auto& rp : rate_table) {
    const auto& r = rp.rates;
    require_positive_rate(r.gamma1, "gamma1 (" + rp.label + ")");
    require_positive_rate(r.gamma2_star, "gamma2_star (" + rp.label + ")");
    require_positive_rate(r.gamma2_echo, "gamma2_echo (" + rp.label + ")");
    require_positive_rate(r.kappa1, "kappa1 (" + rp.label + ")");
    require_positive_rate(r.kappa2_star, "kappa2_star (" + rp.label + ")");
  }
  for (const auto& op : operating_points())
    if (op.delta == 0.0) throw std::invalid_argument("operating point " + op.label + " is zero");
}

const RatePoint& SystemParams::rate_point_at(double delta) const {
  if (rate_table.empty()) throw std::invalid_argument("rate table is empty");
  const RatePoint* best = &rate_table.front();
  for (const auto& rp : rate_table)
    if (std::abs(rp.delta - delta) < std::abs(best->delta - delta)) best = &rp;
  return *best;
}

std::vector<DetuningPoint> SystemParams::operating_points() const {
  return {{"rest", delta_rest},
          {"coherent", delta_coherent},
          {"fock", delta_fock},
          {"ramsey", delta_ramsey}};
}

double SystemParams::coupling(int mode) const {
  if (mode == 0) return g_lg00;
  if (mode == 1) return g_lg10;
  throw std::out_of_range("only LG-00 and LG-10 modes are modelled");
}

OperatorMatrix full_jc_hamiltonian(const SystemParams& params, const HilbertConfig& config,
                                   double delta, Frame frame) {
  if (config.mode_count() > 2) throw std::invalid_argument("at most two phonon modes");
  const int d = config.dimension();
  CMatrix h = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) h(i, i) = bare_energy(params, config, i, delta, frame);
  const CMatrix b = qubit_ladder(config).matrix();
  for (int m = 0; m < config.mode_count(); ++m) {
    const CMatrix a = annihilation(config, m).matrix();
    const CMatrix x = params.coupling(m) * (CMatrix(b.adjoint()) * a);
    h += x + CMatrix(x.adjoint());
  }
  return {config, kTwoPi * h};
}

OperatorMatrix dispersive_hamiltonian(const SystemParams& params, const HilbertConfig& config,
                                      double delta, Frame frame, ChiForm form) {
  if (config.qubit_levels() != 2)
    throw std::invalid_argument("dispersive Hamiltonian is defined for a two-level qubit");
  if (config.mode_count() > 2) throw std::invalid_argument("at most two phonon modes");
  std::vector<double> chi;
  for (int m = 0; m < config.mode_count(); ++m) {
    const double g = params.coupling(m);
    const double det = delta - (m == 1 ? params.lg10_offset() : 0.0);
    if (det == 0.0 || std::abs(g / det) >= 0.3) {
      std::ostringstream os;
      os << "not in dispersive regime: |g/delta| = " << (det == 0.0 ? INFINITY : std::abs(g / det))
         << " for mode " << m;
      throw std::invalid_argument(os.str());
    }
    chi.push_back(chi_analytic(g, det, params.alpha, form));
  }
  const int d = config.dimension();
  CMatrix h = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const double sz = config.qubit_level_of(i) == 1 ? 1.0 : -1.0;
    double e = bare_energy(params, config, i, delta, frame);
    for (int m = 0; m < config.mode_count(); ++m)
      e += 0.5 * chi[m] * config.occupation_of(i, m) * sz;
    h(i, i) = e;
  }
  return {config, kTwoPi * h};
}

OperatorMatrix excitation_number(const HilbertConfig& config) {
  OperatorMatrix n = qubit_number(config);
  for (int m = 0; m < config.mode_count(); ++m) n = n + number(config, m);
  return n;
}

double chi_analytic(double g, double delta, double alpha, ChiForm form) {
  if (delta == 0.0) throw std::invalid_argument("chi_analytic: delta must be nonzero");
  if (form == ChiForm::approximate) return 2.0 * g * g / delta;
  if (delta == alpha) throw std::invalid_argument("chi_analytic: delta equals alpha (pole)");
  return -2.0 * g * g / delta * alpha / (delta - alpha);
}

double delta_prime(double g, double delta) {
  if (delta == 0.0) throw std::invalid_argument("delta_prime: delta must be nonzero");
  return delta + g * g / delta;
}

double purcell_rate(double g, double delta, double gamma1, double kappa1_intrinsic) {
  if (delta == 0.0) throw std::invalid_argument("purcell_rate: delta must be nonzero");
  if (std::abs(g / delta) >= 1.0) throw std::invalid_argument("purcell_rate: requires |g/delta| < 1");
  const double e = g / delta;
  return kappa1_intrinsic + gamma1 * e * e;
}

double purcell_rate(const SystemParams& params, double delta) {
  const CoherenceRates r = params.rates_at(delta);
  return purcell_rate(params.g_lg00, delta, r.gamma1, r.kappa1);
}

}  // namespace cqad
