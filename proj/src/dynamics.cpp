#include "cqad/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <boost/numeric/odeint.hpp>

namespace cqad {

namespace odeint = boost::numeric::odeint;

namespace {

using SpMat = Eigen::SparseMatrix<cplx>;
using State = std::vector<double>;
using CMap = Eigen::Map<CMatrix>;
using CConstMap = Eigen::Map<const CMatrix>;

enum class Mode { lindblad, adjoint, unitary };

SpMat sparse(const CMatrix& m) {
  SpMat s = m.sparseView(1.0, 0.0);
  s.makeCompressed();
  return s;
}

struct Term {
  SpMat op;
  SpMat op_adj;
  cplx coeff;
  double freq;   // rad/s, frame phase e^{i freq t}
  int envelope;  // 0 none, 1 qubit pulse, 2 phonon pulse
};

// One stretch of a segment with a fixed frame and either a linear detuning ramp or a constant detuning.
struct Interval {
  double t0 = 0.0, t1 = 0.0;  // absolute
  Eigen::VectorXd hr0;        // rad/s, detuning-independent diagonal in the frame
  Eigen::VectorXd qz;         // rad/s per Hz of detuning
  Eigen::VectorXd hi;         // -1/2 sum L^dag L diagonal
  Eigen::VectorXd frame;      // F_i, rad/s
  Eigen::MatrixXd gamma;      // diagonal-jump sandwich weights; empty when no dephasing
  std::vector<Term> terms;
  std::vector<SpMat> jumps, jumps_adj;
  double det_a = 0.0, det_b = 0.0, ramp_t0 = 0.0, ramp_t1 = 0.0;
  std::optional<Pulse> qpulse, ppulse;
  double seg_t0 = 0.0, seg_dur = 0.0;
  bool exact = false;

  double detuning(double t) const {
    if (ramp_t1 <= ramp_t0 || t >= ramp_t1) return det_b;
    if (t <= ramp_t0) return det_a;
    return det_a + (det_b - det_a) * (t - ramp_t0) / (ramp_t1 - ramp_t0);
  }

  cplx coefficient(const Term& term, double t) const {
    cplx c = term.coeff * std::exp(cplx(0.0, term.freq * t));
    if (term.envelope == 1) c *= qpulse->envelope(t - seg_t0, seg_dur);
    if (term.envelope == 2) c *= ppulse->envelope(t - seg_t0, seg_dur);
    return c;
  }

  Eigen::VectorXd hr(double t) const { return hr0 + detuning(t) * qz; }

  SpMat coupling(double t) const {
    SpMat a(hr0.size(), hr0.size());
    for (const auto& term : terms) {
      cplx c = coefficient(term, t);
      if (c == cplx(0.0)) continue;
      a += c * term.op + std::conj(c) * term.op_adj;
    }
    return a;
  }

  CMatrix constant_hamiltonian() const {
    CMatrix h = coupling(t0);
    h.diagonal() += hr(t0).cast<cplx>();
    return h;
  }
};

struct Rhs {
  const Interval& iv;
  Mode mode;
  int d;
  double t_ref;  // adjoint mode integrates in s = t_ref - t

  void operator()(const State& xs, State& dxs, double s) const {
    const double t = mode == Mode::adjoint ? t_ref - s : s;
    CConstMap x(reinterpret_cast<const cplx*>(xs.data()), d, d);
    CMap dx(reinterpret_cast<cplx*>(dxs.data()), d, d);
    const Eigen::VectorXd h = iv.hr(t);
    const SpMat a = iv.coupling(t);
    switch (mode) {
      case Mode::unitary: {
        dx.noalias() = cplx(0, -1) * (a * x);
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < d; ++i) dx(i, j) += cplx(0, -h(i)) * x(i, j);
        break;
      }
      case Mode::lindblad: {
        dx.noalias() = cplx(0, -1) * (a * x);
        dx.noalias() += cplx(0, 1) * (x * a);
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < d; ++i) {
            double re = iv.hi(i) + iv.hi(j);
            if (iv.gamma.size()) re += iv.gamma(i, j);
            dx(i, j) += cplx(re, -(h(i) - h(j))) * x(i, j);
          }
        for (size_t k = 0; k < iv.jumps.size(); ++k)
          dx.noalias() += iv.jumps[k] * (x * iv.jumps_adj[k]);
        break;
      }
      case Mode::adjoint: {
        dx.noalias() = cplx(0, 1) * (a * x);
        dx.noalias() += cplx(0, -1) * (x * a);
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < d; ++i) {
            double re = iv.hi(i) + iv.hi(j);
            if (iv.gamma.size()) re += iv.gamma(i, j);
            dx(i, j) += cplx(re, h(i) - h(j)) * x(i, j);
          }
        for (size_t k = 0; k < iv.jumps.size(); ++k)
          dx.noalias() += iv.jumps_adj[k] * (x * iv.jumps[k]);
        break;
      }
    }
  }
};

State to_state(const CMatrix& m) {
  State s(2 * m.size());
  std::copy_n(reinterpret_cast<const double*>(m.data()), s.size(), s.data());
  return s;
}

CMatrix from_state(const State& s, int d) {
  return CConstMap(reinterpret_cast<const cplx*>(s.data()), d, d);
}

// Elementwise frame change for an operator-like matrix: X_ij -> e^{i sign (F_i - F_j) t} X_ij.
void frame_rotate(CMatrix& x, const Eigen::VectorXd& f, double t, double sign, bool rows_only) {
  const int d = static_cast<int>(f.size());
  CVector ph(d);
  for (int i = 0; i < d; ++i) ph(i) = std::exp(cplx(0.0, sign * f(i) * t));
  if (rows_only) {
    x = ph.asDiagonal() * x;
  } else {
    x = ph.asDiagonal() * x * ph.conjugate().asDiagonal();
  }
}

void check_state(const CMatrix& rho, const HilbertConfig& cfg, double t) {
  DensityMatrix dm(cfg, rho);
  StateDiagnostics d = dm.diagnostics();
  const double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
  if (d.trace_error > 1e-6 || d.hermiticity_defect > 1e-8 * scale || d.min_eigenvalue < -1e-6) {
    std::ostringstream os;
    os << "state invariant violated at t = " << t << " s: trace error " << d.trace_error
       << ", hermiticity defect " << d.hermiticity_defect << ", min eigenvalue " << d.min_eigenvalue;
    throw NumericError(os.str());
  }
}

// Stepwise traversal shared by forward, adjoint and unitary evolution.
class Engine {
 public:
  Engine(const SystemParams& p, const HilbertConfig& c, const NoiseModel& n, const EvolveOptions& o)
      : p_(p), c_(c), n_(n), o_(o), d_(c.dimension()) {
    b_ = qubit_ladder(c).matrix();
    const CMatrix sz = qubit_operator(c, QubitOp::sigma_z).matrix();
    k_.resize(d_);
    sz_.resize(d_);
    for (int i = 0; i < d_; ++i) {
      k_(i) = c.qubit_level_of(i);
      sz_(i) = sz(i, i).real();
    }
    for (int m = 0; m < c.mode_count(); ++m) {
      a_.push_back(annihilation(c, m).matrix());
      Eigen::VectorXd nm(d_);
      for (int i = 0; i < d_; ++i) nm(i) = c.occupation_of(i, m);
      num_.push_back(nm);
    }
  }

  std::vector<Interval> intervals(const Segment& seg, double t_start, double prev_detuning,
                                  double reference) const {
    std::vector<Interval> out;
    const double t_end = t_start + seg.duration;
    double t_ramp_end = t_start;
    if (seg.ramp.kind == RampKind::linear && seg.ramp.duration > 0.0 && prev_detuning != seg.detuning)
      t_ramp_end = t_start + seg.ramp.duration;
    if (t_ramp_end > t_start) out.push_back(build(seg, t_start, t_start, t_ramp_end, prev_detuning, reference, true));
    if (t_end > t_ramp_end) out.push_back(build(seg, t_start, t_ramp_end, t_end, prev_detuning, reference, false));
    return out;
  }

  CMatrix kick_unitary(const Step& step, double t, double reference) const {
    if (const auto* qk = std::get_if<QubitKick>(&step)) {
      const double phi = qk->phase - kTwoPi * (reference + qk->carrier_detuning) * t;
      const cplx e = std::exp(cplx(0.0, phi));
      CMatrix g = cplx(0, 1) * e * CMatrix(b_.adjoint()) - cplx(0, 1) * std::conj(e) * b_;
      return unitary_propagator(g, qk->angle / 2.0);
    }
    const auto& dk = std::get<DisplacementKick>(step);
    return displacement_operator(c_, dk.mode, dk.beta).matrix();
  }

  // Advances x over the interval; `samples` are absolute times in [t0, t1) recorded via `store`.
  template <class Store>
  void advance(const Interval& iv, Mode mode, CMatrix& x, const std::vector<double>& samples,
               Store&& store) const {
    const bool rows_only = mode == Mode::unitary;
    if (iv.exact) {
      const CMatrix h = iv.constant_hamiltonian();
      Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (h + h.adjoint()));
      const CMatrix& v = es.eigenvectors();
      const Eigen::VectorXd& e = es.eigenvalues();
      auto prop = [&](double tau) {
        CVector ph = (e.cast<cplx>() * cplx(0.0, -tau)).array().exp();
        return CMatrix(v * ph.asDiagonal() * v.adjoint());
      };
      if (mode == Mode::adjoint) {
        // x is the observable at iv.t1 in the phonon frame.
        CMatrix xt = x;
        frame_rotate(xt, iv.frame, iv.t1, +1.0, false);
        CMatrix u = prop(iv.t1 - iv.t0);
        xt = u.adjoint() * xt * u;
        frame_rotate(xt, iv.frame, iv.t0, -1.0, false);
        x = xt;
        return;
      }
      CMatrix xt = x;
      frame_rotate(xt, iv.frame, iv.t0, +1.0, rows_only);
      for (double ts : samples) {
        CMatrix u = prop(ts - iv.t0);
        CMatrix y = rows_only ? CMatrix(u * xt) : CMatrix(u * xt * u.adjoint());
        frame_rotate(y, iv.frame, ts, -1.0, rows_only);
        store(ts, y);
      }
      CMatrix u = prop(iv.t1 - iv.t0);
      xt = rows_only ? CMatrix(u * xt) : CMatrix(u * xt * u.adjoint());
      frame_rotate(xt, iv.frame, iv.t1, -1.0, rows_only);
      x = xt;
      return;
    }

    auto stepper = odeint::make_dense_output(o_.atol, o_.rtol, odeint::runge_kutta_dopri5<State>());
    const double dt0 = std::min(1e-9, 0.5 * (iv.t1 - iv.t0));
    try {
      if (mode == Mode::adjoint) {
        CMatrix xt = x;
        frame_rotate(xt, iv.frame, iv.t1, +1.0, false);
        State s = to_state(xt);
        Rhs rhs{iv, mode, d_, iv.t1};
        std::vector<double> times{0.0, iv.t1 - iv.t0};
        odeint::integrate_times(stepper, rhs, s, times.begin(), times.end(), dt0,
                                [](const State&, double) {}, odeint::max_step_checker(static_cast<int>(o_.max_steps)));
        xt = from_state(s, d_);
        frame_rotate(xt, iv.frame, iv.t0, -1.0, false);
        x = xt;
        return;
      }
      CMatrix xt = x;
      frame_rotate(xt, iv.frame, iv.t0, +1.0, rows_only);
      State s = to_state(xt);
      Rhs rhs{iv, mode, d_, 0.0};
      std::vector<double> times{iv.t0};
      for (double ts : samples)
        if (ts > times.back()) times.push_back(ts);
      times.push_back(iv.t1);
      State last;
      odeint::integrate_times(
          stepper, rhs, s, times.begin(), times.end(), dt0,
          [&](const State& st, double t) {
            CMatrix y = from_state(st, d_);
            frame_rotate(y, iv.frame, t, -1.0, rows_only);
            if (t < iv.t1) {
              for (double ts : samples)
                if (ts == t) store(t, y);
            } else {
              x = y;
            }
          },
          odeint::max_step_checker(static_cast<int>(o_.max_steps)));
      // A sample at exactly t0 duplicates the initial point.
    } catch (const odeint::odeint_error& e) {
      throw NumericError(std::string("integrator failed: ") + e.what());
    } catch (const std::runtime_error& e) {
      if (dynamic_cast<const NumericError*>(&e)) throw;
      throw NumericError(std::string("integrator failed: ") + e.what());
    }
  }

 private:
  Interval build(const Segment& seg, double seg_t0, double t0, double t1, double prev_det,
                 double reference, bool ramping) const {
    Interval iv;
    iv.t0 = t0;
    iv.t1 = t1;
    iv.seg_t0 = seg_t0;
    iv.seg_dur = seg.duration;
    iv.qpulse = seg.qubit_drive;
    iv.ppulse = seg.phonon_drive;
    const double off = n_.static_qubit_offset;
    iv.det_a = prev_det + off;
    iv.det_b = seg.detuning + off;
    iv.ramp_t0 = seg_t0;
    iv.ramp_t1 = ramping ? t1 : seg_t0;

    const bool noisy = n_.dissipative();
    const bool square_q = !seg.qubit_drive || seg.qubit_drive->shape == PulseShape::square;
    const bool square_p = !seg.phonon_drive || seg.phonon_drive->shape == PulseShape::square;
    const double wc = seg.qubit_drive ? kTwoPi * (reference + seg.qubit_drive->carrier_detuning) : 0.0;
    const double wp = seg.phonon_drive ? kTwoPi * seg.phonon_drive->carrier_detuning : 0.0;
    const bool one_carrier = !(seg.qubit_drive && seg.phonon_drive) || wc == wp;
    iv.exact = o_.exact_constant_segments && !noisy && !ramping && square_q && square_p && one_carrier;

    const int nm = c_.mode_count();
    double wq;
    std::vector<double> wm(nm, 0.0);
    if (iv.exact) {
      const double base = seg.qubit_drive ? wc : (seg.phonon_drive ? wp : 0.0);
      wq = base;
      std::fill(wm.begin(), wm.end(), base);
    } else {
      wq = seg.qubit_drive ? wc : kTwoPi * iv.det_b;
      if (nm > 1) wm[1] = kTwoPi * p_.lg10_offset();
      if (seg.phonon_drive) wm[seg.phonon_drive->mode] = wp;
    }

    iv.frame = wq * k_;
    for (int m = 0; m < nm; ++m) iv.frame += wm[m] * num_[m];
    iv.qz = kTwoPi * (k_.array() - 0.5).matrix();
    iv.hr0 = -iv.frame;
    for (int i = 0; i < d_; ++i) {
      iv.hr0(i) += -kTwoPi * p_.alpha * k_(i) * (k_(i) - 1.0) / 2.0;
      if (nm > 1) iv.hr0(i) += kTwoPi * p_.lg10_offset() * num_[1](i);
    }

    const CMatrix bd = b_.adjoint();
    for (int m = 0; m < nm; ++m) {
      CMatrix op = kTwoPi * p_.coupling(m) * (bd * a_[m]);
      iv.terms.push_back({sparse(op), sparse(op.adjoint()), 1.0, wq - wm[m], 0});
    }
    if (seg.qubit_drive) {
      const Pulse& q = *seg.qubit_drive;
      iv.terms.push_back({sparse(bd), sparse(b_), cplx(0, kPi) * std::exp(cplx(0, q.phase)),
                          wq - wc, 1});
    }
    if (seg.phonon_drive) {
      const Pulse& q = *seg.phonon_drive;
      if (q.mode < 0 || q.mode >= nm) throw std::invalid_argument("phonon drive mode out of range");
      CMatrix ad = a_[q.mode].adjoint();
      iv.terms.push_back({sparse(ad), sparse(a_[q.mode]),
                          cplx(0, kTwoPi) * std::exp(cplx(0, q.phase)), wm[q.mode] - wp, 2});
    }

    iv.hi = Eigen::VectorXd::Zero(d_);
    const double g1 = kTwoPi * n_.qubit_gamma1, gp = kTwoPi * n_.qubit_gamma_phi;
    const double k1 = kTwoPi * n_.phonon_kappa1, kp = kTwoPi * n_.phonon_kappa_phi;
    if (g1 > 0.0) {
      iv.hi += -0.5 * g1 * k_;
      CMatrix l = std::sqrt(g1) * b_;
      iv.jumps.push_back(sparse(l));
      iv.jumps_adj.push_back(sparse(l.adjoint()));
    }
    if (gp > 0.0 || kp > 0.0) iv.gamma = Eigen::MatrixXd::Zero(d_, d_);
    if (gp > 0.0) {
      const double r = gp / 2.0;
      iv.hi += -0.5 * r * sz_.cwiseAbs2();
      iv.gamma += r * sz_ * sz_.transpose();
    }
    for (int m = 0; m < nm; ++m) {
      if (k1 > 0.0) {
        iv.hi += -0.5 * k1 * num_[m];
        CMatrix l = std::sqrt(k1) * a_[m];
        iv.jumps.push_back(sparse(l));
        iv.jumps_adj.push_back(sparse(l.adjoint()));
      }
      if (kp > 0.0) {
        const double r = 2.0 * kp;
        iv.hi += -0.5 * r * num_[m].cwiseAbs2();
        iv.gamma += r * num_[m] * num_[m].transpose();
      }
    }
    return iv;
  }

  const SystemParams& p_;
  const HilbertConfig& c_;
  const NoiseModel& n_;
  const EvolveOptions& o_;
  int d_;
  CMatrix b_;
  std::vector<CMatrix> a_;
  Eigen::VectorXd k_, sz_;
  std::vector<Eigen::VectorXd> num_;
};

double step_duration(const Step& s) {
  if (const auto* seg = std::get_if<Segment>(&s)) return seg->duration;
  return 0.0;
}

}  // namespace

NoiseModel NoiseModel::from_rates(const CoherenceRates& r) {
  NoiseModel n;
  n.qubit_gamma1 = r.gamma1;
  n.qubit_gamma_phi = r.gamma2_star - r.gamma1 / 2.0;
  n.phonon_kappa1 = r.kappa1;
  n.phonon_kappa_phi = r.kappa2_star - r.kappa1 / 2.0;
  if (n.qubit_gamma_phi < 0.0) throw std::invalid_argument("gamma2* < gamma1/2 gives negative dephasing");
  if (n.phonon_kappa_phi < 0.0) throw std::invalid_argument("kappa2* < kappa1/2 gives negative dephasing");
  n.validate();
  return n;
}

bool NoiseModel::dissipative() const {
  return qubit_gamma1 > 0.0 || qubit_gamma_phi > 0.0 || phonon_kappa1 > 0.0 || phonon_kappa_phi > 0.0;
}

void NoiseModel::validate() const {
  for (double v : {qubit_gamma1, qubit_gamma_phi, phonon_kappa1, phonon_kappa_phi})
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("noise rates must be >= 0");
  if (!std::isfinite(static_qubit_offset)) throw std::invalid_argument("static offset must be finite");
}

NoiseModel paper_noise(const SystemParams& params, double delta) {
  return NoiseModel::from_rates(params.rates_at(delta));
}

std::vector<OperatorMatrix> collapse_operators(const HilbertConfig& config, const NoiseModel& noise) {
  noise.validate();
  std::vector<OperatorMatrix> out;
  if (noise.qubit_gamma1 > 0.0)
    out.push_back(qubit_ladder(config) * cplx(std::sqrt(kTwoPi * noise.qubit_gamma1)));
  if (noise.qubit_gamma_phi > 0.0)
    out.push_back(qubit_operator(config, QubitOp::sigma_z) * cplx(std::sqrt(kTwoPi * noise.qubit_gamma_phi / 2.0)));
  for (int m = 0; m < config.mode_count(); ++m) {
    if (noise.phonon_kappa1 > 0.0)
      out.push_back(annihilation(config, m) * cplx(std::sqrt(kTwoPi * noise.phonon_kappa1)));
    if (noise.phonon_kappa_phi > 0.0)
      out.push_back(number(config, m) * cplx(std::sqrt(kTwoPi * 2.0 * noise.phonon_kappa_phi)));
  }
  return out;
}

double Pulse::envelope(double t_local, double duration) const {
  if (t_local < 0.0 || t_local > duration) return 0.0;
  if (shape == PulseShape::square) return amplitude;
  const double x = t_local - duration / 2.0;
  if (std::abs(x) > 4.0 * sigma) return 0.0;
  return amplitude * std::exp(-x * x / (2.0 * sigma * sigma));
}

double Schedule::total_duration() const {
  double t = 0.0;
  for (const auto& s : steps) t += step_duration(s);
  return t;
}

double Schedule::final_detuning() const {
  double d = initial_detuning;
  for (const auto& s : steps)
    if (const auto* seg = std::get_if<Segment>(&s)) d = seg->detuning;
  return d;
}

void Schedule::validate() const {
  for (size_t i = 0; i < steps.size(); ++i) {
    std::ostringstream where;
    where << "schedule step " << i << ": ";
    if (const auto* seg = std::get_if<Segment>(&steps[i])) {
      if (!(seg->duration > 0.0)) throw std::invalid_argument(where.str() + "duration must be > 0");
      if (seg->ramp.kind == RampKind::linear && (seg->ramp.duration < 0.0 || seg->ramp.duration > seg->duration))
        throw std::invalid_argument(where.str() + "ramp time must lie within the segment");
      for (const auto* p : {seg->qubit_drive ? &*seg->qubit_drive : nullptr,
                            seg->phonon_drive ? &*seg->phonon_drive : nullptr}) {
        if (!p) continue;
        if (!(p->amplitude >= 0.0)) throw std::invalid_argument(where.str() + "pulse amplitude must be >= 0");
        if (p->shape == PulseShape::gaussian && !(p->sigma > 0.0))
          throw std::invalid_argument(where.str() + "gaussian sigma must be > 0");
      }
    }
  }
}

Schedule& Schedule::add(Step step) {
  steps.push_back(std::move(step));
  return *this;
}

Schedule& Schedule::append(const Schedule& other) {
  if (other.qubit_reference != qubit_reference)
    throw std::invalid_argument("cannot append schedules with different qubit references");
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  return *this;
}

Evolver::Evolver(SystemParams params, HilbertConfig config, NoiseModel noise, EvolveOptions options)
    : params_(std::move(params)), config_(std::move(config)), noise_(noise), options_(options) {
  noise_.validate();
  if (config_.mode_count() > 2) throw std::invalid_argument("at most two phonon modes");
}

std::vector<DensityMatrix> Evolver::evolve_sampled(const Schedule& schedule, const DensityMatrix& rho0,
                                                   const std::vector<double>& times) const {
  schedule.validate();
  if (!(rho0.config() == config_)) throw std::invalid_argument("initial state config mismatch");
  if (!std::is_sorted(times.begin(), times.end())) throw std::invalid_argument("sample times must be sorted");
  const double total = schedule.total_duration();
  if (!times.empty() && (times.front() < 0.0 || times.back() > total * (1 + 1e-12)))
    throw std::invalid_argument("sample times outside the schedule");

  Engine eng(params_, config_, noise_, options_);
  std::vector<std::optional<CMatrix>> out(times.size());
  CMatrix rho = rho0.matrix();
  double t = 0.0, det = schedule.initial_detuning;
  size_t next = 0;
  auto store_range = [&](double t0, double t1) {
    std::vector<double> s;
    for (size_t i = next; i < times.size() && times[i] < t1; ++i)
      if (times[i] >= t0) s.push_back(times[i]);
    return s;
  };
  for (const auto& step : schedule.steps) {
    if (const auto* seg = std::get_if<Segment>(&step)) {
      for (const auto& iv : eng.intervals(*seg, t, det, schedule.qubit_reference)) {
        std::vector<double> s = store_range(iv.t0, iv.t1);
        eng.advance(iv, Mode::lindblad, rho, s, [&](double ts, const CMatrix& y) {
          for (size_t i = next; i < times.size(); ++i)
            if (times[i] == ts && !out[i]) out[i] = y;
        });
        while (next < times.size() && times[next] < iv.t1) ++next;
        if (options_.validate_states) check_state(rho, config_, iv.t1);
      }
      t += seg->duration;
      det = seg->detuning;
    } else {
      const CMatrix u = eng.kick_unitary(step, t, schedule.qubit_reference);
      rho = u * rho * u.adjoint();
      if (options_.validate_states) check_state(rho, config_, t);
    }
  }
  for (size_t i = 0; i < times.size(); ++i)
    if (!out[i]) out[i] = rho;
  std::vector<DensityMatrix> res;
  res.reserve(times.size());
  for (auto& m : out) {
    CMatrix h = 0.5 * (*m + m->adjoint());
    if (options_.validate_states) check_state(*m, config_, -1.0);
    res.emplace_back(config_, h);
  }
  return res;
}

DensityMatrix Evolver::evolve(const Schedule& schedule, const DensityMatrix& rho0) const {
  return evolve_sampled(schedule, rho0, {schedule.total_duration()}).front();
}

OperatorMatrix Evolver::heisenberg(const Schedule& schedule, const OperatorMatrix& observable) const {
  schedule.validate();
  if (!(observable.config() == config_)) throw std::invalid_argument("observable config mismatch");
  Engine eng(params_, config_, noise_, options_);
  // Forward pass records step start times and detunings.
  struct Item {
    const Step* step;
    double t;
    double prev_det;
  };
  std::vector<Item> items;
  double t = 0.0, det = schedule.initial_detuning;
  for (const auto& step : schedule.steps) {
    items.push_back({&step, t, det});
    if (const auto* seg = std::get_if<Segment>(&step)) {
      t += seg->duration;
      det = seg->detuning;
    }
  }
  CMatrix o = observable.matrix();
  for (auto it = items.rbegin(); it != items.rend(); ++it) {
    if (const auto* seg = std::get_if<Segment>(it->step)) {
      auto ivs = eng.intervals(*seg, it->t, it->prev_det, schedule.qubit_reference);
      for (auto iv = ivs.rbegin(); iv != ivs.rend(); ++iv)
        eng.advance(*iv, Mode::adjoint, o, {}, [](double, const CMatrix&) {});
    } else {
      const CMatrix u = eng.kick_unitary(*it->step, it->t, schedule.qubit_reference);
      o = u.adjoint() * o * u;
    }
  }
  return {config_, o};
}

OperatorMatrix Evolver::propagator(const Schedule& schedule) const {
  schedule.validate();
  if (noise_.dissipative()) throw std::invalid_argument("propagator requires a noiseless model");
  Engine eng(params_, config_, noise_, options_);
  CMatrix u = CMatrix::Identity(config_.dimension(), config_.dimension());
  double t = 0.0, det = schedule.initial_detuning;
  for (const auto& step : schedule.steps) {
    if (const auto* seg = std::get_if<Segment>(&step)) {
      for (const auto& iv : eng.intervals(*seg, t, det, schedule.qubit_reference))
        eng.advance(iv, Mode::unitary, u, {}, [](double, const CMatrix&) {});
      t += seg->duration;
      det = seg->detuning;
    } else {
      u = eng.kick_unitary(step, t, schedule.qubit_reference) * u;
    }
  }
  return {config_, u};
}

std::vector<DensityMatrix> lindblad_evolve(const DensityMatrix& rho0, const HamiltonianFn& hamiltonian,
                                           const NoiseModel& noise, const std::vector<double>& t_span,
                                           const EvolveOptions& options) {
  if (t_span.size() < 2 || !std::is_sorted(t_span.begin(), t_span.end()))
    throw std::invalid_argument("t_span must hold at least two increasing times");
  const HilbertConfig& cfg = rho0.config();
  const int d = cfg.dimension();
  std::vector<CMatrix> ls, ldl;
  for (const auto& l : collapse_operators(cfg, noise)) {
    ls.push_back(l.matrix());
    ldl.push_back(l.matrix().adjoint() * l.matrix());
  }
  const CMatrix offset =
      kTwoPi * noise.static_qubit_offset * 0.5 * qubit_operator(cfg, QubitOp::sigma_z).matrix();
  auto rhs = [&](const State& xs, State& dxs, double t) {
    CConstMap x(reinterpret_cast<const cplx*>(xs.data()), d, d);
    CMap dx(reinterpret_cast<cplx*>(dxs.data()), d, d);
    const OperatorMatrix hop = hamiltonian(t);
    if (!(hop.config() == cfg)) throw std::invalid_argument("hamiltonian config mismatch");
    const CMatrix h = hop.matrix() + offset;
    dx = cplx(0, -1) * (h * x - x * h);
    for (size_t k = 0; k < ls.size(); ++k)
      dx += ls[k] * x * ls[k].adjoint() - 0.5 * (ldl[k] * x + x * ldl[k]);
  };
  State s = to_state(rho0.matrix());
  std::vector<DensityMatrix> out;
  auto stepper = odeint::make_dense_output(options.atol, options.rtol, odeint::runge_kutta_dopri5<State>());
  try {
    odeint::integrate_times(
        stepper, rhs, s, t_span.begin(), t_span.end(), std::min(1e-9, t_span[1] - t_span[0]),
        [&](const State& st, double t) {
          CMatrix m = from_state(st, d);
          if (options.validate_states) check_state(m, cfg, t);
          out.emplace_back(cfg, 0.5 * (m + m.adjoint()));
        },
        odeint::max_step_checker(static_cast<int>(options.max_steps)));
  } catch (const odeint::odeint_error& e) {
    throw NumericError(std::string("integrator failed: ") + e.what());
  }
  return out;
}

double dressed_qubit_frequency(double g, double delta) {
  const double s = delta < 0.0 ? -1.0 : 1.0;
  return delta / 2.0 + s * 0.5 * std::sqrt(delta * delta + 4.0 * g * g);
}

double dressed_phonon_frequency(double g, double delta) {
  const double s = delta < 0.0 ? -1.0 : 1.0;
  return delta / 2.0 - s * 0.5 * std::sqrt(delta * delta + 4.0 * g * g);
}

StateTransformer swap_gate(const SystemParams& params, const HilbertConfig& config, const NoiseModel& noise,
                           int mode_index, int phonon_number, const EvolveOptions& options) {
  if (phonon_number < 1) throw std::invalid_argument("swap_gate: phonon number must be >= 1");
  const double g = params.coupling(mode_index);
  if (mode_index >= config.mode_count()) throw std::out_of_range("swap_gate: mode index out of range");
  const double resonance = mode_index == 0 ? 0.0 : params.lg10_offset();
  Schedule s;
  s.initial_detuning = params.delta_rest;
  s.add(Segment{1.0 / (4.0 * g * std::sqrt(static_cast<double>(phonon_number))), resonance, {}, {}, {}});
  return {s, Evolver(params, config, noise, options)};
}

StateTransformer displacement_drive(const SystemParams& params, const HilbertConfig& config,
                                    const NoiseModel& noise, double amplitude, double phase, double duration,
                                    const EvolveOptions& options) {
  if (!(duration > 0.0)) throw std::invalid_argument("displacement_drive: duration must be > 0");
  const double beta = displacement_per_amplitude(duration) * amplitude;
  if (std::norm(beta) > config.phonon_dim(0) / 4.0)
    throw std::invalid_argument("displacement_drive: |beta| exceeds the truncation guard, requires dimension >= " +
                                std::to_string(required_dimension(beta)));
  Pulse p;
  p.amplitude = amplitude;
  p.phase = phase;
  p.carrier_detuning = dressed_phonon_frequency(params.g_lg00, params.delta_rest);
  Schedule s;
  s.initial_detuning = params.delta_rest;
  s.add(Segment{duration, params.delta_rest, std::nullopt, p, {}});
  return {s, Evolver(params, config, noise, options)};
}

Eigen::MatrixXd vacuum_rabi_chevron(const SystemParams& params, const HilbertConfig& config,
                                    const NoiseModel& noise, const std::vector<double>& detuning_grid,
                                    const std::vector<double>& time_grid, const EvolveOptions& options) {
  if (detuning_grid.empty() || time_grid.empty()) throw std::invalid_argument("empty chevron grid");
  std::vector<double> times = time_grid;
  std::sort(times.begin(), times.end());
  if (times.front() < 0.0) throw std::invalid_argument("negative time in chevron grid");
  const double t_max = times.back() > 0.0 ? times.back() : 1e-9;
  Evolver ev(params, config, noise, options);
  std::vector<int> occ(config.mode_count(), 0);
  const DensityMatrix rho0 = DensityMatrix::from_ket(fock_state(config, occ, 1));
  const OperatorMatrix pe = tensor(config, [&] {
    CMatrix p = CMatrix::Zero(config.qubit_levels(), config.qubit_levels());
    p(1, 1) = 1.0;
    return p;
  }(), {});
  Eigen::MatrixXd map(detuning_grid.size(), time_grid.size());
  for (size_t i = 0; i < detuning_grid.size(); ++i) {
    Schedule s;
    s.initial_detuning = detuning_grid[i];
    s.add(Segment{t_max, detuning_grid[i], {}, {}, {}});
    auto states = ev.evolve_sampled(s, rho0, times);
    for (size_t j = 0; j < time_grid.size(); ++j) {
      auto k = std::lower_bound(times.begin(), times.end(), time_grid[j]) - times.begin();
      map(i, j) = expectation(states[k], pe).real();
    }
  }
  return map;
}

}  // namespace cqad
