#include "cqad/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace cqad {

namespace {

void require_same(const HilbertConfig& a, const HilbertConfig& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": Hilbert config mismatch");
}

CMatrix ladder_matrix(int dim) {
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

void check_mode(const HilbertConfig& config, int mode) {
  if (mode < 0 || mode >= config.mode_count()) {
    std::ostringstream os;
    os << "mode index " << mode << " out of range (" << config.mode_count() << " modes)";
    throw std::out_of_range(os.str());
  }
}

void check_guard(int dim, cplx beta) {
  if (std::norm(beta) > dim / 4.0) {
    std::ostringstream os;
    os << "|beta|^2 = " << std::norm(beta) << " too large for phonon dimension " << dim
       << "; requires dimension >= " << required_dimension(beta);
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

HilbertConfig::HilbertConfig(int qubit_levels, std::vector<int> phonon_dims)
    : qubit_levels_(qubit_levels), phonon_dims_(std::move(phonon_dims)) {
  if (qubit_levels_ != 2 && qubit_levels_ != 3)
    throw std::invalid_argument("qubit_levels must be 2 or 3");
  if (phonon_dims_.empty()) throw std::invalid_argument("at least one phonon mode is required");
  for (int d : phonon_dims_)
    if (d < 2) throw std::invalid_argument("phonon dimensions must be >= 2");
  strides_.assign(phonon_dims_.size(), 1);
  for (int k = static_cast<int>(phonon_dims_.size()) - 2; k >= 0; --k)
    strides_[k] = strides_[k + 1] * phonon_dims_[k + 1];
  dimension_ = qubit_levels_ * strides_[0] * phonon_dims_[0];
}

int HilbertConfig::phonon_dim(int mode) const {
  check_mode(*this, mode);
  return phonon_dims_[mode];
}

int HilbertConfig::index(int qubit_level, std::span<const int> occupations) const {
  if (qubit_level < 0 || qubit_level >= qubit_levels_)
    throw std::out_of_range("qubit level out of range");
  if (occupations.size() != phonon_dims_.size())
    throw std::invalid_argument("occupation list must have one entry per mode");
  int idx = qubit_level * phonon_block();
  for (size_t k = 0; k < occupations.size(); ++k) {
    if (occupations[k] < 0 || occupations[k] >= phonon_dims_[k]) {
      std::ostringstream os;
      os << "occupation " << occupations[k] << " of mode " << k << " exceeds truncation "
         << phonon_dims_[k];
      throw std::out_of_range(os.str());
    }
    idx += occupations[k] * strides_[k];
  }
  return idx;
}

int HilbertConfig::occupation_of(int index, int mode) const {
  return (index % phonon_block()) / strides_[mode] % phonon_dims_[mode];
}

int HilbertConfig::total_phonons_of(int index) const {
  int n = 0;
  for (int k = 0; k < mode_count(); ++k) n += occupation_of(index, k);
  return n;
}

OperatorMatrix::OperatorMatrix(HilbertConfig config, CMatrix entries)
    : config_(std::move(config)), m_(std::move(entries)) {
  if (m_.rows() != m_.cols() || m_.rows() != config_.dimension())
    throw std::invalid_argument("operator dimension does not match Hilbert config");
}

double OperatorMatrix::hermiticity_defect() const {
  double scale = m_.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() / scale;
}

OperatorMatrix OperatorMatrix::adjoint() const { return {config_, m_.adjoint()}; }

OperatorMatrix OperatorMatrix::operator+(const OperatorMatrix& o) const {
  require_same(config_, o.config_, "operator +");
  return {config_, m_ + o.m_};
}

OperatorMatrix OperatorMatrix::operator-(const OperatorMatrix& o) const {
  require_same(config_, o.config_, "operator -");
  return {config_, m_ - o.m_};
}

OperatorMatrix OperatorMatrix::operator*(const OperatorMatrix& o) const {
  require_same(config_, o.config_, "operator *");
  return {config_, m_ * o.m_};
}

OperatorMatrix OperatorMatrix::operator*(cplx s) const { return {config_, m_ * s}; }

Ket::Ket(HilbertConfig config, CVector amplitudes)
    : config_(std::move(config)), v_(std::move(amplitudes)) {
  if (v_.size() != config_.dimension())
    throw std::invalid_argument("ket dimension does not match Hilbert config");
}

Ket Ket::normalized() const {
  double n = v_.norm();
  if (n == 0.0) throw std::invalid_argument("cannot normalise a zero ket");
  return {config_, v_ / n};
}

Ket operator*(const OperatorMatrix& op, const Ket& ket) {
  require_same(op.config(), ket.config(), "operator * ket");
  return {op.config(), op.matrix() * ket.amplitudes()};
}

DensityMatrix::DensityMatrix(HilbertConfig config, CMatrix entries)
    : config_(std::move(config)), m_(std::move(entries)) {
  if (m_.rows() != m_.cols() || m_.rows() != config_.dimension())
    throw std::invalid_argument("density matrix dimension does not match Hilbert config");
}

DensityMatrix DensityMatrix::from_ket(const Ket& ket) {
  const CVector& v = ket.amplitudes();
  return {ket.config(), v * v.adjoint()};
}

double DensityMatrix::purity() const { return (m_ * m_).trace().real(); }

StateDiagnostics DensityMatrix::diagnostics() const {
  StateDiagnostics d;
  d.trace_error = std::abs(m_.trace() - cplx(1.0, 0.0));
  d.hermiticity_defect = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  CMatrix h = 0.5 * (m_ + m_.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  d.min_eigenvalue = es.eigenvalues().minCoeff();
  return d;
}

void DensityMatrix::validate(double trace_tol, double herm_tol, double eig_tol) const {
  StateDiagnostics d = diagnostics();
  std::ostringstream os;
  if (d.trace_error > trace_tol) os << "trace error " << d.trace_error << "; ";
  if (d.hermiticity_defect > herm_tol) os << "hermiticity defect " << d.hermiticity_defect << "; ";
  if (d.min_eigenvalue < eig_tol) os << "negative eigenvalue " << d.min_eigenvalue << "; ";
  if (!os.str().empty()) throw std::runtime_error("invalid density matrix: " + os.str());
}

OperatorMatrix identity(const HilbertConfig& config) {
  return {config, CMatrix::Identity(config.dimension(), config.dimension())};
}

OperatorMatrix tensor(const HilbertConfig& config, const CMatrix& qubit_factor,
                      const std::vector<CMatrix>& mode_factors) {
  if (static_cast<int>(mode_factors.size()) > config.mode_count())
    throw std::invalid_argument("more mode factors than modes");
  std::vector<CMatrix> factors;
  factors.push_back(qubit_factor.size() ? qubit_factor
                                        : CMatrix::Identity(config.qubit_levels(), config.qubit_levels()));
  for (int k = 0; k < config.mode_count(); ++k) {
    int d = config.phonon_dims()[k];
    if (k < static_cast<int>(mode_factors.size()) && mode_factors[k].size())
      factors.push_back(mode_factors[k]);
    else
      factors.push_back(CMatrix::Identity(d, d));
  }
  if (factors[0].rows() != config.qubit_levels())
    throw std::invalid_argument("qubit factor has wrong dimension");
  for (int k = 0; k < config.mode_count(); ++k)
    if (factors[k + 1].rows() != config.phonon_dims()[k])
      throw std::invalid_argument("mode factor has wrong dimension");

  CMatrix out = factors[0];
  for (size_t f = 1; f < factors.size(); ++f) {
    const CMatrix& b = factors[f];
    CMatrix k(out.rows() * b.rows(), out.cols() * b.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = out(i, j) * b;
    out = std::move(k);
  }
  return {config, out};
}

OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b) { return a * b; }

OperatorMatrix annihilation(const HilbertConfig& config, int mode) {
  check_mode(config, mode);
  std::vector<CMatrix> f(config.mode_count());
  f[mode] = ladder_matrix(config.phonon_dims()[mode]);
  return tensor(config, CMatrix(), f);
}

OperatorMatrix creation(const HilbertConfig& config, int mode) {
  return annihilation(config, mode).adjoint();
}

OperatorMatrix number(const HilbertConfig& config, int mode) {
  check_mode(config, mode);
  int d = config.phonon_dims()[mode];
  std::vector<CMatrix> f(config.mode_count());
  f[mode] = CMatrix::Zero(d, d);
  for (int n = 0; n < d; ++n) f[mode](n, n) = n;
  return tensor(config, CMatrix(), f);
}

OperatorMatrix qubit_operator(const HilbertConfig& config, QubitOp which) {
  int q = config.qubit_levels();
  CMatrix sp = CMatrix::Zero(q, q);
  sp(1, 0) = 1.0;
  CMatrix s;
  switch (which) {
    case QubitOp::sigma_z:
      s = CMatrix::Zero(q, q);
      s(0, 0) = -1.0;
      s(1, 1) = 1.0;
      break;
    case QubitOp::sigma_plus:
      s = sp;
      break;
    case QubitOp::sigma_minus:
      s = sp.adjoint();
      break;
    case QubitOp::sigma_x:
      s = sp + sp.adjoint();
      break;
    case QubitOp::sigma_y:
      s = cplx(0, -1) * sp + cplx(0, 1) * CMatrix(sp.adjoint());
      break;
    default:
      throw std::invalid_argument("unknown qubit operator");
  }
  return tensor(config, s, {});
}

OperatorMatrix qubit_ladder(const HilbertConfig& config) {
  return tensor(config, ladder_matrix(config.qubit_levels()), {});
}

OperatorMatrix qubit_number(const HilbertConfig& config) {
  int q = config.qubit_levels();
  CMatrix n = CMatrix::Zero(q, q);
  for (int k = 0; k < q; ++k) n(k, k) = k;
  return tensor(config, n, {});
}

OperatorMatrix parity_operator(const HilbertConfig& config, int mode) {
  check_mode(config, mode);
  int d = config.phonon_dims()[mode];
  std::vector<CMatrix> f(config.mode_count());
  f[mode] = CMatrix::Zero(d, d);
  for (int n = 0; n < d; ++n) f[mode](n, n) = (n % 2 == 0) ? 1.0 : -1.0;
  return tensor(config, CMatrix(), f);
}

int required_dimension(cplx beta) {
  return std::max(2, static_cast<int>(std::ceil(4.0 * std::norm(beta) - 1e-12)));
}

OperatorMatrix displacement_operator(const HilbertConfig& config, int mode, cplx beta) {
  check_mode(config, mode);
  int d = config.phonon_dims()[mode];
  check_guard(d, beta);
  // Exponentiate in a padded space so the kept block carries the untruncated matrix elements.
  int padded = d + 30 + static_cast<int>(std::ceil(8.0 * std::norm(beta)));
  CMatrix a = ladder_matrix(padded);
  CMatrix k = cplx(0, 1) * (beta * CMatrix(a.adjoint()) - std::conj(beta) * a);  // Hermitian
  CMatrix big = unitary_propagator(k, 1.0);
  std::vector<CMatrix> f(config.mode_count());
  f[mode] = big.topLeftCorner(d, d);
  return tensor(config, CMatrix(), f);
}

Ket fock_state(const HilbertConfig& config, std::span<const int> occupations, int qubit_level) {
  CVector v = CVector::Zero(config.dimension());
  v(config.index(qubit_level, occupations)) = 1.0;
  return {config, v};
}

Ket fock_state(const HilbertConfig& config, std::initializer_list<int> occupations,
               int qubit_level) {
  std::vector<int> occ(occupations);
  return fock_state(config, std::span<const int>(occ), qubit_level);
}

CVector coherent_amplitudes(int dim, cplx beta) {
  CVector c(dim);
  c(0) = std::exp(-0.5 * std::norm(beta));
  for (int n = 1; n < dim; ++n) c(n) = c(n - 1) * beta / std::sqrt(static_cast<double>(n));
  return c / c.norm();
}

Ket coherent_state(const HilbertConfig& config, int mode, cplx beta) {
  check_mode(config, mode);
  int d = config.phonon_dims()[mode];
  check_guard(d, beta);
  CVector c = coherent_amplitudes(d, beta);
  CVector v = CVector::Zero(config.dimension());
  std::vector<int> occ(config.mode_count(), 0);
  for (int n = 0; n < d; ++n) {
    occ[mode] = n;
    v(config.index(0, occ)) = c(n);
  }
  return {config, v};
}

cplx expectation(const Ket& state, const OperatorMatrix& op) {
  require_same(state.config(), op.config(), "expectation");
  return state.amplitudes().dot(op.matrix() * state.amplitudes());
}

cplx expectation(const DensityMatrix& state, const OperatorMatrix& op) {
  require_same(state.config(), op.config(), "expectation");
  return (state.matrix() * op.matrix()).trace();
}

SubsystemDensity partial_trace(const DensityMatrix& rho, std::span<const int> keep_in) {
  const HilbertConfig& cfg = rho.config();
  std::vector<int> dims{cfg.qubit_levels()};
  dims.insert(dims.end(), cfg.phonon_dims().begin(), cfg.phonon_dims().end());
  const int nsub = static_cast<int>(dims.size());

  std::vector<int> keep(keep_in.begin(), keep_in.end());
  std::sort(keep.begin(), keep.end());
  if (std::adjacent_find(keep.begin(), keep.end()) != keep.end())
    throw std::invalid_argument("partial_trace: duplicate subsystem");
  for (int k : keep)
    if (k < 0 || k >= nsub) throw std::out_of_range("partial_trace: subsystem out of range");

  std::vector<bool> kept(nsub, false);
  for (int k : keep) kept[k] = true;
  std::vector<int> out_dims;
  for (int k : keep) out_dims.push_back(dims[k]);
  int out_dim = std::accumulate(out_dims.begin(), out_dims.end(), 1, std::multiplies<>());

  const int full = cfg.dimension();
  std::vector<std::vector<int>> digits(full, std::vector<int>(nsub));
  std::vector<int> kept_index(full), traced_index(full);
  for (int i = 0; i < full; ++i) {
    int rem = i;
    for (int s = nsub - 1; s >= 0; --s) {
      digits[i][s] = rem % dims[s];
      rem /= dims[s];
    }
    int ki = 0, ti = 0;
    for (int s = 0; s < nsub; ++s) {
      if (kept[s]) ki = ki * dims[s] + digits[i][s];
      else ti = ti * dims[s] + digits[i][s];
    }
    kept_index[i] = ki;
    traced_index[i] = ti;
  }

  CMatrix out = CMatrix::Zero(out_dim, out_dim);
  const CMatrix& m = rho.matrix();
  for (int i = 0; i < full; ++i)
    for (int j = 0; j < full; ++j)
      if (traced_index[i] == traced_index[j]) out(kept_index[i], kept_index[j]) += m(i, j);
  return {out_dims, out};
}

SubsystemDensity partial_trace(const DensityMatrix& rho, std::initializer_list<int> keep) {
  std::vector<int> k(keep);
  return partial_trace(rho, std::span<const int>(k));
}

CMatrix phonon_state(const DensityMatrix& rho, int mode) {
  check_mode(rho.config(), mode);
  return partial_trace(rho, {mode + 1}).matrix;
}

std::vector<double> phonon_populations(const DensityMatrix& rho, int mode) {
  CMatrix r = phonon_state(rho, mode);
  std::vector<double> p(r.rows());
  for (Eigen::Index n = 0; n < r.rows(); ++n) p[n] = r(n, n).real();
  return p;
}

CMatrix expm(const CMatrix& m) { return m.exp(); }

CMatrix unitary_propagator(const CMatrix& hermitian, double t) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (hermitian + hermitian.adjoint()));
  const auto& v = es.eigenvectors();
  CVector phases = (es.eigenvalues().cast<cplx>() * cplx(0, -t)).array().exp();
  return v * phases.asDiagonal() * v.adjoint();
}

}  // namespace cqad
