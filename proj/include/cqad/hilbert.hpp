#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cqad {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Qubit factor is the slowest-varying index, then phonon modes in listed order.
class HilbertConfig {
 public:
  HilbertConfig(int qubit_levels, std::vector<int> phonon_dims);

  int qubit_levels() const { return qubit_levels_; }
  const std::vector<int>& phonon_dims() const { return phonon_dims_; }
  int mode_count() const { return static_cast<int>(phonon_dims_.size()); }
  int phonon_dim(int mode) const;
  int dimension() const { return dimension_; }
  // Product of phonon dims: number of basis states per qubit level.
  int phonon_block() const { return dimension_ / qubit_levels_; }

  int index(int qubit_level, std::span<const int> occupations) const;
  int qubit_level_of(int index) const { return index / phonon_block(); }
  int occupation_of(int index, int mode) const;
  int total_phonons_of(int index) const;

  bool operator==(const HilbertConfig& other) const = default;

 private:
  int qubit_levels_;
  std::vector<int> phonon_dims_;
  int dimension_;
  std::vector<int> strides_;
};

class OperatorMatrix {
 public:
  OperatorMatrix(HilbertConfig config, CMatrix entries);

  const HilbertConfig& config() const { return config_; }
  const CMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  cplx operator()(int r, int c) const { return m_(r, c); }

  // max |H - H^dagger| relative to the largest entry magnitude (0 for a zero matrix).
  double hermiticity_defect() const;
  bool is_hermitian(double rel_tol = 1e-12) const { return hermiticity_defect() <= rel_tol; }

  OperatorMatrix adjoint() const;

  OperatorMatrix operator+(const OperatorMatrix& o) const;
  OperatorMatrix operator-(const OperatorMatrix& o) const;
  OperatorMatrix operator*(const OperatorMatrix& o) const;
  OperatorMatrix operator*(cplx s) const;
  friend OperatorMatrix operator*(cplx s, const OperatorMatrix& op) { return op * s; }

 private:
  HilbertConfig config_;
  CMatrix m_;
};

class Ket {
 public:
  Ket(HilbertConfig config, CVector amplitudes);

  const HilbertConfig& config() const { return config_; }
  const CVector& amplitudes() const { return v_; }
  double norm() const { return v_.norm(); }
  Ket normalized() const;

 private:
  HilbertConfig config_;
  CVector v_;
};

Ket operator*(const OperatorMatrix& op, const Ket& ket);

struct StateDiagnostics {
  double trace_error;         // |Tr rho - 1|
  double hermiticity_defect;  // max |rho - rho^dagger|
  double min_eigenvalue;
};

class DensityMatrix {
 public:
  DensityMatrix(HilbertConfig config, CMatrix entries);
  static DensityMatrix from_ket(const Ket& ket);

  const HilbertConfig& config() const { return config_; }
  const CMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

  cplx trace() const { return m_.trace(); }
  double purity() const;
  StateDiagnostics diagnostics() const;
  // Throws std::runtime_error if the state violates the given slack.
  void validate(double trace_tol = 1e-6, double herm_tol = 1e-9, double eig_tol = -1e-7) const;

 private:
  HilbertConfig config_;
  CMatrix m_;
};

// Reduced state over a subset of subsystems (0 = qubit, k = mode k-1).
struct SubsystemDensity {
  std::vector<int> dims;
  CMatrix matrix;
  cplx trace() const { return matrix.trace(); }
};

enum class QubitOp { sigma_z, sigma_plus, sigma_minus, sigma_x, sigma_y };

OperatorMatrix identity(const HilbertConfig& config);
OperatorMatrix annihilation(const HilbertConfig& config, int mode);
OperatorMatrix creation(const HilbertConfig& config, int mode);
OperatorMatrix number(const HilbertConfig& config, int mode);
OperatorMatrix qubit_operator(const HilbertConfig& config, QubitOp which);
// Transmon ladder b with b|k> = sqrt(k)|k-1>; equals sigma_minus for two levels.
OperatorMatrix qubit_ladder(const HilbertConfig& config);
OperatorMatrix qubit_number(const HilbertConfig& config);
OperatorMatrix parity_operator(const HilbertConfig& config, int mode);
OperatorMatrix displacement_operator(const HilbertConfig& config, int mode, cplx beta);

// Embeds local factors; an empty matrix means identity on that subsystem.
OperatorMatrix tensor(const HilbertConfig& config, const CMatrix& qubit_factor,
                      const std::vector<CMatrix>& mode_factors);
OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b);

Ket fock_state(const HilbertConfig& config, std::span<const int> occupations, int qubit_level);
Ket fock_state(const HilbertConfig& config, std::initializer_list<int> occupations, int qubit_level);
Ket coherent_state(const HilbertConfig& config, int mode, cplx beta);
// Single-mode coherent amplitudes c_0..c_{dim-1}, renormalised.
CVector coherent_amplitudes(int dim, cplx beta);
// Smallest truncation that passes the |beta|^2 <= dim/4 guard.
int required_dimension(cplx beta);

cplx expectation(const Ket& state, const OperatorMatrix& op);
cplx expectation(const DensityMatrix& state, const OperatorMatrix& op);

SubsystemDensity partial_trace(const DensityMatrix& rho, std::span<const int> keep);
SubsystemDensity partial_trace(const DensityMatrix& rho, std::initializer_list<int> keep);
// Reduced density matrix of one phonon mode.
CMatrix phonon_state(const DensityMatrix& rho, int mode);
std::vector<double> phonon_populations(const DensityMatrix& rho, int mode);

// exp(M) by scaling and squaring.
CMatrix expm(const CMatrix& m);
// exp(-i H t) for Hermitian H.
CMatrix unitary_propagator(const CMatrix& hermitian, double t);

}  // namespace cqad
