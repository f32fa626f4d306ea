#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "cqad/device_model.hpp"
#include "cqad/params_io.hpp"

using namespace cqad;

namespace {

// Restricts H to the basis states with the given excitation number.
CMatrix manifold(const OperatorMatrix& h, int n_exc) {
  const auto& c = h.config();
  std::vector<int> idx;
  for (int i = 0; i < c.dimension(); ++i)
    if (c.qubit_level_of(i) + c.total_phonons_of(i) == n_exc) idx.push_back(i);
  CMatrix m(idx.size(), idx.size());
  for (size_t i = 0; i < idx.size(); ++i)
    for (size_t j = 0; j < idx.size(); ++j) m(i, j) = h(idx[i], idx[j]);
  return m;
}

}  // namespace

TEST_CASE("preset device defaults") {
  SystemParams p = SystemParams::paper_defaults();
  p.validate();
  CHECK(p.g_lg00 == 259.5e3);
  CHECK(p.g_lg10 == 91.3e3);
  CHECK(p.delta_rest == -4.1e6);
  CHECK(p.delta_coherent == -1.2e6);
  CHECK(p.delta_fock == -0.8e6);
  CHECK(p.delta_ramsey == -1.9e6);
  CHECK(p.rates_at(p.delta_rest).gamma2_star == 15.1e3);
  CHECK(p.rates_at(p.delta_rest).kappa1 == 2.0e3);
  CHECK(p.rates_at(p.delta_rest).kappa2_star == 1.2e3);
  CHECK(p.alpha == 214e6);
  CHECK(p.fsr == 12e6);
  CHECK(p.omega_m_lg00 == 5.9741e9);
  CHECK(p.omega_m_lg10 == 5.9752e9);
  CHECK(std::abs(p.lg10_offset() - 1.1e6) < 1.0);
  // Nearest-neighbour lookup between the two measured points.
  CHECK(p.rates_at(p.delta_coherent).gamma1 == 12.1e3);
  CHECK(p.rates_at(p.delta_fock).gamma1 == 12.1e3);
  CHECK(p.rates_at(-3.5e6).gamma1 == 15.6e3);
}

TEST_CASE("parameter validation") {
  SystemParams p;
  p.g_lg00 = 0.0;
  CHECK_THROWS(p.validate());
  p = SystemParams{};
  p.g_lg00 = 13e6;
  CHECK_THROWS(p.validate());
  p = SystemParams{};
  p.rate_table[0].rates.kappa1 = -1.0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("full JC spectrum") {
  SystemParams p;
  HilbertConfig c(2, {6});
  for (double delta : {0.0, -1.9e6, 0.7e6}) {
    auto h = full_jc_hamiltonian(p, c, delta, Frame::qubit_rotating);
    CHECK(h.is_hermitian());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(manifold(h, 1));
    const double split = (es.eigenvalues()(1) - es.eigenvalues()(0)) / kTwoPi;
    CHECK(std::abs(split - 2.0 * std::sqrt(p.g_lg00 * p.g_lg00 + delta * delta / 4.0)) < 1e-6);
  }
  // Resonant vacuum Rabi splitting 2g = 519 kHz.
  auto h0 = full_jc_hamiltonian(p, c, 0.0, Frame::phonon_rotating);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(manifold(h0, 1));
  CHECK(std::abs((es.eigenvalues()(1) - es.eigenvalues()(0)) / kTwoPi - 519e3) < 1e-6);

  // Frames differ only by multiples of the conserved excitation number.
  auto hl = full_jc_hamiltonian(p, c, -1.9e6, Frame::lab);
  auto hq = full_jc_hamiltonian(p, c, -1.9e6, Frame::qubit_rotating);
  auto hp = full_jc_hamiltonian(p, c, -1.9e6, Frame::phonon_rotating);
  CHECK(hl.is_hermitian());
  auto n = excitation_number(c);
  for (const auto* h : {&hl, &hq, &hp}) {
    CMatrix comm = (*h * n - n * *h).matrix();
    CHECK(comm.cwiseAbs().maxCoeff() < 1e-9);
  }
  CMatrix diff = hp.matrix() - hq.matrix();
  const double wq = kTwoPi * -1.9e6;
  for (int i = 0; i < c.dimension(); ++i) {
    const double expect = wq * (c.qubit_level_of(i) + c.total_phonons_of(i)) - wq / 2.0;
    CHECK(std::abs(diff(i, i).real() - expect) < 1e-6);
  }
}

TEST_CASE("JC with vanishing coupling has bare eigenvectors") {
  SystemParams p;
  p.g_lg00 = 1e-9;
  HilbertConfig c(2, {4});
  auto h = full_jc_hamiltonian(p, c, -1.9e6);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix());
  for (int k = 0; k < c.dimension(); ++k) CHECK(es.eigenvectors().col(k).cwiseAbs().maxCoeff() > 1.0 - 1e-9);
}

TEST_CASE("two-mode and three-level builders") {
  SystemParams p;
  HilbertConfig c(3, {4, 3});
  auto h = full_jc_hamiltonian(p, c, -1.9e6);
  CHECK(h.is_hermitian());
  auto n = excitation_number(c);
  CHECK(((h * n - n * h).matrix()).cwiseAbs().maxCoeff() < 1e-9);
  // |f,0,0> sits at 2 delta - delta/2 - alpha.
  const int f = c.index(2, std::vector<int>{0, 0});
  CHECK(std::abs(h(f, f).real() / kTwoPi - (2 * -1.9e6 + 1.9e6 / 2 - 214e6)) < 1e-3);
  // LG-10 single phonon sits 1.1 MHz above LG-00.
  const int g01 = c.index(0, std::vector<int>{0, 1});
  const int g10 = c.index(0, std::vector<int>{1, 0});
  CHECK(std::abs((h(g01, g01) - h(g10, g10)).real() / kTwoPi - 1.1e6) < 1e-3);
}

TEST_CASE("dispersive Hamiltonian") {
  SystemParams p;
  HilbertConfig c(2, {5});
  const double chi = chi_analytic(p.g_lg00, p.delta_ramsey, p.alpha, ChiForm::full);
  auto h = dispersive_hamiltonian(p, c, p.delta_ramsey);
  CHECK(h.is_hermitian());
  auto e = [&](int q, int n) { return h(c.index(q, std::vector<int>{n}), c.index(q, std::vector<int>{n})).real() / kTwoPi; };
  CHECK(std::abs((e(1, 1) - e(1, 0)) - (e(0, 1) - e(0, 0)) - chi) < 1e-6);
  CHECK(std::abs(chi / 1e3 + 70.26) < 0.01);
  auto hl = dispersive_hamiltonian(p, c, p.delta_ramsey, Frame::lab);
  auto el = [&](int q, int n) { return hl(c.index(q, std::vector<int>{n}), c.index(q, std::vector<int>{n})).real() / kTwoPi; };
  CHECK(std::abs((el(1, 0) - el(0, 0)) - (p.omega_m_lg00 + p.delta_ramsey)) < 1e-3);
  try {
    dispersive_hamiltonian(p, c, -0.5e6);
    FAIL("guard not triggered");
  } catch (const std::invalid_argument& ex) {
    CHECK(std::string(ex.what()).find("not in dispersive regime") != std::string::npos);
  }
}

TEST_CASE("chi, delta prime and Purcell rate") {
  SystemParams p;
  CHECK(std::abs(chi_analytic(259.5e3, -0.8e6, 214e6, ChiForm::full) / 1e3 + 167.72) < 0.01);
  CHECK(std::abs(chi_analytic(259.5e3, -1.9e6, 214e6, ChiForm::approximate) / 1e3 + 70.88) < 0.01);
  CHECK(chi_analytic(0.0, -1.9e6, 214e6, ChiForm::full) == 0.0);
  CHECK_THROWS(chi_analytic(1e5, 0.0, 214e6, ChiForm::full));
  CHECK_THROWS(chi_analytic(1e5, 214e6, 214e6, ChiForm::full));
  // Ratio full/approximate at alpha/|delta| = 1000.
  const double r = chi_analytic(1e3, -214e3, 214e6, ChiForm::full) / chi_analytic(1e3, -214e3, 214e6, ChiForm::approximate);
  CHECK(std::abs(r - 1.0) < 2e-3);

  CHECK(delta_prime(0.0, -1.9e6) == -1.9e6);
  CHECK(std::abs(delta_prime(259.5e3, -1.9e6) / 1e6 + 1.93544) < 1e-5);
  CHECK(delta_prime(259.5e3, -0.3e6) < 0.0);
  CHECK_THROWS(delta_prime(1.0, 0.0));

  CHECK(std::abs(purcell_rate(259.5e3, -1.2e6, 15.6e3, 2.0e3) - 2729.5) < 0.5);
  CHECK(purcell_rate(0.0, -1.2e6, 15.6e3, 2.0e3) == 2.0e3);
  double prev = 1e300;
  for (double d : {-0.5e6, -1e6, -2e6, -4e6, -8e6}) {
    double k = purcell_rate(259.5e3, d, 15.6e3, 2.0e3);
    CHECK(k < prev);
    prev = k;
  }
  // With the detuning-keyed rate table the coherent point uses the rates measured at the Ramsey point.
  CHECK(std::abs(purcell_rate(p, p.delta_coherent) - 3165.9) < 0.5);
  CHECK(std::abs(purcell_rate(p, p.delta_coherent) - 3.2e3) < 0.5e3);
}

TEST_CASE("exact dressed shifts track the dispersive shift for small coupling") {
  SystemParams p;
  HilbertConfig c(2, {10});
  const double delta = -p.g_lg00 / 0.1;
  auto h = full_jc_hamiltonian(p, c, delta);
  const double chi = chi_analytic(p.g_lg00, delta, p.alpha, ChiForm::full);
  // Dressed qubit frequency with n phonons from the excitation manifolds.
  auto qubit_freq = [&](int n) {
    Eigen::SelfAdjointEigenSolver<CMatrix> up(manifold(h, n + 1));
    double eg;
    if (n == 0) {
      eg = h(0, 0).real();
    } else {
      Eigen::SelfAdjointEigenSolver<CMatrix> lo(manifold(h, n));
      eg = lo.eigenvalues()(1);  // g-like state is the upper one for delta < 0
    }
    return (up.eigenvalues()(0) - eg) / kTwoPi;  // e-like state is the lower one
  };
  for (int n = 0; n < 3; ++n) {
    const double shift = qubit_freq(n + 1) - qubit_freq(n);
    CHECK(std::abs(shift / chi - 1.0) < 0.05);
  }
}

TEST_CASE("parameter documents") {
  std::istringstream in(
      "# comment\n"
      "g_lg00 = 250k\n"
      "delta_ramsey = -2.0 MHz\n"
      "rates.rest.gamma1 = 16e3\n");
  auto doc = KeyValueDocument::parse(in, "test.params");
  SystemParams p = load_params(doc);
  CHECK(p.g_lg00 == 250e3);
  CHECK(p.delta_ramsey == -2.0e6);
  CHECK(p.rates_at(p.delta_rest).gamma1 == 16e3);
  CHECK(p.rate_table[1].delta == -2.0e6);
  CHECK_THROWS_AS(check_paper_defaults(p), ValidationError);
  check_paper_defaults(SystemParams::paper_defaults());

  CHECK(parse_quantity("15us") == doctest::Approx(15e-6));
  CHECK(parse_quantity("5.9741G") == doctest::Approx(5.9741e9));
  CHECK(parse_quantity("3.2 kHz") == doctest::Approx(3.2e3));
  CHECK(parse_quantity("50n") == doctest::Approx(50e-9));
  CHECK_THROWS(parse_quantity("12 parsecs"));

  std::istringstream bad("g_lg00 = 1k\nfoo = 3\n");
  try {
    load_params(KeyValueDocument::parse(bad, "bad.params"));
    FAIL("unknown key accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bad.params:2") != std::string::npos);
  }
  std::istringstream dup("g_lg00 = 1k\ng_lg00 = 2k\n");
  CHECK_THROWS_AS(KeyValueDocument::parse(dup, "dup"), ValidationError);

  // Text round trip.
  std::istringstream rt(params_to_text(SystemParams::paper_defaults()));
  check_paper_defaults(load_params(KeyValueDocument::parse(rt, "roundtrip")));
}
