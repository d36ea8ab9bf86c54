#include <catch2/catch.hpp>

#include <random>

#include "darksqueeze/analysis.hpp"

using namespace darksqueeze;

namespace {

PhysicalParams reference_params(double delta_a = 100.0) {
  PhysicalParams p;
  p.g1 = p.g2 = 50.0;
  p.delta1 = p.delta2 = 2.5e7;
  p.omega1_rabi = p.delta1 / 200.0;
  p.omega2_rabi_max = p.delta2 / 250.0;
  p.n_atoms = 1000000;
  p.kappa = 25.0;
  p.gamma = 6000.0;
  p.cavity_offset = delta_a + double(p.n_atoms) * (p.g1 * p.g1 / p.delta1);
  return p;
}

QuantumState squeezed_state(double r, double theta, int dim) {
  auto s = squeeze_operator(r, theta, dim);
  return QuantumState::ket(s.space, Vector(s.mat.col(0)));
}

const double kR = std::atanh(0.8);

}  // namespace

TEST_CASE("quadrature variances of reference states") {
  HilbertSpec s1({Factor::boson(10)});
  auto vac = QuantumState::ket(s1, fock_state(10, 0));
  for (double phi : {0.0, 0.4, 1.3})
    CHECK(quadrature_variance(vac, 0, phi) == Approx(0.5).margin(1e-12));

  auto one = QuantumState::ket(s1, fock_state(10, 1));
  CHECK(quadrature_variance(one, 0, 0.9) == Approx(1.5).margin(1e-12));

  // squeezed vacuum: e^{-2r}/2 at theta/2, e^{+2r}/2 at the conjugate angle
  const double theta = 0.8;
  auto sq = squeezed_state(kR, theta, 80);
  CHECK(quadrature_variance(sq, 0, 0.5 * theta) ==
        Approx(0.5 * std::exp(-2.0 * kR)).margin(1e-4));
  CHECK(quadrature_variance(sq, 0, 0.5 * theta) == Approx(1.0 / 18.0).margin(1e-4));
  CHECK(quadrature_variance(sq, 0, 0.5 * theta + 0.5 * std::numbers::pi) ==
        Approx(0.5 * std::exp(2.0 * kR)).margin(1e-3));

  // minimal / maximal variance over a fine angle scan
  double vmin = 1e9, vmax = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const double v = quadrature_variance(sq, 0, std::numbers::pi * k / 2000.0);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  CHECK(vmin == Approx(0.5 * std::exp(-2.0 * kR)).margin(1e-4));
  CHECK(vmax == Approx(0.5 * std::exp(2.0 * kR)).margin(1e-3));

  HilbertSpec dicke({Factor::dicke(3)});
  auto ds = vacuum_state(dicke);
  CHECK_THROWS_AS(quadrature_variance(ds, 0, 0.0), InvalidInputError);
}

TEST_CASE("uncertainty product stays above the bound") {
  std::vector<QuantumState> states;
  HilbertSpec s1({Factor::boson(40)});
  states.push_back(QuantumState::ket(s1, fock_state(40, 0)));
  states.push_back(QuantumState::ket(s1, fock_state(40, 3)));
  states.push_back(squeezed_state(1.2, 0.0, 40));
  Vector coherent = Vector::Zero(40);
  for (int n = 0; n < 40; ++n)
    coherent[n] = std::pow(0.9, n) / std::sqrt(std::tgamma(n + 1.0));
  states.push_back(QuantumState::ket(s1, coherent));
  for (const auto& st : states)
    for (double phi : {0.0, 0.3, 1.1}) {
      const double va = quadrature_variance(st, 0, phi);
      const double vb = quadrature_variance(st, 0, phi + 0.5 * std::numbers::pi);
      CHECK(va * vb >= 0.25 - 1e-9);
    }
}

TEST_CASE("squeezing in decibels") {
  CHECK(squeezing_db(0.5) == 0.0);
  CHECK(squeezing_db(1.0) == Approx(-3.0103).margin(1e-4));
  CHECK(squeezing_db(0.5 * std::exp(-2.0 * kR)) ==
        Approx(20.0 * kR / std::log(10.0)).margin(1e-12));
  CHECK(squeezing_db(0.5 * std::exp(-2.0 * kR)) == Approx(9.54).margin(5e-3));
  CHECK_THROWS_AS(squeezing_db(0.0), InvalidInputError);
  CHECK_THROWS_AS(squeezing_db(-1.0), InvalidInputError);
}

TEST_CASE("fidelity") {
  HilbertSpec s1({Factor::boson(8)});
  auto zero = QuantumState::ket(s1, fock_state(8, 0));
  auto one = QuantumState::ket(s1, fock_state(8, 1));
  CHECK(fidelity(zero, zero) == Approx(1.0));
  CHECK(fidelity(zero, one) == Approx(0.0).margin(1e-15));

  // vacuum overlap with the squeezed target: 1/cosh r
  auto p = reference_params();
  auto tgt = target_state(p, Branch::Atomic, 4, 80);
  auto vac = vacuum_state(tgt.space());
  CHECK(fidelity(vac, tgt) == Approx(0.6).margin(1e-4));
  CHECK(fidelity(vac, tgt) == Approx(1.0 / std::cosh(kR)).margin(1e-4));

  // density against ket, both argument orders
  Matrix rho = 0.5 * (fock_state(8, 0) * fock_state(8, 0).adjoint() +
                      fock_state(8, 1) * fock_state(8, 1).adjoint());
  auto mixed = QuantumState::density(s1, rho);
  CHECK(fidelity(mixed, zero) == Approx(0.5));
  CHECK(fidelity(zero, mixed) == Approx(0.5));
  CHECK_THROWS_AS(fidelity(mixed, mixed), InvalidInputError);

  HilbertSpec s2({Factor::boson(9)});
  CHECK_THROWS_AS(fidelity(zero, vacuum_state(s2)), InvalidInputError);
}

TEST_CASE("analytic gap formula") {
  CHECK(gap_analytic(250.0, 100.0) == Approx(204.95).margin(5e-3));
  CHECK(gap_analytic(150.0, 100.0) == Approx(108.11).margin(5e-3));
  CHECK(gap_analytic(250.0, 100.0) == Approx(std::sqrt(65000.0) - 50.0).epsilon(1e-14));
  CHECK(gap_analytic(77.0, 0.0) == Approx(77.0));
  CHECK_THROWS_AS(gap_analytic(-1.0, 10.0), InvalidInputError);
}

TEST_CASE("numeric gap agrees with the analytic form") {
  // 2x2 eigendecomposition oracle on random (mu, delta_a) pairs
  std::mt19937 rng(777);
  std::uniform_real_distribution<double> dist(1.0, 500.0);
  for (int k = 0; k < 20; ++k) {
    const double mu = dist(rng), da = dist(rng);
    PhysicalParams q;
    q.delta1 = q.delta2 = 1e6;
    q.omega1_rabi = q.delta1;
    q.g1 = mu;
    q.n_atoms = 1;
    q.cavity_offset = da + q.g1 * q.g1 / q.delta1;
    auto ht = build_transformed_hamiltonian(q, 0.0, 3, 3);
    const double numeric = gap_numeric(ht);
    Eigen::Matrix2cd block;
    block << da, -mu, -mu, 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(block);
    const double oracle = es.eigenvalues().cwiseAbs().minCoeff();
    CHECK(numeric == Approx(oracle).epsilon(1e-12));
    CHECK(numeric == Approx(gap_analytic(mu, da)).epsilon(1e-9));
  }

  // mu = 0: the gap is the detuning itself (hand-assembled beam splitter)
  {
    HilbertSpec space({Factor::boson(3), Factor::boson(3)});
    auto n3 = number_operator(3);
    QOperator h = 42.0 * embed_product(space, {{0, &n3.mat}});
    CHECK(gap_numeric(h) == Approx(42.0));
  }

  // degenerate kernel is an error
  {
    PhysicalParams q;
    q.delta1 = q.delta2 = 1e6;
    q.omega1_rabi = q.delta1;
    q.g1 = 10.0;
    q.n_atoms = 1;
    q.cavity_offset = q.g1 * q.g1 / q.delta1;  // delta_a = 0, delta_b = 0
    CHECK_THROWS_AS(gap_numeric(build_transformed_hamiltonian(q, 0.0, 3, 3)),
                    NumericValidityError);
  }
}

TEST_CASE("error budget reproduces the reference numbers") {
  auto p = reference_params();
  const double t_total = 10.0 / (50.0 * kAngularPerKhz);
  CHECK(t_total == Approx(31.83).margin(5e-3));
  auto b = error_budget(p, t_total);
  CHECK(b.deltaE_max == Approx(204.95).margin(5e-3));
  CHECK(b.deltaE_min == Approx(108.11).margin(5e-3));
  CHECK(b.p_b == Approx(4.64e-3).epsilon(0.02));
  CHECK(b.kappa_e == Approx(0.116).epsilon(0.02));
  CHECK(b.gamma_e == Approx(0.048).epsilon(0.02));
  CHECK(b.total_error == Approx(3.28e-2).epsilon(0.02));

  // closed-form cross-check computed independently
  const double ge = b.deltaE_min * kAngularPerKhz * t_total;
  const double de = 100.0 * kAngularPerKhz * t_total;
  CHECK(b.p_b == Approx(1.0 / (ge * ge) + 1.0 / (de * de)).epsilon(1e-12));

  // doubling T quarters the leakage estimate
  auto b2 = error_budget(p, 2.0 * t_total);
  CHECK(b2.p_b == Approx(0.25 * b.p_b).epsilon(0.05));

  auto bad = reference_params(0.0);
  CHECK_THROWS_WITH(error_budget(bad, t_total), Catch::Contains("delta_a"));
  CHECK_THROWS_AS(error_budget(p, 0.0), InvalidInputError);
}

TEST_CASE("error budget is monotone in T and in the gap") {
  auto p = reference_params();
  double prev = 1e9;
  for (double t : {10.0, 20.0, 40.0, 80.0}) {
    const double pb = error_budget(p, t).p_b;
    CHECK(pb < prev);
    prev = pb;
  }
  // larger minimal gap, smaller P_b: raise mu_min directly
  auto b_lo = error_budget(p, 31.83, 250.0, 150.0);
  auto b_hi = error_budget(p, 31.83, 250.0, 200.0);
  CHECK(b_hi.p_b < b_lo.p_b);
}

TEST_CASE("HP validity measure") {
  auto p = reference_params();
  HilbertSpec space({Factor::boson(4), Factor::boson(80)});
  CHECK(hp_validity(vacuum_state(space), p.n_atoms) == 0.0);

  auto tgt = target_state(p, Branch::Atomic, 4, 80);
  CHECK(hp_validity(tgt, 1000000) == Approx(1.78e-6).epsilon(2e-3));
  CHECK(hp_validity(tgt, 10) == Approx(0.178).epsilon(2e-3));

  // spin-level variant reads the Dicke excitation number
  auto st = spin_target_state(p, 4, 40, Branch::Atomic);
  CHECK(hp_validity(st, 40) ==
        Approx(std::sinh(kR) * std::sinh(kR) / 40.0).epsilon(1e-2));
}
