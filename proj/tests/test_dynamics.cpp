#include <catch2/catch.hpp>

#include "darksqueeze/dynamics.hpp"

using namespace darksqueeze;

namespace {

PhysicalParams reference_params(double delta_a = 100.0, double n_atoms = 1e6) {
  PhysicalParams p;
  p.g1 = p.g2 = 50.0;
  p.delta1 = p.delta2 = 2.5e7;
  p.omega1_rabi = p.delta1 / 200.0;
  p.omega2_rabi_max = p.delta2 / 250.0;
  p.n_atoms = static_cast<long long>(n_atoms);
  p.kappa = 25.0;
  p.gamma = 6000.0;
  p.cavity_offset = delta_a + double(p.n_atoms) * (p.g1 * p.g1 / p.delta1);
  return p;
}

const double kGAngular = 50.0 * kAngularPerKhz;  // reference g in rad/us

}  // namespace

TEST_CASE("ramp shapes") {
  Schedule lin = Schedule::linear(10.0, 8.0);
  Schedule sin2 = Schedule::sine_squared(10.0, 8.0);
  Schedule th = Schedule::tanh_ramp(10.0, 8.0, 4.0);

  CHECK(ramp_value(lin, 0.0) == 0.0);
  CHECK(ramp_value(sin2, 0.0) == 0.0);
  CHECK(ramp_value(lin, 10.0) == Approx(8.0));
  CHECK(ramp_value(sin2, 10.0) == Approx(8.0));
  CHECK(ramp_value(sin2, 5.0) == Approx(4.0));  // sin^2(pi/4) = 1/2
  CHECK(ramp_value(lin, 2.5) == Approx(2.0));

  // tanh endpoints within e^{-2 s} of the ideal values
  CHECK(ramp_value(th, 0.0) <= 8.0 * std::exp(-2.0 * 4.0));
  CHECK(8.0 - ramp_value(th, 10.0) <= 8.0 * std::exp(-2.0 * 4.0));

  // monotone non-decreasing
  for (auto& s : {lin, sin2, th}) {
    double prev = -1.0;
    for (int k = 0; k <= 50; ++k) {
      const double v = ramp_value(s, 10.0 * k / 50.0);
      CHECK(v >= prev);
      prev = v;
    }
  }

  CHECK_THROWS_AS(ramp_value(lin, -0.1), InvalidInputError);
  CHECK_THROWS_AS(ramp_value(lin, 10.2), InvalidInputError);
}

TEST_CASE("free evolution leaves the state alone") {
  HilbertSpec space({Factor::boson(4)});
  TermList tl{space, {}};
  tl.terms.push_back({Matrix::Zero(4, 4), [](double) { return 1.0; }});
  Vector v(4);
  v << 0.5, 0.5, 0.5, 0.5;
  auto psi0 = QuantumState::ket(space, v);
  EvolveConfig cfg;
  cfg.n_steps = 20;
  cfg.record_every = 5;
  auto res = evolve_unitary(tl, psi0, Schedule::linear(3.0, 0.0), cfg);
  CHECK((res.final_state.ket_vector() - psi0.ket_vector()).norm() < 1e-14);
  CHECK(res.series.records.size() == 1 + 20 / 5);
}

TEST_CASE("constant beam splitter reproduces the analytic Rabi oscillation") {
  // H = -mu (a b^dag + a^dag b) from |1,0>: <n_a>(t) = cos^2(mu t)
  const int d = 3;
  const double mu_khz = 40.0;
  HilbertSpec space({Factor::boson(d), Factor::boson(d)});
  const Matrix a = annihilation(d).mat;
  const Matrix b_dag = Matrix(annihilation(d).mat.adjoint());
  Matrix bs = -mu_khz * embed_product(space, {{0, &a}, {1, &b_dag}}).mat;
  bs += Matrix(bs.adjoint());
  TermList tl{space, {}};
  tl.terms.push_back({std::move(bs), [](double) { return 1.0; }});

  Vector psi0 = kron(Matrix(fock_state(d, 1)), Matrix(fock_state(d, 0)));
  EvolveConfig cfg;
  cfg.n_steps = 200;
  cfg.record_every = 20;
  RecordSpec rec;
  auto n_op = number_operator(d);
  rec.n_a = detail::sparsify(embed_product(space, {{0, &n_op.mat}}).mat);
  const double t_total = 2.4;
  auto res = evolve_unitary(tl, QuantumState::ket(space, psi0),
                            Schedule::linear(t_total, 0.0), cfg, rec);
  for (const auto& r : res.series.records) {
    const double expect = std::pow(std::cos(mu_khz * kAngularPerKhz * r.t_us), 2);
    CHECK(r.n_a == Approx(expect).margin(1e-9));
  }
  // norm preserved
  CHECK(std::abs(res.series.back().norm_or_trace - 1.0) < 1e-8);
}

TEST_CASE("truncation breach marks the run invalid with the breach time") {
  auto p = reference_params();
  Schedule sch = Schedule::sine_squared(10.0 / kGAngular, p.omega2_rabi_max);
  EvolveConfig cfg;
  cfg.n_steps = 100;
  cfg.record_every = 10;
  cfg.truncation_tol = 1e-12;  // deliberately unreachable with b_dim = 5
  auto res = run_protocol(p, sch, cfg, ModelLevel::two_mode(6, 5));
  CHECK_FALSE(res.series.valid);
  CHECK(std::isfinite(res.series.breach_time_us));
  CHECK(res.series.breach_reason.find("truncation") != std::string::npos);
}

TEST_CASE("pure cavity decay follows the exponential law") {
  HilbertSpec space({Factor::boson(6)});
  TermList tl{space, {}};
  tl.terms.push_back({Matrix::Zero(6, 6), [](double) { return 1.0; }});
  CollapseSet cs;
  cs.channels.push_back({annihilation(6), 25.0});
  Vector one = fock_state(6, 1);
  auto rho0 = QuantumState::density(space, Matrix(one * one.adjoint()));
  RecordSpec rec;
  rec.n_a = detail::sparsify(number_operator(6).mat);
  rec.monitored_sites = {0};
  for (auto method : {EvolveMethod::PiecewiseExponential, EvolveMethod::AdaptiveRK}) {
    EvolveConfig cfg;
    cfg.n_steps = 50;
    cfg.record_every = 10;
    cfg.method = method;
    auto res = evolve_lindblad(tl, cs, rho0, Schedule::linear(10.0, 0.0), cfg, rec);
    for (const auto& r : res.series.records)
      CHECK(r.n_a == Approx(std::exp(-25.0 * kAngularPerKhz * r.t_us)).margin(1e-7));
    CHECK(res.series.valid);
    CHECK(std::abs(res.series.back().norm_or_trace - 1.0) < 1e-7);
  }
}

TEST_CASE("closed-system Lindblad run matches the unitary propagation") {
  auto p = reference_params();
  Schedule sch = Schedule::sine_squared(4.0, p.omega2_rabi_max);
  ModelLevel lv = ModelLevel::two_mode(5, 8);
  EvolveConfig cfg;
  cfg.n_steps = 1000;  // piecewise midpoint sampling must resolve the ramp
  cfg.record_every = 1000;
  cfg.truncation_tol = 1.0;
  auto unitary = run_protocol(p, sch, cfg, lv, false);
  EvolveConfig ocfg = cfg;
  ocfg.n_steps = 40;
  ocfg.record_every = 40;
  ocfg.method = EvolveMethod::AdaptiveRK;
  ocfg.rel_tol = 1e-9;
  ocfg.abs_tol = 1e-12;
  PhysicalParams q = p;
  q.kappa = 0.0;
  q.gamma = 0.0;
  auto lind = run_protocol(q, sch, ocfg, lv, true);
  CHECK(std::abs(unitary.fidelity_to_target - lind.fidelity_to_target) < 1e-6);
}

TEST_CASE("trivial protocol: no ramp keeps the vacuum dark") {
  auto p = reference_params();
  p.omega2_rabi_max = 0.0;
  Schedule sch = Schedule::sine_squared(5.0, 0.0);
  EvolveConfig cfg;
  cfg.n_steps = 50;
  cfg.record_every = 10;
  auto res = run_protocol(p, sch, cfg, ModelLevel::two_mode(5, 5));
  CHECK(res.fidelity_to_target == Approx(1.0).margin(1e-12));
  CHECK(res.leakage == Approx(0.0).margin(1e-12));
  CHECK(res.series.back().n_a == Approx(0.0).margin(1e-12));
}

TEST_CASE("above-threshold schedules are rejected before running") {
  auto p = reference_params();
  p.omega2_rabi_max = p.delta2 / 100.0;  // lambda2 = 0.5 > lambda1
  Schedule sch = Schedule::sine_squared(5.0, p.omega2_rabi_max);
  EvolveConfig cfg;
  CHECK_THROWS_WITH(run_protocol(p, sch, cfg, ModelLevel::two_mode(5, 5)),
                    Catch::Contains("above-threshold"));
}

TEST_CASE("integrator convergence: halving dt leaves the fidelity unchanged") {
  auto p = reference_params();
  const double t_total = 10.0 / kGAngular;
  Schedule sch = Schedule::sine_squared(t_total, p.omega2_rabi_max);
  ModelLevel lv = ModelLevel::two_mode(24, 32);
  EvolveConfig coarse;
  coarse.n_steps = 250;
  coarse.record_every = 250;
  coarse.truncation_tol = 1e-2;
  EvolveConfig fine = coarse;
  fine.n_steps = 500;
  fine.record_every = 500;
  auto res_c = run_protocol(p, sch, coarse, lv);
  auto res_f = run_protocol(p, sch, fine, lv);
  CHECK(std::abs(res_c.fidelity_to_target - res_f.fidelity_to_target) < 1e-6);
}

TEST_CASE("doubling the ramp time cuts the leakage roughly fourfold") {
  auto p = reference_params();
  Schedule s1 = Schedule::linear(10.0 / kGAngular, p.omega2_rabi_max);
  Schedule s2 = Schedule::linear(20.0 / kGAngular, p.omega2_rabi_max);
  ModelLevel lv = ModelLevel::two_mode(16, 60);
  EvolveConfig cfg;
  cfg.n_steps = 400;
  cfg.record_every = 400;
  cfg.truncation_tol = 1e-2;
  auto r1 = run_protocol(p, s1, cfg, lv);
  EvolveConfig cfg2 = cfg;
  cfg2.n_steps = 800;
  cfg2.record_every = 800;
  auto r2 = run_protocol(p, s2, cfg2, lv);
  const double ratio = r1.leakage / r2.leakage;
  CHECK(ratio >= 2.0);
  CHECK(ratio <= 8.0);
}

TEST_CASE("protocol attaches the error budget") {
  auto p = reference_params();
  Schedule sch = Schedule::sine_squared(10.0 / kGAngular, p.omega2_rabi_max);
  EvolveConfig cfg;
  cfg.n_steps = 60;
  cfg.record_every = 20;
  cfg.truncation_tol = 1.0;
  auto res = run_protocol(p, sch, cfg, ModelLevel::two_mode(6, 10));
  REQUIRE(res.budget.has_value());
  CHECK(res.budget->p_b == Approx(4.64e-3).epsilon(0.02));
}

TEST_CASE("state transfer moves Fock states onto the cavity") {
  auto p = reference_params();
  EvolveConfig cfg;
  cfg.n_steps = 50;
  cfg.record_every = 10;
  cfg.truncation_tol = 1e-2;
  HilbertSpec bspace({Factor::boson(12)});

  auto vac = run_state_transfer(p, cfg, QuantumState::ket(bspace, fock_state(12, 0)), 12);
  CHECK(vac.fidelity == Approx(1.0).margin(1e-12));
  CHECK(vac.n_a_final == Approx(0.0).margin(1e-12));

  auto one = run_state_transfer(p, cfg, QuantumState::ket(bspace, fock_state(12, 1)), 12);
  CHECK(one.n_a_final == Approx(1.0).margin(1e-6));
  CHECK(one.fidelity == Approx(1.0).margin(1e-6));

  // t* = pi / (2 sqrt(N) lambda1) in angular units
  const double coupling = std::sqrt(1e6) * 0.25 * kAngularPerKhz;
  CHECK(one.t_star_us == Approx(0.5 * std::numbers::pi / coupling));
}

TEST_CASE("state transfer carries a squeezed mode with its phase map") {
  auto p = reference_params();
  p.phi1 = 0.7;  // nontrivial phase map
  EvolveConfig cfg;
  cfg.n_steps = 80;
  cfg.record_every = 20;
  cfg.truncation_tol = 1e-2;
  Vector amps = squeezed_vacuum_amplitudes(0.5, 0.3, 30);
  auto input = QuantumState::ket(HilbertSpec({Factor::boson(30)}), amps);
  auto res = run_state_transfer(p, cfg, input, 30);
  CHECK(res.fidelity > 0.999);
  CHECK(res.n_a_final == Approx(std::sinh(0.5) * std::sinh(0.5)).margin(1e-3));
}

TEST_CASE("protocol runs at the four-level fidelity level") {
  PhysicalParams q;
  q.g1 = q.g2 = 50.0;
  q.omega1_rabi = 50.0;
  q.omega2_rabi_max = 40.0;
  q.n_atoms = 1;
  q.delta1 = q.delta2 = 2e4;
  q.cavity_offset = q.g1 * q.g1 / q.delta1 + 0.05;
  Schedule sch = Schedule::sine_squared(100.0, q.omega2_rabi_max);
  EvolveConfig cfg;
  cfg.n_steps = 200;
  cfg.record_every = 20;
  cfg.truncation_tol = 1e-2;
  auto res = run_protocol(q, sch, cfg, ModelLevel::full(4, 1));
  CHECK(res.series.valid);
  CHECK(res.fidelity_to_target >= 0.0);
  CHECK(res.fidelity_to_target <= 1.0 + 1e-12);
  CHECK(std::isfinite(res.series.back().n_b));
  // the ramp produces some collective excitation
  CHECK(res.series.back().n_b > 1e-4);
}
