#ifndef DARKSQUEEZE_ANALYSIS_HPP
#define DARKSQUEEZE_ANALYSIS_HPP

// Squeezing metrics, spectral-gap analytics and the adiabatic error budget.

#include <cmath>

#include "darksqueeze/core.hpp"
#include "darksqueeze/model.hpp"

namespace darksqueeze {

/// Var(X_phi) with X_phi = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2);
/// vacuum value 1/2.
inline double quadrature_variance(const QuantumState& state, int site, double phi) {
  const HilbertSpec& space = state.space();
  int s = 0;
  for (const auto& f : space.factors())
    for (int k = 0; k < f.site_count(); ++k, ++s)
      if (s == site && f.kind != Factor::Kind::Boson)
        throw InvalidInputError("quadrature_variance needs a bosonic factor");
  const int d = space.site_dim(site);
  const Matrix a = annihilation(d).mat;
  Matrix x = (std::exp(-kI * phi) * a + std::exp(kI * phi) * Matrix(a.adjoint())) /
             std::sqrt(2.0);
  return variance(state, embed_product(space, {{site, &x}}));
}

/// -10 log10(2 Var); positive means squeezed below vacuum.
inline double squeezing_db(double var) {
  if (!(var > 0.0)) throw InvalidInputError("squeezing_db needs variance > 0");
  return -10.0 * std::log10(2.0 * var);
}

/// |<psi|phi>|^2 for kets, <phi|rho|phi> for a density against a ket.
inline double fidelity(const QuantumState& state, const QuantumState& target) {
  require_same_space(state.space(), target.space(), "fidelity");
  if (state.is_ket() && target.is_ket())
    return std::norm(state.ket_vector().dot(target.ket_vector()));
  if (state.is_ket() != target.is_ket()) {
    const Vector& psi = state.is_ket() ? state.ket_vector() : target.ket_vector();
    const Matrix& rho = state.is_ket() ? target.density_matrix() : state.density_matrix();
    return std::real(psi.dot(rho * psi));
  }
  throw InvalidInputError("density-vs-density fidelity is not supported");
}

/// Energy gap between the dark state and the nearest bright states of the
/// transformed Hamiltonian: deltaE = sqrt(mu^2 + delta^2/4) - delta/2.
inline double gap_analytic(double mu, double delta_a) {
  if (mu < 0) throw InvalidInputError("gap_analytic needs mu >= 0");
  return std::sqrt(mu * mu + 0.25 * delta_a * delta_a) - 0.5 * delta_a;
}

/// Same gap read off a transformed-level Hamiltonian: the single-quantum
/// sector {|1,0>, |0,1>} is a 2x2 block; the gap is its smaller |eigenvalue|.
inline double gap_numeric(const QOperator& h) {
  const HilbertSpec& space = h.space;
  if (space.site_count() != 2)
    throw InvalidInputError("gap_numeric expects a two-mode Hamiltonian");
  const int dim_b = space.site_dim(1);
  const int ia = dim_b;  // |1,0>
  const int ib = 1;      // |0,1>
  const double scale = std::max(1.0, max_abs(h.mat));
  if (std::abs(h.mat(ia, ia)) < 1e-12 * scale && std::abs(h.mat(ib, ib)) < 1e-12 * scale)
    throw NumericValidityError("degenerate kernel: delta_a = delta_b = 0");
  Eigen::Matrix2cd block;
  block << h.mat(ia, ia), h.mat(ia, ib), h.mat(ib, ia), h.mat(ib, ib);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(block);
  double gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2; ++k) {
    const double e = std::abs(es.eigenvalues()[k]);
    if (e > 1e-12 * scale) gap = std::min(gap, e);
  }
  if (!std::isfinite(gap))
    throw NumericValidityError("degenerate kernel: no nonzero eigenvalue in the block");
  return gap;
}

struct ErrorBudget {
  double t_total_us = 0.0;
  double deltaE_max = 0.0;  // gap at mu_max (2pi*kHz)
  double deltaE_min = 0.0;  // gap at mu_min (2pi*kHz)
  double delta_a = 0.0;
  double p_b = 0.0;          // diabatic leakage estimate
  double kappa_e = 0.0;      // effective cavity decoherence rate (2pi*kHz)
  double gamma_e = 0.0;      // effective atomic decoherence rate (2pi*kHz)
  double total_error = 0.0;  // (kappa_e + gamma_e) * T
};

/// Adiabatic error budget:
///   P_b = 1/(deltaE_min T)^2 + 1/(delta_a T)^2     (angular products)
///   kappa_e = P_b kappa,  gamma_e = gamma Omega2max^2 / (2 Delta2^2)
///   total = (kappa_e + gamma_e) T
/// P_b uses deltaE_min, which reproduces the quoted numbers.
inline ErrorBudget error_budget(const PhysicalParams& p, double t_total_us,
                                double mu_max, double mu_min) {
  const DerivedCouplings d = derive_couplings(p, p.omega2_rabi_max);
  if (!(d.delta_a > 0))
    throw InvalidInputError("delta_a must be positive for budget");
  if (!(t_total_us > 0)) throw InvalidInputError("budget needs T > 0");
  ErrorBudget b;
  b.t_total_us = t_total_us;
  b.delta_a = d.delta_a;
  b.deltaE_max = gap_analytic(mu_max, d.delta_a);
  b.deltaE_min = gap_analytic(mu_min, d.delta_a);
  const double gap_t = b.deltaE_min * kAngularPerKhz * t_total_us;
  const double det_t = d.delta_a * kAngularPerKhz * t_total_us;
  b.p_b = 1.0 / (gap_t * gap_t) + 1.0 / (det_t * det_t);
  b.kappa_e = b.p_b * p.kappa;
  const double ratio2 = p.omega2_rabi_max / p.delta2;
  b.gamma_e = 0.5 * p.gamma * ratio2 * ratio2;
  b.total_error = (b.kappa_e + b.gamma_e) * kAngularPerKhz * t_total_us;
  return b;
}

/// Convenience: budget along the protocol's own mu path (Omega2: 0 -> max).
inline ErrorBudget error_budget(const PhysicalParams& p, double t_total_us) {
  const DerivedCouplings d0 = derive_couplings(p, 0.0);
  const DerivedCouplings d1 = derive_couplings(p, p.omega2_rabi_max);
  if (!d0.mu || !d1.mu)
    throw InvalidInputError("budget needs below-threshold couplings");
  return error_budget(p, t_total_us, *d0.mu, *d1.mu);
}

/// Holstein-Primakoff validity measure <b^dag b>/N (bosonic site) or
/// (<Sz>+N/2)/N (Dicke site); both equal mean excitation / N.
inline double hp_validity(const QuantumState& state, long long n_atoms,
                          int site = 1) {
  const Eigen::VectorXd m = site_marginal(state, site);
  double mean = 0.0;
  for (int k = 0; k < m.size(); ++k) mean += k * m[k];
  return mean / static_cast<double>(n_atoms);
}

}  // namespace darksqueeze

#endif  // DARKSQUEEZE_ANALYSIS_HPP
