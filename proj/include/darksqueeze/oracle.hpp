#ifndef DARKSQUEEZE_ORACLE_HPP
#define DARKSQUEEZE_ORACLE_HPP

// Cross-level validation: exact small-N dynamics against the adiabatically
// eliminated model, collective-spin dynamics against the bosonic limit, and
// numeric Bogoliubov identities.  These are the independent checks the rest
// of the test suite calibrates its regression thresholds against.

#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "darksqueeze/analysis.hpp"
#include "darksqueeze/core.hpp"
#include "darksqueeze/dynamics.hpp"
#include "darksqueeze/model.hpp"

namespace darksqueeze {

struct ObservableDeviation {
  std::string name;
  double max_deviation = 0.0;
  double bound = 0.0;
  bool within = false;
};

struct ComparisonReport {
  std::string levels;
  std::vector<ObservableDeviation> observables;
  double bound_estimate = 0.0;  // the analytic small parameter (e.g. Lambda/Delta)
  bool pass = false;
  bool inconclusive = false;
  std::string note;

  void finalize() {
    pass = !inconclusive;
    for (auto& o : observables) {
      o.within = o.max_deviation <= o.bound;
      if (!o.within) pass = false;
    }
  }
};

// ---------------------------------------------------------------------------
// Dark-state residual

/// || P_bulk H |psi> || / ||H||_max, with P_bulk removing components in the
/// top 20% of any site's levels so truncation-boundary terms do not mask the
/// zero-eigenvalue property.
inline double dark_state_residual(const QOperator& h, const QuantumState& state) {
  require_same_space(h.space, state.space(), "dark_state_residual");
  if (!state.is_ket())
    throw InvalidInputError("dark_state_residual expects a ket");
  const HilbertSpec& space = h.space;
  Vector w = h.mat * state.ket_vector();
  for (int idx = 0; idx < space.dim(); ++idx) {
    for (int s = 0; s < space.site_count(); ++s) {
      const int d = space.site_dim(s);
      const int cut = d - std::max(1, d / 5);
      const int level = static_cast<int>((idx / space.stride(s)) % d);
      if (level >= cut) {
        w[idx] = 0.0;
        break;
      }
    }
  }
  return w.norm() / max_abs(h.mat);
}

// ---------------------------------------------------------------------------
// Bogoliubov identity

/// Residual of S^dag H_two_mode S = H_transformed on the retained block
/// (top 20% of each mode excluded).  Because the squeeze spreads Fock level
/// m over ~ m e^{2r} levels, the conjugation is evaluated per mode operator
/// on an enlarged working space before the block is compared; the residual
/// is then limited by the identity itself, not by truncation.
/// r and theta may be overridden to run negative controls.
inline double bogoliubov_check(const PhysicalParams& p, int dim_a, int dim_b,
                               Branch branch = Branch::Atomic,
                               std::optional<double> r_override = std::nullopt,
                               std::optional<double> theta_override = std::nullopt) {
  const DerivedCouplings d = derive_couplings(p, p.omega2_rabi_max);
  if (!d.r) throw InvalidInputError("bogoliubov_check needs lambda2 < lambda1");
  const double r = r_override.value_or(*d.r);
  const double theta =
      theta_override.value_or(branch == Branch::Atomic ? d.theta_atomic : d.theta_field);
  const double mu = *d.mu;
  const double sqrt_n = std::sqrt(static_cast<double>(p.n_atoms));

  const int sq_dim = (branch == Branch::Atomic) ? dim_b : dim_a;
  const int other_dim = (branch == Branch::Atomic) ? dim_a : dim_b;
  const int k_sq = sq_dim - std::max(1, sq_dim / 5);
  const int k_other = other_dim - std::max(1, other_dim / 5);

  // working dimension for a converged conjugation of the retained block
  const double spread = std::exp(2.0 * std::max(r, *d.r));
  const int work = static_cast<int>(2.0 * k_sq * spread) + 40;
  if (work > 4000)
    throw InvalidInputError("bogoliubov_check: squeezing too strong for block size");

  QOperator s = squeeze_operator(r, theta, work);
  const Matrix b = annihilation(work).mat;
  const Matrix b_dag = b.adjoint();
  Matrix m_op = (branch == Branch::Atomic)
                    ? Matrix(d.lambda1 * std::exp(kI * p.phi1) * b +
                             d.lambda2 * std::exp(kI * p.phi2) * b_dag)
                    : Matrix(d.lambda1 * std::exp(-kI * p.phi1) * b +
                             d.lambda2 * std::exp(kI * p.phi2) * b_dag);
  Matrix conj_m = (s.mat.adjoint() * m_op * s.mat).topLeftCorner(k_sq, k_sq);
  Matrix conj_n =
      (s.mat.adjoint() * Matrix(b_dag * b) * s.mat).topLeftCorner(k_sq, k_sq);

  // assemble both sides on (other x squeezed) retained block
  const Matrix a_small = annihilation(k_other).mat;
  const Matrix n_other = Matrix(a_small.adjoint() * a_small);
  const Matrix b_small = annihilation(k_sq).mat;
  const Matrix id_other = Matrix::Identity(k_other, k_other);
  const Matrix id_sq = Matrix::Identity(k_sq, k_sq);

  const double delta_sq = (branch == Branch::Atomic) ? d.delta_b : d.delta_a;
  const double delta_other = (branch == Branch::Atomic) ? d.delta_a : d.delta_b;
  const Complex bs_phase = (branch == Branch::Atomic) ? std::exp(kI * p.phi1)
                                                      : std::exp(-kI * p.phi1);

  // conjugated two-mode Hamiltonian and the direct transformed one, both in
  // (other mode) x (squeezed mode) ordering; the residual is invariant under
  // that relabeling.  The transformed side carries no detuning on the
  // squeezed mode (the frame change presumes it is zero), so a nonzero
  // delta on that mode shows up in the residual.
  Matrix coupling = kron(Matrix(a_small.adjoint()), conj_m);
  Matrix conj_block = delta_other * kron(n_other, id_sq) +
                      delta_sq * kron(id_other, conj_n) -
                      sqrt_n * (coupling + Matrix(coupling.adjoint()));
  Matrix bs = bs_phase * kron(Matrix(a_small.adjoint()), b_small);
  Matrix trans_block =
      delta_other * kron(n_other, id_sq) - mu * (bs + Matrix(bs.adjoint()));
  return max_abs(Matrix(conj_block - trans_block)) / max_abs(trans_block);
}

// ---------------------------------------------------------------------------
// Kernel probe (shift-invert at zero energy)

struct KernelProbe {
  int kernel_dim = 0;
  std::vector<double> eigenvalues;  // smallest-|E| estimates, 2pi*kHz
  Vector ground;                    // eigenvector of the smallest |E|
};

/// Finds the eigenvalues of smallest magnitude of a (sparse-friendly)
/// Hermitian operator by inverse iteration, and counts how many lie below
/// tol in magnitude.
inline KernelProbe kernel_probe(const QOperator& h, double tol, int n_vectors = 2) {
  SparseMatrix hs = h.mat.sparseView(1.0, 1e-300);
  hs.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(hs);
  if (lu.info() != Eigen::Success)
    throw NumericValidityError("kernel_probe: factorization failed (exact kernel?)");
  KernelProbe probe;
  std::vector<Vector> found;
  const int n = h.space.dim();
  for (int k = 0; k < n_vectors; ++k) {
    Vector v = Vector::Zero(n);
    v(k % n) = 1.0;
    v(0) = 0.5;
    v.normalize();
    for (const auto& u : found) v -= u.dot(v) * u;
    v.normalize();
    double eig = 0.0;
    for (int it = 0; it < 60; ++it) {
      Vector w = lu.solve(v);
      for (const auto& u : found) w -= u.dot(w) * u;
      const double nw = w.norm();
      if (!(nw > 0) || !std::isfinite(nw)) break;
      w /= nw;
      const double new_eig = std::real(w.dot(h.mat * w));
      if (it > 3 && std::abs(new_eig - eig) < 1e-12 * std::max(1.0, std::abs(new_eig))) {
        v = w;
        eig = new_eig;
        break;
      }
      eig = new_eig;
      v = w;
    }
    probe.eigenvalues.push_back(eig);
    if (k == 0) probe.ground = v;
    found.push_back(v);
  }
  for (double e : probe.eigenvalues)
    if (std::abs(e) < tol) ++probe.kernel_dim;
  return probe;
}

// ---------------------------------------------------------------------------
// Full vs eliminated model comparison

namespace detail {

// populations of the symmetric m-excitation ground-manifold states, traced
// over the cavity (four-level space)
inline Eigen::VectorXd symmetric_ground_populations(const HilbertSpec& space,
                                                    const Vector& psi, int n_atoms,
                                                    const Matrix& iso) {
  const int atom_dim = static_cast<int>(iso.rows());
  const int cav_dim = space.dim() / atom_dim;
  Eigen::VectorXd pops = Eigen::VectorXd::Zero(n_atoms + 1);
  for (int m = 0; m <= n_atoms; ++m) {
    for (int nc = 0; nc < cav_dim; ++nc) {
      Complex amp = 0.0;
      for (int ja = 0; ja < atom_dim; ++ja)
        amp += std::conj(iso(ja, m)) * psi[nc * atom_dim + ja];
      pops[m] += std::norm(amp);
    }
  }
  return pops;
}

inline double excited_population(const HilbertSpec& space, const Vector& psi,
                                 int n_atoms) {
  const int atom_dim = [&] {
    int d = 1;
    for (int j = 0; j < n_atoms; ++j) d *= 4;
    return d;
  }();
  const int cav_dim = space.dim() / atom_dim;
  double p = 0.0;
  for (int nc = 0; nc < cav_dim; ++nc)
    for (int ja = 0; ja < atom_dim; ++ja) {
      int rest = ja;
      bool ground = true;
      for (int k = 0; k < n_atoms; ++k) {
        const int level = rest % 4;
        rest /= 4;
        if (level >= 2) {
          ground = false;
          break;
        }
      }
      if (!ground) p += std::norm(psi[nc * atom_dim + ja]);
    }
  return p;
}

}  // namespace detail

/// Evolves the exact four-level model and the adiabatically eliminated model
/// side by side from the all-ground vacuum and reports trajectory deviations
/// of <a^dag a> and the symmetric ground-manifold populations, plus the
/// excited-state population of the full model.
inline ComparisonReport compare_full_vs_eliminated(const PhysicalParams& p,
                                                   int n_atoms, int cavity_dim,
                                                   const Schedule& schedule,
                                                   const EvolveConfig& config) {
  ComparisonReport rep;
  rep.levels = "full_vs_eliminated";
  const double lam_cap = std::max({p.g1 * std::sqrt(double(cavity_dim)),
                                   p.g2 * std::sqrt(double(cavity_dim)),
                                   p.omega1_rabi, p.omega2_rabi_max});
  const double margin = std::min(std::abs(p.delta1), std::abs(p.delta2)) / lam_cap;
  rep.bound_estimate = 1.0 / margin;
  if (margin < 50.0) {
    rep.inconclusive = true;
    rep.note = "detuning margin below 50, elimination bound not meaningful";
    rep.finalize();
    return rep;
  }

  PhysicalParams params = p;
  params.n_atoms = n_atoms;
  TermList full = full_terms(params, cavity_dim, n_atoms);
  TermList elim = eliminated_terms(params, cavity_dim, n_atoms);

  EvolveConfig cfg = config;
  cfg.store_states = true;
  auto run_full = evolve_unitary(full, vacuum_state(full.space), schedule, cfg);
  auto run_elim = evolve_unitary(elim, vacuum_state(elim.space), schedule, cfg);

  const Matrix iso = dicke_symmetric_isometry(n_atoms);
  auto n_a = number_operator(cavity_dim);
  QOperator n_a_emb = embed_product(full.space, {{0, &n_a.mat}});

  double dev_na = 0.0, dev_pop = 0.0, p_exc = 0.0;
  for (size_t k = 0; k < run_full.series.states.size(); ++k) {
    const Vector& pf = run_full.series.states[k].ket_vector();
    const Vector& pe = run_elim.series.states[k].ket_vector();
    dev_na = std::max(dev_na, std::abs(std::real(pf.dot(n_a_emb.mat * pf)) -
                                       std::real(pe.dot(n_a_emb.mat * pe))));
    const Eigen::VectorXd pops_f =
        detail::symmetric_ground_populations(full.space, pf, n_atoms, iso);
    const Eigen::VectorXd pops_e =
        detail::symmetric_ground_populations(elim.space, pe, n_atoms, iso);
    dev_pop = std::max(dev_pop, (pops_f - pops_e).cwiseAbs().maxCoeff());
    p_exc = std::max(p_exc, detail::excited_population(full.space, pf, n_atoms));
  }

  rep.observables.push_back({"cavity_occupation", dev_na, 10.0 * rep.bound_estimate, false});
  rep.observables.push_back({"ground_populations", dev_pop, 10.0 * rep.bound_estimate, false});
  rep.observables.push_back(
      {"excited_population", p_exc, 10.0 * rep.bound_estimate * rep.bound_estimate, false});
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Spin (Dicke) vs two-mode comparison

/// Runs the adiabatic protocol at the Spin and TwoMode levels with matched
/// parameters and reports trajectory deviations of the collective excitation
/// number and of the fidelity to the respective targets.  The residual
/// Stark term is kept in the two-mode model so the comparison isolates the
/// Holstein-Primakoff error.
inline ComparisonReport compare_spin_vs_twomode(const PhysicalParams& p, int n_atoms,
                                                int cavity_dim, int b_dim,
                                                const Schedule& schedule,
                                                const EvolveConfig& config,
                                                bool keep_residual_stark = true) {
  ComparisonReport rep;
  rep.levels = "spin_vs_twomode";
  PhysicalParams params = p;
  params.n_atoms = n_atoms;
  const DerivedCouplings d_end = derive_couplings(params, params.omega2_rabi_max);
  if (!d_end.r) {
    rep.inconclusive = true;
    rep.note = "above threshold";
    rep.finalize();
    return rep;
  }
  const double hp_pred = std::sinh(*d_end.r) * std::sinh(*d_end.r) / double(n_atoms);
  rep.bound_estimate = 1.0 / double(n_atoms);
  if (hp_pred > 0.05) {
    rep.inconclusive = true;
    rep.note = "predicted <b^dag b>/N above 0.05, HP regime not satisfied";
    rep.finalize();
    return rep;
  }

  auto spin = run_protocol(params, schedule, config,
                           ModelLevel::spin(cavity_dim, n_atoms), false,
                           keep_residual_stark);
  auto boson = run_protocol(params, schedule, config,
                            ModelLevel::two_mode(cavity_dim, b_dim), false,
                            keep_residual_stark);

  double dev_exc = 0.0, dev_fid = 0.0;
  const size_t n_rec = std::min(spin.series.records.size(), boson.series.records.size());
  for (size_t k = 0; k < n_rec; ++k) {
    dev_exc = std::max(dev_exc, std::abs(spin.series.records[k].n_b -
                                         boson.series.records[k].n_b));
    dev_fid = std::max(dev_fid, std::abs(spin.series.records[k].fidelity -
                                         boson.series.records[k].fidelity));
  }
  // generous absolute ceiling; the N-scaling ratio is the real check and is
  // asserted by the caller across two values of N
  const double ceiling = 50.0 * rep.bound_estimate;
  rep.observables.push_back({"collective_excitation", dev_exc, ceiling, false});
  rep.observables.push_back({"fidelity_trajectory", dev_fid, ceiling, false});
  rep.note = "spin_final_fidelity=" + std::to_string(spin.fidelity_to_target);
  rep.finalize();
  return rep;
}

}  // namespace darksqueeze

#endif  // DARKSQUEEZE_ORACLE_HPP
