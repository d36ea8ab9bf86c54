#ifndef DARKSQUEEZE_MODEL_HPP
#define DARKSQUEEZE_MODEL_HPP

// Physical parameters, derived Raman couplings, and Hamiltonian builders at
// the four fidelity levels of the atom-cavity squeezing scheme:
//
//   Full        four-level atoms + cavity, interaction picture
//   Spin        ground-manifold collective spin (Dicke) + cavity
//   TwoMode     Holstein-Primakoff bosonic limit (modes a and b)
//   Transformed Bogoliubov frame: plain beam splitter with coupling mu
//
// plus the squeezing transform, its parameters, and the dark target states.
//
// Every Hamiltonian is assembled from a list of (matrix, coefficient(Omega2))
// terms; the static builders and the time-dependent propagation share that
// list, so there is a single definition of each model.

#include <cmath>
#include <functional>
#include <optional>
#include <numbers>

#include "darksqueeze/core.hpp"

namespace darksqueeze {

// ---------------------------------------------------------------------------
// Parameters

// All frequencies in 2pi*kHz, phases in radians.
struct PhysicalParams {
  double g1 = 0.0;                 // cavity coupling on |g><r|
  double g2 = 0.0;                 // cavity coupling on |e><s|
  double omega1_rabi = 0.0;        // classical Rabi on |e><r|
  double omega2_rabi_max = 0.0;    // classical Rabi on |g><s| at ramp end
  double phi1 = 0.0;
  double phi2 = 0.0;
  double delta1 = 0.0;             // single-photon detuning, leg 1
  double delta2 = 0.0;             // single-photon detuning, leg 2
  double cavity_offset = 0.0;      // omega_a - omega
  double two_photon_offset = 0.0;  // omega_e - omega'_e  (= delta_b)
  long long n_atoms = 1;
  double kappa = 0.0;              // cavity decay rate
  double gamma = 0.0;              // atomic spontaneous emission rate
};

struct ParamsCheck {
  bool large_detuning_ok = true;  // warning flag only, never fatal
};

inline ParamsCheck validate(const PhysicalParams& p) {
  if (p.g1 < 0 || p.g2 < 0 || p.omega1_rabi < 0 || p.omega2_rabi_max < 0)
    throw InvalidInputError("couplings and Rabi frequencies must be >= 0");
  if (p.kappa < 0 || p.gamma < 0)
    throw InvalidInputError("decay rates must be >= 0");
  if (p.delta1 == 0.0) throw InvalidInputError("delta1 must be nonzero");
  if (p.delta2 == 0.0) throw InvalidInputError("delta2 must be nonzero");
  if (p.n_atoms < 1) throw InvalidInputError("n_atoms must be >= 1");
  ParamsCheck check;
  const double drive = std::max({p.g1, p.g2, p.omega1_rabi, p.omega2_rabi_max,
                                 std::abs(p.cavity_offset),
                                 std::abs(p.two_photon_offset)});
  check.large_detuning_ok =
      std::min(std::abs(p.delta1), std::abs(p.delta2)) >= 10.0 * drive;
  return check;
}

struct DerivedCouplings {
  double eta_e = 0.0;    // Omega1^2 / Delta1
  double eta_g = 0.0;    // Omega2^2 / Delta2
  double xi_e = 0.0;     // g2^2 / Delta2
  double xi_g = 0.0;     // g1^2 / Delta1
  double lambda1 = 0.0;  // Omega1 g1 / Delta1
  double lambda2 = 0.0;  // Omega2 g2 / Delta2
  double delta_a = 0.0;  // cavity_offset - N xi_g
  double delta_b = 0.0;  // two_photon_offset
  std::optional<double> mu;  // sqrt(N (l1^2 - l2^2)); absent above threshold
  std::optional<double> r;   // atanh(l2/l1); absent above threshold
  double theta_atomic = 0.0;
  double theta_field = 0.0;
  bool below_threshold_violated = false;  // lambda2 >= lambda1
  bool omega2_above_max = false;
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

/// Closed-form couplings at the given instantaneous Omega2 (2pi*kHz).
inline DerivedCouplings derive_couplings(const PhysicalParams& p,
                                         double omega2_current) {
  validate(p);
  if (omega2_current < 0) throw InvalidInputError("omega2_current must be >= 0");
  DerivedCouplings d;
  d.omega2_above_max = omega2_current > p.omega2_rabi_max;
  d.eta_e = p.omega1_rabi * p.omega1_rabi / p.delta1;
  d.eta_g = omega2_current * omega2_current / p.delta2;
  d.xi_e = p.g2 * p.g2 / p.delta2;
  d.xi_g = p.g1 * p.g1 / p.delta1;
  d.lambda1 = p.omega1_rabi * p.g1 / p.delta1;
  d.lambda2 = omega2_current * p.g2 / p.delta2;
  d.delta_a = p.cavity_offset - static_cast<double>(p.n_atoms) * d.xi_g;
  d.delta_b = p.two_photon_offset;
  d.theta_atomic = wrap_angle(p.phi2 - p.phi1);
  d.theta_field = wrap_angle(p.phi1 + p.phi2);
  if (d.lambda2 < d.lambda1) {
    d.mu = std::sqrt(static_cast<double>(p.n_atoms) *
                     (d.lambda1 * d.lambda1 - d.lambda2 * d.lambda2));
    d.r = std::atanh(d.lambda2 / d.lambda1);
  } else {
    d.below_threshold_violated = true;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Model level selection

enum class Level { Full, Spin, TwoMode, Transformed };
enum class Branch { Atomic, Field };

struct ModelLevel {
  Level level = Level::TwoMode;
  Branch branch = Branch::Atomic;
  int dim_a = 40;         // cavity Fock dimension at every level
  int dim_b = 40;         // b-mode Fock dimension (TwoMode/Transformed)
  int n_atoms_model = 1;  // Dicke / per-atom count (Full, Spin)

  static ModelLevel full(int cavity_dim, int n, Branch br = Branch::Atomic) {
    if (n < 1 || n > 3)
      throw InvalidInputError("Full level supports 1 <= N <= 3");
    return {Level::Full, br, cavity_dim, 0, n};
  }
  static ModelLevel spin(int cavity_dim, int n, Branch br = Branch::Atomic) {
    return {Level::Spin, br, cavity_dim, 0, n};
  }
  static ModelLevel two_mode(int dim_a, int dim_b, Branch br = Branch::Atomic) {
    return {Level::TwoMode, br, dim_a, dim_b, 1};
  }
  static ModelLevel transformed(int dim_a, int dim_b, Branch br = Branch::Atomic) {
    return {Level::Transformed, br, dim_a, dim_b, 1};
  }
};

inline HilbertSpec level_space(const ModelLevel& lv) {
  switch (lv.level) {
    case Level::Full:
      return HilbertSpec({Factor::boson(lv.dim_a),
                          Factor::multilevel(4, lv.n_atoms_model)});
    case Level::Spin:
      return HilbertSpec({Factor::boson(lv.dim_a), Factor::dicke(lv.n_atoms_model)});
    default:
      return HilbertSpec({Factor::boson(lv.dim_a), Factor::boson(lv.dim_b)});
  }
}

// ---------------------------------------------------------------------------
// Hamiltonian term decomposition

/// One additive Hamiltonian term: coeff(Omega2) * mat, coeff real-valued and
/// mat constant (phases live inside mat; every mat is Hermitian on its own).
struct HamiltonianTerm {
  Matrix mat;
  std::function<double(double)> coeff;
};

struct TermList {
  HilbertSpec space;
  std::vector<HamiltonianTerm> terms;

  Matrix assemble(double omega2) const {
    Matrix h = Matrix::Zero(space.dim(), space.dim());
    for (const auto& t : terms) h += t.coeff(omega2) * t.mat;
    return h;
  }
};

struct BuildDiagnostics {
  bool degeneracy_warning = false;
  bool truncation_flag = false;
  bool below_threshold_violated = false;
};

namespace detail {

// per-atom basis order within the Full level
inline constexpr int kG = 0, kE = 1, kR = 2, kS = 3;

inline Matrix atomic_transition(int to, int from) {
  Matrix m = Matrix::Zero(4, 4);
  m(to, from) = 1.0;
  return m;
}

inline Matrix hermitize(Matrix m) { return 0.5 * (m + Matrix(m.adjoint())); }

// Sum over atoms of a single-atom operator, embedded in the full space.
inline Matrix atom_sum(const HilbertSpec& space, const Matrix& single) {
  Matrix acc = Matrix::Zero(space.dim(), space.dim());
  for (int j = 1; j < space.site_count(); ++j)
    acc += embed_product(space, {{j, &single}}).mat;
  return acc;
}

// Sum over atoms of (cavity op) x (single-atom op).
inline Matrix cavity_atom_sum(const HilbertSpec& space, const Matrix& cav,
                              const Matrix& single) {
  Matrix acc = Matrix::Zero(space.dim(), space.dim());
  for (int j = 1; j < space.site_count(); ++j)
    acc += embed_product(space, {{0, &cav}, {j, &single}}).mat;
  return acc;
}

}  // namespace detail

/// Interaction-picture four-level model, Eqs-of-motion form
/// H = H0 + Omega2 * (laser-2 coupling); returns the two terms.
inline TermList full_terms(const PhysicalParams& p, int cavity_dim, int n_atoms) {
  using namespace detail;
  validate(p);
  if (n_atoms < 1 || n_atoms > 3)
    throw InvalidInputError("full model supports 1 <= N <= 3");
  HilbertSpec space({Factor::boson(cavity_dim), Factor::multilevel(4, n_atoms)});
  const Matrix a = annihilation(cavity_dim).mat;
  const Matrix n_cav = Matrix(a.adjoint() * a);

  Matrix h0 = p.cavity_offset * embed_product(space, {{0, &n_cav}}).mat +
              p.two_photon_offset * atom_sum(space, atomic_transition(kE, kE)) +
              p.delta1 * atom_sum(space, atomic_transition(kR, kR)) +
              p.delta2 * atom_sum(space, atomic_transition(kS, kS));
  Matrix drive = p.g1 * cavity_atom_sum(space, a, atomic_transition(kR, kG)) +
                 p.omega1_rabi * std::exp(kI * p.phi1) *
                     atom_sum(space, atomic_transition(kR, kE)) +
                 p.g2 * cavity_atom_sum(space, a, atomic_transition(kS, kE));
  h0 += drive + Matrix(drive.adjoint());

  Matrix laser2 = std::exp(kI * p.phi2) * atom_sum(space, atomic_transition(kS, kG));
  laser2 += Matrix(laser2.adjoint());

  TermList tl{space, {}};
  tl.terms.push_back({std::move(h0), [](double) { return 1.0; }});
  tl.terms.push_back({std::move(laser2), [](double w2) { return w2; }});
  return tl;
}

/// James-Jerke adiabatic elimination of both excited levels:
/// H = H_i0 + Delta1 P_r + [A1,A1^dag]/Delta1 + Delta2 P_s + [A2,A2^dag]/Delta2,
/// kept on the same four-level space as the full model.  The Omega2
/// dependence splits exactly into constant, linear and quadratic terms.
inline TermList eliminated_terms(const PhysicalParams& p, int cavity_dim,
                                 int n_atoms) {
  using namespace detail;
  validate(p);
  if (n_atoms < 1 || n_atoms > 3)
    throw InvalidInputError("eliminated model supports 1 <= N <= 3");
  HilbertSpec space({Factor::boson(cavity_dim), Factor::multilevel(4, n_atoms)});
  const Matrix a = annihilation(cavity_dim).mat;
  const Matrix n_cav = Matrix(a.adjoint() * a);

  const Matrix a1 = p.g1 * cavity_atom_sum(space, a, atomic_transition(kR, kG)) +
                    p.omega1_rabi * std::exp(kI * p.phi1) *
                        atom_sum(space, atomic_transition(kR, kE));
  const Matrix c2 = p.g2 * cavity_atom_sum(space, a, atomic_transition(kS, kE));
  const Matrix l2 = std::exp(kI * p.phi2) * atom_sum(space, atomic_transition(kS, kG));

  auto comm = [](const Matrix& x, const Matrix& y) -> Matrix {
    return x * y - y * x;
  };

  Matrix h_const =
      p.cavity_offset * embed_product(space, {{0, &n_cav}}).mat +
      p.two_photon_offset * atom_sum(space, atomic_transition(kE, kE)) +
      p.delta1 * atom_sum(space, atomic_transition(kR, kR)) +
      p.delta2 * atom_sum(space, atomic_transition(kS, kS)) +
      hermitize(comm(a1, Matrix(a1.adjoint())) / p.delta1) +
      hermitize(comm(c2, Matrix(c2.adjoint())) / p.delta2);
  Matrix h_lin = hermitize(
      (comm(c2, Matrix(l2.adjoint())) + comm(l2, Matrix(c2.adjoint()))) / p.delta2);
  Matrix h_quad = hermitize(comm(l2, Matrix(l2.adjoint())) / p.delta2);

  TermList tl{space, {}};
  tl.terms.push_back({std::move(h_const), [](double) { return 1.0; }});
  tl.terms.push_back({std::move(h_lin), [](double w2) { return w2; }});
  tl.terms.push_back({std::move(h_quad), [](double w2) { return w2 * w2; }});
  return tl;
}

/// Ground-manifold collective-spin model (Dicke operators):
/// H = H_i0 - eta_e (Sz+N/2) - xi_g a^dag a (N/2-Sz) - xi_e a^dag a (Sz+N/2)
///     - eta_g (N/2-Sz) - (l1 e^{-i phi1} a S+ + l2 e^{i phi2} a^dag S+ + H.c.)
inline TermList spin_terms(const PhysicalParams& p, int cavity_dim, int n_atoms) {
  using namespace detail;
  validate(p);
  HilbertSpec space({Factor::boson(cavity_dim), Factor::dicke(n_atoms)});
  const DerivedCouplings d = derive_couplings(p, 0.0);
  const double n_half = 0.5 * n_atoms;

  const Matrix a = annihilation(cavity_dim).mat;
  const Matrix a_dag = a.adjoint();
  const Matrix n_cav = Matrix(a_dag * a);
  auto spin = collective_spin_ops(n_atoms);
  const int sd = n_atoms + 1;
  const Matrix excit = Matrix(spin.z.mat + n_half * Matrix::Identity(sd, sd));
  const Matrix holes = Matrix(n_half * Matrix::Identity(sd, sd) - spin.z.mat);

  Matrix h_const =
      p.cavity_offset * embed_product(space, {{0, &n_cav}}).mat +
      (p.two_photon_offset - d.eta_e) * embed_product(space, {{1, &excit}}).mat -
      d.xi_g * embed_product(space, {{0, &n_cav}, {1, &holes}}).mat -
      d.xi_e * embed_product(space, {{0, &n_cav}, {1, &excit}}).mat;
  Matrix raman1 = -d.lambda1 * std::exp(-kI * p.phi1) *
                  embed_product(space, {{0, &a}, {1, &spin.plus.mat}}).mat;
  h_const += raman1 + Matrix(raman1.adjoint());

  Matrix raman2 = -(p.g2 / p.delta2) * std::exp(kI * p.phi2) *
                  embed_product(space, {{0, &a_dag}, {1, &spin.plus.mat}}).mat;
  Matrix h_lin = raman2 + Matrix(raman2.adjoint());
  Matrix h_quad = -(1.0 / p.delta2) * embed_product(space, {{1, &holes}}).mat;

  TermList tl{space, {}};
  tl.terms.push_back({std::move(h_const), [](double) { return 1.0; }});
  tl.terms.push_back({std::move(h_lin), [](double w2) { return w2; }});
  tl.terms.push_back({std::move(h_quad), [](double w2) { return w2 * w2; }});
  return tl;
}

/// Two-mode bosonic limit:
/// H = delta_a a^dag a + delta_b b^dag b
///     - [sqrt(N)(l1 a e^{-i phi1} + l2 a^dag e^{i phi2}) b^dag + H.c.]
/// with the optional residual Stark term -(eta_e - eta_g) b^dag b that the
/// printed bosonic limit drops.
inline TermList two_mode_terms(const PhysicalParams& p, int dim_a, int dim_b,
                               bool keep_residual_stark = false) {
  validate(p);
  HilbertSpec space({Factor::boson(dim_a), Factor::boson(dim_b)});
  const DerivedCouplings d = derive_couplings(p, 0.0);
  const double sqrt_n = std::sqrt(static_cast<double>(p.n_atoms));

  const Matrix a = annihilation(dim_a).mat;
  const Matrix b = annihilation(dim_b).mat;
  const Matrix n_a = Matrix(a.adjoint() * a);
  const Matrix n_b = Matrix(b.adjoint() * b);
  const Matrix b_dag = Matrix(b.adjoint());
  const Matrix a_dag = Matrix(a.adjoint());

  Matrix h_const = d.delta_a * embed_product(space, {{0, &n_a}}).mat +
                   d.delta_b * embed_product(space, {{1, &n_b}}).mat;
  Matrix bs = -sqrt_n * d.lambda1 * std::exp(-kI * p.phi1) *
              embed_product(space, {{0, &a}, {1, &b_dag}}).mat;
  h_const += bs + Matrix(bs.adjoint());

  Matrix tms = -sqrt_n * (p.g2 / p.delta2) * std::exp(kI * p.phi2) *
               embed_product(space, {{0, &a_dag}, {1, &b_dag}}).mat;
  Matrix h_lin = tms + Matrix(tms.adjoint());

  TermList tl{space, {}};
  tl.terms.push_back({std::move(h_const), [](double) { return 1.0; }});
  tl.terms.push_back({std::move(h_lin), [](double w2) { return w2; }});
  if (keep_residual_stark) {
    Matrix stark = embed_product(space, {{1, &n_b}}).mat;
    const double eta_e = d.eta_e, inv_d2 = 1.0 / p.delta2;
    tl.terms.push_back({std::move(stark), [eta_e, inv_d2](double w2) {
                          return -eta_e + w2 * w2 * inv_d2;
                        }});
  }
  return tl;
}

/// Bogoliubov-frame beam splitter: delta a^dag a (or delta b^dag b) minus
/// mu(Omega2) (e^{-i phi1} a b^dag + H.c.).  Throws above threshold.
inline TermList transformed_terms(const PhysicalParams& p, int dim_a, int dim_b,
                                  Branch branch) {
  validate(p);
  HilbertSpec space({Factor::boson(dim_a), Factor::boson(dim_b)});
  const DerivedCouplings d0 = derive_couplings(p, 0.0);
  const Matrix a = annihilation(dim_a).mat;
  const Matrix b = annihilation(dim_b).mat;
  const Matrix n_a = Matrix(a.adjoint() * a);
  const Matrix n_b = Matrix(b.adjoint() * b);
  const Matrix b_dag = Matrix(b.adjoint());

  Matrix h_const = (branch == Branch::Atomic)
                       ? Matrix(d0.delta_a * embed_product(space, {{0, &n_a}}).mat)
                       : Matrix(d0.delta_b * embed_product(space, {{1, &n_b}}).mat);
  Matrix bs = std::exp(-kI * p.phi1) *
              embed_product(space, {{0, &a}, {1, &b_dag}}).mat;
  bs += Matrix(bs.adjoint());

  const double lambda1 = d0.lambda1;
  const double g2_over_d2 = p.g2 / p.delta2;
  const double n_atoms = static_cast<double>(p.n_atoms);
  auto mu_of = [lambda1, g2_over_d2, n_atoms](double w2) {
    const double l2 = w2 * g2_over_d2;
    if (l2 >= lambda1)
      throw InvalidInputError("above threshold: lambda2 >= lambda1, no dark squeezed state");
    return -std::sqrt(n_atoms * (lambda1 * lambda1 - l2 * l2));
  };

  TermList tl{space, {}};
  tl.terms.push_back({std::move(h_const), [](double) { return 1.0; }});
  tl.terms.push_back({std::move(bs), mu_of});
  return tl;
}

inline TermList hamiltonian_terms(const PhysicalParams& p, const ModelLevel& lv,
                                  bool keep_residual_stark = false) {
  switch (lv.level) {
    case Level::Full:
      return full_terms(p, lv.dim_a, lv.n_atoms_model);
    case Level::Spin:
      return spin_terms(p, lv.dim_a, lv.n_atoms_model);
    case Level::TwoMode:
      return two_mode_terms(p, lv.dim_a, lv.dim_b, keep_residual_stark);
    case Level::Transformed:
      return transformed_terms(p, lv.dim_a, lv.dim_b, lv.branch);
  }
  throw InvalidInputError("unknown model level");
}

// ---------------------------------------------------------------------------
// Static builders (the spec'd operation surface)

namespace detail {
inline QOperator finish_hamiltonian(const TermList& tl, double omega2) {
  QOperator h{tl.space, tl.assemble(omega2)};
  // builders must produce Hermitian output; the term construction
  // guarantees this up to roundoff of the commutator products
  if (!h.is_hermitian(1e-12 * std::max(1.0, max_abs(h.mat))))
    throw NumericValidityError("hamiltonian builder produced non-Hermitian matrix");
  return h;
}
}  // namespace detail

inline QOperator build_full_hamiltonian(const PhysicalParams& p, double omega2,
                                        int cavity_dim, int n_atoms) {
  return detail::finish_hamiltonian(full_terms(p, cavity_dim, n_atoms), omega2);
}

inline QOperator build_eliminated_hamiltonian(const PhysicalParams& p, double omega2,
                                              int cavity_dim, int n_atoms) {
  return detail::finish_hamiltonian(eliminated_terms(p, cavity_dim, n_atoms), omega2);
}

inline QOperator build_spin_hamiltonian(const PhysicalParams& p, double omega2,
                                        int cavity_dim, int n_atoms) {
  return detail::finish_hamiltonian(spin_terms(p, cavity_dim, n_atoms), omega2);
}

inline QOperator build_two_mode_hamiltonian(const PhysicalParams& p, double omega2,
                                            int dim_a, int dim_b,
                                            bool keep_residual_stark = false,
                                            BuildDiagnostics* diag = nullptr) {
  const DerivedCouplings d = derive_couplings(p, omega2);
  if (diag) {
    diag->below_threshold_violated = d.below_threshold_violated;
    diag->degeneracy_warning =
        std::abs(d.delta_a) < 1e-9 && std::abs(d.delta_b) < 1e-9 && d.lambda2 > 0.0;
  }
  return detail::finish_hamiltonian(two_mode_terms(p, dim_a, dim_b, keep_residual_stark),
                                    omega2);
}

inline QOperator build_transformed_hamiltonian(const PhysicalParams& p, double omega2,
                                               int dim_a, int dim_b,
                                               Branch branch = Branch::Atomic) {
  return detail::finish_hamiltonian(transformed_terms(p, dim_a, dim_b, branch), omega2);
}

// ---------------------------------------------------------------------------
// Squeezing transform

struct SqueezeParams {
  double r = 0.0;
  double theta = 0.0;
};

/// Squeezing strength and phase that rotate the coupling operator
/// lambda1 e^{+/-i phi} m + lambda2 e^{...} m^dag into a single annihilation
/// operator.  Atomic branch: theta = phi2 - phi1; field branch:
/// theta = phi1 + phi2 (the printed field value; the atomic value is fixed
/// by the same cancellation criterion, verified numerically by the oracle).
inline SqueezeParams squeeze_params(double lambda1, double lambda2, double phi1,
                                    double phi2, Branch branch) {
  if (!(lambda2 < lambda1))
    throw InvalidInputError("above threshold: lambda2 >= lambda1, no dark squeezed state");
  SqueezeParams sp;
  sp.r = std::atanh(lambda2 / lambda1);
  sp.theta = (branch == Branch::Atomic) ? wrap_angle(phi2 - phi1)
                                        : wrap_angle(phi1 + phi2);
  return sp;
}

/// S(xi) = exp[(xi^* b^2 - xi b^dag^2)/2], xi = r e^{i theta}, on one factor.
inline QOperator squeeze_operator(double r, double theta, int dim,
                                  double trunc_tol = 1e-6,
                                  BuildDiagnostics* diag = nullptr) {
  if (r < 0) throw InvalidInputError("squeeze strength must be >= 0");
  const Matrix b = annihilation(dim).mat;
  const Complex xi = r * std::exp(kI * theta);
  Matrix gen = 0.5 * (std::conj(xi) * Matrix(b * b) -
                      xi * Matrix(b.adjoint() * b.adjoint()));
  QOperator s = matrix_exponential(QOperator{annihilation(dim).space, std::move(gen)});
  if (diag) {
    const double top = std::norm(s.mat(dim - 1, 0)) + (dim >= 2 ? std::norm(s.mat(dim - 2, 0)) : 0.0);
    diag->truncation_flag = top > trunc_tol;
  }
  return s;
}

/// Squeezed-vacuum amplitudes truncated to m = 0..n_levels-1 and renormalized.
/// The squeeze exponential is evaluated on a working space twice the
/// requested size so the kept amplitudes are free of truncation artifacts.
inline Vector squeezed_vacuum_amplitudes(double r, double theta, int n_levels) {
  const int work_dim = std::max(
      2 * n_levels, static_cast<int>(20.0 * std::sinh(r) * std::sinh(r)) + 20);
  QOperator s = squeeze_operator(r, theta, work_dim);
  Vector amps = s.mat.col(0).head(n_levels);
  amps /= amps.norm();
  return amps;
}

/// Dark target state at the bosonic levels: S_b(xi)|0,0> (atomic branch,
/// mode b squeezed) or S_a(zeta)|0,0> (field branch, cavity squeezed),
/// evaluated at the ramp endpoint Omega2 = omega2_rabi_max.
inline QuantumState target_state(const PhysicalParams& p, Branch branch, int dim_a,
                                 int dim_b, BuildDiagnostics* diag = nullptr) {
  const DerivedCouplings d = derive_couplings(p, p.omega2_rabi_max);
  if (!d.r)
    throw InvalidInputError("above threshold: lambda2 >= lambda1, no dark squeezed state");
  HilbertSpec space({Factor::boson(dim_a), Factor::boson(dim_b)});
  const int sq_dim = (branch == Branch::Atomic) ? dim_b : dim_a;
  const double theta = (branch == Branch::Atomic) ? d.theta_atomic : d.theta_field;
  Vector amps = squeezed_vacuum_amplitudes(*d.r, theta, sq_dim);
  if (diag) {
    const double top = std::norm(amps[sq_dim - 1]) +
                       (sq_dim >= 2 ? std::norm(amps[sq_dim - 2]) : 0.0);
    diag->truncation_flag = top > 1e-6;
  }
  Vector psi = (branch == Branch::Atomic)
                   ? Vector(kron(Matrix(fock_state(dim_a, 0)), Matrix(amps)))
                   : Vector(kron(Matrix(amps), Matrix(fock_state(dim_b, 0))));
  return QuantumState::ket(std::move(space), std::move(psi));
}

// ---------------------------------------------------------------------------
// Targets at the multilevel fidelity levels

/// HP-mapped dark state on Boson(cavity) x Dicke(N).
inline QuantumState spin_target_state(const PhysicalParams& p, int cavity_dim,
                                      int n_atoms, Branch branch) {
  const DerivedCouplings d = derive_couplings(p, p.omega2_rabi_max);
  if (!d.r)
    throw InvalidInputError("above threshold: no dark squeezed state");
  HilbertSpec space({Factor::boson(cavity_dim), Factor::dicke(n_atoms)});
  Vector psi;
  if (branch == Branch::Atomic) {
    Vector amps = squeezed_vacuum_amplitudes(*d.r, d.theta_atomic, n_atoms + 1);
    psi = kron(Matrix(fock_state(cavity_dim, 0)), Matrix(amps));
  } else {
    QOperator s = squeeze_operator(*d.r, d.theta_field, cavity_dim);
    psi = kron(Matrix(s.mat.col(0)), Matrix(fock_state(n_atoms + 1, 0)));
  }
  return QuantumState::ket(std::move(space), std::move(psi));
}

/// Isometry from the Dicke excitation basis |m> into the symmetric
/// {g,e}-manifold states of N four-level atoms (dimension 4^N).
inline Matrix dicke_symmetric_isometry(int n_atoms) {
  using namespace detail;
  long long dim = 1;
  for (int j = 0; j < n_atoms; ++j) dim *= 4;
  Matrix iso = Matrix::Zero(dim, n_atoms + 1);
  std::vector<double> binom(n_atoms + 1, 1.0);
  for (int m = 1; m <= n_atoms; ++m)
    binom[m] = binom[m - 1] * (n_atoms - m + 1) / m;
  for (long long idx = 0; idx < dim; ++idx) {
    long long rest = idx;
    int excited = 0;
    bool ground_manifold = true;
    for (int j = 0; j < n_atoms; ++j) {
      const int level = static_cast<int>(rest % 4);
      rest /= 4;
      if (level == kE) ++excited;
      else if (level != kG) { ground_manifold = false; break; }
    }
    if (ground_manifold) iso(idx, excited) = 1.0 / std::sqrt(binom[excited]);
  }
  return iso;
}

/// HP-mapped dark state embedded in the full four-level space (N <= 3).
inline QuantumState full_target_state(const PhysicalParams& p, int cavity_dim,
                                      int n_atoms, Branch branch) {
  const DerivedCouplings d = derive_couplings(p, p.omega2_rabi_max);
  if (!d.r)
    throw InvalidInputError("above threshold: no dark squeezed state");
  HilbertSpec space({Factor::boson(cavity_dim), Factor::multilevel(4, n_atoms)});
  Matrix iso = dicke_symmetric_isometry(n_atoms);
  Vector psi;
  if (branch == Branch::Atomic) {
    Vector amps = squeezed_vacuum_amplitudes(*d.r, d.theta_atomic, n_atoms + 1);
    psi = kron(Matrix(fock_state(cavity_dim, 0)), Matrix(iso * amps));
  } else {
    QOperator s = squeeze_operator(*d.r, d.theta_field, cavity_dim);
    psi = kron(Matrix(s.mat.col(0)), Matrix(iso.col(0)));
  }
  return QuantumState::ket(std::move(space), std::move(psi));
}

}  // namespace darksqueeze

#endif  // DARKSQUEEZE_MODEL_HPP
