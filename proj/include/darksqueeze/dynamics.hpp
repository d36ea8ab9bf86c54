#ifndef DARKSQUEEZE_DYNAMICS_HPP
#define DARKSQUEEZE_DYNAMICS_HPP

// Time evolution under the Omega2 ramp: piecewise-constant midpoint
// exponential propagation (Krylov subspace) for closed systems, the same or
// an adaptive embedded Runge-Kutta integrator for Lindblad dynamics, and the
// protocol runners built on top (adiabatic squeezing, state transfer).
//
// Hamiltonians arrive as TermLists (model.hpp) in 2pi*kHz and are converted
// to angular rad/us once, at sparsification time.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "darksqueeze/analysis.hpp"
#include "darksqueeze/core.hpp"
#include "darksqueeze/model.hpp"

namespace darksqueeze {

// ---------------------------------------------------------------------------
// Ramp schedule

enum class RampShape { Linear, SineSquared, TanhRamp };

struct Schedule {
  RampShape shape = RampShape::SineSquared;
  double t_total_us = 0.0;
  double omega2_max = 0.0;  // 2pi*kHz
  double steepness = 3.0;   // TanhRamp only

  static Schedule linear(double t_total, double omega2_max) {
    return {RampShape::Linear, t_total, omega2_max, 0.0};
  }
  static Schedule sine_squared(double t_total, double omega2_max) {
    return {RampShape::SineSquared, t_total, omega2_max, 0.0};
  }
  static Schedule tanh_ramp(double t_total, double omega2_max, double steepness) {
    return {RampShape::TanhRamp, t_total, omega2_max, steepness};
  }
};

/// Omega2(t) along the ramp; 0 at t = 0, omega2_max at t = T.
inline double ramp_value(const Schedule& s, double t_us) {
  if (!(s.t_total_us > 0)) throw InvalidInputError("schedule needs t_total > 0");
  if (t_us < 0 || t_us > s.t_total_us * (1.0 + 1e-12))
    throw InvalidInputError("ramp_value: t outside [0, T]");
  const double x = std::min(1.0, t_us / s.t_total_us);
  switch (s.shape) {
    case RampShape::Linear:
      return s.omega2_max * x;
    case RampShape::SineSquared: {
      const double si = std::sin(0.5 * std::numbers::pi * x);
      return s.omega2_max * si * si;
    }
    case RampShape::TanhRamp: {
      if (!(s.steepness > 0)) throw InvalidInputError("tanh ramp needs steepness > 0");
      return s.omega2_max * 0.5 * (1.0 + std::tanh(s.steepness * (2.0 * x - 1.0)));
    }
  }
  throw InvalidInputError("unknown ramp shape");
}

// ---------------------------------------------------------------------------
// Evolution configuration and records

enum class EvolveMethod { PiecewiseExponential, AdaptiveRK };

struct EvolveConfig {
  int n_steps = 1000;
  EvolveMethod method = EvolveMethod::PiecewiseExponential;
  double rel_tol = 1e-8;   // AdaptiveRK
  double abs_tol = 1e-10;  // AdaptiveRK
  int record_every = 10;
  double truncation_tol = 1e-6;
  bool store_states = false;

  void validate() const {
    if (n_steps < 10) throw InvalidInputError("n_steps must be >= 10");
    if (!(rel_tol > 0 && rel_tol <= 1e-2) || !(abs_tol > 0 && abs_tol <= 1e-2))
      throw InvalidInputError("tolerances must lie in (0, 1e-2]");
    if (record_every < 1) throw InvalidInputError("record_every must be >= 1");
    if (!(truncation_tol > 0)) throw InvalidInputError("truncation_tol must be > 0");
  }
};

struct TimeRecord {
  double t_us = 0.0;
  double n_a = std::numeric_limits<double>::quiet_NaN();
  double n_b = std::numeric_limits<double>::quiet_NaN();
  double fidelity = std::numeric_limits<double>::quiet_NaN();
  double gap_khz = std::numeric_limits<double>::quiet_NaN();
  double trunc_top = 0.0;
  double norm_or_trace = 1.0;
};

struct TimeSeries {
  std::vector<TimeRecord> records;
  std::vector<QuantumState> states;  // only when store_states
  bool valid = true;
  double breach_time_us = std::numeric_limits<double>::quiet_NaN();
  std::string breach_reason;

  const TimeRecord& back() const { return records.back(); }
};

struct CollapseChannel {
  QOperator op;
  double rate = 0.0;  // 2pi*kHz
};

struct CollapseSet {
  std::vector<CollapseChannel> channels;

  void validate() const {
    for (const auto& c : channels)
      if (c.rate < 0) throw InvalidInputError("collapse rates must be >= 0");
  }
};

/// Observables and reference states sampled at record points.
struct RecordSpec {
  std::optional<SparseMatrix> n_a;
  std::optional<SparseMatrix> n_b;
  std::optional<Vector> target;
  std::function<double(double)> gap_of_t;  // 2pi*kHz
  std::vector<int> monitored_sites;
};

// ---------------------------------------------------------------------------
// Sparse term machinery

namespace detail {

inline SparseMatrix sparsify(const Matrix& m, double scale = 1.0) {
  const double drop = 1e-300;
  std::vector<Eigen::Triplet<Complex>> trips;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > drop) trips.emplace_back(i, j, scale * m(i, j));
  SparseMatrix s(m.rows(), m.cols());
  s.setFromTriplets(trips.begin(), trips.end());
  s.makeCompressed();
  return s;
}

// Hamiltonian terms in angular units, assembled per Omega2 value.
class SparseHamiltonian {
 public:
  explicit SparseHamiltonian(const TermList& tl) : space_(tl.space) {
    for (const auto& t : tl.terms) {
      mats_.push_back(sparsify(t.mat, kAngularPerKhz));
      coeffs_.push_back(t.coeff);
    }
  }

  // rad/us
  SparseMatrix assemble(double omega2) const {
    SparseMatrix h = coeffs_[0](omega2) * mats_[0];
    for (size_t k = 1; k < mats_.size(); ++k) {
      const double c = coeffs_[k](omega2);
      if (c != 0.0) h += c * mats_[k];
    }
    return h;
  }

  const HilbertSpec& space() const { return space_; }

 private:
  HilbertSpec space_;
  std::vector<SparseMatrix> mats_;
  std::vector<std::function<double(double)>> coeffs_;
};

// y = exp(-i t H) v for Hermitian sparse H (rad/us), adaptive Lanczos with
// full reorthogonalization.  Error control is relative to ||v||; the basis
// stops growing once the propagated residual estimate is below tol.
inline Vector expv_hermitian(const SparseMatrix& h, Vector v, double t,
                             double tol = 1e-12, int m_max = 48) {
  if (t == 0.0) return v;
  double remaining = t;
  int guard = 0;
  while (remaining > 1e-300 && ++guard < 100000) {
    const double beta = v.norm();
    if (beta == 0.0) return v;
    std::vector<Vector> basis;
    basis.push_back(v / beta);
    std::vector<double> alpha, offdiag;
    double beta_next = 0.0;

    // propagator coefficients in the Krylov basis for step tau
    Eigen::VectorXcd u;
    auto krylov_exp = [&](double tau) {
      const int m = static_cast<int>(alpha.size());
      Eigen::VectorXd diag(m), sub(std::max(0, m - 1));
      for (int j = 0; j < m; ++j) diag[j] = alpha[j];
      for (int j = 0; j + 1 < m; ++j) sub[j] = offdiag[j];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(diag, sub);
      Eigen::ArrayXcd phases =
          ((-kI * tau) * es.eigenvalues().cast<Complex>().array()).exp();
      Eigen::ArrayXcd w0 =
          es.eigenvectors().row(0).transpose().cast<Complex>().array() * phases;
      u = es.eigenvectors().cast<Complex>() * w0.matrix();
      return 2.0 * beta_next * std::abs(tau) * std::abs(u[m - 1]);
    };

    bool converged = false;
    while (true) {
      const int j = static_cast<int>(alpha.size());
      Vector w = h * basis[j];
      const double a = std::real(basis[j].dot(w));
      alpha.push_back(a);
      w -= a * basis[j];
      if (j > 0) w -= offdiag[j - 1] * basis[j - 1];
      for (const auto& u_vec : basis) w -= u_vec.dot(w) * u_vec;
      beta_next = w.norm();
      const int m = static_cast<int>(alpha.size());
      if (beta_next < 1e-14 || m == v.size()) {
        converged = true;
        break;
      }
      if (m >= 4 && m % 2 == 0 && krylov_exp(remaining) <= tol) {
        converged = true;
        break;
      }
      if (m == m_max) break;
      offdiag.push_back(beta_next);
      basis.push_back(w / beta_next);
    }

    double tau = remaining;
    if (converged || beta_next < 1e-14) {
      krylov_exp(tau);
    } else {
      for (int halvings = 0; halvings < 64; ++halvings) {
        if (krylov_exp(tau) <= tol) break;
        tau *= 0.5;
      }
    }
    const int m = static_cast<int>(alpha.size());
    Vector next = Vector::Zero(v.size());
    for (int j = 0; j < m; ++j) next += (beta * u[j]) * basis[j];
    v = std::move(next);
    remaining -= tau;
  }
  return v;
}

// Generic linear action on a density matrix (the Lindblad generator).
struct LindbladAction {
  SparseMatrix h;  // rad/us
  struct Channel {
    SparseMatrix l;
    SparseMatrix l_dag;
    SparseMatrix m;  // L^dag L
    double rate = 0.0;  // 1/us
  };
  std::vector<Channel> channels;

  Matrix operator()(const Matrix& rho) const {
    Matrix out = -kI * (h * rho - rho * h);
    for (const auto& c : channels) {
      if (c.rate == 0.0) continue;
      out += c.rate * Matrix(c.l * Matrix(rho * c.l_dag));
      out -= (0.5 * c.rate) * Matrix(c.m * rho);
      out -= (0.5 * c.rate) * Matrix(rho * c.m);
    }
    return out;
  }
};

inline double frob(const Matrix& m) { return m.norm(); }

// rho <- exp(tau L) rho via Arnoldi iteration on the superoperator action.
inline Matrix expv_superop(const LindbladAction& lind, Matrix rho, double t,
                           double tol = 1e-10, int m_max = 40) {
  auto inner = [](const Matrix& a, const Matrix& b) -> Complex {
    return (a.conjugate().cwiseProduct(b)).sum();
  };
  double remaining = t;
  int guard = 0;
  while (remaining > 1e-300 && ++guard < 100000) {
    const double beta = frob(rho);
    if (beta == 0.0) return rho;
    std::vector<Matrix> basis;
    basis.push_back(rho / beta);
    Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m_max + 1, m_max);
    int m = 0;
    double h_next = 0.0;
    Eigen::VectorXcd u;
    auto err_at = [&](double tau) {
      Eigen::MatrixXcd e = (tau * hess.topLeftCorner(m, m)).exp();
      u = e.col(0);
      return 2.0 * h_next * std::abs(tau) * std::abs(u[m - 1]);
    };
    bool converged = false;
    for (int j = 0; j < m_max; ++j) {
      Matrix w = lind(basis[j]);
      for (int i = 0; i <= j; ++i) {
        const Complex hij = inner(basis[i], w);
        hess(i, j) = hij;
        w -= hij * basis[i];
      }
      h_next = frob(w);
      m = j + 1;
      if (h_next < 1e-14) {
        converged = true;
        break;
      }
      if (m >= 4 && m % 2 == 0 && err_at(remaining) <= tol) {
        converged = true;
        break;
      }
      hess(j + 1, j) = h_next;
      if (j + 1 == m_max) break;
      basis.push_back(w / h_next);
    }
    double tau = remaining;
    if (converged) {
      err_at(tau);
    } else {
      for (int halvings = 0; halvings < 64; ++halvings) {
        if (err_at(tau) <= tol) break;
        tau *= 0.5;
      }
    }
    Matrix next = Matrix::Zero(rho.rows(), rho.cols());
    for (int j = 0; j < m; ++j) next += (beta * u[j]) * basis[j];
    rho = std::move(next);
    remaining -= tau;
  }
  return rho;
}

// Dormand-Prince RK5(4) attempt with step size dt; on acceptance rho is
// advanced.  Returns {accepted, suggested next step}.  err_prev carries the
// last accepted error for PI step control.
template <typename F>
inline std::pair<bool, double> rk45_step(const F& f, double t, double dt, Matrix& rho,
                                         double rel_tol, double abs_tol,
                                         double& err_prev) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const Matrix k1 = f(t, rho);
  const Matrix k2 = f(t + c2 * dt, Matrix(rho + dt * (a21 * k1)));
  const Matrix k3 = f(t + c3 * dt, Matrix(rho + dt * (a31 * k1 + a32 * k2)));
  const Matrix k4 = f(t + c4 * dt, Matrix(rho + dt * (a41 * k1 + a42 * k2 + a43 * k3)));
  const Matrix k5 =
      f(t + c5 * dt, Matrix(rho + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
  const Matrix k6 = f(
      t + dt, Matrix(rho + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
  Matrix next = rho + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const Matrix k7 = f(t + dt, next);
  Matrix err_m = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  const double scale = abs_tol + rel_tol * std::max(frob(rho), frob(next));
  const double err = std::max(frob(err_m) / scale, 1e-10);
  // PI controller damps the accept/reject oscillation of the plain rule
  const double factor = std::clamp(
      0.9 * std::pow(err, -0.7 / 5.0) * std::pow(std::max(err_prev, 1e-10), 0.4 / 5.0),
      0.2, 2.5);
  if (err <= 1.0) {
    rho = std::move(next);
    err_prev = err;
    return {true, dt * factor};
  }
  return {false, dt * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0)};
}

// tr(S * rho) with S sparse.
inline Complex trace_sparse_product(const SparseMatrix& s, const Matrix& rho) {
  Complex acc = 0.0;
  for (int k = 0; k < s.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(s, k); it; ++it)
      acc += it.value() * rho(it.col(), it.row());
  return acc;
}

inline Eigen::VectorXd marginal_of_density(const HilbertSpec& space, const Matrix& rho,
                                           int site) {
  const int d = space.site_dim(site);
  const long long stride = space.stride(site);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
  for (int idx = 0; idx < space.dim(); ++idx)
    m[(idx / stride) % d] += rho(idx, idx).real();
  return m;
}

inline Eigen::VectorXd marginal_of_ket(const HilbertSpec& space, const Vector& psi,
                                       int site) {
  const int d = space.site_dim(site);
  const long long stride = space.stride(site);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
  for (int idx = 0; idx < space.dim(); ++idx)
    m[(idx / stride) % d] += std::norm(psi[idx]);
  return m;
}

inline double top2(const Eigen::VectorXd& marginal) {
  double p = 0.0;
  for (int k = std::max<int>(0, marginal.size() - 2); k < marginal.size(); ++k)
    p += marginal[k];
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evolution drivers

struct EvolveResult {
  TimeSeries series;
  QuantumState final_state;
};

/// Piecewise-constant midpoint exponential propagation of a ket under the
/// ramped Hamiltonian.  Truncation breaches mark the run invalid (with the
/// breach time) but do not abort it.
inline EvolveResult evolve_unitary(const TermList& terms, const QuantumState& psi0,
                                   const Schedule& schedule, const EvolveConfig& config,
                                   const RecordSpec& rec = {}) {
  config.validate();
  if (!psi0.is_ket()) throw InvalidInputError("evolve_unitary needs a ket");
  require_same_space(psi0.space(), terms.space, "evolve_unitary");
  const HilbertSpec& space = terms.space;
  detail::SparseHamiltonian ham(terms);

  const double t_total = schedule.t_total_us;
  const double dt = t_total / config.n_steps;
  Vector psi = psi0.ket_vector();

  TimeSeries out;
  auto record = [&](double t) {
    TimeRecord r;
    r.t_us = t;
    r.norm_or_trace = psi.norm();
    if (rec.n_a) r.n_a = std::real(psi.dot(*rec.n_a * psi)) / (r.norm_or_trace * r.norm_or_trace);
    if (rec.n_b) r.n_b = std::real(psi.dot(*rec.n_b * psi)) / (r.norm_or_trace * r.norm_or_trace);
    if (rec.target) r.fidelity = std::norm(rec.target->dot(psi)) / (r.norm_or_trace * r.norm_or_trace);
    if (rec.gap_of_t) r.gap_khz = rec.gap_of_t(t);
    double trunc = 0.0;
    for (int site : rec.monitored_sites)
      trunc = std::max(trunc, detail::top2(detail::marginal_of_ket(space, psi, site)));
    r.trunc_top = trunc;
    if (out.valid && trunc > config.truncation_tol) {
      out.valid = false;
      out.breach_time_us = t;
      out.breach_reason = "truncation monitor exceeded tolerance";
    }
    out.records.push_back(r);
    if (config.store_states) out.states.push_back(QuantumState::ket(space, psi));
  };
  record(0.0);

  for (int seg = 0; seg < config.n_steps; ++seg) {
    const double t_mid = (seg + 0.5) * dt;
    SparseMatrix h = ham.assemble(ramp_value(schedule, t_mid));
    psi = detail::expv_hermitian(h, std::move(psi), dt);
    if ((seg + 1) % config.record_every == 0) record((seg + 1) * dt);
  }
  return {std::move(out), QuantumState::ket(space, std::move(psi))};
}

/// Lindblad master-equation evolution of a density matrix; collapse rates in
/// 2pi*kHz.  Method PiecewiseExponential propagates segment-exactly through
/// the superoperator exponential; AdaptiveRK integrates continuously.
inline EvolveResult evolve_lindblad(const TermList& terms, const CollapseSet& collapse,
                                    const QuantumState& rho0, const Schedule& schedule,
                                    const EvolveConfig& config,
                                    const RecordSpec& rec = {}) {
  config.validate();
  collapse.validate();
  if (rho0.is_ket()) throw InvalidInputError("evolve_lindblad needs a density matrix");
  require_same_space(rho0.space(), terms.space, "evolve_lindblad");
  const HilbertSpec& space = terms.space;
  detail::SparseHamiltonian ham(terms);

  detail::LindbladAction lind;
  for (const auto& c : collapse.channels) {
    require_same_space(c.op.space, space, "collapse operator");
    detail::LindbladAction::Channel ch;
    ch.l = detail::sparsify(c.op.mat);
    ch.l_dag = detail::sparsify(Matrix(c.op.mat.adjoint()));
    ch.m = detail::sparsify(Matrix(c.op.mat.adjoint() * c.op.mat));
    ch.rate = c.rate * kAngularPerKhz;  // 1/us
    lind.channels.push_back(std::move(ch));
  }

  const double t_total = schedule.t_total_us;
  const double dt = t_total / config.n_steps;
  Matrix rho = rho0.density_matrix();

  TimeSeries out;
  auto record = [&](double t) {
    TimeRecord r;
    r.t_us = t;
    const double tr = rho.trace().real();
    r.norm_or_trace = tr;
    if (rec.n_a) r.n_a = detail::trace_sparse_product(*rec.n_a, rho).real();
    if (rec.n_b) r.n_b = detail::trace_sparse_product(*rec.n_b, rho).real();
    if (rec.target) r.fidelity = std::real(rec.target->dot(rho * *rec.target));
    if (rec.gap_of_t) r.gap_khz = rec.gap_of_t(t);
    double trunc = 0.0;
    for (int site : rec.monitored_sites)
      trunc = std::max(trunc, detail::top2(detail::marginal_of_density(space, rho, site)));
    r.trunc_top = trunc;
    auto breach = [&](const std::string& why) {
      if (out.valid) {
        out.valid = false;
        out.breach_time_us = t;
        out.breach_reason = why;
      }
    };
    if (trunc > config.truncation_tol) breach("truncation monitor exceeded tolerance");
    if (std::abs(tr - 1.0) > 1e-7) breach("trace drift exceeded 1e-7");
    if (max_abs(Matrix(rho - rho.adjoint())) > 1e-9) breach("hermiticity drift exceeded 1e-9");
    if (QuantumState::min_eigenvalue_estimate(rho) < -1e-6) breach("negative density eigenvalue");
    out.records.push_back(r);
    if (config.store_states)
      out.states.push_back(QuantumState::density(space, 0.5 * (rho + Matrix(rho.adjoint()))));
  };
  record(0.0);

  if (config.method == EvolveMethod::PiecewiseExponential) {
    for (int seg = 0; seg < config.n_steps; ++seg) {
      const double t_mid = (seg + 0.5) * dt;
      lind.h = ham.assemble(ramp_value(schedule, t_mid));
      rho = detail::expv_superop(lind, std::move(rho), dt);
      if ((seg + 1) % config.record_every == 0) record((seg + 1) * dt);
    }
  } else {
    auto deriv = [&](double t, const Matrix& m) -> Matrix {
      lind.h = ham.assemble(ramp_value(schedule, std::clamp(t, 0.0, t_total)));
      return lind(m);
    };
    double h_step = dt * 0.1;
    double t = 0.0;
    double err_prev = 1e-4;
    for (int seg = 0; seg < config.n_steps; ++seg) {
      const double t_stop = (seg + 1) * dt;
      int guard = 0;
      while (t < t_stop - 1e-12 && ++guard < 200000) {
        const double dt_try = std::min(h_step, t_stop - t);
        auto [accepted, dt_next] = detail::rk45_step(deriv, t, dt_try, rho,
                                                     config.rel_tol, config.abs_tol,
                                                     err_prev);
        if (accepted) t += dt_try;
        h_step = dt_next;
      }
      t = t_stop;
      if ((seg + 1) % config.record_every == 0) record(t_stop);
    }
  }

  rho = 0.5 * (rho + Matrix(rho.adjoint()));
  const double tr = rho.trace().real();
  if (tr > 0) rho /= tr;
  // integrator roundoff can leave eigenvalues a hair below the density
  // invariant; clip those, but let anything beyond the monitor band throw
  const double min_eig = QuantumState::min_eigenvalue_estimate(rho);
  if (min_eig < -1e-8 && min_eig > -1e-5) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
    rho = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
    rho /= rho.trace().real();
    rho = 0.5 * (rho + Matrix(rho.adjoint()));
  }
  return {std::move(out), QuantumState::density(space, std::move(rho))};
}

// ---------------------------------------------------------------------------
// Protocol runners

struct ProtocolResult {
  QuantumState final_state;
  double fidelity_to_target = 0.0;
  double leakage = 0.0;  // 1 - |<dark(T)|psi>|^2
  TimeSeries series;
  std::optional<ErrorBudget> budget;
  BuildDiagnostics diagnostics;
};

namespace detail {

inline QOperator excitation_observable(const ModelLevel& lv, const HilbertSpec& space) {
  switch (lv.level) {
    case Level::Spin: {
      auto spin = collective_spin_ops(lv.n_atoms_model);
      const int sd = lv.n_atoms_model + 1;
      const Matrix excit =
          Matrix(spin.z.mat + 0.5 * lv.n_atoms_model * Matrix::Identity(sd, sd));
      return embed_product(space, {{1, &excit}});
    }
    case Level::Full: {
      Matrix e_proj = Matrix::Zero(4, 4);
      e_proj(1, 1) = 1.0;
      Matrix acc = Matrix::Zero(space.dim(), space.dim());
      for (int j = 1; j < space.site_count(); ++j)
        acc += embed_product(space, {{j, &e_proj}}).mat;
      return {space, std::move(acc)};
    }
    default: {
      auto n_b = number_operator(space.site_dim(1));
      return embed_product(space, {{1, &n_b.mat}});
    }
  }
}

inline Vector dark_state_vector(const PhysicalParams& p, const ModelLevel& lv,
                                double omega2) {
  const DerivedCouplings d = derive_couplings(p, omega2);
  if (!d.r) throw InvalidInputError("dark state undefined above threshold");
  switch (lv.level) {
    case Level::Transformed: {
      Vector v = Vector::Zero(lv.dim_a * lv.dim_b);
      v(0) = 1.0;
      return v;
    }
    case Level::TwoMode: {
      if (lv.branch == Branch::Atomic) {
        Vector amps = squeezed_vacuum_amplitudes(*d.r, d.theta_atomic, lv.dim_b);
        return kron(Matrix(fock_state(lv.dim_a, 0)), Matrix(amps));
      }
      Vector amps = squeezed_vacuum_amplitudes(*d.r, d.theta_field, lv.dim_a);
      return kron(Matrix(amps), Matrix(fock_state(lv.dim_b, 0)));
    }
    case Level::Spin: {
      if (lv.branch == Branch::Atomic) {
        Vector amps =
            squeezed_vacuum_amplitudes(*d.r, d.theta_atomic, lv.n_atoms_model + 1);
        return kron(Matrix(fock_state(lv.dim_a, 0)), Matrix(amps));
      }
      Vector amps = squeezed_vacuum_amplitudes(*d.r, d.theta_field, lv.dim_a);
      return kron(Matrix(amps), Matrix(fock_state(lv.n_atoms_model + 1, 0)));
    }
    case Level::Full: {
      Matrix iso = dicke_symmetric_isometry(lv.n_atoms_model);
      if (lv.branch == Branch::Atomic) {
        Vector amps =
            squeezed_vacuum_amplitudes(*d.r, d.theta_atomic, lv.n_atoms_model + 1);
        return kron(Matrix(fock_state(lv.dim_a, 0)), Matrix(iso * amps));
      }
      Vector amps = squeezed_vacuum_amplitudes(*d.r, d.theta_field, lv.dim_a);
      return kron(Matrix(amps), Matrix(iso.col(0)));
    }
  }
  throw InvalidInputError("unknown level");
}

}  // namespace detail

/// Adiabatic squeezing protocol: start from the global vacuum / all-ground
/// state, ramp Omega2 per the schedule, compare against the branch target.
inline ProtocolResult run_protocol(const PhysicalParams& p, const Schedule& schedule,
                                   const EvolveConfig& config, const ModelLevel& lv,
                                   bool open_system = false,
                                   bool keep_residual_stark = false) {
  const DerivedCouplings d_end = derive_couplings(p, schedule.omega2_max);
  if (d_end.below_threshold_violated)
    throw InvalidInputError(
        "above-threshold schedule: lambda2 >= lambda1 at ramp end");

  // the model N and the coupling N must agree at the multilevel fidelity levels
  PhysicalParams params = p;
  if (lv.level == Level::Full || lv.level == Level::Spin)
    params.n_atoms = lv.n_atoms_model;

  TermList terms = hamiltonian_terms(params, lv, keep_residual_stark);
  const HilbertSpec& space = terms.space;

  BuildDiagnostics diag;
  const DerivedCouplings d0 = derive_couplings(params, 0.0);
  diag.degeneracy_warning = std::abs(d0.delta_a) < 1e-9 &&
                            std::abs(d0.delta_b) < 1e-9 &&
                            schedule.omega2_max > 0.0;

  RecordSpec rec;
  {
    auto n_a = number_operator(space.site_dim(0));
    rec.n_a = detail::sparsify(embed_product(space, {{0, &n_a.mat}}).mat);
    rec.n_b = detail::sparsify(detail::excitation_observable(lv, space).mat);
  }
  Vector target = detail::dark_state_vector(params, lv, schedule.omega2_max);
  rec.target = target;
  const double branch_delta =
      (lv.branch == Branch::Atomic) ? d0.delta_a : d0.delta_b;
  rec.gap_of_t = [params, schedule, branch_delta](double t) {
    const DerivedCouplings d = derive_couplings(params, ramp_value(schedule, t));
    return d.mu ? gap_analytic(*d.mu, branch_delta)
                : std::numeric_limits<double>::quiet_NaN();
  };
  // monitor boson and Dicke factors; the top levels of a four-level atom
  // site are the excited states, not a truncation boundary
  {
    int site = 0;
    for (const auto& f : space.factors())
      for (int s = 0; s < f.site_count(); ++s, ++site)
        if (f.kind != Factor::Kind::Multilevel) rec.monitored_sites.push_back(site);
  }

  ProtocolResult result{vacuum_state(space), 0.0, 0.0, {}, std::nullopt, diag};
  if (!open_system) {
    auto ev = evolve_unitary(terms, vacuum_state(space), schedule, config, rec);
    result.final_state = std::move(ev.final_state);
    result.series = std::move(ev.series);
  } else {
    CollapseSet collapse;
    {
      auto a_op = annihilation(space.site_dim(0));
      collapse.channels.push_back(
          {embed_product(space, {{0, &a_op.mat}}), params.kappa});
      const double ratio = params.omega2_rabi_max / params.delta2;
      const double gamma_e = 0.5 * params.gamma * ratio * ratio;
      Matrix lower;
      double scale = 1.0;
      if (lv.level == Level::Spin) {
        lower = collective_spin_ops(lv.n_atoms_model).minus.mat;
        scale = 1.0 / std::sqrt(static_cast<double>(lv.n_atoms_model));
        Matrix m = scale * lower;
        collapse.channels.push_back({embed_product(space, {{1, &m}}), gamma_e});
      } else if (lv.level == Level::Full) {
        Matrix ge = Matrix::Zero(4, 4);
        ge(0, 1) = 1.0;
        Matrix acc = Matrix::Zero(space.dim(), space.dim());
        for (int j = 1; j < space.site_count(); ++j)
          acc += embed_product(space, {{j, &ge}}).mat;
        acc /= std::sqrt(static_cast<double>(lv.n_atoms_model));
        collapse.channels.push_back({QOperator{space, std::move(acc)}, gamma_e});
      } else {
        auto b_op = annihilation(space.site_dim(1));
        collapse.channels.push_back(
            {embed_product(space, {{1, &b_op.mat}}), gamma_e});
      }
    }
    QuantumState rho0 =
        QuantumState::density(space, vacuum_state(space).as_density());
    auto ev = evolve_lindblad(terms, collapse, rho0, schedule, config, rec);
    result.final_state = std::move(ev.final_state);
    result.series = std::move(ev.series);
  }

  {
    const Vector dark_end = detail::dark_state_vector(params, lv, schedule.omega2_max);
    if (result.final_state.is_ket()) {
      result.fidelity_to_target =
          std::norm(target.dot(result.final_state.ket_vector()));
      result.leakage = 1.0 - std::norm(dark_end.dot(result.final_state.ket_vector()));
    } else {
      const Matrix& rho = result.final_state.density_matrix();
      result.fidelity_to_target = std::real(target.dot(rho * target));
      result.leakage = 1.0 - std::real(dark_end.dot(rho * dark_end));
    }
  }
  try {
    result.budget = error_budget(params, schedule.t_total_us);
  } catch (const InvalidInputError&) {
    result.budget = std::nullopt;
  }
  return result;
}

struct StateTransferResult {
  double fidelity = 0.0;
  double n_a_final = 0.0;
  double t_star_us = 0.0;
  QuantumState cavity_state;
  TimeSeries series;
};

/// Resonant beam-splitter transfer of the collective atomic mode onto the
/// cavity mode: evolve under -sqrt(N) lambda1 (e^{-i phi1} a b^dag + H.c.)
/// for t* = pi / (2 sqrt(N) lambda1) and compare the reduced cavity state
/// against the phase-mapped input (|n>_b -> e^{i n (phi1 + pi/2)} |n>_a).
inline StateTransferResult run_state_transfer(const PhysicalParams& p,
                                              const EvolveConfig& config,
                                              const QuantumState& input_state_b,
                                              int dim_a) {
  validate(p);
  if (!input_state_b.is_ket())
    throw InvalidInputError("run_state_transfer expects a ket input");
  const DerivedCouplings d = derive_couplings(p, 0.0);
  const double coupling = std::sqrt(static_cast<double>(p.n_atoms)) * d.lambda1;
  if (!(coupling > 0)) throw InvalidInputError("state transfer needs lambda1 > 0");
  const int dim_b = input_state_b.space().dim();

  HilbertSpec space({Factor::boson(dim_a), Factor::boson(dim_b)});
  const Matrix a = annihilation(dim_a).mat;
  const Matrix b_dag = Matrix(annihilation(dim_b).mat.adjoint());
  Matrix bs = -coupling * std::exp(-kI * p.phi1) *
              embed_product(space, {{0, &a}, {1, &b_dag}}).mat;
  bs += Matrix(bs.adjoint());
  TermList terms{space, {}};
  terms.terms.push_back({std::move(bs), [](double) { return 1.0; }});

  const double t_star = 0.5 * std::numbers::pi / (coupling * kAngularPerKhz);
  Vector psi0 = kron(Matrix(fock_state(dim_a, 0)), Matrix(input_state_b.ket_vector()));

  RecordSpec rec;
  auto n_a_op = number_operator(dim_a);
  rec.n_a = detail::sparsify(embed_product(space, {{0, &n_a_op.mat}}).mat);
  auto n_b_op = number_operator(dim_b);
  rec.n_b = detail::sparsify(embed_product(space, {{1, &n_b_op.mat}}).mat);
  rec.monitored_sites = {0, 1};

  Schedule flat = Schedule::linear(t_star, 0.0);
  auto ev = evolve_unitary(terms, QuantumState::ket(space, psi0), flat, config, rec);

  StateTransferResult out{0.0, 0.0, t_star,
                          partial_trace(ev.final_state, 0), std::move(ev.series)};
  const double chi = p.phi1 + 0.5 * std::numbers::pi;
  Vector expected(dim_a);
  expected.setZero();
  const Vector& in = input_state_b.ket_vector();
  for (int n = 0; n < std::min(dim_a, dim_b); ++n)
    expected(n) = in(n) * std::exp(kI * (chi * n));
  QuantumState expected_state =
      QuantumState::ket(HilbertSpec({Factor::boson(dim_a)}), expected);
  out.fidelity = fidelity(out.cavity_state, expected_state);
  auto n_single = number_operator(dim_a);
  out.n_a_final = expectation(out.cavity_state, n_single).real();
  return out;
}

}  // namespace darksqueeze

#endif  // DARKSQUEEZE_DYNAMICS_HPP
