#ifndef DARKSQUEEZE_CORE_HPP
#define DARKSQUEEZE_CORE_HPP

// Truncated-Hilbert-space operator algebra: bosonic ladder operators,
// symmetric collective spin (Dicke ladder), tensor embedding, matrix
// exponentials and expectation values.
//
// Conventions, fixed for the whole library:
//  - Frequencies are plain numbers in units of 2pi*kHz, times in us.  The
//    angular conversion 2pi*1e-3 rad/us per 2pi*kHz enters only where a
//    frequency multiplies a time (propagation, decay, error budgets).
//  - Kronecker ordering: the leftmost factor of a HilbertSpec is the
//    slowest-varying index, i.e. kron(A, B) maps (i, k) -> i*dim(B) + k.
//    Every module relies on this ordering.
//  - Dense complex storage throughout; the largest space used by the test
//    suites is ~3600-dimensional.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

namespace darksqueeze {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;

inline constexpr Complex kI{0.0, 1.0};

// rad/us per 2pi*kHz; the single place unit bookkeeping happens.
inline constexpr double kAngularPerKhz = 2.0e-3 * std::numbers::pi;

inline constexpr int kDefaultDimCap = 50'000;

// Bad arguments or configuration; the CLI maps this to exit code 1.
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical validity condition failed (truncation breach, positivity
// loss, ...); the CLI maps this to exit code 2.
class NumericValidityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hilbert-space description

struct Factor {
  enum class Kind { Boson, Dicke, Multilevel };

  Kind kind;
  int dim = 0;    // Boson: Fock levels; Dicke: N+1; Multilevel: levels
  int count = 1;  // Multilevel only: number of identical sites

  static Factor boson(int fock_dim) {
    if (fock_dim < 1) throw InvalidInputError("Boson factor needs dim >= 1");
    return {Kind::Boson, fock_dim, 1};
  }
  static Factor dicke(int n_atoms) {
    if (n_atoms < 1) throw InvalidInputError("Dicke factor needs N >= 1");
    return {Kind::Dicke, n_atoms + 1, 1};
  }
  static Factor multilevel(int levels, int count) {
    if (levels < 2 || count < 1)
      throw InvalidInputError("Multilevel factor needs levels >= 2, count >= 1");
    return {Kind::Multilevel, levels, count};
  }

  int site_count() const { return kind == Kind::Multilevel ? count : 1; }
  bool operator==(const Factor&) const = default;
};

// Ordered tensor-product space.  A Multilevel factor with count > 1 expands
// into `count` addressable sites; embedding indices address the expanded
// site list (site 0 = leftmost = slowest-varying).
class HilbertSpec {
 public:
  explicit HilbertSpec(std::vector<Factor> factors, int dim_cap = kDefaultDimCap)
      : factors_(std::move(factors)) {
    if (factors_.empty()) throw InvalidInputError("HilbertSpec needs >= 1 factor");
    long long total = 1;
    for (const auto& f : factors_) {
      for (int s = 0; s < f.site_count(); ++s) {
        site_dims_.push_back(f.dim);
        total *= f.dim;
        if (total > dim_cap)
          throw InvalidInputError("HilbertSpec dimension " + std::to_string(total) +
                                  "+ exceeds cap " + std::to_string(dim_cap));
      }
    }
    dim_ = static_cast<int>(total);
  }

  int dim() const { return dim_; }
  int site_count() const { return static_cast<int>(site_dims_.size()); }
  int site_dim(int site) const {
    check_site(site);
    return site_dims_[site];
  }
  const std::vector<Factor>& factors() const { return factors_; }

  // Elements to step over to advance this site's level by one.
  long long stride(int site) const {
    check_site(site);
    long long s = 1;
    for (int k = site + 1; k < site_count(); ++k) s *= site_dims_[k];
    return s;
  }

  bool operator==(const HilbertSpec& other) const {
    return factors_ == other.factors_;
  }

 private:
  void check_site(int site) const {
    if (site < 0 || site >= site_count())
      throw InvalidInputError("site index " + std::to_string(site) + " out of range");
  }

  std::vector<Factor> factors_;
  std::vector<int> site_dims_;
  int dim_ = 0;
};

// ---------------------------------------------------------------------------
// Operators and states

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

struct QOperator {
  HilbertSpec space;
  Matrix mat;

  QOperator(HilbertSpec s, Matrix m) : space(std::move(s)), mat(std::move(m)) {
    if (mat.rows() != mat.cols() || mat.rows() != space.dim())
      throw InvalidInputError("operator matrix does not match its space dimension");
  }

  QOperator adjoint() const { return {space, mat.adjoint()}; }

  double hermiticity_defect() const { return max_abs(Matrix(mat - mat.adjoint())); }
  bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() < tol; }
  bool is_anti_hermitian(double tol = 1e-12) const {
    return max_abs(Matrix(mat + mat.adjoint())) < tol;
  }
};

inline void require_same_space(const HilbertSpec& a, const HilbertSpec& b,
                               const char* what) {
  if (!(a == b)) throw InvalidInputError(std::string("space mismatch in ") + what);
}

inline QOperator operator*(const QOperator& a, const QOperator& b) {
  require_same_space(a.space, b.space, "operator product");
  return {a.space, a.mat * b.mat};
}
inline QOperator operator+(const QOperator& a, const QOperator& b) {
  require_same_space(a.space, b.space, "operator sum");
  return {a.space, a.mat + b.mat};
}
inline QOperator operator-(const QOperator& a, const QOperator& b) {
  require_same_space(a.space, b.space, "operator difference");
  return {a.space, a.mat - b.mat};
}
inline QOperator operator*(Complex c, const QOperator& a) { return {a.space, c * a.mat}; }
inline QOperator operator*(double c, const QOperator& a) {
  return {a.space, Complex(c, 0.0) * a.mat};
}

inline QOperator commutator(const QOperator& a, const QOperator& b) {
  require_same_space(a.space, b.space, "commutator");
  return {a.space, a.mat * b.mat - b.mat * a.mat};
}

// Pure kets are kept normalized; densities are validated on construction.
class QuantumState {
 public:
  static QuantumState ket(HilbertSpec space, Vector psi) {
    if (psi.size() != space.dim())
      throw InvalidInputError("ket dimension does not match space");
    const double n = psi.norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw InvalidInputError("ket has zero or non-finite norm");
    psi /= n;
    return QuantumState(std::move(space), std::move(psi));
  }

  static QuantumState density(HilbertSpec space, Matrix rho) {
    if (rho.rows() != space.dim() || rho.cols() != space.dim())
      throw InvalidInputError("density dimension does not match space");
    if (max_abs(Matrix(rho - rho.adjoint())) > 1e-10)
      throw InvalidInputError("density matrix is not Hermitian within 1e-10");
    if (std::abs(rho.trace().real() - 1.0) > 1e-9 || std::abs(rho.trace().imag()) > 1e-9)
      throw InvalidInputError("density matrix trace differs from 1 beyond 1e-9");
    if (min_eigenvalue_estimate(rho) < -1e-8)
      throw InvalidInputError("density matrix has eigenvalue below -1e-8");
    return QuantumState(std::move(space), std::move(rho));
  }

  bool is_ket() const { return std::holds_alternative<Vector>(data_); }
  const HilbertSpec& space() const { return space_; }
  const Vector& ket_vector() const { return std::get<Vector>(data_); }
  const Matrix& density_matrix() const { return std::get<Matrix>(data_); }

  Matrix as_density() const {
    if (is_ket()) {
      const Vector& v = ket_vector();
      return v * v.adjoint();
    }
    return density_matrix();
  }

  // Smallest eigenvalue of a Hermitian matrix; exact for small dimensions,
  // Lanczos bound otherwise (enough for the positivity monitors).
  static double min_eigenvalue_estimate(const Matrix& h);

 private:
  QuantumState(HilbertSpec space, Vector v) : space_(std::move(space)), data_(std::move(v)) {}
  QuantumState(HilbertSpec space, Matrix m) : space_(std::move(space)), data_(std::move(m)) {}

  HilbertSpec space_;
  std::variant<Vector, Matrix> data_;
};

// ---------------------------------------------------------------------------
// Elementary operators

/// Bosonic annihilation operator on a single truncated Fock factor:
/// <n-1|a|n> = sqrt(n).
inline QOperator annihilation(int dim) {
  if (dim < 2) throw InvalidInputError("annihilation needs dim >= 2");
  Matrix a = Matrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return {HilbertSpec({Factor::boson(dim)}), std::move(a)};
}

inline QOperator creation(int dim) { return annihilation(dim).adjoint(); }

inline QOperator number_operator(int dim) {
  Matrix n = Matrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
  return {HilbertSpec({Factor::boson(dim)}), std::move(n)};
}

inline QOperator identity(const HilbertSpec& space) {
  return {space, Matrix::Identity(space.dim(), space.dim())};
}

struct SpinOps {
  QOperator plus;
  QOperator minus;
  QOperator z;
};

/// Collective spin operators on the symmetric (Dicke) subspace of N
/// two-level atoms, in the excitation basis |m>, m = 0..N:
///   Sz|m> = (m - N/2)|m>,  S+|m> = sqrt((m+1)(N-m))|m+1>,  S- = (S+)^dag.
inline SpinOps collective_spin_ops(int n_atoms) {
  if (n_atoms < 1) throw InvalidInputError("collective_spin_ops needs N >= 1");
  const int d = n_atoms + 1;
  Matrix sp = Matrix::Zero(d, d), sz = Matrix::Zero(d, d);
  for (int m = 0; m < d; ++m) {
    sz(m, m) = m - 0.5 * n_atoms;
    if (m + 1 < d)
      sp(m + 1, m) = std::sqrt(static_cast<double>(m + 1) *
                               static_cast<double>(n_atoms - m));
  }
  HilbertSpec space({Factor::dicke(n_atoms)});
  QOperator plus{space, sp};
  return {plus, plus.adjoint(), QOperator{space, std::move(sz)}};
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Product of single-site operators embedded in `space`, identity on every
/// site not listed.  Each site may appear at most once.
inline QOperator embed_product(const HilbertSpec& space,
                               const std::vector<std::pair<int, const Matrix*>>& ops) {
  std::vector<const Matrix*> per_site(space.site_count(), nullptr);
  for (const auto& [site, mat] : ops) {
    if (site < 0 || site >= space.site_count())
      throw InvalidInputError("embed: site index out of range");
    if (per_site[site]) throw InvalidInputError("embed_product: duplicate site");
    if (mat->rows() != space.site_dim(site) || mat->cols() != space.site_dim(site))
      throw InvalidInputError("embed: operator does not match site dimension");
    per_site[site] = mat;
  }
  Matrix acc = Matrix::Identity(1, 1);
  for (int s = 0; s < space.site_count(); ++s) {
    if (per_site[s]) {
      acc = kron(acc, *per_site[s]);
    } else {
      // kron with identity: block-diagonal replication, done directly
      const int d = space.site_dim(s);
      Matrix next = Matrix::Zero(acc.rows() * d, acc.cols() * d);
      for (Eigen::Index i = 0; i < acc.rows(); ++i)
        for (Eigen::Index j = 0; j < acc.cols(); ++j) {
          if (acc(i, j) == Complex(0.0, 0.0)) continue;
          for (int k = 0; k < d; ++k) next(i * d + k, j * d + k) = acc(i, j);
        }
      acc = std::move(next);
    }
  }
  return {space, std::move(acc)};
}

/// Embed a single-factor operator at `site` of `space` (identity elsewhere).
inline QOperator embed(const QOperator& op, const HilbertSpec& space, int site) {
  return embed_product(space, {{site, &op.mat}});
}

// ---------------------------------------------------------------------------
// Matrix exponential

/// e^M.  Hermitian and anti-Hermitian inputs go through a self-adjoint
/// eigendecomposition (unitary to machine precision for anti-Hermitian M);
/// everything else uses Pade scaling-and-squaring.
inline QOperator matrix_exponential(const QOperator& op) {
  if (!op.mat.allFinite())
    throw InvalidInputError("matrix_exponential: non-finite entries");
  const double scale = std::max(1.0, max_abs(op.mat));
  if (op.mat.adjoint().isApprox(op.mat, 1e-13)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(op.mat);
    Matrix r = es.eigenvectors() *
               es.eigenvalues().array().exp().matrix().asDiagonal() *
               es.eigenvectors().adjoint();
    return {op.space, std::move(r)};
  }
  if (max_abs(Matrix(op.mat + op.mat.adjoint())) < 1e-13 * scale) {
    // M = iK with K Hermitian; exp(M) = V exp(i lambda) V^dag
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(-kI * op.mat));
    Vector phases = (kI * es.eigenvalues().cast<Complex>()).array().exp();
    Matrix r = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    return {op.space, std::move(r)};
  }
  return {op.space, op.mat.exp()};
}

// ---------------------------------------------------------------------------
// Expectations and marginals

inline Complex expectation(const QuantumState& state, const QOperator& op) {
  require_same_space(state.space(), op.space, "expectation");
  if (state.is_ket()) {
    const Vector& v = state.ket_vector();
    return v.dot(op.mat * v);
  }
  // tr(rho O) without forming the product
  return (op.mat.cwiseProduct(state.density_matrix().transpose())).sum();
}

inline double variance(const QuantumState& state, const QOperator& op) {
  require_same_space(state.space(), op.space, "variance");
  if (!op.is_hermitian(1e-10 * std::max(1.0, max_abs(op.mat))))
    throw InvalidInputError("variance requires a Hermitian operator");
  double mean_sq;
  if (state.is_ket()) {
    Vector w = op.mat * state.ket_vector();
    mean_sq = w.squaredNorm();
  } else {
    mean_sq = ((op.mat * state.density_matrix() * op.mat).trace()).real();
  }
  const double mean = expectation(state, op).real();
  return mean_sq - mean * mean;
}

inline Vector fock_state(int dim, int n) {
  if (n < 0 || n >= dim) throw InvalidInputError("fock_state level out of range");
  Vector v = Vector::Zero(dim);
  v(n) = 1.0;
  return v;
}

/// All factors in their lowest level (vacuum / all atoms ground).
inline QuantumState vacuum_state(const HilbertSpec& space) {
  Vector v = Vector::Zero(space.dim());
  v(0) = 1.0;
  return QuantumState::ket(space, std::move(v));
}

/// Probability of each level of one site, traced over the rest.
inline Eigen::VectorXd site_marginal(const QuantumState& state, int site) {
  const HilbertSpec& space = state.space();
  const int d = space.site_dim(site);
  const long long stride = space.stride(site);
  Eigen::VectorXd marginal = Eigen::VectorXd::Zero(d);
  if (state.is_ket()) {
    const Vector& v = state.ket_vector();
    for (int idx = 0; idx < space.dim(); ++idx)
      marginal[(idx / stride) % d] += std::norm(v[idx]);
  } else {
    const Matrix& rho = state.density_matrix();
    for (int idx = 0; idx < space.dim(); ++idx)
      marginal[(idx / stride) % d] += rho(idx, idx).real();
  }
  return marginal;
}

/// Population of the top `n_top` levels of a site; the truncation monitor.
inline double top_levels_population(const QuantumState& state, int site, int n_top = 2) {
  const Eigen::VectorXd m = site_marginal(state, site);
  double p = 0.0;
  for (int k = std::max<int>(0, m.size() - n_top); k < m.size(); ++k) p += m[k];
  return p;
}

/// Reduced density matrix of one site (all other sites traced out).
inline QuantumState partial_trace(const QuantumState& state, int keep_site) {
  const HilbertSpec& space = state.space();
  const int d = space.site_dim(keep_site);
  const long long stride = space.stride(keep_site);
  Matrix rho_k = Matrix::Zero(d, d);
  auto level_of = [&](int idx) { return static_cast<int>((idx / stride) % d); };
  if (state.is_ket()) {
    const Vector& v = state.ket_vector();
    for (int i = 0; i < space.dim(); ++i) {
      const int li = level_of(i);
      for (int lj = 0; lj < d; ++lj) {
        const int j = static_cast<int>(i + (lj - li) * stride);
        rho_k(li, lj) += v[i] * std::conj(v[j]);
      }
    }
  } else {
    const Matrix& rho = state.density_matrix();
    for (int i = 0; i < space.dim(); ++i) {
      const int li = level_of(i);
      for (int lj = 0; lj < d; ++lj) {
        const int j = static_cast<int>(i + (lj - li) * stride);
        rho_k(li, lj) += rho(i, j);
      }
    }
  }
  // the kept site keeps its factor type
  Factor kept = Factor::boson(d);
  int site = 0;
  for (const auto& f : space.factors()) {
    for (int s = 0; s < f.site_count(); ++s, ++site)
      if (site == keep_site) {
        kept = (f.kind == Factor::Kind::Dicke) ? Factor::dicke(d - 1)
               : (f.kind == Factor::Kind::Multilevel)
                   ? Factor::multilevel(f.dim, 1)
                   : Factor::boson(d);
      }
  }
  // symmetrize and renormalize away roundoff before validation
  const double tr = rho_k.trace().real();
  if (tr > 0.0) rho_k /= tr;
  rho_k = 0.5 * (rho_k + Matrix(rho_k.adjoint()));
  return QuantumState::density(HilbertSpec({kept}), std::move(rho_k));
}

inline double QuantumState::min_eigenvalue_estimate(const Matrix& h) {
  const Eigen::Index n = h.rows();
  if (n <= 400) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  // Lanczos on -h for the most negative eigenvalue
  Vector v = Vector::Ones(n).normalized();
  std::vector<Vector> basis;
  std::vector<double> alpha, beta;
  const int m_max = 60;
  for (int it = 0; it < m_max; ++it) {
    basis.push_back(v);
    Vector w = h * v;
    const double a = std::real(v.dot(w));
    alpha.push_back(a);
    w -= a * v;
    if (it > 0) w -= beta.back() * basis[it - 1];
    for (const auto& u : basis) w -= u.dot(w) * u;  // re-orthogonalize
    const double b = w.norm();
    if (b < 1e-13) break;
    beta.push_back(b);
    v = w / b;
  }
  const int m = static_cast<int>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace darksqueeze

#endif  // DARKSQUEEZE_CORE_HPP
