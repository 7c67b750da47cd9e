#pragma once

// Kernel vectors m(tau) closed under differentiation, dm/dtau = M m, and the
// derived objects used by the delay functional: lifted kernels m(tau) (x) I_n,
// the Gram pair (F^{-1}, F) over [-r, 0], coefficient fitting, and rescaling.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddsynth/matrixkit.hpp"

namespace ddsynth {

class KernelBasis {
 public:
  KernelBasis() = default;
  KernelBasis(Mat generator, Vec m0, std::vector<std::string> labels = {})
      : generator_(std::move(generator)), m0_(std::move(m0)), labels_(std::move(labels)) {}

  Index rho() const { return m0_.size(); }
  const Mat& generator() const { return generator_; }
  const Vec& m0() const { return m0_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// m(tau) = expm(M tau) m0; exact m0 at tau = 0.
  Vec eval(double tau) const {
    if (tau == 0.0) return m0_;
    return expm(generator_ * tau) * m0_;
  }

 private:
  Mat generator_;
  Vec m0_;
  std::vector<std::string> labels_;
};

inline KernelBasis make_basis(const Mat& generator, const Vec& m0, std::vector<std::string> labels = {}) {
  if (generator.rows() != generator.cols()) {
    throw DimensionError("make_basis: generator must be square, got " + shape_str(generator));
  }
  if (generator.rows() != m0.size() || m0.size() < 1) {
    throw DimensionError("make_basis: m0 has length " + std::to_string(m0.size()) +
                         " but generator is " + shape_str(generator));
  }
  if (!labels.empty() && static_cast<Index>(labels.size()) != m0.size()) {
    throw DimensionError("make_basis: label count does not match rho");
  }
  if (!generator.allFinite() || !m0.allFinite()) throw InputError("make_basis: non-finite entries");
  return KernelBasis(generator, m0, std::move(labels));
}

inline Vec eval(const KernelBasis& basis, double tau) { return basis.eval(tau); }

/// Monomial coefficients (in u = (tau + r)/r) of the shifted Legendre
/// polynomials l_0..l_d. Row k holds l_k; entries are integers.
inline Mat legendre_monomial_coefficients(int d) {
  auto binom = [](int a, int b) {
    double out = 1.0;
    for (int i = 1; i <= b; ++i) out = out * (a - b + i) / i;
    return std::round(out);
  };
  Mat c = Mat::Zero(d + 1, d + 1);
  for (int deg = 0; deg <= d; ++deg) {
    const double outer = (deg % 2 == 0) ? 1.0 : -1.0;
    for (int k = 0; k <= deg; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      c(deg, k) = outer * sign * binom(deg, k) * binom(deg + k, k);
    }
  }
  return c;
}

/// Legendre kernel col(l_0 .. l_d) on [-r, 0]. The generator comes from exact
/// differentiation of the monomial coefficients, mapped back into the l basis.
inline KernelBasis legendre_basis(int d, double r) {
  if (d < 0) throw InputError("legendre_basis: degree must be >= 0");
  if (!(r > 0.0)) throw InputError("legendre_basis: delay must be positive");
  const Mat c = legendre_monomial_coefficients(d);
  Mat diff = Mat::Zero(d + 1, d + 1);  // d/du on the monomial vector (u^0..u^d)
  for (int k = 1; k <= d; ++k) diff(k - 1, k) = k;
  // m = C u_vec, dm/dtau = (1/r) C diff^T u_vec  (row form: (u^k)' = k u^{k-1}).
  // With u_vec = C^{-1} m, the generator is (1/r) C diff^T C^{-1}.
  const Mat cinv = c.triangularView<Eigen::Lower>().solve(Mat::Identity(d + 1, d + 1));
  Mat gen = (c * diff.transpose() * cinv) / r;
  // Entries are rationals with small denominators; scrub rounding noise.
  for (Index i = 0; i < gen.rows(); ++i)
    for (Index j = 0; j < gen.cols(); ++j)
      if (std::abs(gen(i, j)) < 1e-12 * (1.0 + gen.cwiseAbs().maxCoeff())) gen(i, j) = 0.0;
  std::vector<std::string> labels;
  for (int k = 0; k <= d; ++k) labels.push_back("legendre_" + std::to_string(k));
  return KernelBasis(gen, Vec::Ones(d + 1), std::move(labels));
}

struct GramPair {
  double r = 0.0;
  SymMat f_inv;  // integral of m m^T over [-r, 0]
  SymMat f;      // its inverse
};

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
inline std::pair<Vec, Vec> gauss_legendre(int k) {
  Mat J = Mat::Zero(k, k);
  for (int i = 1; i < k; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  const Vec x = es.eigenvalues();
  const Vec w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  return {x, w};
}

/// Gram matrix over [-r, 0]. Closed form via the block exponential
///   E = expm(r [[M, m0 m0^T], [0, -M^T]]),  f_inv = E11^{-1} E12,
/// unless E11 is badly conditioned (high-degree polynomial kernels), where the
/// solve loses roughly eps * cond(E11) relative accuracy. Those cases use
/// composite 16-point Gauss-Legendre on m m^T, sized to the generator spectrum.
inline GramPair gram(const KernelBasis& basis, double r) {
  if (!(r > 0.0)) throw InputError("gram: delay must be positive");
  const Index rho = basis.rho();
  const Mat& gen = basis.generator();
  Mat block = Mat::Zero(2 * rho, 2 * rho);
  block.topLeftCorner(rho, rho) = gen;
  block.topRightCorner(rho, rho) = basis.m0() * basis.m0().transpose();
  block.bottomRightCorner(rho, rho) = -gen.transpose();
  const Mat e = expm(r * block);
  const Mat e11 = e.topLeftCorner(rho, rho);
  const double cond = inf_norm(e11) * inf_norm(expm(Mat(-r * gen)));
  Mat f_inv;
  if (cond < 1e4) {
    f_inv = e11.partialPivLu().solve(Mat(e.topRightCorner(rho, rho)));
  } else {
    const double omega = eig(gen).cwiseAbs().maxCoeff();
    const int panels = std::max(2, static_cast<int>(std::ceil(omega * r)));
    const auto [gx, gw] = gauss_legendre(16);
    f_inv = Mat::Zero(rho, rho);
    for (int p = 0; p < panels; ++p) {
      const double a = -r + r * p / panels, b = -r + r * (p + 1) / panels;
      for (Index g = 0; g < gx.size(); ++g) {
        const Vec m = basis.eval(0.5 * (a + b) + 0.5 * (b - a) * gx(g));
        f_inv.noalias() += (0.5 * (b - a) * gw(g)) * m * m.transpose();
      }
    }
  }
  f_inv = Mat(0.5 * (f_inv + f_inv.transpose()));
  const Vec ev = eig_sym(f_inv);
  if (!(ev.minCoeff() > 1e-12 * f_inv.trace())) {
    throw DependentBasisError("gram: kernel components are linearly dependent on [-r,0] (min eigenvalue " +
                              std::to_string(ev.minCoeff()) + ", trace " + std::to_string(f_inv.trace()) + ")");
  }
  Eigen::LLT<Mat> llt(f_inv);
  Mat f = llt.solve(Mat::Identity(rho, rho));
  f = Mat(0.5 * (f + f.transpose()));
  return GramPair{r, SymMat(f_inv), SymMat(f)};
}

/// m(tau) (x) I_n together with its generator M (x) I_n.
class LiftedKernel {
 public:
  LiftedKernel(KernelBasis basis, Index n)
      : basis_(std::move(basis)), n_(n), generator_lifted_(kron(basis_.generator(), Mat::Identity(n, n))) {}

  const KernelBasis& basis() const { return basis_; }
  Index n() const { return n_; }
  const Mat& generator_lifted() const { return generator_lifted_; }

  /// M(tau) = m(tau) (x) I_n, a (rho n) x n matrix.
  Mat eval_lifted(double tau) const { return kron(basis_.eval(tau), Mat::Identity(n_, n_)); }

 private:
  KernelBasis basis_;
  Index n_;
  Mat generator_lifted_;
};

inline LiftedKernel lift(const KernelBasis& basis, Index n) {
  if (n < 1) throw InputError("lift: state dimension must be >= 1");
  return LiftedKernel(basis, n);
}

struct KernelSample {
  double tau;
  Mat value;  // rows x n kernel matrix at tau
};

struct CoefficientFit {
  Mat coefficients;  // rows x (rho n)
  double residual;   // max abs residual over all samples and entries
};

/// Least-squares fit of kernel(tau_k) = C (m(tau_k) (x) I_n) for C.
inline CoefficientFit fit_coefficients(const std::vector<KernelSample>& samples, const KernelBasis& basis, Index n) {
  const Index rho = basis.rho();
  const Index k = static_cast<Index>(samples.size());
  if (k == 0) return {Mat::Zero(n, rho * n), 0.0};
  const Index rows = samples.front().value.rows();
  for (const auto& s : samples) {
    if (s.value.rows() != rows || s.value.cols() != n) {
      throw DimensionError("fit_coefficients: sample has shape " + shape_str(s.value));
    }
  }
  Mat design(k, rho);
  for (Index i = 0; i < k; ++i) design.row(i) = basis.eval(samples[i].tau).transpose();
  Eigen::ColPivHouseholderQR<Mat> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < rho) {
    throw UnderdeterminedError("fit_coefficients: samples determine only " + std::to_string(qr.rank()) + " of " +
                               std::to_string(rho) + " kernel components");
  }
  Mat coeffs = Mat::Zero(rows, rho * n);
  double residual = 0.0;
  for (Index a = 0; a < rows; ++a) {
    for (Index b = 0; b < n; ++b) {
      Vec y(k);
      for (Index i = 0; i < k; ++i) y(i) = samples[i].value(a, b);
      const Vec c = qr.solve(y);
      for (Index j = 0; j < rho; ++j) coeffs(a, j * n + b) = c(j);
      if (k > 0) residual = std::max(residual, (design * c - y).cwiseAbs().maxCoeff());
    }
  }
  return {coeffs, residual};
}

/// A_3 -> A_3 (S^{-1} (x) I_n): keeps A_3 M(tau) unchanged under m -> S m.
struct CoefficientMap {
  Vec s;
  Mat apply(const Mat& coeff, Index n) const {
    if (coeff.cols() != s.size() * n) throw DimensionError("CoefficientMap: coefficient has wrong column count");
    Mat out = coeff;
    for (Index j = 0; j < s.size(); ++j) out.middleCols(j * n, n) /= s(j);
    return out;
  }
};

struct ScaledBasis {
  KernelBasis basis;
  CoefficientMap map;
};

inline ScaledBasis scale(const KernelBasis& basis, const Vec& s) {
  if (s.size() != basis.rho()) throw DimensionError("scale: scale vector length must equal rho");
  if (!(s.minCoeff() > 0.0)) throw InputError("scale: scale entries must be positive");
  const Mat gen = s.asDiagonal() * basis.generator() * s.cwiseInverse().asDiagonal();
  const Vec m0 = s.cwiseProduct(basis.m0());
  return {KernelBasis(gen, m0, basis.labels()), CoefficientMap{s}};
}

/// Diagonal scale equalizing the Gram diagonal: s_i = 1/sqrt(f_inv_ii).
inline Vec equalizing_scale(const KernelBasis& basis, double r) {
  const GramPair g = gram(basis, r);
  return g.f_inv.mat().diagonal().cwiseSqrt().cwiseInverse();
}

}  // namespace ddsynth
