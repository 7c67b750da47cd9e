#pragma once

// Dense real matrix primitives shared by every module.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ddsynth/errors.hpp"

namespace ddsynth {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline std::string shape_str(const Mat& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

inline double inf_norm(const Mat& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Mat& a) { return a.allFinite(); }

inline void require_square(const Mat& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": expected square matrix, got " + shape_str(a));
  }
}

/// Symmetric matrix. Construction accepts a nearly symmetric input, averages
/// it, and rejects anything with ||a - a^T||_inf > 1e-9 ||a||_inf.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(Index dim) : m_(Mat::Zero(dim, dim)) {}
  explicit SymMat(const Mat& a) {
    require_square(a, "SymMat");
    const double asym = inf_norm(a - a.transpose());
    if (asym > 1e-9 * inf_norm(a)) {
      throw DimensionError("SymMat: input is not symmetric (asymmetry " + std::to_string(asym) + ")");
    }
    m_ = 0.5 * (a + a.transpose());
  }

  static SymMat identity(Index dim) { return SymMat(Mat::Identity(dim, dim)); }
  static SymMat zero(Index dim) { return SymMat(dim); }

  Index dim() const { return m_.rows(); }
  const Mat& mat() const { return m_; }
  operator const Mat&() const { return m_; }  // NOLINT: SymMat is-a Mat for reading
  double operator()(Index i, Index j) const { return m_(i, j); }

  SymMat operator-() const { return SymMat(Mat(-m_)); }
  friend SymMat operator*(double s, const SymMat& a) { return SymMat(Mat(s * a.m_)); }

 private:
  Mat m_;
};

/// (pq)x(rs) Kronecker product of a (p x r) and b (q x s).
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Block-diagonal stacking; blocks may be rectangular or empty.
inline Mat dsum(std::span<const Mat> blocks) {
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Mat out = Mat::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline Mat dsum(std::initializer_list<Mat> blocks) {
  return dsum(std::span<const Mat>(blocks.begin(), blocks.size()));
}

/// a + a^T.
inline SymMat sy(const Mat& a) {
  require_square(a, "sy");
  Mat s = a + a.transpose();
  return SymMat(s);
}

inline Mat expm(const Mat& a) {
  require_square(a, "expm");
  if (a.size() == 0) return a;
  Mat e = a.exp();
  if (!e.allFinite()) throw NumericalFailure("expm: overflow");
  return e;
}

namespace detail {

// Parlett-Reinsch balancing by powers of two: returns D with D^{-1} A D balanced.
inline Vec balance(Mat& a) {
  const Index n = a.rows();
  Vec d = Vec::Ones(n);
  constexpr double radix = 2.0;
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c >= g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        d(i) *= f;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
  return d;
}

}  // namespace detail

struct EigenDecomposition {
  CVec values;
  CMat vectors;  // columns, unit 2-norm, for the original (unbalanced) matrix
};

/// All eigenvalues and right eigenvectors of a general real square matrix.
inline EigenDecomposition eig_full(const Mat& a) {
  require_square(a, "eig");
  Mat b = a;
  const Vec d = detail::balance(b);
  Eigen::EigenSolver<Mat> es(b, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success) throw NumericalFailure("eig: QR iteration did not converge");
  EigenDecomposition out;
  out.values = es.eigenvalues();
  out.vectors = d.cast<std::complex<double>>().asDiagonal() * es.eigenvectors();
  for (Index k = 0; k < out.vectors.cols(); ++k) out.vectors.col(k).normalize();
  return out;
}

/// Eigenvalues only.
inline CVec eig(const Mat& a) {
  require_square(a, "eig");
  Mat b = a;
  detail::balance(b);
  Eigen::EigenSolver<Mat> es(b, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalFailure("eig: QR iteration did not converge");
  return es.eigenvalues();
}

inline Vec eig_sym(const Mat& a) {
  require_square(a, "eig_sym");
  if (a.size() == 0) return Vec();
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("eig_sym: did not converge");
  return es.eigenvalues();
}

inline double min_eig_sym(const Mat& a) { return eig_sym(a).minCoeff(); }
inline double max_eig_sym(const Mat& a) { return eig_sym(a).maxCoeff(); }
inline double min_eig_sym(const SymMat& a) { return min_eig_sym(a.mat()); }
inline double max_eig_sym(const SymMat& a) { return max_eig_sym(a.mat()); }

/// Solves a x = b with a square, via column-pivoted QR; throws when singular.
inline Mat solve(const Mat& a, const Mat& b) {
  require_square(a, "solve");
  if (a.rows() != b.rows()) throw DimensionError("solve: rhs rows mismatch");
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  if (qr.rank() < a.rows()) throw NumericalFailure("solve: singular matrix");
  return qr.solve(b);
}

inline bool is_pos_def(const Mat& a, double tol = 0.0) {
  return a.size() == 0 || min_eig_sym(a) > tol;
}

inline double cond2(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  return smin == 0.0 ? std::numeric_limits<double>::infinity() : s(0) / smin;
}

}  // namespace ddsynth
