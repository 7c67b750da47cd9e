#pragma once

// Affine matrix expressions over scalar decision variables and the LMI
// problem container. An expression is C0 + sum_k y_k C_k, with one dense
// coefficient per scalar degree of freedom k it depends on.

#include <map>
#include <optional>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ddsynth/matrixkit.hpp"

namespace ddsynth {

enum class VarKind { symmetric, rectangular, scalar };

struct VarRef {
  int id = -1;
  Index rows = 0, cols = 0;
  VarKind kind = VarKind::rectangular;
  std::string name;
  int offset = 0;  // first scalar degree of freedom
  int dof = 0;     // number of scalar degrees of freedom
};

class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Index rows, Index cols) : c0_(Mat::Zero(rows, cols)) {}
  AffineExpr(const Mat& constant) : c0_(constant) {}  // NOLINT: constants promote implicitly

  static AffineExpr zero(Index rows, Index cols) { return AffineExpr(rows, cols); }

  /// Expression for a registered variable.
  static AffineExpr variable(const VarRef& v) {
    AffineExpr e(v.rows, v.cols);
    int k = v.offset;
    if (v.kind == VarKind::symmetric) {
      for (Index j = 0; j < v.cols; ++j) {
        for (Index i = 0; i <= j; ++i) {
          Mat c = Mat::Zero(v.rows, v.cols);
          c(i, j) = 1.0;
          c(j, i) = 1.0;
          e.coef_.emplace(k++, std::move(c));
        }
      }
    } else {
      for (Index j = 0; j < v.cols; ++j) {
        for (Index i = 0; i < v.rows; ++i) {
          Mat c = Mat::Zero(v.rows, v.cols);
          c(i, j) = 1.0;
          e.coef_.emplace(k++, std::move(c));
        }
      }
    }
    return e;
  }

  Index rows() const { return c0_.rows(); }
  Index cols() const { return c0_.cols(); }
  const Mat& constant() const { return c0_; }
  const std::map<int, Mat>& terms() const { return coef_; }
  bool is_constant() const { return coef_.empty(); }

  Mat coefficient(int dof) const {
    auto it = coef_.find(dof);
    return it == coef_.end() ? Mat::Zero(rows(), cols()) : it->second;
  }

  bool depends_on(const VarRef& v) const {
    auto it = coef_.lower_bound(v.offset);
    return it != coef_.end() && it->first < v.offset + v.dof;
  }

  Mat evaluate(const Vec& y) const {
    Mat out = c0_;
    for (const auto& [k, c] : coef_) {
      if (k >= y.size()) throw DimensionError("AffineExpr::evaluate: assignment too short");
      out += y(k) * c;
    }
    return out;
  }

  AffineExpr transpose() const {
    AffineExpr out(Mat(c0_.transpose()));
    for (const auto& [k, c] : coef_) out.coef_.emplace(k, c.transpose());
    return out;
  }

  AffineExpr& operator+=(const AffineExpr& b) {
    check_same(b, "+");
    c0_ += b.c0_;
    for (const auto& [k, c] : b.coef_) {
      auto it = coef_.find(k);
      if (it == coef_.end()) coef_.emplace(k, c);
      else it->second += c;
    }
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& b) { return *this += -b; }

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator-(const AffineExpr& a) { return -1.0 * a; }

  friend AffineExpr operator*(double s, const AffineExpr& a) {
    AffineExpr out(Mat(s * a.c0_));
    for (const auto& [k, c] : a.coef_) out.coef_.emplace(k, s * c);
    return out;
  }
  friend AffineExpr operator*(const Mat& l, const AffineExpr& a) {
    if (l.cols() != a.rows()) throw DimensionError("Mat*AffineExpr: " + shape_str(l) + " times " + a.shape());
    AffineExpr out(Mat(l * a.c0_));
    for (const auto& [k, c] : a.coef_) out.coef_.emplace(k, l * c);
    return out;
  }
  friend AffineExpr operator*(const AffineExpr& a, const Mat& r) {
    if (a.cols() != r.rows()) throw DimensionError("AffineExpr*Mat: " + a.shape() + " times " + shape_str(r));
    AffineExpr out(Mat(a.c0_ * r));
    for (const auto& [k, c] : a.coef_) out.coef_.emplace(k, c * r);
    return out;
  }

  /// Constant matrix c scaled by a 1x1 expression.
  static AffineExpr scaled(const Mat& c, const AffineExpr& s) {
    if (s.rows() != 1 || s.cols() != 1) throw DimensionError("AffineExpr::scaled: scale must be 1x1");
    AffineExpr out(Mat(s.c0_(0, 0) * c));
    for (const auto& [k, v] : s.coef_) out.coef_.emplace(k, v(0, 0) * c);
    return out;
  }

  std::string shape() const { return std::to_string(rows()) + "x" + std::to_string(cols()); }

  /// Place this expression at (r0, c0) inside a zero rows x cols expression.
  AffineExpr embed(Index rows, Index cols, Index r0, Index c0) const {
    if (r0 < 0 || c0 < 0 || r0 + this->rows() > rows || c0 + this->cols() > cols) {
      throw DimensionError("AffineExpr::embed: block does not fit");
    }
    AffineExpr out(rows, cols);
    out.c0_.block(r0, c0, this->rows(), this->cols()) = c0_;
    for (const auto& [k, c] : coef_) {
      Mat big = Mat::Zero(rows, cols);
      big.block(r0, c0, this->rows(), this->cols()) = c;
      out.coef_.emplace(k, std::move(big));
    }
    return out;
  }

  /// Sub-block copy.
  AffineExpr block(Index r0, Index c0, Index rows, Index cols) const {
    AffineExpr out(Mat(c0_.block(r0, c0, rows, cols)));
    for (const auto& [k, c] : coef_) {
      Mat b = c.block(r0, c0, rows, cols);
      if (!b.isZero(0.0)) out.coef_.emplace(k, std::move(b));
    }
    return out;
  }

 private:
  void check_same(const AffineExpr& b, const char* op) const {
    if (rows() != b.rows() || cols() != b.cols()) {
      throw DimensionError(std::string("AffineExpr ") + op + ": " + shape() + " vs " + b.shape());
    }
  }

  Mat c0_;
  std::map<int, Mat> coef_;
};

/// e + e^T.
inline AffineExpr sy(const AffineExpr& e) {
  if (e.rows() != e.cols()) throw DimensionError("sy: expression must be square, got " + e.shape());
  return e + e.transpose();
}

/// Kronecker product of a constant with an expression.
inline AffineExpr kron(const Mat& a, const AffineExpr& e) {
  AffineExpr result(a.rows() * e.rows(), a.cols() * e.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) == 0.0) continue;
      result += (a(i, j) * e).embed(result.rows(), result.cols(), i * e.rows(), j * e.cols());
    }
  }
  return result;
}

/// Block matrix from a grid of expressions; every row of blocks must agree
/// in height and every column in width.
inline AffineExpr block_matrix(const std::vector<std::vector<AffineExpr>>& grid) {
  if (grid.empty()) return AffineExpr(0, 0);
  const std::size_t nr = grid.size(), nc = grid.front().size();
  std::vector<Index> h(nr), w(nc);
  for (std::size_t i = 0; i < nr; ++i) {
    if (grid[i].size() != nc) throw DimensionError("block_matrix: ragged grid");
    h[i] = grid[i][0].rows();
  }
  for (std::size_t j = 0; j < nc; ++j) w[j] = grid[0][j].cols();
  Index rows = 0, cols = 0;
  for (auto x : h) rows += x;
  for (auto x : w) cols += x;
  AffineExpr out(rows, cols);
  Index r0 = 0;
  for (std::size_t i = 0; i < nr; ++i) {
    Index c0 = 0;
    for (std::size_t j = 0; j < nc; ++j) {
      const AffineExpr& b = grid[i][j];
      if (b.rows() != h[i] || b.cols() != w[j]) {
        throw DimensionError("block_matrix: block (" + std::to_string(i) + "," + std::to_string(j) + ") is " +
                             b.shape() + ", expected " + std::to_string(h[i]) + "x" + std::to_string(w[j]));
      }
      if (b.rows() > 0 && b.cols() > 0) out += b.embed(rows, cols, r0, c0);
      c0 += w[j];
    }
    r0 += h[i];
  }
  return out;
}

inline AffineExpr hcat(const std::vector<AffineExpr>& parts) { return block_matrix({parts}); }

inline AffineExpr vcat(const std::vector<AffineExpr>& parts) {
  std::vector<std::vector<AffineExpr>> grid;
  for (const auto& p : parts) grid.push_back({p});
  return block_matrix(grid);
}

/// Block diagonal of expressions (rectangular blocks allowed).
inline AffineExpr dsum(const std::vector<AffineExpr>& blocks) {
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) rows += b.rows(), cols += b.cols();
  AffineExpr out(rows, cols);
  Index r0 = 0, c0 = 0;
  for (const auto& b : blocks) {
    if (b.rows() > 0 && b.cols() > 0) out += b.embed(rows, cols, r0, c0);
    r0 += b.rows();
    c0 += b.cols();
  }
  return out;
}

/// Strict sense of a constraint: expr > 0 or expr < 0.
enum class Sense { pos, neg };

struct Constraint {
  AffineExpr expr;
  Sense sense = Sense::pos;
  std::string label;
};

class LMIProblem {
 public:
  VarRef add_symmetric(const std::string& name, Index k) { return add(name, k, k, VarKind::symmetric, k * (k + 1) / 2); }
  VarRef add_matrix(const std::string& name, Index rows, Index cols) {
    return add(name, rows, cols, VarKind::rectangular, rows * cols);
  }
  VarRef add_scalar(const std::string& name) { return add(name, 1, 1, VarKind::scalar, 1); }

  AffineExpr expr(const VarRef& v) const { return AffineExpr::variable(v); }

  /// Adds a strict constraint. The expression must be square and symmetric
  /// in every coefficient; it is stored exactly symmetrized.
  void add_constraint(const AffineExpr& e, Sense sense, const std::string& label) {
    if (e.rows() != e.cols()) throw DimensionError("constraint '" + label + "' is not square: " + e.shape());
    if (e.rows() == 0) return;
    auto asym = [](const Mat& a) { return inf_norm(a - a.transpose()) > 1e-10 * (1.0 + inf_norm(a)); };
    if (asym(e.constant())) throw DimensionError("constraint '" + label + "' has an asymmetric constant term");
    for (const auto& [k, c] : e.terms()) {
      if (asym(c)) throw DimensionError("constraint '" + label + "' is asymmetric in dof " + std::to_string(k));
    }
    constraints_.push_back({0.5 * (e + e.transpose()), sense, label});
  }

  void set_objective(const AffineExpr& e) {
    if (e.rows() != 1 || e.cols() != 1) throw DimensionError("objective must be 1x1");
    objective_ = e;
  }

  const std::vector<VarRef>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::optional<AffineExpr>& objective() const { return objective_; }
  int num_dofs() const { return ndof_; }

  bool has_var(const std::string& name) const {
    for (const auto& v : vars_)
      if (v.name == name) return true;
    return false;
  }
  const VarRef& var(const std::string& name) const {
    for (const auto& v : vars_)
      if (v.name == name) return v;
    throw InputError("LMIProblem: no variable named '" + name + "'");
  }
  const Constraint& constraint(const std::string& label) const {
    for (const auto& c : constraints_)
      if (c.label == label) return c;
    throw InputError("LMIProblem: no constraint labelled '" + label + "'");
  }

  /// Matrix value of a variable under the scalar assignment y.
  Mat value(const VarRef& v, const Vec& y) const { return AffineExpr::variable(v).evaluate(y); }

 private:
  VarRef add(const std::string& name, Index rows, Index cols, VarKind kind, Index dof) {
    if (has_var(name)) throw InputError("LMIProblem: duplicate variable '" + name + "'");
    VarRef v{static_cast<int>(vars_.size()), rows, cols, kind, name, ndof_, static_cast<int>(dof)};
    vars_.push_back(v);
    ndof_ += static_cast<int>(dof);
    return v;
  }

  std::vector<VarRef> vars_;
  std::vector<Constraint> constraints_;
  std::optional<AffineExpr> objective_;
  int ndof_ = 0;
};

/// Scalar degrees of freedom summed over all variables.
inline int count_decision_variables(const LMIProblem& p) { return p.num_dofs(); }

/// Largest asymmetry over constraints and `trials` random assignments.
inline double max_asymmetry(const LMIProblem& p, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vec y(p.num_dofs());
    for (Index i = 0; i < y.size(); ++i) y(i) = nd(rng);
    for (const auto& c : p.constraints()) {
      const Mat e = c.expr.evaluate(y);
      worst = std::max(worst, inf_norm(e - e.transpose()));
    }
  }
  return worst;
}

/// Largest second finite difference E(y+d) - 2E(y) + E(y-d) over random y, d.
inline double max_nonaffinity(const LMIProblem& p, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vec y(p.num_dofs()), d(p.num_dofs());
    for (Index i = 0; i < y.size(); ++i) y(i) = nd(rng), d(i) = nd(rng);
    for (const auto& c : p.constraints()) {
      const Mat e = c.expr.evaluate(y + d) - 2.0 * c.expr.evaluate(y) + c.expr.evaluate(y - d);
      const double scale = 1.0 + inf_norm(c.expr.evaluate(y));
      worst = std::max(worst, inf_norm(e) / scale);
    }
  }
  return worst;
}

}  // namespace ddsynth
