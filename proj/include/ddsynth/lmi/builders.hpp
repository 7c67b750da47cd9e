#pragma once

// Builders turning plant data into LMI problems: state-feedback synthesis
// with a dissipativity supply, open-loop analysis (with and without supply),
// the slack-variable stability test, S-procedure multipliers for
// linear-fractional uncertainty, and the robust variants.
//
// Block order of the synthesis inequality:
//   [slack n | x(t) n | x(t-r) n | distributed rho*n | w q | z m]
// and of the analysis inequality the same without the leading slack block.

#include <optional>
#include <string>
#include <vector>

#include "ddsynth/lmi/problem.hpp"
#include "ddsynth/model.hpp"

namespace ddsynth {

namespace names {
inline constexpr const char* kPc = "Pc";
inline constexpr const char* kX = "X";
inline constexpr const char* kV = "V";
inline constexpr const char* kQc = "Qc";
inline constexpr const char* kRc = "Rc";
inline constexpr const char* kSc = "Sc";
inline constexpr const char* kUc = "Uc";
inline constexpr const char* kGamma = "gamma";
inline constexpr const char* kP = "P";
inline constexpr const char* kQ = "Q";
inline constexpr const char* kR = "R";
inline constexpr const char* kS = "S";
inline constexpr const char* kU = "U";
inline constexpr const char* kW = "W";
inline constexpr const char* kKappa1 = "kappa1";
inline constexpr const char* kKappa2Inv = "kappa2_inv";
inline constexpr const char* kAlpha = "alpha";
inline constexpr const char* kKappa = "kappa";
}  // namespace names

namespace labels {
inline constexpr const char* kPositivity = "lkf_positivity";
inline constexpr const char* kSPos = "S_positive";
inline constexpr const char* kUPos = "U_positive";
inline constexpr const char* kDissipation = "dissipation";
inline constexpr const char* kStability = "stability";
inline constexpr const char* kWellposed = "wellposedness";
inline constexpr const char* kRobust = "robust_dissipation";
}  // namespace labels

/// Kernel-derived constants of a plant.
struct KernelData {
  Index n = 0, rho = 0, rn = 0;
  double r = 0.0;
  Mat F;     // inverse Gram matrix
  Mat M0;    // m(0) (x) I_n
  Mat Mr;    // m(-r) (x) I_n
  Mat Mhat;  // M (x) I_n
};

inline KernelData kernel_data(const DDSystem& sys) {
  KernelData k;
  k.n = sys.n, k.rho = sys.rho(), k.rn = k.rho * k.n, k.r = sys.r;
  k.F = gram(sys.basis, sys.r).f.mat();
  const LiftedKernel lk = lift(sys.basis, sys.n);
  k.M0 = lk.eval_lifted(0.0);
  k.Mr = lk.eval_lifted(-sys.r);
  k.Mhat = lk.generator_lifted();
  return k;
}

/// Plant with the loop closed: A1 <- A1 + B1 K, C1 <- C1 + D1 K.
inline DDSystem closed_loop_system(const ClosedLoop& cl) {
  DDSystem s = cl.base;
  s.A1 = cl.Pi1;
  s.C1 = cl.Omega1;
  return s;
}

namespace detail {

inline Mat I(Index k) { return Mat::Identity(k, k); }
inline Mat Z(Index r, Index c) { return Mat::Zero(r, c); }

inline void check_supply(const DDSystem& sys, const SupplyRate& s) {
  const auto d = validate(s, sys);
  if (!d.empty()) {
    std::string msg = "invalid supply:";
    for (const auto& x : d) msg += "\n  " + x;
    throw InputError(msg);
  }
}

struct SupplyExprs {
  AffineExpr J1;  // m_z x m_z (empty for passivity)
  Mat J2;
  AffineExpr J3;
  Index mz = 0;  // size of the Schur block, 0 for passivity
};

inline SupplyExprs supply_exprs(LMIProblem& p, const SupplyRate& s, std::optional<VarRef>& gamma_var) {
  SupplyExprs out;
  out.J2 = s.J2;
  if (s.gamma_is_variable()) {
    gamma_var = p.add_scalar(names::kGamma);
    const AffineExpr g = p.expr(*gamma_var);
    out.J1 = AffineExpr::scaled(I(s.m), g);
    out.J3 = AffineExpr::scaled(-I(s.q), g);
    out.mz = s.m;
    p.set_objective(g);
  } else {
    out.J3 = AffineExpr(s.J3.mat());
    if (s.J1) {
      out.J1 = AffineExpr(s.J1->mat());
      out.mz = s.m;
    } else {
      out.J1 = AffineExpr(0, 0);
      out.mz = 0;
    }
  }
  return out;
}

inline AffineExpr positivity_block(const AffineExpr& P, const AffineExpr& Q, const AffineExpr& R, const AffineExpr& S,
                                   const Mat& F) {
  return block_matrix({{P, Q}, {Q.transpose(), R + kron(F, S)}});
}

}  // namespace detail

/// Variables of the synthesis problem.
struct SynthesisVars {
  VarRef Pc, X, V, Qc, Rc, Sc, Uc;
  std::optional<VarRef> gamma;
};

struct SynthesisCore {
  SynthesisVars vars;
  AffineExpr theta;  // the dissipation inequality matrix, required < 0
  Index N = 0;       // its dimension
  Index mz = 0;      // size of the z Schur block (0 for passivity)
};

namespace detail {

inline SynthesisCore synthesis_core(LMIProblem& p, const DDSystem& sys, const SupplyRate& supply,
                                    const TuningParams& tuning) {
  require_valid(sys);
  check_supply(sys, supply);
  const KernelData kd = kernel_data(sys);
  const Index n = sys.n, rn = kd.rn, q = sys.q, m = sys.m, rho = kd.rho;
  const Vec eps = tuning.eps_or_zero(rho);

  SynthesisCore core;
  auto& v = core.vars;
  v.Pc = p.add_symmetric(names::kPc, n);
  v.X = p.add_matrix(names::kX, n, n);
  v.V = p.add_matrix(names::kV, sys.p, n);
  v.Qc = p.add_matrix(names::kQc, n, rn);
  v.Rc = p.add_symmetric(names::kRc, rn);
  v.Sc = p.add_symmetric(names::kSc, n);
  v.Uc = p.add_symmetric(names::kUc, n);
  const SupplyExprs se = supply_exprs(p, supply, v.gamma);
  const Index mz = se.mz;

  const AffineExpr Pc = p.expr(v.Pc), X = p.expr(v.X), V = p.expr(v.V), Qc = p.expr(v.Qc), Rc = p.expr(v.Rc),
                   Sc = p.expr(v.Sc), Uc = p.expr(v.Uc);
  const AffineExpr IX = kron(I(rho), X);
  const Index N = 3 * n + rn + q + mz;
  const Index K1 = N - n;

  Mat Itil = Z(n, N);
  Itil.block(0, 0, n, n) = I(n);
  Itil.block(0, n, n, n) = tuning.eta1 * I(n);
  Itil.block(0, 2 * n, n, n) = tuning.eta2 * I(n);
  for (Index i = 0; i < rho; ++i) Itil.block(0, 3 * n + i * n, n, n) = eps(i) * I(n);

  const AffineExpr Ytil =
      hcat({-X, sys.A1 * X + sys.B1 * V, sys.A2 * X, sys.A3 * IX, AffineExpr(sys.B2), AffineExpr(Z(n, mz))});
  const AffineExpr slack = sy(Mat(Itil.transpose()) * Ytil);

  const AffineExpr Ptil = hcat({Pc, AffineExpr(Z(n, n)), Qc, AffineExpr(Z(n, q + mz))});

  const AffineExpr Lq = vcat({Qc, AffineExpr(Z(n, rn)), Rc, AffineExpr(Z(q + mz, rn))});
  Mat Rm(rn, K1);
  Rm << kd.M0, -kd.Mr, -kd.Mhat, Z(rn, q + mz);
  AffineExpr phi = sy(Lq * Rm);
  phi += dsum(std::vector<AffineExpr>{Sc + kd.r * Uc, -Sc, -kron(kd.F, Uc), se.J3, -se.J1});
  if (m > 0) {
    Mat Lz = Z(K1, m);
    Lz.block(2 * n + rn, 0, q, m) = se.J2.transpose();
    if (mz > 0) Lz.block(2 * n + rn + q, 0, m, m) = I(m);
    const AffineExpr Rz = hcat({sys.C1 * X + sys.D1 * V, sys.C2 * X, sys.C3 * IX, AffineExpr(sys.D2), AffineExpr(Z(m, mz))});
    phi += sy(Lz * Rz);
  }

  core.theta = slack + block_matrix({{AffineExpr(Z(n, n)), Ptil}, {Ptil.transpose(), phi}});
  core.N = N;
  core.mz = mz;

  p.add_constraint(detail::positivity_block(Pc, Qc, Rc, Sc, kd.F), Sense::pos, labels::kPositivity);
  p.add_constraint(Sc, Sense::pos, labels::kSPos);
  p.add_constraint(Uc, Sense::pos, labels::kUPos);
  return core;
}

}  // namespace detail

/// State-feedback synthesis for the supply; K = V X^{-1}. For an l2 supply
/// with free gamma, gamma is a variable and the objective minimizes it.
inline LMIProblem thm1_constraints(const DDSystem& sys, const SupplyRate& supply, const TuningParams& tuning = {}) {
  LMIProblem p;
  const SynthesisCore core = detail::synthesis_core(p, sys, supply, tuning);
  p.add_constraint(core.theta, Sense::neg, labels::kDissipation);
  return p;
}

struct AnalysisVars {
  VarRef P, Q, R, S, U;
  std::optional<VarRef> gamma;
};

struct AnalysisCore {
  AnalysisVars vars;
  AffineExpr psi;
  Index mz = 0;
  bool with_supply = false;
};

namespace detail {

/// Open-loop inequality: with a supply it is the dissipation matrix over
/// [x, x(t-r), distributed, w, z]; without one, the stability matrix over
/// the first three blocks.
inline AnalysisCore analysis_core(LMIProblem& p, const DDSystem& sys, const std::optional<SupplyRate>& supply) {
  require_valid(sys);
  if (supply) check_supply(sys, *supply);
  const KernelData kd = kernel_data(sys);
  const Index n = sys.n, rn = kd.rn;
  const Index q = supply ? sys.q : 0;

  AnalysisCore core;
  auto& v = core.vars;
  v.P = p.add_symmetric(names::kP, n);
  v.Q = p.add_matrix(names::kQ, n, rn);
  v.R = p.add_symmetric(names::kR, rn);
  v.S = p.add_symmetric(names::kS, n);
  v.U = p.add_symmetric(names::kU, n);
  SupplyExprs se;
  if (supply) se = supply_exprs(p, *supply, v.gamma);
  core.mz = supply ? se.mz : 0;
  core.with_supply = supply.has_value();

  const AffineExpr P = p.expr(v.P), Q = p.expr(v.Q), R = p.expr(v.R), S = p.expr(v.S), U = p.expr(v.U);
  const Index K = 2 * n + rn + q;

  const AffineExpr L = vcat({hcat({P, Q}), AffineExpr(Z(n, n + rn)), hcat({Q.transpose(), R}), AffineExpr(Z(q, n + rn))});
  Mat Rr(n + rn, K);
  Rr.topRows(n) << sys.A1, sys.A2, sys.A3, (supply ? sys.B2 : Z(n, 0));
  Rr.bottomRows(rn) << kd.M0, -kd.Mr, -kd.Mhat, Z(rn, q);
  AffineExpr phi = sy(L * Rr);
  std::vector<AffineExpr> diag{S + kd.r * U, -S, -kron(kd.F, U)};
  if (supply) diag.push_back(se.J3);
  phi += dsum(diag);
  if (!supply) {
    core.psi = phi;
  } else {
    const Index m = sys.m;
    Mat Cz(m, K);
    Cz << sys.C1, sys.C2, sys.C3, sys.D2;
    if (m > 0 && q > 0) {
      Mat Lz = Z(K, m);
      Lz.block(2 * n + rn, 0, q, m) = se.J2.transpose();
      phi += AffineExpr(Mat(Lz * Cz + Cz.transpose() * Lz.transpose()));
    }
    if (core.mz > 0) {
      core.psi = block_matrix({{phi, AffineExpr(Mat(Cz.transpose()))}, {AffineExpr(Cz), -se.J1}});
    } else {
      core.psi = phi;
    }
  }
  p.add_constraint(positivity_block(P, Q, R, S, kd.F), Sense::pos, labels::kPositivity);
  p.add_constraint(S, Sense::pos, labels::kSPos);
  p.add_constraint(U, Sense::pos, labels::kUPos);
  return core;
}

}  // namespace detail

/// Open-loop dissipativity analysis (B1, D1 unused).
inline LMIProblem analysis_constraints(const DDSystem& sys, const SupplyRate& supply) {
  LMIProblem p;
  const AnalysisCore core = detail::analysis_core(p, sys, supply);
  p.add_constraint(core.psi, Sense::neg, labels::kDissipation);
  return p;
}

inline LMIProblem analysis_constraints(const ClosedLoop& cl, const SupplyRate& supply) {
  return analysis_constraints(closed_loop_system(cl), supply);
}

/// Stability only: the supply rows and columns are removed.
inline LMIProblem simple_stability_constraints(const DDSystem& sys) {
  LMIProblem p;
  const AnalysisCore core = detail::analysis_core(p, sys, std::nullopt);
  p.add_constraint(core.psi, Sense::neg, labels::kStability);
  return p;
}

enum class SlackShape { free, structured };

/// Stability through a slack multiplier W on [-I, A1, A2, A3]. The free
/// shape takes W of size (3n + rho n) x n; the structured shape stacks
/// [W; eta1 W; eta2 W; eps_i W] with W square.
inline LMIProblem slack_stability_constraints(const DDSystem& sys, const TuningParams& tuning = {},
                                              SlackShape shape = SlackShape::free) {
  require_valid(sys);
  const KernelData kd = kernel_data(sys);
  const Index n = sys.n, rn = kd.rn, rho = kd.rho;
  LMIProblem p;
  const VarRef vP = p.add_symmetric(names::kP, n), vQ = p.add_matrix(names::kQ, n, rn),
               vR = p.add_symmetric(names::kR, rn), vS = p.add_symmetric(names::kS, n),
               vU = p.add_symmetric(names::kU, n);
  const AffineExpr P = p.expr(vP), Q = p.expr(vQ), R = p.expr(vR), S = p.expr(vS), U = p.expr(vU);
  const Index N = 3 * n + rn;
  AffineExpr W;
  if (shape == SlackShape::free) {
    W = p.expr(p.add_matrix(names::kW, N, n));
  } else {
    const Vec eps = tuning.eps_or_zero(rho);
    Mat It = Mat::Zero(N, n);
    It.block(0, 0, n, n) = detail::I(n);
    It.block(n, 0, n, n) = tuning.eta1 * detail::I(n);
    It.block(2 * n, 0, n, n) = tuning.eta2 * detail::I(n);
    for (Index i = 0; i < rho; ++i) It.block(3 * n + i * n, 0, n, n) = eps(i) * detail::I(n);
    W = It * p.expr(p.add_matrix(names::kW, n, n));
  }
  Mat Y(n, N);
  Y << -detail::I(n), sys.A1, sys.A2, sys.A3;
  Mat Rm(rn, 2 * n + rn);
  Rm << kd.M0, -kd.Mr, -kd.Mhat;
  AffineExpr phihat = sy(vcat({Q, AffineExpr(detail::Z(n, rn)), R}) * Rm);
  phihat += dsum(std::vector<AffineExpr>{S + kd.r * U, -S, -kron(kd.F, U)});
  const AffineExpr Pb = hcat({P, AffineExpr(detail::Z(n, n)), Q});
  const AffineExpr lhs = sy(W * Y) + block_matrix({{AffineExpr(detail::Z(n, n)), Pb}, {Pb.transpose(), phihat}});
  p.add_constraint(detail::positivity_block(P, Q, R, S, kd.F), Sense::pos, labels::kPositivity);
  p.add_constraint(S, Sense::pos, labels::kSPos);
  p.add_constraint(U, Sense::pos, labels::kUPos);
  p.add_constraint(lhs, Sense::neg, labels::kStability);
  return p;
}

/// Quadratic constraint on Delta (a x b):
///   [I; Delta]^T [[Theta1^{-1}, Theta2], [*, Theta3]] [I; Delta] >= 0.
/// An absent theta1 encodes Theta1^{-1} = 0.
struct Multiplier {
  std::optional<Mat> theta1;  // b x b, positive definite
  Mat theta2;                 // b x a
  Mat theta3;                 // a x a, negative semidefinite
  Mat F;                      // b x a

  Index a() const { return theta3.rows(); }
  Index b() const { return theta2.rows(); }
};

inline Multiplier make_multiplier(const std::optional<SymMat>& theta1_inv, const Mat& theta2, const SymMat& theta3,
                                  const Mat& f) {
  Multiplier mu;
  if (theta2.cols() != theta3.dim() || f.rows() != theta2.rows() || f.cols() != theta2.cols()) {
    throw DimensionError("multiplier: theta2 " + shape_str(theta2) + ", theta3 " + std::to_string(theta3.dim()) +
                         ", F " + shape_str(f) + " are not conformal");
  }
  if (theta1_inv && !theta1_inv->mat().isZero(0.0)) {
    if (theta1_inv->dim() != theta2.rows()) throw DimensionError("multiplier: theta1 size mismatch");
    if (!(min_eig_sym(*theta1_inv) > 0.0)) throw InputError("multiplier: theta1^{-1} must be positive definite");
    mu.theta1 = theta1_inv->mat().inverse();
    *mu.theta1 = Mat(0.5 * (*mu.theta1 + mu.theta1->transpose()));
  }
  mu.theta2 = theta2;
  mu.theta3 = theta3.mat();
  mu.F = f;
  return mu;
}

namespace detail {

inline AffineExpr wellposed_block(const AffineExpr& alpha, const Multiplier& mu) {
  const Index a = mu.a(), b = mu.b();
  const Mat FtT2 = mu.F.transpose() * mu.theta2;
  const AffineExpr A11(I(a));
  const AffineExpr A12 = AffineExpr(Mat(-I(a))) - AffineExpr::scaled(FtT2, alpha);
  const AffineExpr A22 = AffineExpr(I(a)) - AffineExpr::scaled(mu.theta3, alpha);
  if (!mu.theta1) return block_matrix({{A11, A12}, {A12.transpose(), A22}});
  const AffineExpr A13 = AffineExpr::scaled(Mat(mu.F.transpose()), alpha);
  return block_matrix({{A11, A12, A13},
                       {A12.transpose(), A22, AffineExpr(Z(a, b))},
                       {A13.transpose(), AffineExpr(Z(b, a)), AffineExpr::scaled(*mu.theta1, alpha)}});
}

inline void add_wellposedness(LMIProblem& p, const Multiplier& mu, const std::string& var_name,
                              const std::string& label) {
  const AffineExpr alpha = p.expr(p.add_scalar(var_name));
  p.add_constraint(alpha, Sense::pos, var_name + "_positive");
  p.add_constraint(wellposed_block(alpha, mu), Sense::pos, label);
}

}  // namespace detail

/// Well-posedness of (I - Delta F)^{-1} over the multiplier set, as an LMI
/// in a positive scalar alpha.
inline LMIProblem lemma6_wellposed(const std::optional<SymMat>& theta1_inv, const Mat& theta2, const SymMat& theta3,
                                   const Mat& f) {
  LMIProblem p;
  detail::add_wellposedness(p, make_multiplier(theta1_inv, theta2, theta3, f), names::kAlpha, labels::kWellposed);
  return p;
}

struct BoundResult {
  VarRef kappa;
  bool inverse = false;  // true when the variable is 1/kappa
};

/// Adds Phi + Sy[G (I - Delta F)^{-1} Delta H] < 0 for all admissible Delta
/// via the S-procedure. With H constant the multiplier kappa enters
/// directly. With H variable and G constant the congruence
/// diag(I, I/kappa, I/kappa) keeps the inequality affine in 1/kappa.
inline BoundResult lemma6_bound(LMIProblem& p, const AffineExpr& phi, const AffineExpr& G, const AffineExpr& H,
                                const Multiplier& mu, const std::string& var_name = names::kKappa,
                                const std::string& label = labels::kRobust) {
  const Index a = mu.a(), b = mu.b();
  if (G.rows() != phi.rows() || G.cols() != a || H.rows() != b || H.cols() != phi.cols()) {
    throw DimensionError("lemma6_bound: G is " + G.shape() + ", H is " + H.shape() + ", Phi is " + phi.shape() +
                         ", Delta is " + std::to_string(a) + "x" + std::to_string(b));
  }
  BoundResult res;
  const Mat mid = mu.F.transpose() * mu.theta2 + mu.theta2.transpose() * mu.F + mu.theta3;
  if (H.is_constant()) {
    res.kappa = p.add_scalar(var_name);
    const AffineExpr k = p.expr(res.kappa);
    const Mat Ht = H.constant().transpose();
    const AffineExpr B12 = G + AffineExpr::scaled(Mat(Ht * mu.theta2), k);
    const AffineExpr B22 = AffineExpr::scaled(mid, k);
    if (!mu.theta1) {
      p.add_constraint(block_matrix({{phi, B12}, {B12.transpose(), B22}}), Sense::neg, label);
    } else {
      const AffineExpr B13 = AffineExpr::scaled(Ht, k);
      const AffineExpr B23 = AffineExpr::scaled(Mat(mu.F.transpose()), k);
      const AffineExpr B33 = AffineExpr::scaled(Mat(-*mu.theta1), k);
      p.add_constraint(block_matrix({{phi, B12, B13}, {B12.transpose(), B22, B23}, {B13.transpose(), B23.transpose(), B33}}),
                       Sense::neg, label);
    }
  } else if (G.is_constant()) {
    res.inverse = true;
    res.kappa = p.add_scalar(var_name);
    const AffineExpr k = p.expr(res.kappa);
    const AffineExpr Ht = H.transpose();
    const AffineExpr B12 = AffineExpr::scaled(G.constant(), k) + Ht * mu.theta2;
    const AffineExpr B22 = AffineExpr::scaled(mid, k);
    if (!mu.theta1) {
      p.add_constraint(block_matrix({{phi, B12}, {B12.transpose(), B22}}), Sense::neg, label);
    } else {
      const AffineExpr B23 = AffineExpr::scaled(Mat(mu.F.transpose()), k);
      const AffineExpr B33 = AffineExpr::scaled(Mat(-*mu.theta1), k);
      p.add_constraint(block_matrix({{phi, B12, Ht}, {B12.transpose(), B22, B23}, {Ht.transpose(), B23.transpose(), B33}}),
                       Sense::neg, label);
    }
  } else {
    throw InputError("lemma6_bound: G and H both depend on decision variables; the condition would be bilinear");
  }
  p.add_constraint(p.expr(res.kappa), Sense::pos, var_name + "_positive");
  return res;
}

/// Aggregated multiplier over a subset of channels (block-diagonal sums).
inline Multiplier aggregate_multiplier(const UncertaintySet& unc, const std::vector<int>& idx) {
  std::vector<Mat> F, X, L, Gm;
  for (int i : idx) {
    F.push_back(unc[i].F);
    X.push_back(unc[i].Xi.mat());
    L.push_back(unc[i].Lambda);
    Gm.push_back(unc[i].Gamma.mat());
  }
  Multiplier mu;
  mu.F = dsum(std::span<const Mat>(F));
  mu.theta1 = dsum(std::span<const Mat>(X));
  mu.theta2 = dsum(std::span<const Mat>(L));
  mu.theta3 = dsum(std::span<const Mat>(Gm));
  return mu;
}

inline void require_valid(const UncertaintySet& unc, const DDSystem& sys) {
  const auto d = validate(unc, sys);
  if (d.empty()) return;
  std::string msg = "invalid uncertainty:";
  for (const auto& x : d) msg += "\n  " + x;
  throw InputError(msg);
}

/// Robust state-feedback synthesis over all ten channels. Adds kappa1 for
/// well-posedness and kappa2_inv = 1/kappa2 for the robust bound.
inline LMIProblem thm2_constraints(const DDSystem& sys, const SupplyRate& supply, const UncertaintySet& unc,
                                   const TuningParams& tuning = {}) {
  require_valid(sys);
  require_valid(unc, sys);
  LMIProblem p;
  const SynthesisCore core = detail::synthesis_core(p, sys, supply, tuning);
  std::vector<int> all(10);
  for (int i = 0; i < 10; ++i) all[i] = i;
  const Multiplier mu = aggregate_multiplier(unc, all);
  detail::add_wellposedness(p, mu, names::kKappa1, labels::kWellposed);

  const Index n = sys.n, rn = sys.rho() * n, q = sys.q, m = sys.m, mz = core.mz, N = core.N, rho = sys.rho();
  const Vec eps = tuning.eps_or_zero(rho);
  Mat Lg = Mat::Zero(N, n + m);
  Lg.block(0, 0, n, n) = detail::I(n);
  Lg.block(n, 0, n, n) = tuning.eta1 * detail::I(n);
  Lg.block(2 * n, 0, n, n) = tuning.eta2 * detail::I(n);
  for (Index i = 0; i < rho; ++i) Lg.block(3 * n + i * n, 0, n, n) = eps(i) * detail::I(n);
  Lg.block(3 * n + rn, n, q, m) = supply.J2.transpose();
  if (mz > 0) Lg.block(3 * n + rn + q, n, m, m) = detail::I(m);
  std::vector<Mat> gtop, gbot;
  for (int i = 0; i < 5; ++i) gtop.push_back(unc[i].G), gbot.push_back(unc[i + 5].G);
  auto hrow = [](const std::vector<Mat>& parts, Index rows) {
    Index c = 0;
    for (const auto& x : parts) c += x.cols();
    Mat out(rows, c);
    Index off = 0;
    for (const auto& x : parts) out.middleCols(off, x.cols()) = x, off += x.cols();
    return out;
  };
  const Mat Gb = Lg * dsum({hrow(gtop, n), hrow(gbot, m)});

  const AffineExpr X = p.expr(core.vars.X), V = p.expr(core.vars.V);
  const AffineExpr IX = kron(detail::I(rho), X);
  auto hside = [&](int o) {
    return dsum(std::vector<AffineExpr>{vcat({unc[o].H * X, unc[o + 1].H * V}), unc[o + 2].H * X, unc[o + 3].H * IX,
                                        AffineExpr(unc[o + 4].H)});
  };
  const Index K = 2 * n + rn + q;
  Mat Sel = Mat::Zero(K, N);
  Sel.block(0, n, K, K) = detail::I(K);
  const AffineExpr Hb = vcat({hside(0), hside(5)}) * Sel;
  lemma6_bound(p, core.theta, AffineExpr(Gb), Hb, mu, names::kKappa2Inv, labels::kRobust);
  return p;
}

/// Open-loop robust analysis. Channels on B1 and D1 do not enter; without a
/// supply only the A1, A2, A3 channels remain.
inline LMIProblem robust_analysis_constraints(const DDSystem& sys, const std::optional<SupplyRate>& supply,
                                              const UncertaintySet& unc) {
  require_valid(sys);
  require_valid(unc, sys);
  LMIProblem p;
  const AnalysisCore core = detail::analysis_core(p, sys, supply);
  const Index n = sys.n, rn = sys.rho() * n;
  const AffineExpr P = p.expr(core.vars.P), Q = p.expr(core.vars.Q);
  std::vector<int> top, bot;
  if (supply) {
    top = {kA1, kA2, kA3, kB2};
    bot = {kC1, kC2, kC3, kD2};
  } else {
    top = {kA1, kA2, kA3};
  }
  std::vector<int> idx = top;
  idx.insert(idx.end(), bot.begin(), bot.end());
  const Multiplier mu = aggregate_multiplier(unc, idx);
  detail::add_wellposedness(p, mu, names::kAlpha, labels::kWellposed);

  const Index q = supply ? sys.q : 0;
  const Index m = supply ? sys.m : 0;
  const Index K = 2 * n + rn + q;
  const Index rows = core.psi.rows();
  std::vector<AffineExpr> lrows{hcat({P, AffineExpr(detail::Z(n, m))}), AffineExpr(detail::Z(n, n + m)),
                                hcat({Q.transpose(), AffineExpr(detail::Z(rn, m))})};
  if (supply) {
    Mat wrow(q, n + m);
    wrow << detail::Z(q, n), supply->J2.transpose();
    lrows.emplace_back(wrow);
    if (core.mz > 0) {
      Mat zrow(m, n + m);
      zrow << detail::Z(m, n), detail::I(m);
      lrows.emplace_back(zrow);
    }
  }
  const AffineExpr Lg = vcat(lrows);
  std::vector<Mat> gt, gb, ht, hb;
  for (int i : top) gt.push_back(unc[i].G), ht.push_back(unc[i].H);
  for (int i : bot) gb.push_back(unc[i].G), hb.push_back(unc[i].H);
  auto hrow = [](const std::vector<Mat>& parts, Index r) {
    Index c = 0;
    for (const auto& x : parts) c += x.cols();
    Mat out(r, c);
    Index off = 0;
    for (const auto& x : parts) out.middleCols(off, x.cols()) = x, off += x.cols();
    return out;
  };
  const Mat Gr = dsum({hrow(gt, n), hrow(gb, m)});
  const AffineExpr Gb = Lg * Gr;
  const Mat Hin = dsum(std::span<const Mat>(ht));
  const Mat Hout = dsum(std::span<const Mat>(hb));
  Mat Hs(Hin.rows() + (bot.empty() ? 0 : Hout.rows()), K);
  Hs.topRows(Hin.rows()) = Hin;
  if (!bot.empty()) Hs.bottomRows(Hout.rows()) = Hout;
  Mat Hb = Mat::Zero(Hs.rows(), rows);
  Hb.leftCols(K) = Hs;
  lemma6_bound(p, core.psi, Gb, AffineExpr(Hb), mu, names::kKappa, labels::kRobust);
  return p;
}

}  // namespace ddsynth
