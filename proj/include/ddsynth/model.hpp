#pragma once

// Problem data: distributed-delay plants, closed loops, quadratic supply
// rates, the ten linear-fractional uncertainty channels and tuning scalars.

#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddsynth/kernelbasis.hpp"

namespace ddsynth {

/// x' = A1 x + A2 x(t-r) + A3 int M(tau) x(t+tau) + B1 u + B2 w
/// z  = C1 x + C2 x(t-r) + C3 int M(tau) x(t+tau) + D1 u + D2 w
/// Dimensions m, p, q may be zero (no output, input or disturbance).
struct DDSystem {
  Index n = 0, m = 0, p = 0, q = 0;
  double r = 0.0;
  Mat A1, A2, A3, B1, B2, C1, C2, C3, D1, D2;
  KernelBasis basis;

  Index rho() const { return basis.rho(); }

  /// All matrices zero with the given dimensions.
  static DDSystem zeros(Index n, Index m, Index p, Index q, double r, KernelBasis basis) {
    DDSystem s;
    s.n = n, s.m = m, s.p = p, s.q = q, s.r = r;
    const Index rn = basis.rho() * n;
    s.A1 = Mat::Zero(n, n), s.A2 = Mat::Zero(n, n), s.A3 = Mat::Zero(n, rn);
    s.B1 = Mat::Zero(n, p), s.B2 = Mat::Zero(n, q);
    s.C1 = Mat::Zero(m, n), s.C2 = Mat::Zero(m, n), s.C3 = Mat::Zero(m, rn);
    s.D1 = Mat::Zero(m, p), s.D2 = Mat::Zero(m, q);
    s.basis = std::move(basis);
    return s;
  }
};

namespace detail {
inline void check_shape(std::vector<std::string>& out, const char* name, const Mat& a, Index rows, Index cols) {
  if (a.rows() != rows || a.cols() != cols) {
    std::ostringstream os;
    os << "dimension mismatch: " << name << " is " << shape_str(a) << ", expected " << rows << "x" << cols;
    out.push_back(os.str());
  } else if (!a.allFinite()) {
    out.push_back(std::string("non-finite entries in ") + name);
  }
}
}  // namespace detail

/// Empty iff the system is well formed.
inline std::vector<std::string> validate(const DDSystem& s) {
  std::vector<std::string> out;
  if (s.n < 1) out.push_back("state dimension n must be >= 1");
  if (s.m < 0 || s.p < 0 || s.q < 0) out.push_back("negative dimension");
  if (!(s.r > 0.0) || !std::isfinite(s.r)) out.push_back("delay r must be positive and finite");
  if (s.basis.rho() < 1) {
    out.push_back("kernel basis is empty");
    return out;
  }
  if (s.basis.generator().rows() != s.basis.rho() || s.basis.generator().cols() != s.basis.rho()) {
    out.push_back("dimension mismatch: kernel generator does not match rho");
    return out;
  }
  if (!out.empty()) return out;
  const Index rn = s.rho() * s.n;
  detail::check_shape(out, "A1", s.A1, s.n, s.n);
  detail::check_shape(out, "A2", s.A2, s.n, s.n);
  detail::check_shape(out, "A3", s.A3, s.n, rn);
  detail::check_shape(out, "B1", s.B1, s.n, s.p);
  detail::check_shape(out, "B2", s.B2, s.n, s.q);
  detail::check_shape(out, "C1", s.C1, s.m, s.n);
  detail::check_shape(out, "C2", s.C2, s.m, s.n);
  detail::check_shape(out, "C3", s.C3, s.m, rn);
  detail::check_shape(out, "D1", s.D1, s.m, s.p);
  detail::check_shape(out, "D2", s.D2, s.m, s.q);
  try {
    gram(s.basis, s.r);
  } catch (const DependentBasisError& e) {
    out.push_back(std::string("dependent basis: ") + e.what());
  } catch (const Error& e) {
    out.push_back(std::string("kernel basis: ") + e.what());
  }
  return out;
}

inline void require_valid(const DDSystem& s) {
  const auto d = validate(s);
  if (d.empty()) return;
  std::string msg = "invalid system:";
  for (const auto& x : d) msg += "\n  " + x;
  throw InputError(msg);
}

struct ClosedLoop {
  DDSystem base;
  Mat K;       // p x n
  Mat Pi1;     // A1 + B1 K
  Mat Omega1;  // C1 + D1 K
};

inline ClosedLoop close_loop(const DDSystem& sys, const Mat& K) {
  if (K.rows() != sys.p || K.cols() != sys.n) {
    throw DimensionError("close_loop: K is " + shape_str(K) + ", expected " + std::to_string(sys.p) + "x" +
                         std::to_string(sys.n));
  }
  return ClosedLoop{sys, K, sys.A1 + sys.B1 * K, sys.C1 + sys.D1 * K};
}

inline ClosedLoop open_loop(const DDSystem& sys) { return close_loop(sys, Mat::Zero(sys.p, sys.n)); }

enum class SupplyKind { l2gain, sector, passivity, custom };

inline const char* to_string(SupplyKind k) {
  switch (k) {
    case SupplyKind::l2gain: return "l2gain";
    case SupplyKind::sector: return "sector";
    case SupplyKind::passivity: return "passivity";
    case SupplyKind::custom: return "custom";
  }
  return "?";
}

/// Quadratic supply with weight [[J1^{-1}, J2], [J2^T, J3]].
/// J1 absent means J1^{-1} = 0 (passivity). For l2gain, an absent gamma
/// makes gamma a decision variable with J1 = gamma I, J3 = -gamma I.
struct SupplyRate {
  SupplyKind kind = SupplyKind::custom;
  Index m = 0, q = 0;
  std::optional<SymMat> J1;
  Mat J2;
  SymMat J3;
  std::optional<double> gamma;
  double alpha = 0.0;  // sector parameters, stored as given
  double beta = 0.0;

  bool gamma_is_variable() const { return kind == SupplyKind::l2gain && !gamma.has_value(); }
};

inline SupplyRate l2_supply(double gamma, Index m, Index q) {
  if (!(gamma > 0.0)) throw InputError("l2_supply: gamma must be positive");
  SupplyRate s;
  s.kind = SupplyKind::l2gain, s.m = m, s.q = q, s.gamma = gamma;
  s.J1 = SymMat(gamma * Mat::Identity(m, m));
  s.J2 = Mat::Zero(m, q);
  s.J3 = SymMat(-gamma * Mat::Identity(q, q));
  return s;
}

/// l2 supply whose gamma is left to the optimizer.
inline SupplyRate l2_supply_variable(Index m, Index q) {
  SupplyRate s = l2_supply(1.0, m, q);
  s.gamma.reset();
  return s;
}

/// Sector supply with J1^{-1} = I, J2 = -(alpha+gamma)/2 I, J3 = -alpha gamma I.
inline SupplyRate sector_supply(double alpha, double gamma, Index m) {
  SupplyRate s;
  s.kind = SupplyKind::sector, s.m = m, s.q = m, s.alpha = alpha, s.beta = gamma;
  s.J1 = SymMat(Mat::Identity(m, m));
  s.J2 = -0.5 * (alpha + gamma) * Mat::Identity(m, m);
  s.J3 = SymMat(-alpha * gamma * Mat::Identity(m, m));
  return s;
}

inline SupplyRate passivity_supply(Index m) {
  SupplyRate s;
  s.kind = SupplyKind::passivity, s.m = m, s.q = m;
  s.J2 = -Mat::Identity(m, m);
  s.J3 = SymMat(Mat::Zero(m, m));
  return s;
}

inline SupplyRate custom_supply(const SymMat& J1, const Mat& J2, const SymMat& J3) {
  if (J2.rows() != J1.dim() || J2.cols() != J3.dim()) throw DimensionError("custom_supply: J2 shape mismatch");
  if (J1.dim() > 0 && !(min_eig_sym(J1) > 0.0)) throw InputError("custom_supply: J1 must be positive definite");
  SupplyRate s;
  s.kind = SupplyKind::custom, s.m = J1.dim(), s.q = J3.dim();
  s.J1 = J1, s.J2 = J2, s.J3 = J3;
  return s;
}

/// Matrix J1^{-1} of the supply weight (zero for passivity). Requires fixed gamma.
inline Mat supply_j1_inverse(const SupplyRate& s) {
  if (!s.J1) return Mat::Zero(s.m, s.m);
  return s.J1->mat().inverse();
}

inline std::vector<std::string> validate(const SupplyRate& s, const DDSystem& sys) {
  std::vector<std::string> out;
  if (s.m != sys.m || s.q != sys.q) out.push_back("supply dimensions do not match the system outputs/disturbances");
  if (s.J2.rows() != s.m || s.J2.cols() != s.q) out.push_back("supply J2 has wrong shape");
  if (s.J3.dim() != s.q) out.push_back("supply J3 has wrong shape");
  if (s.J1 && s.J1->dim() != s.m) out.push_back("supply J1 has wrong shape");
  if (s.J1 && s.m > 0 && !(min_eig_sym(*s.J1) > 0.0)) out.push_back("supply J1 must be positive definite");
  if (s.kind == SupplyKind::passivity && s.J1) out.push_back("passivity supply must not carry J1");
  if (s.kind != SupplyKind::passivity && !s.J1) out.push_back("only the passivity supply may omit J1");
  if ((s.kind == SupplyKind::sector || s.kind == SupplyKind::passivity) && s.m != s.q) {
    out.push_back("sector/passivity supply requires m = q");
  }
  return out;
}

/// Index of each channel in the perturbation row of the ten state-space
/// matrices (A1, B1, A2, A3, B2 | C1, D1, C2, C3, D2).
enum Channel : int { kA1 = 0, kB1, kA2, kA3, kB2, kC1, kD1, kC2, kC3, kD2 };
inline constexpr std::array<const char*, 10> kChannelNames = {"A1", "B1", "A2", "A3", "B2",
                                                              "C1", "D1", "C2", "C3", "D2"};

/// Perturbed target = nominal + G (I - Delta F)^{-1} Delta H, with
/// Delta (a x b) in {[I; D]^T [[Xi^{-1}, Lambda], [*, Gamma]] [I; D] >= 0}.
struct UncertaintyChannel {
  Mat G;       // target_rows x a
  Mat H;       // b x target_cols
  Mat F;       // b x a
  SymMat Xi;   // b x b, positive definite
  Mat Lambda;  // b x a
  SymMat Gamma;  // a x a, negative semidefinite

  Index delta_rows() const { return G.cols(); }
  Index delta_cols() const { return H.rows(); }
  bool is_zero() const { return G.isZero(0.0) || H.isZero(0.0); }
};

struct UncertaintySet {
  std::array<UncertaintyChannel, 10> channels;

  const UncertaintyChannel& operator[](int i) const { return channels[static_cast<std::size_t>(i)]; }
  UncertaintyChannel& operator[](int i) { return channels[static_cast<std::size_t>(i)]; }
};

/// Target (rows, cols) of each channel for a given system.
inline std::pair<Index, Index> channel_target(const DDSystem& s, int i) {
  const Index rn = s.rho() * s.n;
  const Index cols[5] = {s.n, s.p, s.n, rn, s.q};
  return {i < 5 ? s.n : s.m, cols[i % 5]};
}

/// Channel with zero G and H, Delta of size a x b, Xi = I, Gamma = -I.
inline UncertaintyChannel zero_channel(Index target_rows, Index target_cols, Index a, Index b) {
  UncertaintyChannel c;
  c.G = Mat::Zero(target_rows, a);
  c.H = Mat::Zero(b, target_cols);
  c.F = Mat::Zero(b, a);
  c.Xi = SymMat(Mat::Identity(b, b));
  c.Lambda = Mat::Zero(b, a);
  c.Gamma = SymMat(-Mat::Identity(a, a));
  return c;
}

/// All ten channels zero with the default n x n Delta shape.
inline UncertaintySet zero_uncertainty(const DDSystem& s) {
  UncertaintySet u;
  for (int i = 0; i < 10; ++i) {
    const auto [rows, cols] = channel_target(s, i);
    u[i] = zero_channel(rows, cols, s.n, s.n);
  }
  return u;
}

inline std::vector<std::string> validate(const UncertaintySet& u, const DDSystem& s) {
  std::vector<std::string> out;
  for (int i = 0; i < 10; ++i) {
    const auto& c = u[i];
    const std::string tag = "uncertainty channel " + std::to_string(i + 1) + " (" + kChannelNames[i] + "): ";
    const auto [rows, cols] = channel_target(s, i);
    const Index a = c.G.cols(), b = c.H.rows();
    if (c.G.rows() != rows) out.push_back(tag + "G has " + std::to_string(c.G.rows()) + " rows, expected " + std::to_string(rows));
    if (c.H.cols() != cols) out.push_back(tag + "H has " + std::to_string(c.H.cols()) + " columns, expected " + std::to_string(cols));
    if (c.F.rows() != b || c.F.cols() != a) out.push_back(tag + "F must be " + std::to_string(b) + "x" + std::to_string(a));
    if (c.Lambda.rows() != b || c.Lambda.cols() != a) out.push_back(tag + "Lambda must be " + std::to_string(b) + "x" + std::to_string(a));
    if (c.Xi.dim() != b) out.push_back(tag + "Xi must be " + std::to_string(b) + "x" + std::to_string(b));
    else if (b > 0 && !(min_eig_sym(c.Xi) > 0.0)) out.push_back(tag + "Xi must be positive definite");
    if (c.Gamma.dim() != a) out.push_back(tag + "Gamma must be " + std::to_string(a) + "x" + std::to_string(a));
    else if (a > 0 && max_eig_sym(c.Gamma) > 1e-12 * (1.0 + inf_norm(c.Gamma.mat()))) {
      out.push_back(tag + "Gamma must be negative semidefinite");
    }
  }
  return out;
}

struct TuningParams {
  double eta1 = 1.0;
  double eta2 = 0.0;
  Vec eps;  // length rho; empty means all zero

  Vec eps_or_zero(Index rho) const {
    if (eps.size() == 0) return Vec::Zero(rho);
    if (eps.size() != rho) throw DimensionError("tuning: eps must have length rho");
    return eps;
  }
};

/// Rewrite the plant for the basis m' = S m. The distributed terms are
/// unchanged; channel H matrices acting on the distributed state follow A3.
struct ScaledProblem {
  DDSystem sys;
  std::optional<UncertaintySet> unc;
  TuningParams tuning;
};

inline ScaledProblem apply_kernel_scale(const DDSystem& sys, const std::optional<UncertaintySet>& unc,
                                        const TuningParams& tuning, const Vec& s) {
  ScaledProblem out{sys, unc, tuning};
  const ScaledBasis sb = scale(sys.basis, s);
  out.sys.basis = sb.basis;
  out.sys.A3 = sb.map.apply(sys.A3, sys.n);
  out.sys.C3 = sb.map.apply(sys.C3, sys.n);
  if (out.unc) {
    (*out.unc)[kA3].H = sb.map.apply((*unc)[kA3].H, sys.n);
    (*out.unc)[kC3].H = sb.map.apply((*unc)[kC3].H, sys.n);
  }
  if (tuning.eps.size() == s.size()) out.tuning.eps = tuning.eps.cwiseQuotient(s);
  return out;
}

}  // namespace ddsynth
