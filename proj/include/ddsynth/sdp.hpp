#pragma once

// Semidefinite backend for LMIProblem.
//
// Standard form handled by the interior-point backend (dual form):
//   maximize b^T y  s.t.  Z_k = C_k - sum_i y_i A_{k,i} >= 0  (dense blocks)
//                         z   = c   - A_lp y             >= 0  (linear rows)
// solved by an infeasible primal-dual path-following method with the HKM
// direction and Mehrotra predictor-corrector steps.
//
// Strict LMIs are posed as margin problems: maximize t subject to
// s_j (+-E_j(y)) - t I >= 0 with per-constraint scale s_j, plus a box on
// the decision variables so the problem stays bounded.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ddsynth/lmi/builders.hpp"
#include "ddsynth/lmi/problem.hpp"

namespace ddsynth {

struct SdpBlock {
  Mat C;
  std::vector<std::pair<int, Mat>> A;  // (variable index, symmetric coefficient)
  Index dim() const { return C.rows(); }
};

struct StandardSdp {
  int m = 0;  // number of free variables y
  Vec b;
  std::vector<SdpBlock> blocks;
  Mat lp_A;  // L x m
  Vec lp_c;  // L
};

struct SdpOptions {
  double gap_tol = 1e-9;
  double feas_tol = 1e-9;
  int max_iter = 200;
  double step_fraction = 0.98;
  double accept_tol = 1e-6;  // accuracy accepted once progress stalls
  std::ostream* trace = nullptr;  // line-delimited JSON per iteration
  std::string trace_tag;
};

enum class SdpStatus { optimal, stalled, iteration_limit, numerical_error };

struct SdpRaw {
  SdpStatus status = SdpStatus::numerical_error;
  Vec y;
  double pobj = 0.0, dobj = 0.0;
  double pinf = 0.0, dinf = 0.0, gap = 0.0;
  int iterations = 0;
  std::string message;
};

/// Interchangeable solver component.
class SdpBackend {
 public:
  virtual ~SdpBackend() = default;
  virtual SdpRaw solve(const StandardSdp& sdp, const SdpOptions& opt) const = 0;
  virtual std::string name() const = 0;
};

namespace detail {

/// Largest alpha in (0, inf] with X + alpha dX >= 0 (X positive definite).
inline double max_step_psd(const Mat& X, const Mat& dX) {
  if (X.rows() == 0) return INFINITY;
  Eigen::LLT<Mat> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Mat Li = llt.matrixL().solve(Mat::Identity(X.rows(), X.cols()));
  Mat T = Li * dX * Li.transpose();
  T = Mat(0.5 * (T + T.transpose()));
  const double lmin = eig_sym(T).minCoeff();
  return lmin >= 0.0 ? INFINITY : -1.0 / lmin;
}

inline double max_step_lp(const Vec& x, const Vec& dx) {
  double a = INFINITY;
  for (Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  return a;
}

inline double frob_dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

}  // namespace detail

class IpmBackend : public SdpBackend {
 public:
  std::string name() const override { return "hkm-ipm"; }

  SdpRaw solve(const StandardSdp& sdp, const SdpOptions& opt) const override {
    using detail::frob_dot;
    const int m = sdp.m;
    const std::size_t nb = sdp.blocks.size();
    const Index L = sdp.lp_c.size();
    SdpRaw out;

    // Starting point.
    double ntot = static_cast<double>(L);
    std::vector<Mat> X(nb), Z(nb);
    double normC = 0.0, normb = sdp.b.size() ? sdp.b.norm() : 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& blk = sdp.blocks[k];
      const Index d = blk.dim();
      ntot += static_cast<double>(d);
      double an = 0.0;
      for (const auto& [i, A] : blk.A) an = std::max(an, A.norm());
      normC = std::max(normC, blk.C.norm());
      const double xi = std::max({10.0, std::sqrt(static_cast<double>(d)), static_cast<double>(d) * (1.0 + normb) / (1.0 + an)});
      const double eta = std::max({10.0, std::sqrt(static_cast<double>(d)), blk.C.norm(), an});
      X[k] = xi * Mat::Identity(d, d);
      Z[k] = eta * Mat::Identity(d, d);
    }
    // Linear rows start dual feasible at y = 0 where c > 0.
    Vec x = Vec::Constant(L, 1.0), z = Vec::Constant(L, 1.0);
    if (L > 0) {
      for (Index i = 0; i < L; ++i) z(i) = std::max(1.0, sdp.lp_c(i));
      normC = std::max(normC, sdp.lp_c.norm());
    }
    Vec y = Vec::Zero(m);

    auto apply_A = [&](const std::vector<Mat>& W, const Vec& w) {
      Vec r = Vec::Zero(m);
      for (std::size_t k = 0; k < nb; ++k)
        for (const auto& [i, A] : sdp.blocks[k].A) r(i) += frob_dot(A, W[k]);
      if (L > 0) r += sdp.lp_A.transpose() * w;
      return r;
    };
    auto apply_At = [&](const Vec& v, std::vector<Mat>& W, Vec& w) {
      W.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        W[k] = Mat::Zero(sdp.blocks[k].dim(), sdp.blocks[k].dim());
        for (const auto& [i, A] : sdp.blocks[k].A) W[k] += v(i) * A;
      }
      w = L > 0 ? Vec(sdp.lp_A * v) : Vec();
    };

    int stall = 0;
    std::vector<double> history;  // max(gap, pinf, dinf) per iteration
    for (int it = 0; it <= opt.max_iter; ++it) {
      out.iterations = it;
      // Residuals.
      std::vector<Mat> Aty;
      Vec aty;
      apply_At(y, Aty, aty);
      std::vector<Mat> Rd(nb);
      double rdn2 = 0.0, pobj = 0.0, xz = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        Rd[k] = sdp.blocks[k].C - Z[k] - Aty[k];
        rdn2 += Rd[k].squaredNorm();
        pobj += frob_dot(sdp.blocks[k].C, X[k]);
        xz += frob_dot(X[k], Z[k]);
      }
      Vec rd_lp = L > 0 ? Vec(sdp.lp_c - z - aty) : Vec();
      if (L > 0) {
        rdn2 += rd_lp.squaredNorm();
        pobj += sdp.lp_c.dot(x);
        xz += x.dot(z);
      }
      const Vec Rp = sdp.b - apply_A(X, x);
      const double dobj = sdp.b.dot(y);
      const double mu = xz / ntot;
      out.pobj = pobj, out.dobj = dobj;
      out.pinf = Rp.norm() / (1.0 + normb);
      out.dinf = std::sqrt(rdn2) / (1.0 + normC);
      out.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      out.y = y;
      if (opt.trace) {
        char buf[320];
        std::snprintf(buf, sizeof buf,
                      "{\"tag\":\"%s\",\"iter\":%d,\"pobj\":%.12e,\"dobj\":%.12e,\"gap\":%.3e,\"pinf\":%.3e,\"dinf\":%.3e,\"mu\":%.3e}\n",
                      opt.trace_tag.c_str(), it, pobj, dobj, out.gap, out.pinf, out.dinf, mu);
        *opt.trace << buf;
      }
      if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(mu)) {
        out.status = SdpStatus::numerical_error;
        out.message = "non-finite iterate";
        return out;
      }
      const bool gap_ok = out.gap <= opt.gap_tol || (xz / (1.0 + std::abs(pobj) + std::abs(dobj))) <= opt.gap_tol;
      if (gap_ok && out.pinf <= opt.feas_tol && out.dinf <= opt.feas_tol) {
        out.status = SdpStatus::optimal;
        return out;
      }
      const double err = std::max({out.gap, out.pinf, out.dinf});
      history.push_back(err);
      if (history.size() > 5 && err > 0.5 * history[history.size() - 6]) {
        if (err <= opt.accept_tol) {
          out.status = SdpStatus::optimal;
          out.message = "converged to reduced accuracy";
          return out;
        }
        if (history.size() > 30 && err > 0.5 * history[history.size() - 31]) {
          out.status = SdpStatus::stalled;
          out.message = "no progress over 30 iterations";
          return out;
        }
      }
      if (it == opt.max_iter) break;

      // Schur complement.
      std::vector<Mat> Zinv(nb);
      Mat M = Mat::Zero(m, m);
      for (std::size_t k = 0; k < nb; ++k) {
        const auto& blk = sdp.blocks[k];
        Eigen::LLT<Mat> llt(Z[k]);
        if (llt.info() != Eigen::Success) {
          out.status = SdpStatus::numerical_error;
          out.message = "dual slack lost definiteness";
          return out;
        }
        Zinv[k] = llt.solve(Mat::Identity(blk.dim(), blk.dim()));
        Zinv[k] = 0.5 * (Zinv[k] + Zinv[k].transpose());
        std::vector<Mat> G(blk.A.size());
        for (std::size_t a = 0; a < blk.A.size(); ++a) G[a] = X[k] * blk.A[a].second * Zinv[k];
        for (std::size_t a = 0; a < blk.A.size(); ++a) {
          const int i = blk.A[a].first;
          for (std::size_t c = a; c < blk.A.size(); ++c) {
            const int j = blk.A[c].first;
            const double v = frob_dot(blk.A[c].second, G[a].transpose());
            M(i, j) += v;
            if (c != a) M(j, i) += v;
          }
        }
      }
      Vec xoz;
      if (L > 0) {
        xoz = x.cwiseQuotient(z);
        M += sdp.lp_A.transpose() * xoz.asDiagonal() * sdp.lp_A;
      }
      M = Mat(0.5 * (M + M.transpose()));
      Eigen::LLT<Mat> mchol(M);
      Eigen::LDLT<Mat> mldlt;
      bool use_ldlt = false;
      if (mchol.info() != Eigen::Success) {
        Mat Mr = M;
        const double reg = 1e-13 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
        Mr.diagonal().array() += reg;
        mldlt.compute(Mr);
        if (mldlt.info() != Eigen::Success) {
          out.status = SdpStatus::numerical_error;
          out.message = "Schur complement is not positive definite";
          return out;
        }
        use_ldlt = true;
      }
      auto schur_solve = [&](const Vec& h) { return use_ldlt ? Vec(mldlt.solve(h)) : Vec(mchol.solve(h)); };

      // Direction for a given sigma and second-order correction.
      std::vector<Mat> dX(nb), dZ(nb);
      Vec dx, dz, dy;
      auto direction = [&](double sigma, const std::vector<Mat>* cX, const std::vector<Mat>* cZ, const Vec* cx,
                           const Vec* cz) {
        std::vector<Mat> T(nb);
        Vec t;
        for (std::size_t k = 0; k < nb; ++k) {
          T[k] = sigma * mu * Zinv[k] - X[k] * Rd[k] * Zinv[k];
          if (cX) T[k] -= (*cX)[k] * (*cZ)[k] * Zinv[k];
        }
        if (L > 0) {
          t = (sigma * mu * z.cwiseInverse() - x.cwiseProduct(rd_lp).cwiseQuotient(z));
          if (cx) t -= cx->cwiseProduct(*cz).cwiseQuotient(z);
        }
        const Vec h = sdp.b - apply_A(T, t);
        dy = schur_solve(h);
        std::vector<Mat> Atd;
        Vec atd;
        apply_At(dy, Atd, atd);
        for (std::size_t k = 0; k < nb; ++k) {
          dZ[k] = Rd[k] - Atd[k];
          Mat D = sigma * mu * Zinv[k] - X[k] - X[k] * dZ[k] * Zinv[k];
          if (cX) D -= (*cX)[k] * (*cZ)[k] * Zinv[k];
          dX[k] = 0.5 * (D + D.transpose());
        }
        if (L > 0) {
          dz = rd_lp - atd;
          dx = sigma * mu * z.cwiseInverse() - x - x.cwiseProduct(dz).cwiseQuotient(z);
          if (cx) dx -= cx->cwiseProduct(*cz).cwiseQuotient(z);
        }
      };
      auto steps = [&](double& ap, double& ad) {
        ap = INFINITY, ad = INFINITY;
        for (std::size_t k = 0; k < nb; ++k) {
          ap = std::min(ap, detail::max_step_psd(X[k], dX[k]));
          ad = std::min(ad, detail::max_step_psd(Z[k], dZ[k]));
        }
        if (L > 0) {
          ap = std::min(ap, detail::max_step_lp(x, dx));
          ad = std::min(ad, detail::max_step_lp(z, dz));
        }
      };

      // Predictor.
      direction(0.0, nullptr, nullptr, nullptr, nullptr);
      double ap, ad;
      steps(ap, ad);
      ap = std::min(1.0, ap), ad = std::min(1.0, ad);
      double xz_aff = 0.0;
      for (std::size_t k = 0; k < nb; ++k) xz_aff += frob_dot(X[k] + ap * dX[k], Z[k] + ad * dZ[k]);
      if (L > 0) xz_aff += (x + ap * dx).dot(z + ad * dz);
      const double ratio = std::clamp(xz_aff / xz, 0.0, 1.0);
      const double sigma = std::clamp(ratio * ratio * ratio, 0.0, 1.0);
      const std::vector<Mat> pX = dX, pZ = dZ;
      const Vec px = dx, pz = dz;

      // Corrector.
      direction(sigma, &pX, &pZ, L > 0 ? &px : nullptr, L > 0 ? &pz : nullptr);
      steps(ap, ad);
      ap = std::min(1.0, opt.step_fraction * ap);
      ad = std::min(1.0, opt.step_fraction * ad);
      if (ap < 1e-12 && ad < 1e-12) {
        if (++stall >= 3) {
          out.status = SdpStatus::stalled;
          out.message = "step length collapsed";
          return out;
        }
      } else {
        stall = 0;
      }
      for (std::size_t k = 0; k < nb; ++k) {
        X[k] += ap * dX[k];
        Z[k] += ad * dZ[k];
        X[k] = 0.5 * (X[k] + X[k].transpose());
        Z[k] = 0.5 * (Z[k] + Z[k].transpose());
      }
      if (L > 0) {
        x += ap * dx;
        z += ad * dz;
      }
      y += ad * dy;
    }
    out.status = SdpStatus::iteration_limit;
    out.message = "iteration cap reached";
    return out;
  }
};

inline std::shared_ptr<const SdpBackend> default_backend() { return std::make_shared<IpmBackend>(); }

enum class CertStatus { feasible, infeasible, numerical_failure, unbounded };

inline const char* to_string(CertStatus s) {
  switch (s) {
    case CertStatus::feasible: return "feasible";
    case CertStatus::infeasible: return "infeasible";
    case CertStatus::numerical_failure: return "numerical-failure";
    case CertStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct SolverOptions {
  double gap_tol = 1e-9;
  int max_iter = 200;
  double feas_threshold = 1e-7;  // relative threshold on the scaled margin
  double box = 0.0;              // initial variable box; 0 selects automatically
  double max_box = 1e8;
  double strict_margin = 1e-8;   // scaled margin kept while minimizing
  std::ostream* trace = nullptr;
  std::shared_ptr<const SdpBackend> backend;
};

struct Certificate {
  CertStatus status = CertStatus::numerical_failure;
  Vec y;                                  // scalar degrees of freedom
  std::map<std::string, Mat> assignment;  // per-variable matrix values
  double margin = 0.0;                    // min over constraints of the verified unscaled margin
  double t_star = 0.0;                    // optimal scaled margin of the margin problem
  std::optional<double> objective_value;
  int iterations = 0;
  std::vector<double> constraint_margins;  // per constraint, unscaled
  std::string message;

  bool feasible() const { return status == CertStatus::feasible; }
};

/// Margin of every constraint at y: min_eig(E) for E > 0, min_eig(-E) for E < 0.
inline std::vector<double> constraint_margins(const LMIProblem& p, const Vec& y) {
  std::vector<double> out;
  out.reserve(p.constraints().size());
  for (const auto& c : p.constraints()) {
    const Mat e = c.expr.evaluate(y);
    const Mat s = 0.5 * (e + e.transpose());
    out.push_back(c.sense == Sense::pos ? min_eig_sym(s) : min_eig_sym(Mat(-s)));
  }
  return out;
}

/// Recomputes all eigenvalues from the assignment and checks the stated margin.
inline bool verify_certificate(const LMIProblem& p, const Certificate& cert, double tol = 1e-9) {
  if (cert.status != CertStatus::feasible) return false;
  if (cert.y.size() != p.num_dofs()) return false;
  const auto ms = constraint_margins(p, cert.y);
  for (double v : ms)
    if (!(v >= cert.margin - tol) || !(v > 0.0)) return false;
  return true;
}

namespace detail {

struct Scaled {
  StandardSdp sdp;
  std::vector<double> scale;
  double max_const = 0.0;
  bool homogeneous = true;
};

/// Builds the standard form. With `margin_var` the last variable is the
/// margin t (objective max t, t <= 1); otherwise `fixed_margin` is kept.
inline Scaled to_standard(const LMIProblem& p, bool margin_var, double fixed_margin, const Vec* objective, double box) {
  Scaled s;
  const int nd = p.num_dofs();
  const int m = nd + (margin_var ? 1 : 0);
  s.sdp.m = m;
  s.sdp.b = Vec::Zero(m);
  if (margin_var) s.sdp.b(nd) = 1.0;
  if (objective) s.sdp.b.head(nd) = -*objective;
  for (const auto& c : p.constraints()) {
    const double cn = inf_norm(c.expr.constant());
    double an = 0.0;
    for (const auto& [k, a] : c.expr.terms()) an = std::max(an, inf_norm(a));
    double sc = 1.0;
    if (cn > 1e-9 * an && cn > 0.0) sc = 1.0 / cn;
    else if (an > 0.0) sc = 1.0 / an;
    if (cn > 0.0) s.homogeneous = false;
    const double sign = c.sense == Sense::pos ? 1.0 : -1.0;
    SdpBlock blk;
    const Index d = c.expr.rows();
    blk.C = sign * sc * c.expr.constant();
    if (!margin_var) blk.C -= fixed_margin * Mat::Identity(d, d);
    s.max_const = std::max(s.max_const, sc * cn);
    for (const auto& [k, a] : c.expr.terms()) {
      if (a.isZero(0.0)) continue;
      blk.A.emplace_back(k, Mat(-sign * sc * a));
    }
    if (margin_var) blk.A.emplace_back(nd, Mat::Identity(d, d));
    s.scale.push_back(sc);
    s.sdp.blocks.push_back(std::move(blk));
  }
  // Box |y_i| <= box on the decision variables, and t <= 1.
  const Index L = 2 * nd + (margin_var ? 1 : 0);
  s.sdp.lp_A = Mat::Zero(L, m);
  s.sdp.lp_c = Vec::Constant(L, box);
  for (int i = 0; i < nd; ++i) {
    s.sdp.lp_A(2 * i, i) = 1.0;
    s.sdp.lp_A(2 * i + 1, i) = -1.0;
  }
  if (margin_var) {
    s.sdp.lp_A(L - 1, nd) = 1.0;
    s.sdp.lp_c(L - 1) = 1.0;
  }
  return s;
}

inline Certificate finish(const LMIProblem& p, Certificate cert) {
  cert.constraint_margins = constraint_margins(p, cert.y);
  cert.margin = INFINITY;
  for (double v : cert.constraint_margins) cert.margin = std::min(cert.margin, v);
  if (cert.constraint_margins.empty()) cert.margin = 0.0;
  for (const auto& v : p.variables()) cert.assignment[v.name] = p.value(v, cert.y);
  return cert;
}

inline bool box_active(const Vec& y, int nd, double box) {
  for (int i = 0; i < nd; ++i)
    if (std::abs(y(i)) >= 0.99 * box) return true;
  return false;
}

inline double scaled_min_margin(const LMIProblem& p, const std::vector<double>& scale, const Vec& y) {
  const auto ms = constraint_margins(p, y);
  double out = INFINITY;
  for (std::size_t j = 0; j < ms.size(); ++j) out = std::min(out, scale[j] * ms[j]);
  return ms.empty() ? INFINITY : out;
}

}  // namespace detail

/// Strict feasibility of every constraint via the margin problem.
inline Certificate solve_feasibility(const LMIProblem& p, const SolverOptions& opt = {}) {
  const auto backend = opt.backend ? opt.backend : default_backend();
  SdpOptions so;
  so.gap_tol = opt.gap_tol, so.feas_tol = opt.gap_tol, so.max_iter = opt.max_iter, so.trace = opt.trace;
  so.trace_tag = "feasibility";
  const int nd = p.num_dofs();
  Certificate cert;
  if (p.constraints().empty()) {
    cert.status = CertStatus::feasible;
    cert.y = Vec::Zero(nd);
    return detail::finish(p, cert);
  }
  bool homogeneous = true;
  for (const auto& c : p.constraints())
    if (inf_norm(c.expr.constant()) > 0.0) homogeneous = false;
  double box = opt.box > 0.0 ? opt.box : (homogeneous ? 1.0 : 100.0);
  int total_iters = 0;
  for (;;) {
    const detail::Scaled s = detail::to_standard(p, true, 0.0, nullptr, box);
    const SdpRaw raw = backend->solve(s.sdp, so);
    total_iters += raw.iterations;
    const double threshold = opt.feas_threshold * (1.0 + s.max_const);
    cert.y = raw.y.size() == nd + 1 ? Vec(raw.y.head(nd)) : Vec::Zero(nd);
    cert.t_star = raw.y.size() == nd + 1 ? raw.y(nd) : 0.0;
    cert.iterations = total_iters;
    // A point is feasible when its verified scaled margin clears the
    // threshold, whatever the solver's convergence state.
    const double verified = detail::scaled_min_margin(p, s.scale, cert.y);
    if (verified > threshold) {
      cert.status = CertStatus::feasible;
      cert.message = raw.message;
      return detail::finish(p, cert);
    }
    if (raw.status != SdpStatus::optimal) {
      cert.status = CertStatus::numerical_failure;
      cert.message = "solver: " + raw.message;
      return detail::finish(p, cert);
    }
    if (!homogeneous && detail::box_active(cert.y, nd, box) && box * 100.0 <= opt.max_box) {
      box *= 100.0;
      continue;
    }
    cert.status = CertStatus::infeasible;
    char buf[128];
    std::snprintf(buf, sizeof buf, "optimal margin %.3e is below threshold %.3e", cert.t_star, threshold);
    cert.message = buf;
    return detail::finish(p, cert);
  }
}

/// Minimizes the problem's linear objective over the strict constraints
/// (kept with a small fixed scaled margin). Runs a feasibility phase first.
inline Certificate minimize_linear(const LMIProblem& p, const SolverOptions& opt = {}) {
  if (!p.objective()) throw InputError("minimize_linear: problem has no objective");
  const AffineExpr& obj = *p.objective();
  const int nd = p.num_dofs();
  Vec c = Vec::Zero(nd);
  for (const auto& [k, a] : obj.terms()) c(k) = a(0, 0);

  Certificate feas = solve_feasibility(p, opt);
  if (!feas.feasible()) return feas;

  const auto backend = opt.backend ? opt.backend : default_backend();
  SdpOptions so;
  so.gap_tol = opt.gap_tol, so.feas_tol = opt.gap_tol, so.max_iter = opt.max_iter, so.trace = opt.trace;
  so.trace_tag = "minimize";

  double box = opt.box > 0.0 ? opt.box : 1e4;
  box = std::max(box, 2.0 * feas.y.cwiseAbs().maxCoeff());
  std::optional<Certificate> best;
  int total_iters = feas.iterations;
  for (;;) {
    detail::Scaled probe = detail::to_standard(p, true, 0.0, nullptr, box);
    std::vector<double> scale = probe.scale;
    const double delta = std::min(opt.strict_margin * (1.0 + probe.max_const),
                                  0.5 * detail::scaled_min_margin(p, scale, feas.y));
    const detail::Scaled s = detail::to_standard(p, false, delta, &c, box);
    const SdpRaw raw = backend->solve(s.sdp, so);
    total_iters += raw.iterations;
    Certificate cert;
    cert.y = raw.y.size() == nd ? raw.y : Vec::Zero(nd);
    cert.iterations = total_iters;
    cert.t_star = feas.t_star;
    const double verified = detail::scaled_min_margin(p, scale, cert.y);
    if (!(verified > 0.0) || raw.status == SdpStatus::numerical_error) {
      if (best) return *best;
      feas.message = "minimization failed (" + raw.message + "); returning the feasibility point";
      feas.objective_value = obj.evaluate(feas.y)(0, 0);
      return feas;
    }
    cert.status = CertStatus::feasible;
    cert.objective_value = obj.evaluate(cert.y)(0, 0);
    cert.message = raw.status == SdpStatus::optimal ? "" : raw.message;
    cert = detail::finish(p, cert);
    const bool active = detail::box_active(cert.y, nd, box);
    if (!active) return cert;
    const bool improving =
        !best || *cert.objective_value < *best->objective_value - 1e-7 * (1.0 + std::abs(*best->objective_value));
    if (!improving) return *best;
    best = cert;
    if (box * 100.0 > opt.max_box) {
      best->status = CertStatus::unbounded;
      best->message = "objective keeps decreasing as the variable box grows";
      return *best;
    }
    box *= 100.0;
  }
}

struct SynthesisResult {
  Mat K;
  std::optional<double> gamma;
  Mat P, Q, R, S, U;
  double x_cond = 0.0;
  double residual = 0.0;  // ||K X - V||_inf
  std::optional<double> kappa1, kappa2;
};

/// K = V X^{-1}; functional matrices recovered through the congruence
/// P = X^{-T} Pc X^{-1}, Q = X^{-T} Qc (I (x) X)^{-1}, and so on.
inline SynthesisResult extract_synthesis(const Certificate& cert, const LMIProblem& p) {
  if (!cert.feasible()) throw InputError("extract_synthesis: certificate is not feasible");
  auto get = [&](const char* name) -> const Mat& {
    auto it = cert.assignment.find(name);
    if (it == cert.assignment.end()) throw InputError(std::string("extract_synthesis: missing variable ") + name);
    return it->second;
  };
  const Mat& X = get(names::kX);
  const Mat& V = get(names::kV);
  SynthesisResult res;
  res.x_cond = cond2(X);
  if (!(res.x_cond <= 1e12)) throw NumericalFailure("extract_synthesis: X is numerically singular (cond " +
                                                    std::to_string(res.x_cond) + ")");
  const Index n = X.rows();
  const Mat Xi = X.fullPivLu().inverse();
  res.K = V * Xi;
  res.residual = inf_norm(res.K * X - V);
  if (p.has_var(names::kPc)) {
    const Mat& Qc = get(names::kQc);
    const Index rho = Qc.cols() / n;
    const Mat IXi = kron(Mat::Identity(rho, rho), Xi);
    auto sym = [](const Mat& a) { return Mat(0.5 * (a + a.transpose())); };
    res.P = sym(Xi.transpose() * get(names::kPc) * Xi);
    res.Q = Xi.transpose() * Qc * IXi;
    res.R = sym(IXi.transpose() * get(names::kRc) * IXi);
    res.S = sym(Xi.transpose() * get(names::kSc) * Xi);
    res.U = sym(Xi.transpose() * get(names::kUc) * Xi);
  }
  if (auto it = cert.assignment.find(names::kGamma); it != cert.assignment.end()) res.gamma = it->second(0, 0);
  if (auto it = cert.assignment.find(names::kKappa1); it != cert.assignment.end()) res.kappa1 = it->second(0, 0);
  if (auto it = cert.assignment.find(names::kKappa2Inv); it != cert.assignment.end()) res.kappa2 = 1.0 / it->second(0, 0);
  return res;
}

}  // namespace ddsynth
