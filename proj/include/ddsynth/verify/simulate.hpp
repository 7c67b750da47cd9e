#pragma once

// Fixed-step RK4 integration of the closed loop with a history buffer on the
// step grid. Between grid points x is a cubic through neighbouring samples
// taken from one side of t = 0 only, since the derivative generally jumps
// there. The distributed term integrates the kernel against that interpolant
// cell by cell with 3-point Gauss rules.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ddsynth/kernelbasis.hpp"
#include "ddsynth/model.hpp"

namespace ddsynth {

using SignalFn = std::function<Vec(double)>;

struct Trajectory {
  double h = 0.0;
  std::vector<double> t;
  std::vector<Vec> x, z, w;
};

class SimulationOverflow : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

namespace detail {

/// Lagrange weights at s for the first `count` entries of `nodes`.
inline std::array<double, 4> lagrange_weights(const std::array<double, 4>& nodes, int count, double s) {
  std::array<double, 4> l{};
  for (int i = 0; i < count; ++i) {
    double v = 1.0;
    for (int j = 0; j < count; ++j)
      if (j != i) v *= (s - nodes[static_cast<std::size_t>(j)]) /
                       (nodes[static_cast<std::size_t>(i)] - nodes[static_cast<std::size_t>(j)]);
    l[static_cast<std::size_t>(i)] = v;
  }
  return l;
}

/// One quadrature node of the distributed integral: x is read in grid cell
/// `cell` (relative to the current step) at fraction `s`, or on the current
/// half cell when `cell` is kHalfCell.
struct KernelNode {
  Index cell;
  double s;
  Mat weight;
};
inline constexpr Index kHalfCell = std::numeric_limits<Index>::min();

/// Nodes for the integral over tau in [-r, 0] at time (cur + frac) h,
/// frac in {0, 1/2}; weight = quadrature weight * C * (m(tau) (x) I_n).
inline std::vector<KernelNode> kernel_nodes(const Mat& C, const LiftedKernel& lk, Index R, double h, bool half) {
  static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  std::vector<KernelNode> out;
  // Piece covering tau in [lo, hi] (units of h) inside cell `cell` starting at s0.
  auto piece = [&](double lo, double hi, Index cell, double s_at_lo) {
    for (int g = 0; g < 3; ++g) {
      const double tau = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx[g];
      const Mat Mk = lk.eval_lifted(tau * h);
      out.push_back({cell, s_at_lo + (tau - lo), Mat(0.5 * (hi - lo) * h * gw[g] * C * Mk)});
    }
  };
  const double off = half ? 0.5 : 0.0;
  if (half) piece(-0.5, 0.0, kHalfCell, 0.0);
  for (Index c = 0; c + (half ? 1 : 0) < R; ++c) {
    const double hi = -off - static_cast<double>(c);
    piece(hi - 1.0, hi, -c - 1, 0.0);
  }
  if (half) piece(-static_cast<double>(R), -static_cast<double>(R) + 0.5, -R, 0.5);
  return out;
}

}  // namespace detail

/// Simulates the closed loop from history phi on [-r, 0] under disturbance w.
/// Stores samples every `record_every` steps.
inline Trajectory simulate(const ClosedLoop& cl, const SignalFn& phi, const SignalFn& w, double T, double h,
                           int record_every = 1) {
  const DDSystem& s = cl.base;
  const Index n = s.n, q = s.q, m = s.m;
  if (!(h > 0.0) || !(T >= 0.0)) throw InputError("simulate: step and horizon must be positive");
  const double ratio = s.r / h;
  const Index R = static_cast<Index>(std::llround(ratio));
  if (R < 3 || std::abs(ratio - static_cast<double>(R)) > 1e-9 * ratio) {
    throw InputError("simulate: step h must divide the delay r into at least 3 steps");
  }
  const Index steps = static_cast<Index>(std::llround(T / h));
  const LiftedKernel lk = lift(s.basis, n);
  const bool has_a3 = !s.A3.isZero(0.0), has_c3 = m > 0 && !s.C3.isZero(0.0);
  std::vector<detail::KernelNode> KA0, KA5, KC0;
  if (has_a3) KA0 = detail::kernel_nodes(s.A3, lk, R, h, false), KA5 = detail::kernel_nodes(s.A3, lk, R, h, true);
  if (has_c3) KC0 = detail::kernel_nodes(s.C3, lk, R, h, false);

  // buf[i] = x((i - R) h).
  std::vector<Vec> buf;
  buf.reserve(static_cast<std::size_t>(R + steps + 2));
  for (Index i = 0; i <= R; ++i) {
    Vec v = phi(static_cast<double>(i - R) * h);
    if (v.size() != n) throw DimensionError("simulate: initial function has wrong length");
    buf.push_back(v);
  }
  auto wval = [&](double t) -> Vec {
    if (q == 0) return Vec();
    Vec v = w(t);
    if (v.size() != q) throw DimensionError("simulate: disturbance has wrong length");
    return v;
  };
  const Index base = R;  // buf index of t = 0
  Vec tmp(n);
  // x in grid cell [gi, gi + 1] at fraction s; samples up to `last` exist.
  auto cell_value = [&](Index gi, double sfrac, Index last) -> const Vec& {
    if (sfrac == 0.0) return buf[static_cast<std::size_t>(gi)];
    const Index lo_range = gi < base ? 0 : base, hi_range = gi < base ? base : last;
    const int count = static_cast<int>(std::min<Index>(4, hi_range - lo_range + 1));
    const Index lo = std::clamp(gi - 1, lo_range, hi_range - count + 1);
    const std::array<double, 4> nodes{0.0, 1.0, 2.0, 3.0};
    const auto l = detail::lagrange_weights(nodes, count, static_cast<double>(gi - lo) + sfrac);
    tmp.setZero();
    for (int i = 0; i < count; ++i) tmp += l[static_cast<std::size_t>(i)] * buf[static_cast<std::size_t>(lo + i)];
    return tmp;
  };
  // x on [cur, cur + 1/2] (in steps) from the samples at and before cur and the stage value xs at cur + 1/2.
  auto half_value = [&](Index cur, const Vec& xs, double sfrac) -> Vec {
    const int back = static_cast<int>(std::min<Index>(2, cur));
    std::array<double, 4> nodes{};
    int count = 0;
    for (int k = back; k >= 0; --k) nodes[static_cast<std::size_t>(count++)] = -k;
    nodes[static_cast<std::size_t>(count++)] = 0.5;
    const auto l = detail::lagrange_weights(nodes, count, sfrac);
    Vec v = l[static_cast<std::size_t>(count - 1)] * xs;
    for (int i = 0; i + 1 < count; ++i)
      v += l[static_cast<std::size_t>(i)] * buf[static_cast<std::size_t>(base + cur - back + i)];
    return v;
  };
  Vec acc(n);
  auto distributed = [&](const std::vector<detail::KernelNode>& nodes, Index cur, const Vec& xs, Index last) -> Vec {
    acc.setZero();
    for (const auto& nd : nodes) {
      if (nd.cell == detail::kHalfCell) acc.noalias() += nd.weight * half_value(cur, xs, nd.s);
      else acc.noalias() += nd.weight * cell_value(base + cur + nd.cell, nd.s, last);
    }
    return acc;
  };
  // Right-hand side at (cur + frac) h with stage value xs; for frac = 0 the
  // sample buf[base + cur] must hold xs.
  auto rhs = [&](Index cur, bool half, const Vec& xs, const Vec& wv) -> Vec {
    const Index last = base + cur;
    Vec d = cl.Pi1 * xs;
    d.noalias() += s.A2 * cell_value(base + cur - R, half ? 0.5 : 0.0, last);
    if (has_a3) d += distributed(half ? KA5 : KA0, cur, xs, last);
    if (q > 0) d += s.B2 * wv;
    return d;
  };
  auto output = [&](Index cur, const Vec& xs, const Vec& wv) -> Vec {
    if (m == 0) return Vec();
    const Index last = base + cur;
    Vec zv = cl.Omega1 * xs;
    zv.noalias() += s.C2 * buf[static_cast<std::size_t>(base + cur - R)];
    if (has_c3) zv += distributed(KC0, cur, xs, last);
    if (q > 0) zv += s.D2 * wv;
    return zv;
  };

  Trajectory tr;
  tr.h = h;
  auto record = [&](Index cur) {
    const double t = static_cast<double>(cur) * h;
    const Vec& xs = buf[static_cast<std::size_t>(base + cur)];
    const Vec wv = wval(t);
    tr.t.push_back(t);
    tr.x.push_back(xs);
    tr.w.push_back(wv);
    tr.z.push_back(output(cur, xs, wv));
  };
  record(0);
  for (Index cur = 0; cur < steps; ++cur) {
    const double t = static_cast<double>(cur) * h;
    const Vec x0 = buf[static_cast<std::size_t>(base + cur)];
    const Vec w0 = wval(t), wm = wval(t + 0.5 * h), w1 = wval(t + h);
    const Vec k1 = rhs(cur, false, x0, w0);
    const Vec k2 = rhs(cur, true, x0 + 0.5 * h * k1, wm);
    const Vec k3 = rhs(cur, true, x0 + 0.5 * h * k2, wm);
    // The end-of-step stage reads the provisional sample x0 + h k3.
    buf.push_back(x0 + h * k3);
    const Vec k4 = rhs(cur + 1, false, buf.back(), w1);
    buf.back() = x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!buf.back().allFinite() || buf.back().cwiseAbs().maxCoeff() > 1e150) {
      throw SimulationOverflow("simulate: state overflow at t = " + std::to_string(t + h));
    }
    if ((cur + 1) % record_every == 0 || cur + 1 == steps) record(cur + 1);
  }
  return tr;
}

/// Trapezoidal L2 norm of a sampled signal.
inline double l2_norm(const std::vector<double>& t, const std::vector<Vec>& v) {
  double acc = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    acc += 0.5 * (t[i] - t[i - 1]) * (v[i - 1].squaredNorm() + v[i].squaredNorm());
  }
  return std::sqrt(acc);
}

/// Fixed seeded probe suite: six log-spaced sinusoids on 0.01..10 rad/s and
/// six band-limited noises, each along a seeded unit direction.
inline std::vector<SignalFn> default_probes(Index q, unsigned seed = 20240601u) {
  std::vector<SignalFn> out;
  if (q == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto direction = [&] {
    Vec v(q);
    for (Index i = 0; i < q; ++i) v(i) = gauss(rng);
    return Vec(v / v.norm());
  };
  for (int k = 0; k < 6; ++k) {
    const double omega = std::pow(10.0, -2.0 + 3.0 * k / 5.0);
    const Vec dir = direction();
    out.push_back([omega, dir](double t) { return Vec(std::sin(omega * t) * dir); });
  }
  for (int k = 0; k < 6; ++k) {
    constexpr int kTones = 16;
    std::vector<double> om(kTones), ph(kTones);
    std::vector<Vec> amp(kTones);
    for (int j = 0; j < kTones; ++j) {
      om[j] = std::pow(10.0, -2.0 + 3.0 * unif(rng));
      ph[j] = 2.0 * M_PI * unif(rng);
      amp[j] = direction() * gauss(rng);
    }
    out.push_back([om, ph, amp, q](double t) {
      Vec v = Vec::Zero(q);
      for (int j = 0; j < kTones; ++j) v += std::sin(om[j] * t + ph[j]) * amp[j];
      return v;
    });
  }
  return out;
}

/// Largest ||z||_2 / ||w||_2 over the probes from zero initial state. A lower
/// bound on the L2 gain of a stable loop.
inline double empirical_l2_gain(const ClosedLoop& cl, const std::vector<SignalFn>& probes, double T, double h,
                                double abscissa) {
  if (!(abscissa < 0.0)) throw InputError("empirical_l2_gain: closed loop is not stable");
  const Index n = cl.base.n;
  double best = 0.0;
  const SignalFn zero_phi = [n](double) { return Vec(Vec::Zero(n)); };
  for (const auto& w : probes) {
    const Trajectory tr = simulate(cl, zero_phi, w, T, h);
    if (cl.base.m == 0) continue;
    const double wn = l2_norm(tr.t, tr.w);
    if (wn > 0.0) best = std::max(best, l2_norm(tr.t, tr.z) / wn);
  }
  return best;
}

/// Least-squares slope of log ||x(t)|| over t in [t0, t1].
inline double decay_rate(const Trajectory& tr, double t0, double t1) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    if (tr.t[i] < t0 || tr.t[i] > t1) continue;
    const double nx = tr.x[i].norm();
    if (!(nx > 0.0)) continue;
    const double y = std::log(nx);
    sx += tr.t[i], sy += y, sxx += tr.t[i] * tr.t[i], sxy += tr.t[i] * y;
    ++k;
  }
  if (k < 2) throw InputError("decay_rate: not enough samples in window");
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace ddsynth
