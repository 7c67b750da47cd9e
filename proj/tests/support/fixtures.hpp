#pragma once

// Shared test data and independent numerical oracles.

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <string>

#include "ddsynth/io.hpp"
#include "ddsynth/model.hpp"

namespace ddsynth::testing {

inline std::string config_path(const std::string& name) { return std::string(DDSYNTH_CONFIG_DIR) + "/" + name; }

inline ProblemFile load_config(const std::string& name) {
  return parse_problem(parse_json(read_file(config_path(name)), name));
}

inline KernelBasis trig12_basis() {
  Mat M(3, 3);
  M << 0, 0, 0, 0, 0, 12, 0, -12, 0;
  Vec m0(3);
  m0 << 1, 0, 1;
  return make_basis(M, m0);
}

inline KernelBasis damped20_basis() {
  Mat M(3, 3);
  M << 0, 0, 0, 0, 1, 20, 0, -20, 1;
  Vec m0(3);
  m0 << 1, 0, 10;
  return make_basis(M, m0);
}

inline KernelBasis constant_basis() { return make_basis(Mat::Zero(1, 1), Vec::Ones(1)); }

/// Scalar plant with the trig kernel: x' = 0.395 x - 5 int cos(12 tau) x(t+tau).
inline DDSystem trig_plant(double r) {
  DDSystem s = DDSystem::zeros(1, 0, 0, 0, r, trig12_basis());
  s.A1(0, 0) = 0.395;
  s.A3 << 0, 0, -5;
  return s;
}

/// Two-state plant with the damped kernel, loaded from the shipped config.
inline DDSystem damped_plant() { return load_config("dissipative_synthesis.json").sys; }

/// Scalar delay-free plant x' = a x + b u + w, z = x.
inline DDSystem scalar_plant(double a, double b = 0.0) {
  DDSystem s = DDSystem::zeros(1, 1, b != 0.0 ? 1 : 0, 1, 1.0, constant_basis());
  s.A1(0, 0) = a;
  if (b != 0.0) s.B1(0, 0) = b;
  s.B2(0, 0) = 1.0;
  s.C1(0, 0) = 1.0;
  return s;
}

inline Mat random_mat(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat a(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) a(i, j) = nd(rng);
  return a;
}

inline Mat random_orthogonal(std::mt19937_64& rng, Index n) {
  Eigen::HouseholderQR<Mat> qr(random_mat(rng, n, n));
  return qr.householderQ();
}

/// Adaptive Simpson quadrature of a scalar function.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int depth = 40) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, eps / 2.0, d - 1) + rec(mid, hi, fmid, frm, fhi, right, eps / 2.0, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

/// Newton iteration on a complex scalar equation.
inline std::complex<double> newton(const std::function<std::complex<double>(std::complex<double>)>& f,
                                   const std::function<std::complex<double>(std::complex<double>)>& df,
                                   std::complex<double> z, int iters = 60) {
  for (int i = 0; i < iters; ++i) z -= f(z) / df(z);
  return z;
}

/// Gauss-Legendre rule on [-1, 1] from Newton iteration on P_k.
inline std::pair<Vec, Vec> legendre_rule(int k) {
  Vec x(k), w(k);
  for (int i = 0; i < k; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (k + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= k; ++j) {
        const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1, p1 = p2;
      }
      dp = k * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x(i) = z;
    w(i) = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Composite Gauss-Legendre on [a, b]: `panels` panels of `k` nodes each.
struct CompositeRule {
  std::vector<double> t, w;
};

inline CompositeRule composite_rule(double a, double b, int panels, int k) {
  const auto [x, w] = legendre_rule(k);
  CompositeRule out;
  const double hw = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * hw;
    for (int i = 0; i < k; ++i) {
      out.t.push_back(lo + 0.5 * hw * (x(i) + 1.0));
      out.w.push_back(0.5 * hw * w(i));
    }
  }
  return out;
}

}  // namespace ddsynth::testing
