#pragma once

// Rightmost characteristic roots by pseudospectral discretization of the
// infinitesimal generator on N+1 Chebyshev extremal nodes of [-r, 0].
// Spectral accuracy holds as long as the distributed integral is evaluated
// accurately on the polynomial interpolant of the state.

#include <algorithm>
#include <vector>

#include "ddsynth/kernelbasis.hpp"
#include "ddsynth/model.hpp"

namespace ddsynth {

struct SpectralReport {
  int N = 0;
  std::vector<std::complex<double>> roots;  // descending real part
  double abscissa = 0.0;
};

/// Chebyshev extremal nodes x_j = cos(pi j / N) on [-1, 1] and the
/// differentiation matrix acting on values at those nodes.
inline std::pair<Vec, Mat> chebyshev_nodes(int N) {
  Vec x(N + 1);
  for (int j = 0; j <= N; ++j) x(j) = std::cos(M_PI * j / N);
  Vec c(N + 1);
  for (int j = 0; j <= N; ++j) c(j) = ((j == 0 || j == N) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0);
  Mat D = Mat::Zero(N + 1, N + 1);
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j)
      if (i != j) D(i, j) = c(i) / c(j) / (x(i) - x(j));
    D(i, i) = -D.row(i).sum();
  }
  return {x, D};
}

/// Clenshaw-Curtis weights on the extremal nodes for integration over [-1, 1].
inline Vec clenshaw_curtis_weights(int N) {
  Vec w = Vec::Zero(N + 1);
  const double Nd = N;
  Vec v = Vec::Ones(std::max(N - 1, 0));
  if (N % 2 == 0) {
    w(0) = w(N) = 1.0 / (Nd * Nd - 1.0);
    for (int k = 1; k < N / 2; ++k)
      for (int i = 1; i < N; ++i) v(i - 1) -= 2.0 * std::cos(2.0 * k * M_PI * i / Nd) / (4.0 * k * k - 1.0);
    for (int i = 1; i < N; ++i) v(i - 1) -= std::cos(Nd * M_PI * i / Nd) / (Nd * Nd - 1.0);
  } else {
    w(0) = w(N) = 1.0 / (Nd * Nd);
    for (int k = 1; k <= (N - 1) / 2; ++k)
      for (int i = 1; i < N; ++i) v(i - 1) -= 2.0 * std::cos(2.0 * k * M_PI * i / Nd) / (4.0 * k * k - 1.0);
  }
  for (int i = 1; i < N; ++i) w(i) = 2.0 * v(i - 1) / Nd;
  return w;
}

/// Weights for the distributed term.
///   clenshaw_curtis: w_j A3 M(theta_j) (integrand sampled at the nodes)
///   product: A3 (int l_j(theta) m(theta) dtheta (x) I_n), the kernel
///            integrated exactly against each Lagrange basis polynomial
/// The product rule keeps spectral convergence when the kernel oscillates
/// faster than the node set resolves.
enum class DistributedRule { clenshaw_curtis, product };

/// Columns j = 0..N: int over [-r, 0] of l_j(theta) m(theta), where l_j is the
/// Lagrange polynomial on the mapped Chebyshev extremal nodes.
inline Mat product_weights(const KernelBasis& basis, double r, int N) {
  const auto [xn, D] = chebyshev_nodes(N);
  (void)D;
  Vec bw(N + 1);  // barycentric weights for extremal nodes
  for (int j = 0; j <= N; ++j) bw(j) = ((j % 2) ? -1.0 : 1.0) * ((j == 0 || j == N) ? 0.5 : 1.0);
  const double omega = basis.generator().size() ? eig(basis.generator()).cwiseAbs().maxCoeff() : 0.0;
  const int panels = std::max({4, static_cast<int>(std::ceil(omega * r)), (N + 3) / 4});
  const auto [gx, gw] = gauss_legendre(16);
  Mat out = Mat::Zero(basis.rho(), N + 1);
  Vec lag(N + 1);
  for (int p = 0; p < panels; ++p) {
    const double a = -1.0 + 2.0 * p / panels, b = -1.0 + 2.0 * (p + 1) / panels;
    for (int g = 0; g < gx.size(); ++g) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * gx(g);
      const double wq = 0.5 * (b - a) * gw(g) * (r / 2.0);
      int hit = -1;
      double den = 0.0;
      for (int j = 0; j <= N; ++j) {
        const double d = x - xn(j);
        if (d == 0.0) {
          hit = j;
          break;
        }
        lag(j) = bw(j) / d;
        den += lag(j);
      }
      if (hit >= 0) lag.setZero(), lag(hit) = 1.0;
      else lag /= den;
      out += (wq * basis.eval(r * (x - 1.0) / 2.0)) * lag.transpose();
    }
  }
  return out;
}

/// Discretized generator of x' = A1 x + A2 x(t-r) + A3 int M(tau) x(t+tau).
/// Block 0 is x(0); block j is x(theta_j), theta_j = r (x_j - 1) / 2.
inline Mat pseudospectral_generator(const Mat& A1, const Mat& A2, const Mat& A3, const KernelBasis& basis, double r,
                                    int N, DistributedRule rule = DistributedRule::product) {
  if (N < 4) throw InputError("spectral_abscissa: discretization index must be >= 4");
  if (!(r > 0.0)) throw InputError("spectral_abscissa: delay must be positive");
  const Index n = A1.rows();
  const auto [x, D] = chebyshev_nodes(N);
  Mat G = Mat::Zero((N + 1) * n, (N + 1) * n);
  const Mat In = Mat::Identity(n, n);
  for (int i = 1; i <= N; ++i)
    for (int j = 0; j <= N; ++j) G.block(i * n, j * n, n, n) = (2.0 / r) * D(i, j) * In;
  G.block(0, 0, n, n) += A1;
  G.block(0, N * n, n, n) += A2;
  if (A3.size() > 0 && !A3.isZero(0.0)) {
    if (rule == DistributedRule::clenshaw_curtis) {
      const Vec w = clenshaw_curtis_weights(N) * (r / 2.0);
      const LiftedKernel lk = lift(basis, n);
      for (int j = 0; j <= N; ++j) G.block(0, j * n, n, n) += w(j) * A3 * lk.eval_lifted(r * (x(j) - 1.0) / 2.0);
    } else {
      const Mat W = product_weights(basis, r, N);
      for (int j = 0; j <= N; ++j) G.block(0, j * n, n, n) += A3 * kron(Mat(W.col(j)), In);
    }
  }
  return G;
}

inline SpectralReport spectral_report_from(const Mat& G, int N) {
  const CVec ev = eig(G);
  SpectralReport rep;
  rep.N = N;
  rep.roots.assign(ev.data(), ev.data() + ev.size());
  std::stable_sort(rep.roots.begin(), rep.roots.end(),
                   [](const auto& a, const auto& b) { return a.real() > b.real(); });
  rep.abscissa = rep.roots.front().real();
  return rep;
}

/// Open-loop plant (u = 0).
inline SpectralReport spectral_abscissa(const DDSystem& sys, int N = 20,
                                        DistributedRule rule = DistributedRule::product) {
  return spectral_report_from(pseudospectral_generator(sys.A1, sys.A2, sys.A3, sys.basis, sys.r, N, rule), N);
}

inline SpectralReport spectral_abscissa(const ClosedLoop& cl, int N = 20,
                                        DistributedRule rule = DistributedRule::product) {
  const DDSystem& s = cl.base;
  return spectral_report_from(pseudospectral_generator(cl.Pi1, s.A2, s.A3, s.basis, s.r, N, rule), N);
}

}  // namespace ddsynth
