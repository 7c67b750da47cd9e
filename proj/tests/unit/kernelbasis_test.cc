#include <gtest/gtest.h>

#include "ddsynth/kernelbasis.hpp"
#include "support/fixtures.hpp"
#include "support/gram_oracle.hpp"

namespace ddsynth {
namespace {

using testing::gram_instances;
using testing::quadrature_gram;
using testing::random_mat;

Mat eq73_a3() {
  Mat a(2, 6);
  a << -0.4, 1.0, -0.01, 0.02, 0.03, 0.02, -1.0, 0.4, 0.001, 0.03, -0.02, 0.04;
  return a;
}

TEST(MakeBasis, ConstantKernel) {
  const KernelBasis b = make_basis(Mat::Zero(1, 1), Vec::Ones(1));
  for (double t : {0.0, -0.3, -2.0}) EXPECT_EQ(b.eval(t)(0), 1.0);
}

TEST(MakeBasis, TrigKernelMatchesClosedForm) {
  const KernelBasis b = testing::trig12_basis();
  for (double t : {-0.01, -0.3, -1.7}) {
    const Vec v = b.eval(t);
    EXPECT_NEAR(v(0), 1.0, 1e-13);
    EXPECT_NEAR(v(1), std::sin(12 * t), 1e-12);
    EXPECT_NEAR(v(2), std::cos(12 * t), 1e-12);
  }
}

TEST(MakeBasis, DampedKernelMatchesClosedForm) {
  const KernelBasis b = testing::damped20_basis();
  for (double t : {-0.05, -0.5, -1.0}) {
    const Vec v = b.eval(t);
    EXPECT_NEAR(v(0), 1.0, 1e-13);
    EXPECT_NEAR(v(1), 10 * std::exp(t) * std::sin(20 * t), 1e-11);
    EXPECT_NEAR(v(2), 10 * std::exp(t) * std::cos(20 * t), 1e-11);
  }
}

TEST(MakeBasis, DimensionErrors) {
  EXPECT_THROW(make_basis(Mat::Zero(2, 3), Vec::Ones(2)), DimensionError);
  EXPECT_THROW(make_basis(Mat::Zero(2, 2), Vec::Ones(3)), DimensionError);
  EXPECT_THROW(make_basis(Mat::Zero(2, 2), Vec::Ones(2), {"only one"}), DimensionError);
}

TEST(Eval, ZeroReturnsM0Exactly) {
  const KernelBasis b = testing::damped20_basis();
  EXPECT_EQ(b.eval(0.0), b.m0());
}

TEST(Eval, TrigKernelAtMinusPiOverTwelve) {
  const Vec v = testing::trig12_basis().eval(-M_PI / 12);
  EXPECT_NEAR(v(0), 1.0, 1e-13);
  EXPECT_NEAR(v(1), 0.0, 1e-13);
  EXPECT_NEAR(v(2), -1.0, 1e-13);
}

TEST(Eval, CentralDifferenceMatchesGenerator) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.5, -0.05);
  for (const KernelBasis& b : {testing::trig12_basis(), testing::damped20_basis(), legendre_basis(4, 1.5)}) {
    for (int k = 0; k < 5; ++k) {
      const double t = u(rng), h = 1e-6;
      const Vec fd = (b.eval(t + h) - b.eval(t - h)) / (2 * h);
      const Vec an = b.generator() * b.eval(t);
      EXPECT_LE((fd - an).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + an.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Legendre, EndpointValues) {
  for (int d : {0, 1, 3, 6}) {
    const KernelBasis b = legendre_basis(d, 2.0);
    const Vec at0 = b.eval(0.0), atr = b.eval(-2.0);
    for (int k = 0; k <= d; ++k) {
      EXPECT_NEAR(at0(k), 1.0, 1e-12);
      EXPECT_NEAR(atr(k), (k % 2 == 0) ? 1.0 : -1.0, 1e-9);
    }
  }
}

TEST(Legendre, MatchesRecurrence) {
  // Bonnet recurrence on x = 2 u - 1, u = (tau + r) / r.
  const double r = 1.3;
  const KernelBasis b = legendre_basis(6, r);
  for (double t : {-1.2, -0.7, -0.1}) {
    const double x = 2.0 * (t + r) / r - 1.0;
    std::vector<double> p{1.0, x};
    for (int k = 1; k < 6; ++k) p.push_back(((2 * k + 1) * x * p[k] - k * p[k - 1]) / (k + 1));
    const Vec v = b.eval(t);
    for (int k = 0; k <= 6; ++k) EXPECT_NEAR(v(k), p[static_cast<std::size_t>(k)], 1e-10);
  }
}

TEST(Legendre, GramDegreeTwoUnitDelay) {
  const GramPair g = gram(legendre_basis(2, 1.0), 1.0);
  Mat want = Mat::Zero(3, 3);
  want.diagonal() << 1.0, 1.0 / 3, 1.0 / 5;
  EXPECT_LE(inf_norm(g.f_inv.mat() - want), 1e-12);
}

TEST(Legendre, GramDegreeThreeDelayTwo) {
  const GramPair g = gram(legendre_basis(3, 2.0), 2.0);
  Mat want = Mat::Zero(4, 4);
  want.diagonal() << 2.0, 2.0 / 3, 2.0 / 5, 2.0 / 7;
  EXPECT_LE(inf_norm(g.f_inv.mat() - want), 1e-12);
}

TEST(Legendre, GramIsDiagonalUpToDegreeEight) {
  for (double r : {0.5, 1.0, 2.0}) {
    for (int d = 0; d <= 8; ++d) {
      const GramPair g = gram(legendre_basis(d, r), r);
      for (int i = 0; i <= d; ++i)
        for (int j = 0; j <= d; ++j) EXPECT_NEAR(g.f_inv(i, j), i == j ? r / (2 * i + 1) : 0.0, 1e-10);
    }
  }
}

TEST(Legendre, InvalidArguments) {
  EXPECT_THROW(legendre_basis(-1, 1.0), InputError);
  EXPECT_THROW(legendre_basis(2, 0.0), InputError);
}

TEST(Gram, ConstantKernel) {
  for (double r : {0.1, 1.0, 7.5}) {
    const GramPair g = gram(testing::constant_basis(), r);
    EXPECT_NEAR(g.f_inv(0, 0), r, 1e-13 * r);
    EXPECT_NEAR(g.f(0, 0), 1.0 / r, 1e-13 / r);
  }
}

TEST(Gram, TrigKernelAgainstAdaptiveSimpson) {
  const double r = 0.1578;
  const KernelBasis b = testing::trig12_basis();
  const GramPair g = gram(b, r);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      const double ref = testing::adaptive_simpson([&](double t) { const Vec m = b.eval(t); return m(i) * m(j); },
                                                   -r, 0.0, 1e-13);
      EXPECT_NEAR(g.f_inv(i, j), ref, 1e-8);
    }
}

TEST(Gram, EveryBasisAgainstAdaptiveSimpson) {
  const std::vector<std::pair<KernelBasis, double>> cases = {
      {testing::trig12_basis(), 2.2}, {testing::damped20_basis(), 1.0}, {legendre_basis(5, 0.7), 0.7},
      {testing::constant_basis(), 3.0}};
  for (const auto& [b, r] : cases) {
    const GramPair g = gram(b, r);
    for (Index i = 0; i < b.rho(); ++i)
      for (Index j = 0; j <= i; ++j) {
        const double ref = testing::adaptive_simpson([&](double t) { const Vec m = b.eval(t); return m(i) * m(j); },
                                                     -r, 0.0, 1e-12);
        EXPECT_NEAR(g.f_inv(i, j), ref, 1e-8 * (1.0 + std::abs(ref)));
      }
  }
}

TEST(Gram, InverseAndPositivity) {
  for (const auto& [b, r] : std::vector<std::pair<KernelBasis, double>>{
           {testing::trig12_basis(), 0.63}, {testing::damped20_basis(), 1.0}, {legendre_basis(8, 2.0), 2.0}}) {
    const GramPair g = gram(b, r);
    EXPECT_GT(min_eig_sym(g.f_inv), 0.0);
    EXPECT_LE(inf_norm(g.f.mat() * g.f_inv.mat() - Mat::Identity(b.rho(), b.rho())), 1e-9);
  }
}

TEST(Gram, DependentComponentsRejected) {
  // m = (1, tau, 2 tau).
  Mat M = Mat::Zero(3, 3);
  M(1, 0) = 1;
  M(2, 0) = 2;
  Vec m0(3);
  m0 << 1, 0, 0;
  EXPECT_THROW(gram(make_basis(M, m0), 1.0), DependentBasisError);
  EXPECT_THROW(gram(testing::constant_basis(), 0.0), InputError);
}

TEST(Lift, ScalarStateKeepsGenerator) {
  const KernelBasis b = testing::trig12_basis();
  const LiftedKernel lk = lift(b, 1);
  EXPECT_EQ(lk.generator_lifted(), b.generator());
  for (double t : {-0.2, -1.0}) EXPECT_EQ(lk.eval_lifted(t), Mat(b.eval(t)));
}

TEST(Lift, GeneratorIsKronecker) {
  const KernelBasis b = testing::damped20_basis();
  const LiftedKernel lk = lift(b, 3);
  EXPECT_EQ(lk.generator_lifted(), kron(b.generator(), Mat::Identity(3, 3)));
  EXPECT_THROW(lift(b, 0), InputError);
}

TEST(Lift, DerivativeOfLiftedKernel) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-0.9, -0.1);
  const LiftedKernel lk = lift(testing::damped20_basis(), 2);
  for (int k = 0; k < 5; ++k) {
    const double t = u(rng), h = 1e-6;
    const Mat fd = (lk.eval_lifted(t + h) - lk.eval_lifted(t - h)) / (2 * h);
    const Mat an = lk.generator_lifted() * lk.eval_lifted(t);
    EXPECT_LE(inf_norm(fd - an), 1e-6 * (1.0 + inf_norm(an)));
  }
}

TEST(Fit, ZeroSamplesGiveZero) {
  const CoefficientFit f = fit_coefficients({}, testing::trig12_basis(), 2);
  EXPECT_EQ(f.coefficients, Mat::Zero(2, 6));
}

TEST(Fit, RecoversDampedPlantCoefficients) {
  const KernelBasis b = testing::damped20_basis();
  const LiftedKernel lk = lift(b, 2);
  const Mat A3 = eq73_a3();
  std::vector<KernelSample> s;
  for (int k = 0; k < 12; ++k) {
    const double t = -1.0 * k / 11.0;
    s.push_back({t, A3 * lk.eval_lifted(t)});
  }
  const CoefficientFit f = fit_coefficients(s, b, 2);
  EXPECT_LE(inf_norm(f.coefficients - A3), 1e-9);
  EXPECT_LE(f.residual, 1e-9);
}

TEST(Fit, RandomRoundTrip) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 0.0);
  for (const KernelBasis& b : {testing::trig12_basis(), legendre_basis(3, 2.0)}) {
    const Index n = 3;
    const Mat A3 = random_mat(rng, n, b.rho() * n);
    const LiftedKernel lk = lift(b, n);
    std::vector<KernelSample> s;
    for (Index k = 0; k < 2 * b.rho(); ++k) {
      const double t = u(rng);
      s.push_back({t, A3 * lk.eval_lifted(t)});
    }
    EXPECT_LE(inf_norm(fit_coefficients(s, b, n).coefficients - A3), 1e-9);
  }
}

TEST(Fit, RankDeficientSamplesRejected) {
  const KernelBasis b = testing::trig12_basis();
  std::vector<KernelSample> s{{-0.1, Mat::Ones(1, 1)}, {-0.1, Mat::Ones(1, 1)}, {-0.1, Mat::Ones(1, 1)}};
  EXPECT_THROW(fit_coefficients(s, b, 1), UnderdeterminedError);
}

TEST(Fit, NonSpanKernelReportsResidual) {
  const KernelBasis b = testing::constant_basis();
  std::vector<KernelSample> s{{-1.0, Mat::Zero(1, 1)}, {0.0, Mat::Ones(1, 1)}};
  EXPECT_NEAR(fit_coefficients(s, b, 1).residual, 0.5, 1e-12);
}

TEST(Scale, OnesIsIdentity) {
  const KernelBasis b = testing::damped20_basis();
  const ScaledBasis sb = scale(b, Vec::Ones(3));
  EXPECT_EQ(sb.basis.generator(), b.generator());
  EXPECT_EQ(sb.basis.m0(), b.m0());
  const Mat A3 = eq73_a3();
  EXPECT_EQ(sb.map.apply(A3, 2), A3);
}

TEST(Scale, GramCongruence) {
  const KernelBasis b = testing::trig12_basis();
  Vec s(3);
  s << 1, 10, 10;
  const ScaledBasis sb = scale(b, s);
  const Mat want = s.asDiagonal() * gram(b, 0.5).f_inv.mat() * s.asDiagonal();
  EXPECT_LE(inf_norm(gram(sb.basis, 0.5).f_inv.mat() - want), 1e-10 * inf_norm(want));
}

TEST(Scale, DistributedTermUnchanged) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(-1.0, 0.0);
  const KernelBasis b = testing::damped20_basis();
  Vec s(3);
  s << 0.5, 3.0, 0.1;
  const ScaledBasis sb = scale(b, s);
  const Mat A3 = eq73_a3(), A3s = sb.map.apply(A3, 2);
  const LiftedKernel l0 = lift(b, 2), l1 = lift(sb.basis, 2);
  for (int k = 0; k < 10; ++k) {
    const double t = u(rng);
    EXPECT_LE(inf_norm(A3s * l1.eval_lifted(t) - A3 * l0.eval_lifted(t)), 1e-12 * (1.0 + inf_norm(A3)));
  }
}

TEST(Scale, BadEntriesRejected) {
  const KernelBasis b = testing::trig12_basis();
  EXPECT_THROW(scale(b, Vec::Ones(2)), DimensionError);
  Vec s(3);
  s << 1, 0, 1;
  EXPECT_THROW(scale(b, s), InputError);
}

TEST(Scale, EqualizingScaleFlattensGramDiagonal) {
  const KernelBasis b = testing::damped20_basis();
  const Vec s = equalizing_scale(b, 1.0);
  const Vec d = gram(scale(b, s).basis, 1.0).f_inv.mat().diagonal();
  EXPECT_LE(d.maxCoeff() / d.minCoeff(), 1.0 + 1e-9);
}

TEST(GramInequality, RandomPiecewisePolynomials) {
  std::mt19937_64 rng(25);
  const auto cases = gram_instances();
  for (int t = 0; t < 60; ++t) {
    EXPECT_GE(testing::random_gram_gap(rng, cases[static_cast<std::size_t>(t) % cases.size()]), -1e-8) << "instance " << t;
  }
}

TEST(GramInequality, EqualityCase) {
  std::mt19937_64 rng(26);
  for (const auto& in : gram_instances()) EXPECT_NEAR(testing::equality_gram_gap(rng, in), 0.0, 1e-8);
}

TEST(GramInequality, QuadratureGramMatchesClosedForm) {
  for (const auto& in : gram_instances()) {
    const Mat q = quadrature_gram(in.basis, in.r);
    EXPECT_LE(inf_norm(q - gram(in.basis, in.r).f_inv.mat()), 1e-10 * (1.0 + inf_norm(q)));
  }
}

}  // namespace
}  // namespace ddsynth
