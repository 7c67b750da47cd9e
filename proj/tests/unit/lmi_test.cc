#include <gtest/gtest.h>

#include "ddsynth/io.hpp"
#include "ddsynth/lmi/builders.hpp"
#include "ddsynth/sdp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace ddsynth {
namespace {

using testing::random_mat;

Index constraint_dim(const LMIProblem& p, const std::string& label) { return p.constraint(label).expr.rows(); }

DDSystem decaying_scalar(double a = -1.0) {
  DDSystem s = DDSystem::zeros(1, 0, 0, 0, 1.0, testing::constant_basis());
  s.A1(0, 0) = a;
  return s;
}

bool feasible(const LMIProblem& p) { return solve_feasibility(p).feasible(); }

// ---- expressions and container ------------------------------------------------

TEST(AffineExpr, EvaluateAndTranspose) {
  LMIProblem p;
  const VarRef x = p.add_matrix("x", 2, 3);
  const AffineExpr e = p.expr(x);
  Vec y(6);
  y << 1, 2, 3, 4, 5, 6;
  Mat want(2, 3);
  want << 1, 3, 5, 2, 4, 6;  // column-major dof order
  EXPECT_EQ(e.evaluate(y), want);
  EXPECT_EQ(e.transpose().evaluate(y), want.transpose());
}

TEST(AffineExpr, SymmetricVariableDofs) {
  LMIProblem p;
  const VarRef s = p.add_symmetric("s", 3);
  EXPECT_EQ(s.dof, 6);
  Vec y = Vec::LinSpaced(6, 1, 6);
  const Mat v = p.value(s, y);
  EXPECT_EQ(v, v.transpose());
  EXPECT_EQ(v(0, 0), 1);
  EXPECT_EQ(v(0, 1), 2);
  EXPECT_EQ(v(1, 1), 3);
  EXPECT_EQ(v(2, 2), 6);
}

TEST(AffineExpr, ProductsWithConstants) {
  LMIProblem p;
  const VarRef x = p.add_matrix("x", 2, 2);
  std::mt19937_64 rng(41);
  const Mat A = random_mat(rng, 3, 2), B = random_mat(rng, 2, 4);
  const Vec y = random_mat(rng, 4, 1);
  const Mat X = p.value(x, y);
  EXPECT_LE(inf_norm((A * p.expr(x) * B).evaluate(y) - A * X * B), 1e-14);
  EXPECT_LE(inf_norm(kron(Mat::Identity(3, 3), p.expr(x)).evaluate(y) - kron(Mat::Identity(3, 3), X)), 1e-14);
  EXPECT_LE(inf_norm(sy(p.expr(x)).evaluate(y) - (X + X.transpose())), 1e-14);
}

TEST(AffineExpr, BlockAssembly) {
  LMIProblem p;
  const VarRef x = p.add_scalar("x");
  const AffineExpr e = block_matrix({{p.expr(x), AffineExpr(Mat::Ones(1, 2))}, {AffineExpr(Mat::Ones(2, 1)), AffineExpr(Mat::Identity(2, 2))}});
  Vec y(1);
  y << 7;
  Mat want(3, 3);
  want << 7, 1, 1, 1, 1, 0, 1, 0, 1;
  EXPECT_EQ(e.evaluate(y), want);
  EXPECT_THROW(block_matrix({{AffineExpr(Mat::Ones(1, 1)), AffineExpr(Mat::Ones(2, 1))}}), DimensionError);
}

TEST(LMIProblemType, RejectsAsymmetricAndNonSquare) {
  LMIProblem p;
  const VarRef x = p.add_matrix("x", 2, 2);
  EXPECT_THROW(p.add_constraint(p.expr(x), Sense::pos, "bad"), DimensionError);
  EXPECT_THROW(p.add_constraint(AffineExpr(Mat::Ones(2, 3)), Sense::pos, "bad"), DimensionError);
  EXPECT_NO_THROW(p.add_constraint(sy(p.expr(x)), Sense::pos, "ok"));
  EXPECT_THROW(p.add_scalar("x"), InputError);
}

TEST(Count, EmptyProblem) { EXPECT_EQ(count_decision_variables(LMIProblem{}), 0); }

// ---- dimensions and counts ------------------------------------------------------

TEST(Thm1, DampedPlantDimensions) {
  const DDSystem s = testing::damped_plant();
  const LMIProblem p = thm1_constraints(s, l2_supply_variable(2, 2));
  EXPECT_EQ(constraint_dim(p, labels::kDissipation), 16);
  EXPECT_EQ(constraint_dim(p, labels::kPositivity), 8);
  EXPECT_EQ(count_decision_variables(p), 49);
  EXPECT_EQ(count_decision_variables(thm1_constraints(s, l2_supply(1.0, 2, 2))), 48);
  EXPECT_TRUE(p.objective().has_value());
  EXPECT_EQ(p.var(names::kX).kind, VarKind::rectangular);
}

TEST(Thm1, PassivityDropsSchurBlock) {
  const DDSystem s = testing::damped_plant();
  const Index full = constraint_dim(thm1_constraints(s, l2_supply(1.0, 2, 2)), labels::kDissipation);
  const Index pass = constraint_dim(thm1_constraints(s, passivity_supply(2)), labels::kDissipation);
  EXPECT_EQ(full - pass, s.m);
  const Index sector = constraint_dim(thm1_constraints(s, sector_supply(0.0, 1.0, 2)), labels::kDissipation);
  EXPECT_EQ(sector, full);
}

TEST(Thm1, InvalidInputsRejected) {
  const DDSystem s = testing::damped_plant();
  EXPECT_THROW(thm1_constraints(s, l2_supply(1.0, 1, 2)), InputError);
  SupplyRate bad = passivity_supply(2);
  bad.J1 = SymMat::identity(2);
  EXPECT_THROW(thm1_constraints(s, bad), InputError);
  DDSystem d = s;
  d.r = 0.0;
  EXPECT_THROW(thm1_constraints(d, l2_supply(1.0, 2, 2)), InputError);
}

TEST(Analysis, TrigPlantCountIsTwelve) {
  const DDSystem s = testing::trig_plant(0.12);
  EXPECT_EQ(count_decision_variables(analysis_constraints(s, l2_supply(1.0, 0, 0))), 12);
  EXPECT_EQ(count_decision_variables(simple_stability_constraints(s)), 12);
}

TEST(Analysis, DecayingScalarIsFeasible) {
  EXPECT_TRUE(feasible(analysis_constraints(decaying_scalar(), l2_supply(1.0, 0, 0))));
}

TEST(Analysis, TrigPlantGapIsInfeasible) {
  EXPECT_FALSE(feasible(analysis_constraints(testing::trig_plant(0.3), l2_supply(1.0, 0, 0))));
  EXPECT_TRUE(feasible(analysis_constraints(testing::trig_plant(0.12), l2_supply(1.0, 0, 0))));
}

TEST(Analysis, ScalarGainBound) {
  // x' = -x + w, z = x has L2 gain exactly 1.
  const DDSystem s = testing::scalar_plant(-1.0);
  EXPECT_TRUE(feasible(analysis_constraints(s, l2_supply(1.05, 1, 1))));
  EXPECT_FALSE(feasible(analysis_constraints(s, l2_supply(0.95, 1, 1))));
}

TEST(SimpleStability, TrigPlant) {
  EXPECT_TRUE(feasible(simple_stability_constraints(testing::trig_plant(0.12))));
  EXPECT_FALSE(feasible(simple_stability_constraints(testing::trig_plant(0.05))));
}

TEST(SimpleStability, GrowingScalarIsInfeasible) {
  EXPECT_FALSE(feasible(simple_stability_constraints(decaying_scalar(1.0))));
  EXPECT_TRUE(feasible(simple_stability_constraints(decaying_scalar(-1.0))));
}

TEST(Slack, FreeMultiplierMatchesSimpleCondition) {
  for (double r : {0.05, 0.12, 0.3, 0.65}) {
    const DDSystem s = testing::trig_plant(r);
    EXPECT_EQ(feasible(slack_stability_constraints(s)), feasible(simple_stability_constraints(s))) << "r=" << r;
  }
}

TEST(Slack, StructuredMultiplierOverEtaGrid) {
  for (double eta : {0.5, 1.0, 2.0}) {
    TuningParams t;
    t.eta1 = eta;
    EXPECT_FALSE(feasible(slack_stability_constraints(testing::trig_plant(0.3), t, SlackShape::structured))) << eta;
  }
  EXPECT_TRUE(feasible(slack_stability_constraints(testing::trig_plant(0.12), TuningParams{}, SlackShape::structured)));
}

TEST(Slack, MoreVariablesThanPlainAnalysis) {
  const DDSystem s = testing::trig_plant(0.12);
  EXPECT_GT(count_decision_variables(slack_stability_constraints(s)), 12);
  EXPECT_GT(count_decision_variables(slack_stability_constraints(s, {}, SlackShape::structured)), 12);
}

// ---- randomized structural invariants ------------------------------------------

std::vector<LMIProblem> all_builders() {
  const ProblemFile rob = testing::load_config("robust_synthesis.json");
  const DDSystem d = rob.sys, t = testing::trig_plant(0.12);
  TuningParams tp;
  tp.eta1 = 0.5, tp.eta2 = -1.0, tp.eps = Vec::Constant(3, 0.1);
  std::vector<LMIProblem> out;
  out.push_back(thm1_constraints(d, l2_supply_variable(2, 2), tp));
  out.push_back(thm1_constraints(d, passivity_supply(2)));
  out.push_back(thm1_constraints(d, sector_supply(-1.0, 1.0, 2)));
  out.push_back(analysis_constraints(d, l2_supply(1.0, 2, 2)));
  out.push_back(simple_stability_constraints(t));
  out.push_back(slack_stability_constraints(t));
  out.push_back(slack_stability_constraints(t, tp, SlackShape::structured));
  out.push_back(thm2_constraints(d, l2_supply_variable(2, 2), *rob.uncertainty, tp));
  out.push_back(robust_analysis_constraints(d, l2_supply(1.0, 2, 2), *rob.uncertainty));
  out.push_back(robust_analysis_constraints(d, std::nullopt, *rob.uncertainty));
  out.push_back(lemma6_wellposed(SymMat::identity(2), Mat::Zero(2, 2), SymMat(Mat(-Mat::Identity(2, 2))), Mat::Ones(2, 2)));
  return out;
}

TEST(BuilderInvariants, SymmetricAndAffineUnderRandomAssignments) {
  int k = 0;
  for (const LMIProblem& p : all_builders()) {
    EXPECT_LE(max_asymmetry(p, 20, 100 + k), 1e-10) << "builder " << k;
    EXPECT_LE(max_nonaffinity(p, 20, 200 + k), 1e-10) << "builder " << k;
    ++k;
  }
}

TEST(Dump, PerConstraintCoefficients) {
  const LMIProblem p = simple_stability_constraints(testing::trig_plant(0.12));
  const Json j = dump_problem(p);
  EXPECT_EQ(j["ndv"].get<int>(), 12);
  ASSERT_EQ(j["constraints"].size(), p.constraints().size());
  // Rebuild each constraint from the dump and compare at a random point.
  std::mt19937_64 rng(42);
  const Vec y = random_mat(rng, 12, 1);
  for (std::size_t c = 0; c < p.constraints().size(); ++c) {
    const Json& jc = j["constraints"][c];
    Mat e = parse_matrix(jc["constant"], "constant");
    for (const auto& t : jc["terms"]) e += y(t["dof"].get<int>()) * parse_matrix(t["coefficient"], "coefficient");
    EXPECT_LE(inf_norm(e - p.constraints()[c].expr.evaluate(y)), 1e-14);
  }
}

// ---- S-procedure ----------------------------------------------------------------

TEST(Wellposed, ZeroFeedthroughTwoBlockForm) {
  const LMIProblem p = lemma6_wellposed(std::nullopt, Mat::Zero(2, 2), SymMat(Mat(-Mat::Identity(2, 2))), Mat::Zero(2, 2));
  const Constraint& c = p.constraint(labels::kWellposed);
  EXPECT_EQ(c.expr.rows(), 4);
  // [[I, -I], [-I, I + alpha I]] has minimum eigenvalue > 0 for every alpha > 0.
  for (double alpha : {1e-3, 0.1, 1.0}) {
    Vec y(1);
    y << alpha;
    const Mat e = c.expr.evaluate(y);
    const double oracle = 1.0 + alpha / 2.0 - std::sqrt(1.0 + alpha * alpha / 4.0);
    EXPECT_NEAR(min_eig_sym(e), oracle, 1e-12);
  }
  EXPECT_TRUE(feasible(p));
}

TEST(Wellposed, NormBoundedCase) {
  std::mt19937_64 rng(43);
  const Mat L = random_mat(rng, 2, 2);
  const SymMat R(Mat(L * L.transpose() + Mat::Identity(2, 2)));
  EXPECT_TRUE(feasible(lemma6_wellposed(R, Mat::Zero(2, 2), SymMat(Mat(-Mat::Identity(2, 2))), Mat::Zero(2, 2))));
}

TEST(Wellposed, ShippedUncertaintyData) {
  const ProblemFile f = testing::load_config("robust_synthesis.json");
  LMIProblem p;
  std::vector<int> all{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  detail::add_wellposedness(p, aggregate_multiplier(*f.uncertainty, all), names::kAlpha, labels::kWellposed);
  EXPECT_TRUE(feasible(p));
}

TEST(Wellposed, IllPosedFeedbackDetected) {
  // |Delta| <= 1 and F = 2: 1 - 2 Delta vanishes at Delta = 1/2.
  const LMIProblem p = lemma6_wellposed(SymMat(Mat::Ones(1, 1)), Mat::Zero(1, 1), SymMat(Mat(-Mat::Ones(1, 1))),
                                        Mat::Constant(1, 1, 2.0));
  EXPECT_FALSE(feasible(p));
}

TEST(Bound, ZeroCouplingReducesToNominal) {
  for (double phi : {-1.0, 0.5}) {
    LMIProblem p;
    const Multiplier mu = make_multiplier(SymMat(Mat::Ones(1, 1)), Mat::Zero(1, 1), SymMat(Mat(-Mat::Ones(1, 1))),
                                          Mat::Zero(1, 1));
    lemma6_bound(p, AffineExpr(Mat::Constant(2, 2, 0.0) + phi * Mat::Identity(2, 2)), AffineExpr(Mat::Ones(2, 1)),
                 AffineExpr(Mat::Zero(1, 2)), mu);
    EXPECT_EQ(feasible(p), phi < 0) << phi;
  }
}

TEST(Bound, ScalarCaseAgainstGridScan) {
  // Phi + 2 Delta < 0 for all |Delta| <= 1 iff Phi < -2.
  for (double phi : {-0.5, -1.0, -1.5, -2.5, -3.0, -5.0}) {
    bool grid = true;
    for (int k = 0; k <= 2000; ++k) {
      const double d = -1.0 + k / 1000.0;
      if (!(phi + 2.0 * d < 0.0)) grid = false;
    }
    LMIProblem p;
    const Multiplier mu = make_multiplier(SymMat(Mat::Ones(1, 1)), Mat::Zero(1, 1), SymMat(Mat(-Mat::Ones(1, 1))),
                                          Mat::Zero(1, 1));
    lemma6_bound(p, AffineExpr(Mat::Constant(1, 1, phi)), AffineExpr(Mat::Ones(1, 1)), AffineExpr(Mat::Ones(1, 1)), mu);
    EXPECT_EQ(feasible(p), grid) << phi;
  }
}

TEST(Bound, SampledDeltasRespectTheBound) {
  std::mt19937_64 rng(44);
  int checked = 0;
  for (int t = 0; t < 60 && checked < 20; ++t) {
    const testing::BoundInstance in = testing::random_bound_instance(rng, t % 3 != 0);
    const testing::BoundCheck c = testing::check_bound_instance(in, rng, 200);
    if (!c.wellposed || !c.bound_feasible) continue;
    ++checked;
    EXPECT_GT(c.worst, 0.0) << "instance " << t;
  }
  EXPECT_GE(checked, 20);
}

TEST(Bound, BilinearDataRejected) {
  LMIProblem p;
  const VarRef x = p.add_matrix("x", 1, 1);
  const Multiplier mu =
      make_multiplier(SymMat(Mat::Ones(1, 1)), Mat::Zero(1, 1), SymMat(Mat(-Mat::Ones(1, 1))), Mat::Zero(1, 1));
  EXPECT_THROW(lemma6_bound(p, AffineExpr(Mat::Constant(1, 1, -1.0)), p.expr(x), p.expr(x), mu), InputError);
  EXPECT_THROW(lemma6_bound(p, AffineExpr(Mat::Constant(2, 2, -1.0)), AffineExpr(Mat::Ones(1, 1)),
                            AffineExpr(Mat::Ones(1, 1)), mu),
               DimensionError);
}

// ---- robust builders -------------------------------------------------------------

TEST(Thm2, DominantBlockEqualsSynthesisMatrix) {
  const ProblemFile f = testing::load_config("robust_synthesis.json");
  const LMIProblem p1 = thm1_constraints(f.sys, *f.supply, f.tuning);
  const LMIProblem p2 = thm2_constraints(f.sys, *f.supply, *f.uncertainty, f.tuning);
  EXPECT_EQ(p2.num_dofs(), p1.num_dofs() + 2);
  EXPECT_TRUE(p2.has_var(names::kKappa1));
  EXPECT_TRUE(p2.has_var(names::kKappa2Inv));
  std::mt19937_64 rng(45);
  for (int t = 0; t < 5; ++t) {
    const Vec y2 = random_mat(rng, p2.num_dofs(), 1);
    const Vec y1 = y2.head(p1.num_dofs());
    const Mat th1 = p1.constraint(labels::kDissipation).expr.evaluate(y1);
    const Mat rob = p2.constraint(labels::kRobust).expr.evaluate(y2);
    EXPECT_LE(inf_norm(rob.topLeftCorner(th1.rows(), th1.cols()) - th1), 1e-13);
    EXPECT_LE(inf_norm(p1.constraint(labels::kPositivity).expr.evaluate(y1) -
                       p2.constraint(labels::kPositivity).expr.evaluate(y2)),
              1e-13);
  }
}

TEST(Thm2, ZeroUncertaintyMatchesThm1) {
  std::mt19937_64 rng(46);
  int agree_feasible = 0, agree_infeasible = 0;
  for (int t = 0; t < 6; ++t) {
    DDSystem s = testing::random_stable_plant(rng, testing::constant_basis(), 0.5);
    if (t % 2 == 1) {
      s.A1 += 5.0 * Mat::Identity(2, 2);  // unstable and uncontrollable
      s.B1.setZero();
      s.D1.setZero();
    }
    const SupplyRate g = l2_supply(20.0, 1, 1);
    const bool f1 = feasible(thm1_constraints(s, g));
    const bool f2 = feasible(thm2_constraints(s, g, zero_uncertainty(s)));
    EXPECT_EQ(f1, f2) << "plant " << t;
    (f1 ? agree_feasible : agree_infeasible) += (f1 == f2);
  }
  EXPECT_GE(agree_feasible, 1);
  EXPECT_GE(agree_infeasible, 1);
}

TEST(RobustAnalysis, ZeroUncertaintyMatchesAnalysis) {
  std::mt19937_64 rng(47);
  for (int t = 0; t < 5; ++t) {
    DDSystem s = testing::random_stable_plant(rng, testing::trig12_basis(), 0.3);
    const double gamma = (t % 2 == 0) ? 20.0 : 1e-3;
    const SupplyRate g = l2_supply(gamma, 1, 1);
    EXPECT_EQ(feasible(analysis_constraints(s, g)), feasible(robust_analysis_constraints(s, g, zero_uncertainty(s))))
        << "plant " << t;
  }
  for (double r : {0.12, 0.3}) {
    const DDSystem s = testing::trig_plant(r);
    EXPECT_EQ(feasible(simple_stability_constraints(s)),
              feasible(robust_analysis_constraints(s, std::nullopt, zero_uncertainty(s))));
  }
}

TEST(RobustAnalysis, TinyUncertaintyKeepsFeasibility) {
  const DDSystem s = testing::trig_plant(0.12);
  UncertaintySet u = zero_uncertainty(s);
  for (int i : {kA1, kA2, kA3}) {
    u[i].G = Mat::Ones(1, 1);
    u[i].H = Mat::Constant(1, channel_target(s, i).second, 1e-6);
  }
  EXPECT_TRUE(feasible(robust_analysis_constraints(s, std::nullopt, u)));
}

TEST(RobustAnalysis, ExactlyEightChannelsEnter) {
  const DDSystem s = testing::damped_plant();
  const SupplyRate g = l2_supply(1.0, 2, 2);
  const Index base = constraint_dim(robust_analysis_constraints(s, g, zero_uncertainty(s)), labels::kWellposed);
  std::vector<int> entering;
  for (int i = 0; i < 10; ++i) {
    UncertaintySet u = zero_uncertainty(s);
    const auto [rows, cols] = channel_target(s, i);
    u[i] = zero_channel(rows, cols, 3, 2);  // Delta grows from 2x2 to 3x2
    const Index dim = constraint_dim(robust_analysis_constraints(s, g, u), labels::kWellposed);
    if (dim != base) entering.push_back(i + 1);
  }
  EXPECT_EQ(entering, (std::vector<int>{1, 3, 4, 5, 6, 8, 9, 10}));
}

TEST(RobustAnalysis, InvalidChannelNamed) {
  const DDSystem s = testing::damped_plant();
  UncertaintySet u = zero_uncertainty(s);
  u[kB2].Xi = SymMat(Mat(-Mat::Identity(2, 2)));
  try {
    robust_analysis_constraints(s, l2_supply(1.0, 2, 2), u);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("channel 5 (B2)"), std::string::npos);
  }
}

// ---- congruence chain --------------------------------------------------------------

TEST(Congruence, DampedPlantReconstruction) {
  const testing::CongruenceCheck c = testing::check_congruence(testing::damped_plant(), l2_supply_variable(2, 2));
  ASSERT_TRUE(c.solved);
  EXPECT_GE(c.analysis_margin, -1e-7);
  EXPECT_GT(c.positivity_margin, 0.0);
  EXPECT_GT(c.x_min_sv, 0.0);
}

TEST(Congruence, RandomPlants) {
  std::mt19937_64 rng(48);
  for (int t = 0; t < 3; ++t) {
    const DDSystem s = testing::random_stable_plant(rng, testing::trig12_basis(), 0.4);
    const testing::CongruenceCheck c = testing::check_congruence(s, l2_supply(20.0, 1, 1));
    ASSERT_TRUE(c.solved) << "plant " << t;
    EXPECT_GE(c.analysis_margin, -1e-7) << "plant " << t;
    EXPECT_GE(c.positivity_margin, -1e-7) << "plant " << t;
    EXPECT_GT(c.x_min_sv, 0.0);
  }
}

}  // namespace
}  // namespace ddsynth
