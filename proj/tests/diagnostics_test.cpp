#include "tsfpp/diagnostics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tsfpp;

namespace {

BlockProblem abs_1d() {
  BlockProblem p;
  p.blocks.push_back({l1_norm(1), make_identity(1)});
  p.b = Vec::Zero(1);
  return p;
}

BlockProblem lp3() {
  BlockProblem p;
  for (double c : {1.0, 2.0, 3.0})
    p.blocks.push_back({l1_norm(1), make_dense(Mat::Constant(1, 1, c))});
  p.b = Vec::Constant(1, 3.0);
  return p;
}

GapQuery lp3_saddle() {
  GapQuery q;
  q.x_ref = Vec::Zero(3);
  q.x_ref[2] = 1.0;
  q.y_center = Vec::Constant(1, -1.0 / 3.0);
  return q;
}

}  // namespace

TEST(Ergodic, MeanAndWindow) {
  std::vector<Vec> hist;
  for (int i = 0; i < 6; ++i) hist.push_back(Vec::Constant(2, 3.5));
  EXPECT_EQ(ergodic_average(hist, 3), Vec::Constant(2, 3.5));

  // v^2 = 0, v^3 = 2 with K = 2 averages to 1; v^0, v^1 are excluded.
  std::vector<Vec> h2{Vec::Constant(1, 100.0), Vec::Constant(1, -100.0),
                      Vec::Constant(1, 0.0), Vec::Constant(1, 2.0)};
  EXPECT_NEAR(ergodic_average(h2, 2)[0], 1.0, 1e-15);

  // shifting the garbage out of the window must not change the average
  std::vector<Vec> h3 = h2;
  h3[0] = Vec::Constant(1, 7.0);
  h3[1] = Vec::Constant(1, -9.0);
  EXPECT_EQ(ergodic_average(h2, 2), ergodic_average(h3, 2));

  EXPECT_THROW(ergodic_average(h2, 3), std::invalid_argument);
  EXPECT_THROW(ergodic_average(h2, 0), std::invalid_argument);
}

TEST(RateReport, GeometricSequenceIsBoundedAndVanishing) {
  std::vector<double> a(300);
  for (size_t i = 0; i < a.size(); ++i) a[i] = std::pow(0.5, double(i + 1));
  const auto rep = rate_report(a);
  EXPECT_TRUE(rep.bounded);
  EXPECT_TRUE(rep.vanishing);
  EXPECT_LE(rep.cumulative.back(), 1.0);  // geometric series limit
}

TEST(RateReport, InverseSquareHasSlopeMinusOne) {
  std::vector<double> a(5000);
  for (size_t i = 0; i < a.size(); ++i) a[i] = 1.0 / double((i + 1) * (i + 1));
  const auto rep = rate_report(a);
  EXPECT_TRUE(rep.bounded);
  EXPECT_TRUE(rep.vanishing);
  EXPECT_NEAR(rep.fitted_slope, -1.0, 0.05);
}

TEST(RateReport, ConstantSequenceFailsBothChecks) {
  std::vector<double> a(400, 0.25);
  const auto rep = rate_report(a);
  EXPECT_FALSE(rep.bounded);
  EXPECT_FALSE(rep.vanishing);
  EXPECT_NEAR(rep.fitted_slope, 0.0, 1e-6);
}

TEST(RateReport, RejectsShortOrNegativeInput) {
  EXPECT_THROW(rate_report(std::vector<double>(50, 1.0)), std::invalid_argument);
  std::vector<double> a(200, 1.0);
  a[5] = -1.0;
  EXPECT_THROW(rate_report(a), std::invalid_argument);
}

TEST(Gap, ZeroAtSaddleAndAbsExample) {
  const BlockProblem p = lp3();
  const GapQuery q = lp3_saddle();
  std::vector<Vec> xs{Vec::Zero(1), Vec::Zero(1), Vec::Constant(1, 1.0)};
  EXPECT_NEAR(partial_gap(p, xs, q.y_center, q), 0.0, 1e-14);

  const BlockProblem p1 = abs_1d();
  GapQuery q1;
  q1.x_ref = Vec::Zero(1);
  q1.y_center = Vec::Zero(1);
  for (double x : {-2.0, -0.5, 0.0, 1.25}) {
    std::vector<Vec> xv{Vec::Constant(1, x)};
    EXPECT_NEAR(partial_gap(p1, xv, Vec::Constant(1, 0.7), q1), std::abs(x), 1e-14);
  }
}

TEST(Gap, BallTermVanishesOnFeasiblePoints) {
  const BlockProblem p = lp3();
  GapQuery q = lp3_saddle();
  q.rho = 2.5;
  // feasible x: A x = b, so the ball supremum contributes nothing extra
  std::vector<Vec> xs{Vec::Zero(1), Vec::Zero(1), Vec::Constant(1, 1.0)};
  GapQuery q0 = q;
  q0.rho = 0.0;
  EXPECT_NEAR(partial_gap(p, xs, q.y_center, q),
              partial_gap(p, xs, q.y_center, q0), 1e-14);

  // infeasible x picks up rho * ||Ax - b||
  std::vector<Vec> xt{Vec::Constant(1, 1.0), Vec::Zero(1), Vec::Constant(1, 1.0)};
  const double with_ball = partial_gap(p, xt, q.y_center, q);
  const double without = partial_gap(p, xt, q.y_center, q0);
  EXPECT_NEAR(with_ball - without, 2.5 * 1.0, 1e-12);
}

TEST(Gap, InfinitePhiGivesSentinel) {
  BlockProblem p;
  p.blocks.push_back({box_indicator(Vec::Constant(1, 0.5)), make_identity(1)});
  p.b = Vec::Zero(1);
  GapQuery q;
  q.x_ref = Vec::Zero(1);
  q.y_center = Vec::Zero(1);
  std::vector<Vec> outside{Vec::Constant(1, 2.0)};
  EXPECT_TRUE(std::isinf(partial_gap(p, outside, Vec::Zero(1), q)));
}

// G(v, v') + G(v', v) vanishes identically: the function terms cancel and
// the coupling is skew-symmetric.
TEST(Gap, AntisymmetryOnRandomPairs) {
  const BlockProblem p = lp3();
  std::mt19937 rng(3);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 100; ++t) {
    Vec xa(3), xb(3), ya(1), yb(1);
    for (Index i = 0; i < 3; ++i) {
      xa[i] = dist(rng);
      xb[i] = dist(rng);
    }
    ya[0] = dist(rng);
    yb[0] = dist(rng);
    GapQuery qa{xb, yb, 0.0};
    GapQuery qb{xa, ya, 0.0};
    std::vector<Vec> va{xa.segment(0, 1), xa.segment(1, 1), xa.segment(2, 1)};
    std::vector<Vec> vb{xb.segment(0, 1), xb.segment(1, 1), xb.segment(2, 1)};
    const double sum = partial_gap(p, va, ya, qa) + partial_gap(p, vb, yb, qb);
    EXPECT_NEAR(sum, 0.0, 1e-10);
  }
}

TEST(GapRate, ConstantIteratesAtSaddleGiveZeroGap) {
  const BlockProblem p = lp3();
  const GapQuery q = lp3_saddle();
  Vec v(4);
  v << 0.0, 0.0, 1.0, -1.0 / 3.0;
  std::vector<Vec> hist(30, v);
  const auto rep = gap_rate_check(p, hist, q);
  for (double g : rep.gaps) EXPECT_NEAR(g, 0.0, 1e-14);
  EXPECT_TRUE(rep.k_gap_bounded);
  EXPECT_FALSE(rep.negative_gap);
}

TEST(GapRate, SingleTermWindowEqualsPointGap) {
  const BlockProblem p = abs_1d();
  GapQuery q;
  q.x_ref = Vec::Zero(1);
  q.y_center = Vec::Zero(1);
  std::vector<Vec> hist;
  for (double t : {0.0, 0.0, 1.5, 0.75, 0.1})
    hist.push_back((Vec(2) << t, 0.3 * t).finished());
  const auto rep = gap_rate_check(p, hist, q);
  std::vector<Vec> x2{Vec::Constant(1, 1.5)};
  EXPECT_NEAR(rep.gaps[0], partial_gap(p, x2, Vec::Constant(1, 0.45), q), 1e-14);
}

// On a convergent solver run against the true saddle point the averaged gap
// must decay roughly like 1/K.
TEST(GapRate, DecaysOnLp3Run) {
  const BlockProblem p = lp3();
  AlgorithmSpec spec;
  spec.family = Family::TwoStepExplicit;
  spec.beta = 1.0;
  spec.alphas = suggest_step_sizes(Family::TwoStepExplicit, p.operators(), 1.0, 0.9).alphas;
  StopRule stop;
  stop.max_iter = 3000;
  stop.kkt_stride = 0;
  std::vector<Vec> history;
  IterateState init = make_zero_state(p);
  history.push_back(pack_state(init));
  history.push_back(pack_state(init));  // v^0 = v^1 convention
  SolveHooks hooks;
  hooks.augment = [&history](const IterateState& st, TraceRecord&) {
    history.push_back(pack_state(st));
  };
  solve(p, spec, stop, hooks, init);
  const auto rep = gap_rate_check(p, history, lp3_saddle());
  EXPECT_LE(rep.fitted_slope, -0.8);
  EXPECT_TRUE(rep.k_gap_bounded);
  for (double g : rep.gaps) EXPECT_GE(g, -1e-8);
}
