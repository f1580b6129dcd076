#include "tsfpp/prox.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tsfpp;

namespace {

Vec random_vec(Index n, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

// ||P(u) - P(w)||^2 <= <P(u) - P(w), u - w> for proximity operators.
void expect_firmly_nonexpansive(const ProxFunction& f, double gamma, int trials = 100,
                                double scale = 2.0) {
  std::mt19937 rng(99);
  for (int t = 0; t < trials; ++t) {
    const Vec u = random_vec(f.dim, rng, scale);
    const Vec w = random_vec(f.dim, rng, scale);
    const Vec pu = f.prox(u, gamma);
    const Vec pw = f.prox(w, gamma);
    const double lhs = (pu - pw).squaredNorm();
    const double rhs = (pu - pw).dot(u - w);
    EXPECT_LE(lhs, rhs + 1e-10) << f.label;
  }
}

}  // namespace

TEST(SoftThreshold, SpecValues) {
  Vec u(2);
  u << 3.0, -0.5;
  Vec expected(2);
  expected << 2.0, 0.0;
  EXPECT_EQ(soft_threshold(u, 1.0, Vec::Ones(2)), expected);

  EXPECT_EQ(soft_threshold(u, 1.0, Vec::Zero(2)), u);  // zero weights: identity

  Vec v(1), w(1);
  v << 0.7;
  w << 0.5;
  EXPECT_NEAR(soft_threshold(v, 1.0, w)[0], 0.2, 1e-15);

  EXPECT_THROW(soft_threshold(u, -1.0, Vec::Ones(2)), std::invalid_argument);
  EXPECT_THROW(soft_threshold(u, 1.0, Vec::Ones(3)), std::invalid_argument);
}

TEST(SoftThreshold, KinkTieMapsToZero) {
  Vec u(1);
  u << 1.0;
  EXPECT_EQ(soft_threshold(u, 1.0, Vec::Ones(1))[0], 0.0);
}

// Scalar prox must match the argmin of (1/2)(z-u)^2 + gamma*w*|z| on a fine
// grid, within grid resolution.
TEST(SoftThreshold, MatchesGridArgmin) {
  const double gamma = 0.8, weight = 1.3;
  Vec w(1);
  w << weight;
  for (double u0 : {-2.0, -1.05, -0.3, 0.0, 0.4, 1.04, 2.7}) {
    Vec u(1);
    u << u0;
    const double z = soft_threshold(u, gamma, w)[0];
    double best = 0, best_val = std::numeric_limits<double>::infinity();
    for (double g = -3.0; g <= 3.0; g += 1e-4) {
      const double val = 0.5 * (g - u0) * (g - u0) + gamma * weight * std::abs(g);
      if (val < best_val) {
        best_val = val;
        best = g;
      }
    }
    EXPECT_NEAR(z, best, 2e-4) << "u=" << u0;
  }
}

TEST(GroupBall, SpecValues) {
  Vec y(2);
  y << 3.0, 4.0;
  const Vec p = project_group_l2_ball(y, 1.0, 1);
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.8, 1e-15);

  // pairs are (y_i, y_{d+i}): here (3,4) and (0,0)
  Vec y2(4);
  y2 << 3.0, 0.0, 4.0, 0.0;
  const Vec p2 = project_group_l2_ball(y2, 2.0, 2);
  EXPECT_NEAR(p2[0], 1.2, 1e-12);
  EXPECT_NEAR(p2[1], 0.0, 1e-15);
  EXPECT_NEAR(p2[2], 1.6, 1e-12);
  EXPECT_NEAR(p2[3], 0.0, 1e-15);

  Vec inside(4);
  inside << 0.5, -0.3, 0.2, 0.1;
  EXPECT_EQ(project_group_l2_ball(inside, 1.0, 2), inside);

  EXPECT_THROW(project_group_l2_ball(Vec::Zero(3), 1.0, 1), std::invalid_argument);
  EXPECT_THROW(project_group_l2_ball(Vec::Zero(2), -1.0, 1), std::invalid_argument);
}

TEST(Box, SpecValuesAndZeroRadii) {
  Vec y(1), r(1);
  y << 0.7;
  r << 0.5;
  EXPECT_EQ(project_box(y, r)[0], 0.5);

  Vec y2(3), r2(3);
  y2 << 0.3, -5.0, 0.1;
  r2 << 0.0, 1.0, 0.5;
  const Vec p = project_box(y2, r2);
  EXPECT_EQ(p[0], 0.0);  // exactly zero on zero-radius components
  EXPECT_EQ(p[1], -1.0);
  EXPECT_EQ(p[2], 0.1);

  Vec inside(2), r3(2);
  inside << 0.2, -0.2;
  r3 << 1.0, 1.0;
  EXPECT_EQ(project_box(inside, r3), inside);
}

TEST(LinearShift, SpecValuesAndMoreau) {
  Vec y(2), b(2);
  y << 1.0, 1.0;
  b << 0.5, 0.0;
  Vec expected(2);
  expected << 0.0, 1.0;
  EXPECT_EQ(prox_linear_shift(y, 2.0, b), expected);
  EXPECT_EQ(prox_linear_shift(y, 3.0, Vec::Zero(2)), y);

  // Moreau identity: prox_{beta f*}(y) = y - beta prox_{f/beta}(y/beta)
  // with f = indicator of {b}, whose prox is the constant map b.
  std::mt19937 rng(4);
  const auto point = point_indicator(b);
  for (double beta : {0.5, 1.0, 2.0}) {
    const Vec yy = random_vec(2, rng);
    const Vec lhs = prox_linear_shift(yy, beta, b);
    const Vec rhs = yy - beta * point.prox(yy / beta, 1.0 / beta);
    EXPECT_LE((lhs - rhs).norm(), 1e-14);
  }
}

TEST(GroupValue, SpecValues) {
  Vec y(2);
  y << 3.0, 4.0;
  EXPECT_NEAR(group_l2_value(y), 5.0, 1e-15);
  EXPECT_THROW(group_l2_value(Vec::Zero(3)), std::invalid_argument);

  const auto b = make_tv(4, 4);
  EXPECT_NEAR(group_l2_value(b.apply(Vec::Constant(16, 1.23))), 0.0, 1e-15);
}

// TV value of the 2x2 image (1,0,0,0) via direct enumeration of the dense
// difference stencil.
TEST(GroupValue, TinyImageAgainstDenseEnumeration) {
  const auto b = make_tv(2, 2);
  Vec u(4);
  u << 1.0, 0.0, 0.0, 0.0;
  const Mat bd = b.to_dense();
  const Vec bu = bd * u;
  double expected = 0.0;
  for (Index i = 0; i < 4; ++i) expected += std::hypot(bu[i], bu[4 + i]);
  EXPECT_NEAR(group_l2_value(b.apply(u)), expected, 1e-14);
  EXPECT_NEAR(expected, std::sqrt(2.0) + 2.0, 1e-12);
}

TEST(Prox, FirmNonexpansiveness) {
  expect_firmly_nonexpansive(l1_norm(5), 0.7);
  Vec w(4);
  w << 0.0, 0.5, 1.0, 2.0;
  expect_firmly_nonexpansive(weighted_l1(w), 1.3);
  expect_firmly_nonexpansive(group_ball_indicator(0.8, 3), 1.0);
  Vec radii(4);
  radii << 0.0, 0.5, 1.0, 0.25;
  expect_firmly_nonexpansive(box_indicator(radii), 2.0);
  Vec b(3);
  b << 1.0, -2.0, 0.5;
  expect_firmly_nonexpansive(linear_term(b), 0.5);
  expect_firmly_nonexpansive(point_indicator(b), 1.0);
  expect_firmly_nonexpansive(zero_function(4), 1.0);
}

TEST(Prox, ProjectionsAreIdempotent) {
  std::mt19937 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Vec y = random_vec(6, rng, 3.0);
    const Vec p1 = project_group_l2_ball(y, 0.9, 3);
    EXPECT_LE((project_group_l2_ball(p1, 0.9, 3) - p1).cwiseAbs().maxCoeff(), 1e-14);
    Vec radii(6);
    radii << 0.0, 0.1, 0.5, 1.0, 2.0, 0.3;
    const Vec p2 = project_box(y, radii);
    EXPECT_LE((project_box(p2, radii) - p2).cwiseAbs().maxCoeff(), 0.0);
  }
}

// prox_{gamma f}(u) must beat nearby candidates on the prox objective.
TEST(Prox, ProxMinimizesItsObjective) {
  std::mt19937 rng(21);
  const auto f = weighted_l1((Vec(2) << 1.0, 0.5).finished());
  const double gamma = 0.9;
  for (int t = 0; t < 20; ++t) {
    const Vec u = random_vec(2, rng, 2.0);
    const Vec p = f.prox(u, gamma);
    const double at_p = 0.5 * (p - u).squaredNorm() + gamma * f.value(p);
    for (int c = 0; c < 30; ++c) {
      const Vec cand = p + random_vec(2, rng, 0.3);
      const double at_c = 0.5 * (cand - u).squaredNorm() + gamma * f.value(cand);
      EXPECT_GE(at_c, at_p - 1e-12);
    }
  }
}

TEST(Prox, IndicatorValuesUseInfSentinel) {
  const auto ball = group_ball_indicator(1.0, 1);
  Vec outside(2);
  outside << 3.0, 4.0;
  EXPECT_TRUE(std::isinf(ball.value(outside)));
  Vec inside(2);
  inside << 0.1, 0.2;
  EXPECT_EQ(ball.value(inside), 0.0);
}
