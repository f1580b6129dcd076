#include "tsfpp/engine.hpp"

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

Mat random_mat(Index r, Index c, std::mt19937& rng) {
  std::normal_distribution<double> dist;
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

BlockProblem lp3() {
  BlockProblem p;
  for (double c : {1.0, 2.0, 3.0})
    p.blocks.push_back({l1_norm(1), make_dense(Mat::Constant(1, 1, c))});
  p.b = Vec::Constant(1, 3.0);
  return p;
}

// Random 3-block instance with a mix of prox types; block dims <= 4, m <= 6.
BlockProblem random_instance(std::mt19937& rng, std::vector<Mat>* dense_out = nullptr) {
  const Index m = 3 + static_cast<Index>(rng() % 4);
  BlockProblem p;
  std::vector<Mat> dense;
  const Index dims[3] = {1 + static_cast<Index>(rng() % 2),
                         2 + static_cast<Index>(rng() % 3),
                         2 + static_cast<Index>(rng() % 2) * 2};
  for (int j = 0; j < 3; ++j) {
    const Index nj = dims[j];
    Mat a = random_mat(m, nj, rng);
    ProxFunction f;
    switch ((rng() + static_cast<unsigned>(j)) % 4) {
      case 0: f = l1_norm(nj); break;
      case 1: {
        Vec radii = random_vec(nj, rng).cwiseAbs();
        f = box_indicator(std::move(radii));
        break;
      }
      case 2: f = linear_term(random_vec(nj, rng)); break;
      default:
        if (nj % 2 == 0)
          f = group_ball_indicator(0.75, nj / 2);
        else
          f = l1_norm(nj);
        break;
    }
    dense.push_back(a);
    p.blocks.push_back({std::move(f), make_dense(std::move(a))});
  }
  p.b = random_vec(m, rng, 0.5);
  if (dense_out) *dense_out = std::move(dense);
  return p;
}

double max_state_diff(const IterateState& a, const IterateState& b) {
  double d = (a.y - b.y).cwiseAbs().maxCoeff();
  for (size_t i = 0; i < a.x.size(); ++i)
    d = std::max(d, (a.x[i] - b.x[i]).cwiseAbs().maxCoeff());
  return d;
}

AlgorithmSpec make_spec(Family f, const BlockProblem& p, double beta, double theta = 0,
                        std::vector<int> part = {}) {
  AlgorithmSpec spec;
  spec.family = f;
  spec.beta = beta;
  spec.theta = theta;
  spec.implicit_blocks = std::move(part);
  spec.inner.tol = 1e-13;
  spec.inner.max_inner = 5000;
  const auto sug = suggest_step_sizes(f, p.operators(), beta, 0.5, theta,
                                      spec.implicit_blocks);
  spec.alphas = sug.alphas;
  return spec;
}

}  // namespace

TEST(Step, FixedPointOfTrivialProblemStays) {
  BlockProblem p;
  p.blocks.push_back({point_indicator(Vec::Zero(2)), make_identity(2)});
  p.b = Vec::Zero(2);
  for (Family f : {Family::PdPrimalFirst, Family::PdDualFirst, Family::TwoStepImplicit,
                   Family::TwoStepExplicit, Family::LadmmDirect, Family::VariantDiag,
                   Family::VariantOffdiag, Family::Hybrid}) {
    AlgorithmSpec spec;
    spec.family = f;
    spec.alphas = {0.3};
    spec.beta = 1.0;
    spec.theta = 0.25;
    if (f == Family::Hybrid) spec.implicit_blocks = {0};
    IterateState st = make_zero_state(p);
    st = step(p, spec, st);
    EXPECT_LE(pack_state(st).cwiseAbs().maxCoeff(), 1e-14) << to_string(f);
    EXPECT_EQ(st.k, 1);
  }
}

// With the two-step memory equal to the current iterate, the extrapolated
// sweep coincides with the direct LADMM sweep for one step.
TEST(Step, ExplicitWithEqualMemoryIsOneLadmmStep) {
  std::mt19937 rng(31);
  const BlockProblem p = random_instance(rng);
  AlgorithmSpec two_step = make_spec(Family::TwoStepExplicit, p, 1.0);
  AlgorithmSpec ladmm = two_step;
  ladmm.family = Family::LadmmDirect;

  IterateState st = make_zero_state(p);
  for (size_t j = 0; j < st.x.size(); ++j) st.x[j] = random_vec(st.x[j].size(), rng);
  st.y = random_vec(p.m(), rng);
  st.x_prev = st.x;  // pinned memory
  st.y_prev = st.y;

  const IterateState a = step(p, two_step, st);
  const IterateState b = step(p, ladmm, st);
  EXPECT_LE(max_state_diff(a, b), 1e-14);
}

TEST(Kkt, ZeroAtSolutionAndFeasibilityTerm) {
  const BlockProblem p = lp3();
  IterateState st = make_zero_state(p);
  st.x[0][0] = 0.0;
  st.x[1][0] = 0.0;
  st.x[2][0] = 1.0;
  st.y[0] = -1.0 / 3.0;
  EXPECT_LE(kkt_residual(p, st, {0.1, 0.1, 0.1}, 1.0), 1e-12);

  // x = 0, y = 0: the block proxes fix 0, only feasibility beta*||b|| remains.
  IterateState zero = make_zero_state(p);
  for (double beta : {0.5, 2.0})
    EXPECT_NEAR(kkt_residual(p, zero, {0.1, 0.1, 0.1}, beta), beta * 3.0, 1e-12);
}

// Every specialized stepper must match the dense reference engine driven by
// its assembled matrix set, iterate by iterate.
TEST(Oracle, SteppersMatchDenseReference) {
  std::mt19937 rng(77);
  struct Case {
    Family family;
    double theta;
    std::vector<int> part;
  };
  const Case cases[] = {
      {Family::PdPrimalFirst, 0.0, {}},   {Family::PdDualFirst, 0.0, {}},
      {Family::TwoStepImplicit, 0.0, {}}, {Family::TwoStepExplicit, 0.0, {}},
      {Family::LadmmDirect, 0.0, {}},     {Family::VariantDiag, 0.2, {}},
      {Family::VariantOffdiag, 0.35, {}}, {Family::Hybrid, 0.0, {1}},
  };
  for (int inst = 0; inst < 3; ++inst) {
    std::vector<Mat> dense;
    const BlockProblem p = random_instance(rng, &dense);
    for (const auto& c : cases) {
      const double beta = 0.5 + 0.5 * inst;
      AlgorithmSpec spec = make_spec(c.family, p, beta, c.theta, c.part);
      const auto ms = build_matrix_set(c.family, dense, spec.alphas, beta, c.theta,
                                       c.part);
      const Vec r = make_scaling_diagonal(p, spec.alphas, beta);
      const Mat e = make_coupling_matrix(p, spec.alphas, beta);
      GenericTwoStepEngine reference(ms, p, r, e, spec.inner);

      IterateState fast = make_zero_state(p);
      for (size_t j = 0; j < fast.x.size(); ++j)
        fast.x[j] = random_vec(fast.x[j].size(), rng, 0.5);
      fast.y = random_vec(p.m(), rng, 0.5);
      fast.x_prev = fast.x;
      fast.y_prev = fast.y;
      IterateState ref = fast;

      Stepper stepper(p, spec);
      double worst = 0.0;
      for (int it = 0; it < 20; ++it) {
        stepper.step(fast);
        reference.step(ref);
        worst = std::max(worst, max_state_diff(fast, ref));
      }
      EXPECT_LE(worst, 1e-10) << to_string(c.family) << " instance " << inst;
    }
  }
}

// The matrix set of the one-step primal-dual family reproduces its stepper
// through the dense engine as well (M2 = 0 reduction).
TEST(Oracle, PdMatrixSetReproducesPdUpdates) {
  std::mt19937 rng(123);
  std::vector<Mat> dense;
  const BlockProblem p = random_instance(rng, &dense);
  AlgorithmSpec spec = make_spec(Family::PdPrimalFirst, p, 1.0);
  const auto ms = build_matrix_set(Family::PdPrimalFirst, dense, spec.alphas, 1.0);
  EXPECT_LE(ms.M2.cwiseAbs().maxCoeff(), 0.0);
  GenericTwoStepEngine reference(ms, p, make_scaling_diagonal(p, spec.alphas, 1.0),
                                 make_coupling_matrix(p, spec.alphas, 1.0));
  IterateState a = make_zero_state(p);
  a.x[0] = random_vec(a.x[0].size(), rng);
  a.x_prev = a.x;
  IterateState b = a;
  Stepper stepper(p, spec);
  for (int it = 0; it < 10; ++it) {
    stepper.step(a);
    reference.step(b);
  }
  EXPECT_LE(max_state_diff(a, b), 1e-11);
}

TEST(Oracle, StructuralErrorOnBadMatrixSet) {
  std::mt19937 rng(55);
  std::vector<Mat> dense;
  const BlockProblem p = random_instance(rng, &dense);
  const std::vector<double> alphas{0.05, 0.05, 0.05};
  const Vec r = make_scaling_diagonal(p, alphas, 1.0);
  const Mat e = make_coupling_matrix(p, alphas, 1.0);
  const Index n = p.n() + p.m();
  // An arbitrary symmetric set violates the triangular resolution contract.
  MatrixSet bad{Mat::Identity(n, n), Mat::Identity(n, n), Mat::Zero(n, n)};
  EXPECT_THROW(GenericTwoStepEngine(bad, p, r, e), std::invalid_argument);
}

TEST(Solve, TrivialProblemConvergesImmediately) {
  BlockProblem p;
  p.blocks.push_back({l1_norm(2), make_identity(2)});
  p.blocks.push_back({l1_norm(2), make_dense(2.0 * Mat::Identity(2, 2))});
  p.b = Vec::Zero(2);
  AlgorithmSpec spec = make_spec(Family::TwoStepExplicit, p, 1.0);
  StopRule stop;
  stop.max_iter = 10;
  stop.kkt_tol = 1e-12;
  const SolveResult res = solve(p, spec, stop);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.trace.back().k, 2);
}

TEST(Solve, Lp3ReachesTheMinimizer) {
  const BlockProblem p = lp3();
  for (Family f : {Family::TwoStepExplicit, Family::TwoStepImplicit,
                   Family::PdPrimalFirst, Family::PdDualFirst}) {
    AlgorithmSpec spec = make_spec(f, p, 1.0);
    spec.alphas = suggest_step_sizes(f, p.operators(), spec.beta, 0.9).alphas;
    StopRule stop;
    stop.max_iter = 5000;
    stop.kkt_tol = 1e-9;
    const SolveResult res = solve(p, spec, stop);
    EXPECT_TRUE(res.converged) << to_string(f);
    EXPECT_NEAR(res.state.x[0][0], 0.0, 1e-6) << to_string(f);
    EXPECT_NEAR(res.state.x[1][0], 0.0, 1e-6) << to_string(f);
    EXPECT_NEAR(res.state.x[2][0], 1.0, 1e-6) << to_string(f);
    EXPECT_NEAR(res.trace.back().objective, 1.0, 1e-6) << to_string(f);
  }
}

// If the KKT residual vanishes the state is a fixed point of every family's
// sweep.
TEST(Solve, FixedPointPropertyAcrossFamilies) {
  const BlockProblem p = lp3();
  IterateState st = make_zero_state(p);
  st.x[2][0] = 1.0;
  st.y[0] = -1.0 / 3.0;
  st.x_prev = st.x;
  st.y_prev = st.y;
  ASSERT_LE(kkt_residual(p, st, {0.05, 0.05, 0.05}, 1.0), 1e-12);
  for (Family f : {Family::PdPrimalFirst, Family::PdDualFirst, Family::TwoStepImplicit,
                   Family::TwoStepExplicit, Family::LadmmDirect, Family::VariantDiag,
                   Family::VariantOffdiag}) {
    AlgorithmSpec spec;
    spec.family = f;
    spec.alphas = {0.05, 0.05, 0.05};
    spec.beta = 1.0;
    spec.theta = 0.3;
    spec.inner.tol = 1e-13;
    spec.inner.max_inner = 5000;
    const IterateState next = step(p, spec, st);
    EXPECT_LE(max_state_diff(next, st), 1e-10) << to_string(f);
  }
}

// Degeneration identities: pinned two-step memory turns the explicit sweep
// into direct LADMM along the whole trajectory, and theta = 0 turns both
// variants into the implicit base.
TEST(Degeneration, PinnedMemoryEqualsLadmmTrajectory) {
  std::mt19937 rng(41);
  const BlockProblem p = random_instance(rng);
  AlgorithmSpec two_step = make_spec(Family::TwoStepExplicit, p, 1.0);
  AlgorithmSpec ladmm = two_step;
  ladmm.family = Family::LadmmDirect;

  IterateState pinned = make_zero_state(p);
  IterateState direct = make_zero_state(p);
  Stepper ladmm_stepper(p, ladmm);
  for (int it = 0; it < 25; ++it) {
    pinned.x_prev = pinned.x;  // pin memory before every sweep
    pinned.y_prev = pinned.y;
    pinned.k = 0;
    Stepper fresh(p, two_step);
    fresh.step(pinned);
    ladmm_stepper.step(direct);
    EXPECT_LE(max_state_diff(pinned, direct), 1e-12) << "iteration " << it;
  }
}

TEST(Degeneration, ThetaZeroVariantsFollowImplicitBase) {
  std::mt19937 rng(42);
  const BlockProblem p = random_instance(rng);
  AlgorithmSpec base = make_spec(Family::TwoStepImplicit, p, 1.0);
  for (Family f : {Family::VariantDiag, Family::VariantOffdiag}) {
    AlgorithmSpec variant = base;
    variant.family = f;
    variant.theta = 0.0;
    IterateState a = make_zero_state(p);
    IterateState b = make_zero_state(p);
    Stepper sa(p, base);
    Stepper sb(p, variant);
    for (int it = 0; it < 15; ++it) {
      sa.step(a);
      sb.step(b);
    }
    EXPECT_LE(max_state_diff(a, b), 1e-12) << to_string(f);
  }
}

TEST(Degeneration, HybridPartitionExtremesMatchBaseFamilies) {
  std::mt19937 rng(43);
  const BlockProblem p = random_instance(rng);
  AlgorithmSpec impl = make_spec(Family::TwoStepImplicit, p, 1.0);
  AlgorithmSpec expl = impl;
  expl.family = Family::TwoStepExplicit;
  AlgorithmSpec hyb_all = impl;
  hyb_all.family = Family::Hybrid;
  hyb_all.implicit_blocks = {0, 1, 2};
  AlgorithmSpec hyb_none = impl;
  hyb_none.family = Family::Hybrid;
  hyb_none.implicit_blocks = {};

  IterateState a = make_zero_state(p), b = make_zero_state(p);
  Stepper s1(p, impl), s2(p, hyb_all);
  for (int it = 0; it < 10; ++it) {
    s1.step(a);
    s2.step(b);
  }
  EXPECT_LE(max_state_diff(a, b), 1e-12);

  IterateState c = make_zero_state(p), d = make_zero_state(p);
  Stepper s3(p, expl), s4(p, hyb_none);
  for (int it = 0; it < 10; ++it) {
    s3.step(c);
    s4.step(d);
  }
  EXPECT_LE(max_state_diff(c, d), 1e-12);
}

TEST(Spec, ValidationErrors) {
  const BlockProblem p = lp3();
  AlgorithmSpec spec;
  spec.family = Family::VariantDiag;
  spec.alphas = {0.01, 0.01, 0.01};
  spec.theta = 1.0;
  EXPECT_THROW(Stepper(p, spec), std::invalid_argument);
  spec.theta = 0.5;
  spec.alphas = {0.01};
  EXPECT_THROW(Stepper(p, spec), std::invalid_argument);
  spec.alphas = {0.01, 0.01, 0.01};
  spec.family = Family::Hybrid;
  spec.implicit_blocks = {5};
  EXPECT_THROW(Stepper(p, spec), std::invalid_argument);
}

TEST(Solve, InnerFailureIsFlaggedNotFatal) {
  const BlockProblem p = lp3();
  AlgorithmSpec spec = make_spec(Family::TwoStepImplicit, p, 1.0);
  spec.inner.max_inner = 1;  // force non-convergence
  spec.inner.tol = 1e-16;
  StopRule stop;
  stop.max_iter = 5;
  const SolveResult res = solve(p, spec, stop);
  EXPECT_GT(res.inner_failures, 0);
  EXPECT_EQ(res.trace.size(), 5u);
}
