#pragma once

// The sparse-MRI experiment end to end: phantom, pseudo-radial sampling
// mask, the three-block dual problem, the literal four-step reconstruction
// loop, the relative-error / PSNR metrics and the family comparison
// benchmark.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tsfpp/diagnostics.hpp"
#include "tsfpp/engine.hpp"

namespace tsfpp {

struct MriConfig {
  Index d1 = 64, d2 = 64;
  int n_lines = 9;
  double mu = 3.0;
  double lambda_lowpass = 0.0;
  double lambda_highpass = 0.5;
  std::vector<double> alphas;  // 3 entries; empty selects the family default rule
  double beta = 1.0;
  double tau = 1000.0;
  int fstar_iters = 0;  // 0: ten times the benchmark iteration budget
};

// Sum of the ten standard phantom ellipse intensities sampled at pixel
// centers on [-1,1]^2; column-major vectorization (pixel (i,j) at i + j*d1).
inline Vec shepp_logan(Index d1, Index d2) {
  if (d1 < 16 || d2 < 16) throw std::invalid_argument("shepp_logan: dims must be >= 16");
  // intensity, semi-axis x, semi-axis y, center x, center y, rotation (deg)
  static const double e[10][6] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.01, 0.0230, 0.0230, 0.0, -0.605, 0.0},
      {0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  Vec img = Vec::Zero(d1 * d2);
  const double pi = std::acos(-1.0);
  for (Index j = 0; j < d2; ++j) {
    const double x = -1.0 + (2.0 * static_cast<double>(j) + 1.0) / static_cast<double>(d2);
    for (Index i = 0; i < d1; ++i) {
      const double y = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(d1);
      double v = 0.0;
      for (const auto& el : e) {
        const double phi = el[5] * pi / 180.0;
        const double dx = x - el[3], dy = y - el[4];
        const double xr = dx * std::cos(phi) + dy * std::sin(phi);
        const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((xr * xr) / (el[1] * el[1]) + (yr * yr) / (el[2] * el[2]) <= 1.0)
          v += el[0];
      }
      img[i + j * d1] = v;
    }
  }
  return img;
}

// Union of n_lines digital lines through the DC frequency at equispaced
// angles in [0, pi), rasterized on the centered grid and mapped to standard
// DFT indexing (flattened k1 + k2*d1). Deterministic; always contains DC.
inline std::vector<Index> radial_mask(Index d1, Index d2, int n_lines) {
  if (n_lines < 1) throw std::invalid_argument("radial_mask: need at least one line");
  const double pi = std::acos(-1.0);
  std::set<Index> out;
  const Index r_lo = -(d1 / 2), r_hi = r_lo + d1 - 1;
  const Index c_lo = -(d2 / 2), c_hi = c_lo + d2 - 1;
  auto add = [&](Index r, Index c) {
    const Index k1 = ((r % d1) + d1) % d1;
    const Index k2 = ((c % d2) + d2) % d2;
    out.insert(k1 + k2 * d1);
  };
  for (int l = 0; l < n_lines; ++l) {
    const double phi = pi * static_cast<double>(l) / static_cast<double>(n_lines);
    const double dc = std::cos(phi), dr = std::sin(phi);
    if (std::abs(dc) >= std::abs(dr)) {
      const double slope = dr / dc;
      for (Index c = c_lo; c <= c_hi; ++c) {
        const Index r = static_cast<Index>(std::llround(slope * static_cast<double>(c)));
        if (r >= r_lo && r <= r_hi) add(r, c);
      }
    } else {
      const double slope = dc / dr;
      for (Index r = r_lo; r <= r_hi; ++r) {
        const Index c = static_cast<Index>(std::llround(slope * static_cast<double>(r)));
        if (c >= c_lo && c <= c_hi) add(r, c);
      }
    }
  }
  return std::vector<Index>(out.begin(), out.end());
}

struct MriOperators {
  Index d1 = 0, d2 = 0;
  std::vector<Index> mask;
  LinearOperator B, W, K;
};

inline MriOperators build_mri_operators(Index d1, Index d2, std::vector<Index> mask) {
  MriOperators ops;
  ops.d1 = d1;
  ops.d2 = d2;
  ops.B = make_tv(d1, d2);
  ops.W = make_undecimated_haar(d1, d2);
  ops.K = make_partial_fourier(d1, d2, mask);
  ops.mask = std::move(mask);
  return ops;
}

// Diagonal weights of the sparsity term: zero on the low-pass block, the
// high-pass weight on the remaining three blocks.
inline Vec wavelet_weights(const MriConfig& cfg) {
  const Index d = cfg.d1 * cfg.d2;
  Vec w(4 * d);
  w.head(d).setConstant(cfg.lambda_lowpass);
  w.tail(3 * d).setConstant(cfg.lambda_highpass);
  return w;
}

// F(u) = mu * TV(u) + || Lambda W u ||_1.
inline double mri_objective(const MriOperators& ops, const Vec& weights, double mu,
                            const Vec& u) {
  return mu * group_l2_value(ops.B.apply(u)) +
         ops.W.apply(u).cwiseAbs().dot(weights);
}

// The dual of the reconstruction model as a three-block problem: blocks are
// the TV, wavelet and data dual variables with operators B^T, W^T, K^T and a
// zero right-hand side in image space.
inline BlockProblem build_dual_problem(const MriConfig& cfg, const MriOperators& ops,
                                       const Vec& b) {
  if (b.size() != ops.K.rows())
    throw std::invalid_argument("build_dual_problem: data length must match the mask");
  const Index d = cfg.d1 * cfg.d2;
  BlockProblem p;
  p.blocks.push_back({group_ball_indicator(cfg.mu, d), make_adjoint(ops.B)});
  p.blocks.push_back({box_indicator(wavelet_weights(cfg)), make_adjoint(ops.W)});
  p.blocks.push_back({linear_term(b), make_adjoint(ops.K)});
  p.b = Vec::Zero(d);
  p.validate();
  return p;
}

// Initial iterate shared by the literal runner and the engine path: the TV
// dual starts from the zero-filled reconstruction K^T b, everything else
// from zero, with the two-step memory equal to the start.
inline IterateState mri_initial_state(const BlockProblem& p, const MriOperators& ops,
                                      const Vec& b) {
  IterateState st = make_zero_state(p);
  st.x[0] = ops.B.apply(ops.K.apply_adjoint(b));
  st.x_prev[0] = st.x[0];
  return st;
}

// PSNR = 10 log10(255 sqrt(d) / ||u - u_star||), exactly as the experiment
// defines it; +inf sentinel on exact equality.
inline double psnr(const Vec& u, const Vec& u_star) {
  if (u.size() != u_star.size()) throw std::invalid_argument("psnr: size mismatch");
  const double err = (u - u_star).norm();
  if (err == 0.0) return kInf;
  return 10.0 * std::log10(255.0 * std::sqrt(static_cast<double>(u.size())) / err);
}

inline double eps1_metric(double f_value, double feasibility_norm, double tau,
                          double f_star) {
  if (!(f_star > 0)) throw std::invalid_argument("eps1: F* must be positive");
  return (f_value + tau * feasibility_norm - f_star) / f_star;
}

// Relative change of successive multipliers; NaN sentinel at ||y|| = 0.
inline double eps2_metric(const Vec& y, const Vec& y_prev) {
  const double yn = y.norm();
  if (yn == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (y - y_prev).norm() / yn;
}

// Step-size rules of the experiment: the Jacobi family uses the uniform
// (1/8, 1/8, 1/8) with beta = 1; the Gauss-Seidel families use
// (1/8, s/||W||^2, s/||K||^2) with s = 0.999999. These are the practical
// parameters, not theory-certified ones.
inline std::vector<double> jladmm_parameters() { return {0.125, 0.125, 0.125}; }

inline std::vector<double> practical_parameters(const MriOperators& ops,
                                                double safety = 0.999999) {
  const double w2 = op_norm_sq_est(ops.W).value;
  const double k2 = op_norm_sq_est(ops.K).value;
  return {0.125, safety / w2, safety / k2};
}

inline AlgorithmSpec mri_default_spec(Family family, const MriConfig& cfg,
                                      const MriOperators& ops) {
  AlgorithmSpec spec;
  spec.family = family;
  spec.beta = cfg.beta;
  if (!cfg.alphas.empty()) {
    if (cfg.alphas.size() != 3)
      throw std::invalid_argument("MriConfig: expected 3 alphas");
    spec.alphas = cfg.alphas;
  } else if (family == Family::PdDualFirst || family == Family::PdPrimalFirst) {
    spec.alphas = jladmm_parameters();
  } else {
    spec.alphas = practical_parameters(ops);
  }
  return spec;
}

struct MriRunResult {
  Vec u;  // recovered image, -y at the final iterate
  RunTrace trace;
  IterateState state;
  bool converged = false;
  std::string stop_reason;
};

namespace detail {

// Fills the experiment metrics into a trace record: eps1 against F* (when
// supplied), PSNR of -y against the ground truth (when supplied).
inline SolveHooks mri_metric_hooks(const MriOperators& ops, const Vec& weights,
                                   double mu, const Vec& b, double tau, double f_star,
                                   const Vec* u_star,
                                   std::function<bool(const TraceRecord&)> stop_pred) {
  SolveHooks hooks;
  hooks.augment = [&ops, weights, mu, b, tau, f_star, u_star](const IterateState& st,
                                                              TraceRecord& rec) {
    const Vec u = -st.y;
    if (f_star > 0) {
      const double f = mri_objective(ops, weights, mu, u);
      rec.eps1 = eps1_metric(f, (ops.K.apply(u) - b).norm(), tau, f_star);
    }
    if (u_star) rec.psnr = psnr(u, *u_star);
  };
  if (stop_pred)
    hooks.should_stop = [stop_pred](const IterateState&, const TraceRecord& rec) {
      return stop_pred(rec);
    };
  return hooks;
}

}  // namespace detail

// The literal four-step reconstruction loop (project the TV dual, project
// the wavelet dual, shift the data dual, update the multiplier), kept as an
// independent transcription against which the generic engine is tested.
inline MriRunResult algorithm1_run(
    const MriConfig& cfg, const MriOperators& ops, const Vec& b, const StopRule& stop,
    double f_star = 0.0, const Vec* u_star = nullptr,
    const AlgorithmSpec* spec_override = nullptr,
    const std::function<void(const std::vector<Vec>&, const Vec&)>& on_iterate = {}) {
  const BlockProblem p = build_dual_problem(cfg, ops, b);
  const AlgorithmSpec spec = spec_override
                                 ? *spec_override
                                 : mri_default_spec(Family::TwoStepExplicit, cfg, ops);
  if (spec.alphas.size() != 3)
    throw std::invalid_argument("algorithm1_run: expected 3 alphas");
  const double a1 = spec.alphas[0], a2 = spec.alphas[1], a3 = spec.alphas[2];
  const double beta = spec.beta;
  const Index d = cfg.d1 * cfg.d2;
  const Vec weights = wavelet_weights(cfg);

  IterateState st = mri_initial_state(p, ops, b);
  Vec x1 = st.x[0], x2 = st.x[1], x3 = st.x[2], y = st.y;
  Vec x1_prev = x1, x2_prev = x2, x3_prev = x3, y_prev = y;

  MriRunResult out;
  out.stop_reason = "max_iter";
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < stop.max_iter; ++k) {
    const Vec x1_old = x1, x2_old = x2, x3_old = x3, y_old = y;
    x1 = project_group_l2_ball(
        x1 - a1 * ops.B.apply(ops.B.apply_adjoint(x1) +
                              ops.W.apply_adjoint(2.0 * x2 - x2_prev) +
                              ops.K.apply_adjoint(2.0 * x3 - x3_prev) + y / beta),
        cfg.mu, d);
    x2 = project_box(
        x2 - a2 * ops.W.apply(ops.B.apply_adjoint(x1) + ops.W.apply_adjoint(x2) +
                              ops.K.apply_adjoint(2.0 * x3 - x3_prev) + y / beta),
        weights);
    x3 = x3 -
         a3 * ops.K.apply(ops.B.apply_adjoint(x1) + ops.W.apply_adjoint(x2) +
                          ops.K.apply_adjoint(x3) + y / beta) -
         (a3 / beta) * b;
    y = y + beta * (ops.B.apply_adjoint(x1) + ops.W.apply_adjoint(x2) +
                    ops.K.apply_adjoint(x3));
    x1_prev = x1_old;
    x2_prev = x2_old;
    x3_prev = x3_old;
    y_prev = y_old;
    if (on_iterate) on_iterate({x1, x2, x3}, y);

    TraceRecord rec;
    rec.k = k + 1;
    rec.step_norm_sq = (x1 - x1_old).squaredNorm() + (x2 - x2_old).squaredNorm() +
                       (x3 - x3_old).squaredNorm() + (y - y_old).squaredNorm();
    rec.objective = b.dot(x3);
    rec.eps2 = eps2_metric(y, y_old);
    const Vec u = -y;
    if (f_star > 0)
      rec.eps1 = eps1_metric(mri_objective(ops, weights, cfg.mu, u),
                             (ops.K.apply(u) - b).norm(), cfg.tau, f_star);
    if (u_star) rec.psnr = psnr(u, *u_star);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.trace.push_back(rec);
    if (stop.eps2_tol > 0 && std::isfinite(rec.eps2) && rec.eps2 < stop.eps2_tol) {
      out.converged = true;
      out.stop_reason = "eps2";
      break;
    }
  }
  st.x = {x1, x2, x3};
  st.x_prev = {x1_prev, x2_prev, x3_prev};
  st.y = y;
  st.y_prev = y_prev;
  st.k = static_cast<int>(out.trace.size());
  out.state = std::move(st);
  out.u = -y;
  return out;
}

struct BenchmarkEntry {
  std::string family;
  double epsilon = 0.0;
  int iterations = -1;  // -1 renders as the "(-,-,-)" row
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
  double seconds = std::numeric_limits<double>::quiet_NaN();
};

struct BenchmarkFamilyRun {
  std::string name;
  Family family = Family::TwoStepExplicit;
  AlgorithmSpec spec;
  MriRunResult run;
};

struct BenchmarkResult {
  Vec phantom;
  std::vector<Index> mask;
  Vec data;
  double f_star = 0.0;
  double sampling_ratio = 0.0;
  std::vector<BenchmarkFamilyRun> runs;
  std::vector<BenchmarkEntry> eps1_rows;  // first k with eps1 below each tolerance
  std::vector<BenchmarkEntry> eps2_rows;  // same for eps2
};

namespace detail {

inline int first_below(const RunTrace& trace, double tol, bool use_eps1) {
  for (const auto& rec : trace) {
    const double v = use_eps1 ? rec.eps1 : rec.eps2;
    if (std::isfinite(v) && v < tol) return rec.k;
  }
  return -1;
}

}  // namespace detail

// Runs each requested family on the same phantom / mask / data and collects
// the first iteration reaching each tolerance, with the PSNR and elapsed
// time at that iteration. F* comes from a long reference run of the direct
// LADMM on the same instance.
inline BenchmarkResult benchmark(const MriConfig& cfg,
                                 const std::vector<std::string>& families,
                                 int max_iter, std::vector<double> eps1_tols,
                                 std::vector<double> eps2_tols, int workers = 1) {
  BenchmarkResult out;
  out.phantom = shepp_logan(cfg.d1, cfg.d2);
  out.mask = radial_mask(cfg.d1, cfg.d2, cfg.n_lines);
  out.sampling_ratio = static_cast<double>(out.mask.size()) /
                       static_cast<double>(cfg.d1 * cfg.d2);
  const MriOperators ops = build_mri_operators(cfg.d1, cfg.d2, out.mask);
  out.data = ops.K.apply(out.phantom);
  const Vec weights = wavelet_weights(cfg);

  // Reference value of the penalized objective from a long direct-LADMM run.
  {
    const int ref_iters = cfg.fstar_iters > 0 ? cfg.fstar_iters : 10 * max_iter;
    StopRule ref_stop;
    ref_stop.max_iter = ref_iters;
    ref_stop.kkt_stride = 0;
    AlgorithmSpec ref_spec = mri_default_spec(Family::LadmmDirect, cfg, ops);
    const BlockProblem p = build_dual_problem(cfg, ops, out.data);
    SolveResult ref = solve(p, ref_spec, ref_stop, {}, mri_initial_state(p, ops, out.data));
    const Vec u_ref = -ref.state.y;
    out.f_star = mri_objective(ops, weights, cfg.mu, u_ref) +
                 cfg.tau * (ops.K.apply(u_ref) - out.data).norm();
  }

  std::sort(eps1_tols.begin(), eps1_tols.end(), std::greater<double>());
  std::sort(eps2_tols.begin(), eps2_tols.end(), std::greater<double>());
  const double eps1_min = eps1_tols.empty() ? 0.0 : eps1_tols.back();
  const double eps2_min = eps2_tols.empty() ? 0.0 : eps2_tols.back();

  out.runs.resize(families.size());
  auto run_one = [&](size_t idx) {
    BenchmarkFamilyRun& fr = out.runs[idx];
    fr.name = families[idx];
    fr.family = parse_family(families[idx]);
    fr.spec = mri_default_spec(fr.family, cfg, ops);
    const BlockProblem p = build_dual_problem(cfg, ops, out.data);
    StopRule stop;
    stop.max_iter = max_iter;
    stop.kkt_stride = 0;
    auto stop_pred = [eps1_min, eps2_min](const TraceRecord& rec) {
      const bool e1 = eps1_min <= 0 || (std::isfinite(rec.eps1) && rec.eps1 < eps1_min);
      const bool e2 = eps2_min <= 0 || (std::isfinite(rec.eps2) && rec.eps2 < eps2_min);
      return e1 && e2;
    };
    SolveHooks hooks = detail::mri_metric_hooks(ops, weights, cfg.mu, out.data,
                                                cfg.tau, out.f_star, &out.phantom,
                                                stop_pred);
    SolveResult res = solve(p, fr.spec, stop, hooks, mri_initial_state(p, ops, out.data));
    fr.run.u = -res.state.y;
    fr.run.trace = std::move(res.trace);
    fr.run.state = std::move(res.state);
    fr.run.converged = res.converged;
    fr.run.stop_reason = res.stop_reason;
  };

  workers = std::max(1, std::min<int>(workers, static_cast<int>(families.size())));
  if (workers == 1) {
    for (size_t i = 0; i < families.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < families.size(); i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& t : pool) t.join();
  }

  for (const auto& fr : out.runs) {
    for (double tol : eps1_tols) {
      BenchmarkEntry e;
      e.family = fr.name;
      e.epsilon = tol;
      e.iterations = detail::first_below(fr.run.trace, tol, true);
      if (e.iterations > 0) {
        const auto& rec = fr.run.trace[static_cast<size_t>(e.iterations - 1)];
        e.psnr_db = rec.psnr;
        e.seconds = rec.seconds;
      }
      out.eps1_rows.push_back(e);
    }
    for (double tol : eps2_tols) {
      BenchmarkEntry e;
      e.family = fr.name;
      e.epsilon = tol;
      e.iterations = detail::first_below(fr.run.trace, tol, false);
      if (e.iterations > 0) {
        const auto& rec = fr.run.trace[static_cast<size_t>(e.iterations - 1)];
        e.psnr_db = rec.psnr;
        e.seconds = rec.seconds;
      }
      out.eps2_rows.push_back(e);
    }
  }
  return out;
}

}  // namespace tsfpp
