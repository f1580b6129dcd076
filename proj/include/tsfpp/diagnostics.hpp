#pragma once

// Empirical convergence-rate diagnostics: ergodic averages of the iterate
// history, boundedness / vanishing checks on the squared step norms, and the
// partial primal-dual gap with its decay-rate fit.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tsfpp/engine.hpp"

namespace tsfpp {

// Mean of v^2 ... v^{K+1}; iterates[i] must hold v^i. The window
// deliberately excludes v^0 and v^1.
inline Vec ergodic_average(const std::vector<Vec>& iterates, int K) {
  if (K < 1) throw std::invalid_argument("ergodic_average: K must be >= 1");
  if (iterates.size() < static_cast<size_t>(K) + 2)
    throw std::invalid_argument("ergodic_average: insufficient history");
  Vec s = iterates[2];
  for (int i = 3; i <= K + 1; ++i) s += iterates[static_cast<size_t>(i)];
  return s / static_cast<double>(K);
}

struct RateReport {
  std::vector<double> cumulative;     // c_k = sum_{i<=k} a_i
  std::vector<double> ergodic;        // (1/k) sum_{i<=k} a_i
  std::vector<double> runmin_scaled;  // k * min_{i<=k} a_i
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();
  bool bounded = false;    // partial sums stop growing over the final decade
  bool vanishing = false;  // k * running-min decreases over the final decade
};

namespace detail {

inline double fit_loglog_slope(const std::vector<double>& xs,
                               const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(ys[i] > 0) || !(xs[i] > 0)) continue;
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = n * sxx - sx * sx;
  if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / denom;
}

}  // namespace detail

// Verifies the summability-style behavior of a nonnegative per-iteration
// sequence (typically ||v^{k+1}-v^k||^2): c_k = k * (1/k) sum a_i must stay
// bounded and k * min_{i<=k} a_i must tend down. The slope is a least-squares
// log-log fit of (1/k) sum a_i over the final decade of k.
inline RateReport rate_report(const std::vector<double>& a,
                              double growth_ratio_max = 1.2) {
  const int K = static_cast<int>(a.size());
  if (K < 100) throw std::invalid_argument("rate_report: need at least 100 iterations");
  RateReport rep;
  rep.cumulative.resize(a.size());
  rep.ergodic.resize(a.size());
  rep.runmin_scaled.resize(a.size());
  double sum = 0.0, running_min = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= K; ++k) {
    const double ak = a[static_cast<size_t>(k - 1)];
    if (ak < 0) throw std::invalid_argument("rate_report: sequence must be nonnegative");
    sum += ak;
    running_min = std::min(running_min, ak);
    rep.cumulative[static_cast<size_t>(k - 1)] = sum;
    rep.ergodic[static_cast<size_t>(k - 1)] = sum / k;
    rep.runmin_scaled[static_cast<size_t>(k - 1)] = k * running_min;
  }
  const int k_dec = std::max(1, K / 10);
  const double c_end = rep.cumulative.back();
  const double c_dec = rep.cumulative[static_cast<size_t>(k_dec - 1)];
  rep.bounded = c_end <= growth_ratio_max * c_dec + 1e-300;
  const double rm_end = rep.runmin_scaled.back();
  const double rm_dec = rep.runmin_scaled[static_cast<size_t>(k_dec - 1)];
  rep.vanishing = rm_end == 0.0 || rm_end < rm_dec;

  std::vector<double> ks, es;
  for (int k = k_dec; k <= K; ++k) {
    ks.push_back(static_cast<double>(k));
    es.push_back(rep.ergodic[static_cast<size_t>(k - 1)]);
  }
  rep.fitted_slope = detail::fit_loglog_slope(ks, es);
  return rep;
}

// Reference point for the partial primal-dual gap: when rho is 0 the dual
// side is evaluated at y_center, otherwise the supremum over the rho-ball
// around y_center is taken in closed form.
struct GapQuery {
  Vec x_ref;     // stacked reference blocks, length n
  Vec y_center;  // length m
  double rho = 0.0;
};

// G(v, v') = Phi(v) - Phi(v') + <v', S_A v> evaluated directly; with rho > 0
// the y'-dependent part <Ax - b, y'> is replaced by its supremum
// <Ax - b, center> + rho ||Ax - b||. Returns +inf (flagged sentinel) when
// Phi(v) is infinite.
inline double partial_gap(const BlockProblem& p, const std::vector<Vec>& x,
                          const Vec& y, const GapQuery& q) {
  if (q.rho < 0) throw std::invalid_argument("partial_gap: rho must be >= 0");
  if (q.x_ref.size() != p.n() || q.y_center.size() != p.m())
    throw std::invalid_argument("partial_gap: reference size mismatch");
  double fx = 0.0, fx_ref = 0.0;
  Vec ax = Vec::Zero(p.m());
  Vec ax_ref = Vec::Zero(p.m());
  Index off = 0;
  for (size_t j = 0; j < p.blocks.size(); ++j) {
    const auto& bl = p.blocks[j];
    fx += bl.f.value(x[j]);
    const Vec xr = q.x_ref.segment(off, bl.A.cols());
    fx_ref += bl.f.value(xr);
    ax += bl.A.apply(x[j]);
    ax_ref += bl.A.apply(xr);
    off += bl.A.cols();
  }
  if (!std::isfinite(fx)) return kInf;
  const Vec feas = ax - p.b;
  const double dual_side = feas.dot(q.y_center) + q.rho * feas.norm();
  return fx + dual_side - fx_ref + p.b.dot(y) - ax_ref.dot(y);
}

inline double partial_gap(const BlockProblem& p, const IterateState& st,
                          const GapQuery& q) {
  return partial_gap(p, st.x, st.y, q);
}

struct GapRateReport {
  std::vector<int> ks;
  std::vector<double> gaps;  // G(v-bar_K, reference) per K
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();
  bool k_gap_bounded = false;
  bool negative_gap = false;  // gap below -1e-8: reference is not a saddle point
};

// Gap decay of the ergodic averages: history[i] holds the packed iterate
// v^i (so history needs at least v^0..v^2). Fits the log-log slope of
// G(v-bar_K, ref) over the final decade of K.
inline GapRateReport gap_rate_check(const BlockProblem& p,
                                    const std::vector<Vec>& history,
                                    const GapQuery& q) {
  if (history.size() < 3)
    throw std::invalid_argument("gap_rate_check: need iterates v^0..v^2 at least");
  const Index n = p.n(), m = p.m();
  const int k_max = static_cast<int>(history.size()) - 2;
  GapRateReport rep;
  rep.ks.reserve(static_cast<size_t>(k_max));
  rep.gaps.reserve(static_cast<size_t>(k_max));
  Vec sum = Vec::Zero(n + m);
  std::vector<Vec> xbar(p.blocks.size());
  for (int K = 1; K <= k_max; ++K) {
    sum += history[static_cast<size_t>(K + 1)];
    const Vec vbar = sum / static_cast<double>(K);
    Index off = 0;
    for (size_t j = 0; j < p.blocks.size(); ++j) {
      xbar[j] = vbar.segment(off, p.blocks[j].A.cols());
      off += p.blocks[j].A.cols();
    }
    const double g = partial_gap(p, xbar, Vec(vbar.tail(m)), q);
    rep.ks.push_back(K);
    rep.gaps.push_back(g);
    if (g < -1e-8) rep.negative_gap = true;
  }
  const int k_dec = std::max(1, k_max / 10);
  std::vector<double> ks, gs;
  for (int K = k_dec; K <= k_max; ++K) {
    ks.push_back(static_cast<double>(K));
    gs.push_back(rep.gaps[static_cast<size_t>(K - 1)]);
  }
  rep.fitted_slope = detail::fit_loglog_slope(ks, gs);
  const double kg_end = k_max * rep.gaps.back();
  const double kg_dec = k_dec * rep.gaps[static_cast<size_t>(k_dec - 1)];
  const double scale = std::abs(kg_dec) + std::abs(kg_end);
  rep.k_gap_bounded = scale <= 1e-12 || kg_end <= 1.2 * kg_dec + 1e-12 * scale;
  return rep;
}

}  // namespace tsfpp
