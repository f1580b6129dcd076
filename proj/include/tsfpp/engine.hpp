#pragma once

// The two-step fixed-point iteration in two forms: specialized matrix-free
// steppers for every solver family, and a dense reference engine that
// resolves the scheme directly from an assembled matrix triple. Plus the
// fixed-point (KKT) residual and the outer solve loop with tracing.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tsfpp/condition_m.hpp"
#include "tsfpp/family.hpp"
#include "tsfpp/linop.hpp"
#include "tsfpp/prox.hpp"

namespace tsfpp {

struct Block {
  ProxFunction f;
  LinearOperator A;
};

// min sum_i f_i(x_i) subject to sum_i A_i x_i = b.
struct BlockProblem {
  std::vector<Block> blocks;
  Vec b;

  Index num_blocks() const { return static_cast<Index>(blocks.size()); }
  Index m() const { return b.size(); }
  Index n() const {
    Index t = 0;
    for (const auto& bl : blocks) t += bl.A.cols();
    return t;
  }

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("BlockProblem: no blocks");
    for (const auto& bl : blocks) {
      if (bl.A.rows() != m())
        throw std::invalid_argument("BlockProblem: operator rows must equal length of b");
      if (bl.f.dim != bl.A.cols())
        throw std::invalid_argument("BlockProblem: prox dimension mismatch");
    }
  }

  std::vector<LinearOperator> operators() const {
    std::vector<LinearOperator> ops;
    ops.reserve(blocks.size());
    for (const auto& bl : blocks) ops.push_back(bl.A);
    return ops;
  }
};

// Stacked iterate (x_1,...,x_s, y) plus its predecessor (two-step memory).
struct IterateState {
  std::vector<Vec> x, x_prev;
  Vec y, y_prev;
  int k = 0;
};

inline IterateState make_zero_state(const BlockProblem& p) {
  IterateState st;
  st.x.reserve(p.blocks.size());
  for (const auto& bl : p.blocks) st.x.push_back(Vec::Zero(bl.A.cols()));
  st.x_prev = st.x;
  st.y = Vec::Zero(p.m());
  st.y_prev = st.y;
  return st;
}

inline Vec pack_state(const std::vector<Vec>& x, const Vec& y) {
  Index n = 0;
  for (const auto& xi : x) n += xi.size();
  Vec v(n + y.size());
  Index off = 0;
  for (const auto& xi : x) {
    v.segment(off, xi.size()) = xi;
    off += xi.size();
  }
  v.tail(y.size()) = y;
  return v;
}

inline Vec pack_state(const IterateState& st) { return pack_state(st.x, st.y); }

inline double step_norm_sq(const IterateState& st) {
  double t = (st.y - st.y_prev).squaredNorm();
  for (size_t i = 0; i < st.x.size(); ++i) t += (st.x[i] - st.x_prev[i]).squaredNorm();
  return t;
}

struct InnerResult {
  Vec z;
  int iterations = 0;
  bool converged = true;
};

// Solves the block fixed-point equation z = prox_{gamma f}(r + D z) for a
// symmetric negative-semidefinite coupling D (here always -alpha A^T A), by
// proximal gradient on f(z) + (1/2 gamma)||z - r||^2 - (1/2 gamma) z^T D z.
// The smooth part has modulus (1 + ||D||)/gamma, so the step gamma/(1+||D||)
// converges linearly; iteration stops once the fixed-point residual is below
// cfg.tol.
inline InnerResult solve_block_fixed_point(const ProxFunction& f,
                                           const std::function<Vec(const Vec&)>& dmap,
                                           double d_norm, double gamma, const Vec& r,
                                           const InnerSolverConfig& cfg, Vec z) {
  const double t = gamma / (1.0 + d_norm);
  for (int it = 0; it < cfg.max_inner; ++it) {
    const Vec dz = dmap(z);
    const Vec fp = f.prox(r + dz, gamma);
    if ((z - fp).norm() <= cfg.tol) return {std::move(z), it, true};
    const Vec grad = (z - r - dz) / gamma;
    z = f.prox(z - t * grad, t);
  }
  const Vec dz = dmap(z);
  const Vec fp = f.prox(r + dz, gamma);
  const bool ok = (z - fp).norm() <= cfg.tol;
  return {std::move(z), cfg.max_inner, ok};
}

// Distance of (x, y) from the fixed-point characterization of a solution:
// sum_i ||x_i - prox_{(a_i/b) f_i}(x_i - (a_i/b) A_i^T y)|| plus the scaled
// feasibility gap b*||sum_i A_i x_i - b||. Zero exactly at solutions.
inline double kkt_residual(const BlockProblem& p, const IterateState& st,
                           const std::vector<double>& alphas, double beta) {
  if (alphas.size() != p.blocks.size())
    throw std::invalid_argument("kkt_residual: one alpha per block required");
  if (!(beta > 0)) throw std::invalid_argument("kkt_residual: beta must be positive");
  double total = 0.0;
  Vec resid = -p.b;
  for (size_t j = 0; j < p.blocks.size(); ++j) {
    const auto& bl = p.blocks[j];
    const double gamma = alphas[j] / beta;
    const Vec w = st.x[j] - gamma * bl.A.apply_adjoint(st.y);
    total += (st.x[j] - bl.f.prox(w, gamma)).norm();
    resid += bl.A.apply(st.x[j]);
  }
  total += beta * resid.norm();
  return total;
}

// One full Gauss-Seidel sweep over the blocks followed by the multiplier
// update, specialized per family. Keeps the images A_i x_i^k and
// A_i x_i^{k-1} cached across consecutive steps of the same state.
class Stepper {
 public:
  Stepper(const BlockProblem& p, AlgorithmSpec spec)
      : p_(&p), spec_(std::move(spec)) {
    p.validate();
    const size_t s = p.blocks.size();
    detail::validate_family_params(spec_.family, s, spec_.alphas, spec_.beta,
                                   spec_.theta);
    if (spec_.inner.max_inner <= 0 || !(spec_.inner.tol > 0))
      throw std::invalid_argument("Stepper: inner solver config must be positive");
    implicit_row_.resize(s, false);
    for (size_t j = 0; j < s; ++j) {
      if (spec_.family == Family::Hybrid) {
        for (int i : spec_.implicit_blocks) {
          if (i < 0 || static_cast<size_t>(i) >= s)
            throw std::invalid_argument("Stepper: hybrid partition index out of range");
          if (i == static_cast<int>(j)) implicit_row_[j] = true;
        }
      } else {
        implicit_row_[j] = detail::is_implicit_row(spec_.family, static_cast<int>(j), {});
      }
    }
    a_norm_sq_.resize(s, 0.0);
    for (size_t j = 0; j < s; ++j)
      if (implicit_row_[j]) a_norm_sq_[j] = op_norm_sq_est(p.blocks[j].A).value;
  }

  const AlgorithmSpec& spec() const { return spec_; }
  int inner_failure_count() const { return inner_failures_; }
  // sum_i A_i x_i - b after the most recent step.
  const Vec& constraint_residual() const { return residual_; }

  void step(IterateState& st) {
    const size_t s = p_->blocks.size();
    const double beta = spec_.beta;
    if (st.k != cache_k_ || a_cur_.size() != s) refresh_caches(st);

    std::vector<Vec> a_new(s);
    switch (spec_.family) {
      case Family::PdPrimalFirst: {
        for (size_t j = 0; j < s; ++j) {
          const double gamma = spec_.alphas[j] / beta;
          const auto& bl = p_->blocks[j];
          Vec xn = bl.f.prox(st.x[j] - gamma * bl.A.apply_adjoint(st.y), gamma);
          a_new[j] = bl.A.apply(xn);
          st.x_prev[j] = std::move(st.x[j]);
          st.x[j] = std::move(xn);
        }
        Vec drive = -p_->b;
        for (size_t i = 0; i < s; ++i) drive += 2.0 * a_new[i] - a_cur_[i];
        st.y_prev = st.y;
        st.y += beta * drive;
        break;
      }
      case Family::PdDualFirst: {
        Vec drive = -p_->b;
        for (size_t i = 0; i < s; ++i) drive += a_cur_[i];
        const Vec y_new = st.y + beta * drive;
        const Vec y_ext = 2.0 * y_new - st.y;
        for (size_t j = 0; j < s; ++j) {
          const double gamma = spec_.alphas[j] / beta;
          const auto& bl = p_->blocks[j];
          Vec xn = bl.f.prox(st.x[j] - gamma * bl.A.apply_adjoint(y_ext), gamma);
          a_new[j] = bl.A.apply(xn);
          st.x_prev[j] = std::move(st.x[j]);
          st.x[j] = std::move(xn);
        }
        st.y_prev = st.y;
        st.y = y_new;
        break;
      }
      default:
        gauss_seidel_sweep(st, a_new);
        break;
    }

    residual_ = -p_->b;
    for (size_t i = 0; i < s; ++i) residual_ += a_new[i];
    if (spec_.family != Family::PdPrimalFirst && spec_.family != Family::PdDualFirst) {
      st.y_prev = st.y;
      st.y += beta * residual_;
    }
    a_prev_ = std::move(a_cur_);
    a_cur_ = std::move(a_new);
    cache_k_ = ++st.k;
  }

 private:
  void refresh_caches(const IterateState& st) {
    const size_t s = p_->blocks.size();
    a_cur_.resize(s);
    a_prev_.resize(s);
    for (size_t i = 0; i < s; ++i) {
      a_cur_[i] = p_->blocks[i].A.apply(st.x[i]);
      a_prev_[i] = p_->blocks[i].A.apply(st.x_prev[i]);
    }
    cache_k_ = st.k;
  }

  void gauss_seidel_sweep(IterateState& st, std::vector<Vec>& a_new) {
    const size_t s = p_->blocks.size();
    const double beta = spec_.beta;
    const double theta = spec_.theta;
    const bool ladmm = spec_.family == Family::LadmmDirect;
    const bool offdiag = spec_.family == Family::VariantOffdiag;
    const bool inertial = spec_.family == Family::VariantDiag;

    // suffix[j] = sum over i > j of the extrapolated images of future blocks.
    std::vector<Vec> suffix(s + 1, Vec::Zero(p_->m()));
    for (size_t i = s; i-- > 0;) {
      Vec q;
      if (ladmm)
        q = a_cur_[i];
      else if (offdiag)
        q = (2.0 + theta) * a_cur_[i] - (1.0 + theta) * a_prev_[i];
      else
        q = 2.0 * a_cur_[i] - a_prev_[i];
      suffix[i] = suffix[i + 1] + q;
    }

    Vec prefix = Vec::Zero(p_->m());
    const Vec y_scaled = st.y / beta;
    for (size_t j = 0; j < s; ++j) {
      const auto& bl = p_->blocks[j];
      const double alpha = spec_.alphas[j];
      const double gamma = alpha / beta;
      Vec base = st.x[j];
      if (inertial && theta != 0.0) base += theta * (st.x[j] - st.x_prev[j]);

      Vec xn;
      if (implicit_row_[j]) {
        const Vec drive = prefix + suffix[j + 1] - p_->b + y_scaled;
        const Vec c = base - alpha * bl.A.apply_adjoint(drive);
        auto dmap = [&bl, alpha](const Vec& z) -> Vec {
          return -alpha * bl.A.apply_adjoint(bl.A.apply(z));
        };
        InnerResult res = solve_block_fixed_point(bl.f, dmap, alpha * a_norm_sq_[j],
                                                  gamma, c, spec_.inner, st.x[j]);
        if (!res.converged) ++inner_failures_;
        xn = std::move(res.z);
      } else {
        const Vec drive = prefix + a_cur_[j] + suffix[j + 1] - p_->b + y_scaled;
        xn = bl.f.prox(base - alpha * bl.A.apply_adjoint(drive), gamma);
      }
      a_new[j] = bl.A.apply(xn);
      prefix += offdiag ? Vec((1.0 + theta) * a_new[j] - theta * a_cur_[j]) : a_new[j];
      st.x_prev[j] = std::move(st.x[j]);
      st.x[j] = std::move(xn);
    }
  }

  const BlockProblem* p_;
  AlgorithmSpec spec_;
  std::vector<char> implicit_row_;
  std::vector<double> a_norm_sq_;
  std::vector<Vec> a_cur_, a_prev_;
  Vec residual_;
  int cache_k_ = -1;
  int inner_failures_ = 0;
};

inline IterateState step(const BlockProblem& p, const AlgorithmSpec& spec,
                         IterateState st) {
  Stepper stepper(p, spec);
  stepper.step(st);
  return st;
}

struct TraceRecord {
  int k = 0;
  double step_norm_sq = std::numeric_limits<double>::quiet_NaN();
  double kkt = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  double eps1 = std::numeric_limits<double>::quiet_NaN();
  double eps2 = std::numeric_limits<double>::quiet_NaN();
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

using RunTrace = std::vector<TraceRecord>;

struct StopRule {
  int max_iter = 1000;
  double eps2_tol = 0.0;  // <= 0 disables
  double kkt_tol = 0.0;   // <= 0 disables
  int kkt_stride = 1;     // compute the KKT residual every so many iterations; 0 = off
};

struct SolveHooks {
  // Runs after each iteration; may fill the MRI metric fields of the record.
  std::function<void(const IterateState&, TraceRecord&)> augment;
  // Extra stop predicate evaluated after the record is complete.
  std::function<bool(const IterateState&, const TraceRecord&)> should_stop;
};

struct SolveResult {
  IterateState state;
  RunTrace trace;
  bool converged = false;
  std::string stop_reason = "max_iter";
  int inner_failures = 0;
};

// Iterates the chosen stepper until a stop criterion fires. Initialization
// follows the v^0 = v^1 convention unless the caller supplies a state with
// distinct memory.
inline SolveResult solve(const BlockProblem& p, const AlgorithmSpec& spec,
                         const StopRule& stop, const SolveHooks& hooks = {},
                         IterateState init = {}) {
  SolveResult res;
  res.state = init.x.empty() ? make_zero_state(p) : std::move(init);
  Stepper stepper(p, spec);
  res.trace.reserve(static_cast<size_t>(std::min(stop.max_iter, 1 << 20)));
  const auto t0 = std::chrono::steady_clock::now();
  for (int it = 0; it < stop.max_iter; ++it) {
    stepper.step(res.state);
    TraceRecord rec;
    rec.k = res.state.k;
    rec.step_norm_sq = step_norm_sq(res.state);
    double obj = 0.0;
    for (size_t j = 0; j < p.blocks.size(); ++j) obj += p.blocks[j].f.value(res.state.x[j]);
    rec.objective = obj;
    const double yn = res.state.y.norm();
    rec.eps2 = yn > 0 ? (res.state.y - res.state.y_prev).norm() / yn
                      : std::numeric_limits<double>::quiet_NaN();
    const bool want_kkt =
        stop.kkt_tol > 0 || (stop.kkt_stride > 0 && it % stop.kkt_stride == 0);
    if (want_kkt) rec.kkt = kkt_residual(p, res.state, spec.alphas, spec.beta);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (hooks.augment) hooks.augment(res.state, rec);
    res.trace.push_back(rec);
    if (stop.eps2_tol > 0 && std::isfinite(rec.eps2) && rec.eps2 < stop.eps2_tol) {
      res.converged = true;
      res.stop_reason = "eps2";
      break;
    }
    if (stop.kkt_tol > 0 && std::isfinite(rec.kkt) && rec.kkt < stop.kkt_tol) {
      res.converged = true;
      res.stop_reason = "kkt";
      break;
    }
    if (hooks.should_stop && hooks.should_stop(res.state, res.trace.back())) {
      res.converged = true;
      res.stop_reason = "hook";
      break;
    }
  }
  res.inner_failures = stepper.inner_failure_count();
  return res;
}

// R = diag(beta/alpha_i per block, 1/beta on the multiplier part).
inline Vec make_scaling_diagonal(const BlockProblem& p,
                                 const std::vector<double>& alphas, double beta) {
  Vec r(p.n() + p.m());
  Index off = 0;
  for (size_t j = 0; j < p.blocks.size(); ++j) {
    r.segment(off, p.blocks[j].A.cols()).setConstant(beta / alphas[j]);
    off += p.blocks[j].A.cols();
  }
  r.tail(p.m()).setConstant(1.0 / beta);
  return r;
}

// E = [[I, -P^{-1} A^T], [beta A, I]] materialized densely.
inline Mat make_coupling_matrix(const BlockProblem& p,
                                const std::vector<double>& alphas, double beta) {
  const Index n = p.n(), m = p.m();
  Mat e = Mat::Identity(n + m, n + m);
  Index off = 0;
  for (size_t j = 0; j < p.blocks.size(); ++j) {
    const Mat aj = p.blocks[j].A.to_dense();
    e.block(off, n, aj.cols(), m) = -(alphas[j] / beta) * aj.transpose();
    e.block(n, off, m, aj.cols()) = beta * aj;
    off += aj.cols();
  }
  return e;
}

// Dense reference resolution of the two-step scheme for a given matrix
// triple: substitutes the multiplier row's affine prox into the block rows
// and requires the resulting block system to be strictly lower triangular
// with diagonal couplings that are either zero or -alpha_j A_j^T A_j (the
// latter resolved by inner iterations). This is the oracle every
// specialized stepper is tested against.
class GenericTwoStepEngine {
 public:
  GenericTwoStepEngine(MatrixSet ms, const BlockProblem& p, const Vec& r_diag,
                       const Mat& e, InnerSolverConfig inner = {})
      : ms_(std::move(ms)), p_(&p), inner_(inner) {
    p.validate();
    const Index n = p.n(), m = p.m();
    const Index N = n + m;
    if (r_diag.size() != N || e.rows() != N || e.cols() != N ||
        ms_.M0.rows() != N || ms_.M1.rows() != N || ms_.M2.rows() != N)
      throw std::invalid_argument("GenericTwoStepEngine: dimension mismatch");
    offsets_.assign(1, 0);
    for (const auto& bl : p.blocks)
      offsets_.push_back(offsets_.back() + bl.A.cols());
    beta_ = 1.0 / r_diag[N - 1];
    for (Index i = n; i < N; ++i)
      if (std::abs(r_diag[i] - r_diag[N - 1]) > 1e-12 * std::abs(r_diag[N - 1]))
        throw std::invalid_argument("GenericTwoStepEngine: multiplier scaling not constant");
    gammas_.resize(p.blocks.size());
    for (size_t j = 0; j < p.blocks.size(); ++j) {
      const double rj = r_diag[offsets_[j]];
      for (Index i = offsets_[j]; i < offsets_[j + 1]; ++i)
        if (std::abs(r_diag[i] - rj) > 1e-12 * std::abs(rj))
          throw std::invalid_argument("GenericTwoStepEngine: block scaling not constant");
      gammas_[j] = 1.0 / rj;  // r_j = beta / alpha_j, so this is alpha_j / beta
    }

    rinv_ = r_diag.cwiseInverse();
    const Mat g = e - rinv_.asDiagonal() * ms_.M0;
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if (g.block(n, n, m, m).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw std::invalid_argument(
          "structural error: multiplier row couples to the future multiplier");
    g_yx_ = g.block(n, 0, m, n);
    g_xy_ = g.block(0, n, n, m);
    g_eff_ = g.block(0, 0, n, n) + g_xy_ * g_yx_;

    const size_t s = p.blocks.size();
    implicit_.resize(s, false);
    diag_norm_.resize(s, 0.0);
    for (size_t i = 0; i < s; ++i)
      for (size_t j = i + 1; j < s; ++j) {
        const auto blkij = g_eff_.block(offsets_[i], offsets_[j],
                                        offsets_[i + 1] - offsets_[i],
                                        offsets_[j + 1] - offsets_[j]);
        if (blkij.cwiseAbs().maxCoeff() > 1e-10 * scale)
          throw std::invalid_argument(
              "structural error: effective block system is not lower triangular");
      }
    for (size_t j = 0; j < s; ++j) {
      const Mat d = g_eff_.block(offsets_[j], offsets_[j],
                                 offsets_[j + 1] - offsets_[j],
                                 offsets_[j + 1] - offsets_[j]);
      if (d.cwiseAbs().maxCoeff() <= 1e-10 * scale) continue;
      const Mat aj = p.blocks[j].A.to_dense();
      const double alpha = gammas_[j] * beta_;
      const Mat expected = -alpha * (aj.transpose() * aj);
      if ((d - expected).cwiseAbs().maxCoeff() >
          1e-8 * std::max(1.0, expected.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(
            "structural error: diagonal coupling is neither zero nor -alpha A^T A");
      implicit_[j] = true;
      diag_norm_[j] = d.jacobiSvd().singularValues()(0);
    }
  }

  int inner_failure_count() const { return inner_failures_; }

  void step(IterateState& st) {
    const Index n = p_->n(), m = p_->m();
    const Vec vk = pack_state(st.x, st.y);
    const Vec vk1 = pack_state(st.x_prev, st.y_prev);
    const Vec c = rinv_.cwiseProduct(ms_.M1 * vk + ms_.M2 * vk1);
    const Vec cy = c.tail(m) - beta_ * p_->b;  // multiplier row after its shift prox
    const Vec cx = c.head(n) + g_xy_ * cy;

    Vec x_new = Vec::Zero(n);
    for (size_t j = 0; j < p_->blocks.size(); ++j) {
      const Index o = offsets_[j], w = offsets_[j + 1] - offsets_[j];
      Vec r = cx.segment(o, w);
      if (o > 0) r += g_eff_.block(o, 0, w, o) * x_new.head(o);
      const auto& f = p_->blocks[j].f;
      if (implicit_[j]) {
        const Mat d = g_eff_.block(o, o, w, w);
        auto dmap = [&d](const Vec& z) -> Vec { return d * z; };
        InnerResult res = solve_block_fixed_point(f, dmap, diag_norm_[j], gammas_[j],
                                                  r, inner_, st.x[j]);
        if (!res.converged) ++inner_failures_;
        x_new.segment(o, w) = res.z;
      } else {
        x_new.segment(o, w) = f.prox(r, gammas_[j]);
      }
    }
    const Vec y_new = g_yx_ * x_new + cy;
    for (size_t j = 0; j < p_->blocks.size(); ++j) {
      st.x_prev[j] = st.x[j];
      st.x[j] = x_new.segment(offsets_[j], offsets_[j + 1] - offsets_[j]);
    }
    st.y_prev = st.y;
    st.y = y_new;
    ++st.k;
  }

 private:
  MatrixSet ms_;
  const BlockProblem* p_;
  InnerSolverConfig inner_;
  std::vector<Index> offsets_;
  std::vector<double> gammas_;
  std::vector<char> implicit_;
  std::vector<double> diag_norm_;
  Vec rinv_;
  Mat g_yx_, g_xy_, g_eff_;
  double beta_ = 1.0;
  int inner_failures_ = 0;
};

inline IterateState generic_two_step_dense(const MatrixSet& ms, const BlockProblem& p,
                                           IterateState st, const Vec& r_diag,
                                           const Mat& e,
                                           InnerSolverConfig inner = {}) {
  GenericTwoStepEngine engine(ms, p, r_diag, e, inner);
  engine.step(st);
  return st;
}

}  // namespace tsfpp
