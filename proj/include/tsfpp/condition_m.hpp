#pragma once

// Executable certification of the three-part matrix condition that backs the
// two-step scheme's convergence: dense assembly of the per-family matrix
// triples, the dense check itself, and the analytic per-block step-size
// bounds with a safety-margin suggestion rule.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsfpp/family.hpp"
#include "tsfpp/linop.hpp"

namespace tsfpp {

struct MatrixSet {
  Mat M0, M1, M2;
};

struct ConditionMReport {
  double additivity_error = 0.0;      // max-norm of M0 - M1 - M2
  Mat H;                              // M0 + M2
  double h_min_eigenvalue = 0.0;
  double contraction_norm = 0.0;      // ||H^{-1/2} M2 H^{-1/2}||_2
  bool h_symmetric = true;
  bool passed = false;
  std::string diagnostic;
};

// Checks (i) M0 = M1 + M2, (ii) H = M0 + M2 positive definite,
// (iii) ||H^{-1/2} M2 H^{-1/2}||_2 < 1/2. H must come out symmetric; a
// non-symmetric H (e.g. the direct-LADMM matrix set) fails with a
// diagnostic. Intended for desk-scale dense sets.
inline ConditionMReport check_condition_m(const MatrixSet& ms) {
  const Index n = ms.M0.rows();
  if (ms.M0.cols() != n || ms.M1.rows() != n || ms.M1.cols() != n ||
      ms.M2.rows() != n || ms.M2.cols() != n)
    throw std::invalid_argument("check_condition_m: matrices must be square and equal-sized");

  ConditionMReport rep;
  rep.additivity_error = (ms.M0 - ms.M1 - ms.M2).cwiseAbs().maxCoeff();
  rep.H = ms.M0 + ms.M2;

  const double h_scale = rep.H.cwiseAbs().maxCoeff();
  const double asym = (rep.H - rep.H.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * (1.0 + h_scale)) {
    rep.h_symmetric = false;
    rep.h_min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
    rep.contraction_norm = std::numeric_limits<double>::quiet_NaN();
    rep.diagnostic = "H = M0 + M2 is not symmetric (max asymmetry " +
                     std::to_string(asym) + "); the condition requires H in S_+";
    return rep;
  }

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rep.H + rep.H.transpose()));
  const Vec evals = es.eigenvalues();
  rep.h_min_eigenvalue = evals.minCoeff();
  const double h_norm = evals.cwiseAbs().maxCoeff();
  // Relative floor against rounding-level "positive" eigenvalues.
  const bool h_pd = rep.h_min_eigenvalue > 1e-12 * std::max(h_norm, 1e-300);

  if (h_pd) {
    const Mat h_inv_sqrt =
        es.eigenvectors() * evals.cwiseSqrt().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
    const Mat t = h_inv_sqrt * ms.M2 * h_inv_sqrt;
    rep.contraction_norm = t.jacobiSvd().singularValues()(0);
  } else {
    rep.contraction_norm = std::numeric_limits<double>::quiet_NaN();
    rep.diagnostic = "H = M0 + M2 is not positive definite (min eigenvalue " +
                     std::to_string(rep.h_min_eigenvalue) + ")";
  }

  rep.passed = rep.additivity_error <= 1e-10 && h_pd && rep.contraction_norm < 0.5;
  if (!rep.passed && rep.diagnostic.empty()) {
    if (rep.additivity_error > 1e-10)
      rep.diagnostic = "M0 != M1 + M2";
    else
      rep.diagnostic = "contraction norm " + std::to_string(rep.contraction_norm) +
                       " is not below 1/2";
  }
  return rep;
}

namespace detail {

inline void validate_family_params(Family family, size_t s,
                                   const std::vector<double>& alphas, double beta,
                                   double theta) {
  if (alphas.size() != s)
    throw std::invalid_argument("expected one alpha per block (" +
                                std::to_string(s) + "), got " +
                                std::to_string(alphas.size()));
  for (double a : alphas)
    if (!(a > 0)) throw std::invalid_argument("alphas must be positive");
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  if ((family == Family::VariantDiag || family == Family::VariantOffdiag) &&
      (theta < 0 || theta >= 1))
    throw std::invalid_argument("theta must lie in [0, 1)");
}

inline bool is_implicit_row(Family family, int j, const std::vector<int>& s1) {
  switch (family) {
    case Family::TwoStepImplicit:
    case Family::VariantDiag:
    case Family::VariantOffdiag:
      return true;
    case Family::Hybrid:
      for (int i : s1)
        if (i == j) return true;
      return false;
    default:
      return false;
  }
}

}  // namespace detail

// Dense assembly of the matrix triple that realizes a given family, for
// desk-scale instances. Block sizes are read off the dense A_i.
inline MatrixSet build_matrix_set(Family family, const std::vector<Mat>& a,
                                  const std::vector<double>& alphas, double beta,
                                  double theta = 0.0,
                                  const std::vector<int>& implicit_blocks = {}) {
  const size_t s = a.size();
  if (s == 0) throw std::invalid_argument("build_matrix_set: no blocks");
  detail::validate_family_params(family, s, alphas, beta, theta);
  const Index m = a[0].rows();
  for (const auto& ai : a)
    if (ai.rows() != m) throw std::invalid_argument("build_matrix_set: row mismatch");

  std::vector<Index> off(s + 1, 0);
  for (size_t i = 0; i < s; ++i) off[i + 1] = off[i] + a[i].cols();
  const Index n = off[s];
  const Index N = n + m;

  MatrixSet ms{Mat::Zero(N, N), Mat::Zero(N, N), Mat::Zero(N, N)};
  auto blk = [&](Mat& M, size_t i, size_t j) {
    return M.block(off[i], off[j], a[i].cols(), a[j].cols());
  };

  const bool pd = family == Family::PdPrimalFirst || family == Family::PdDualFirst;
  if (pd) {
    const double sign = family == Family::PdPrimalFirst ? -1.0 : 1.0;
    for (size_t i = 0; i < s; ++i) {
      blk(ms.M0, i, i).setIdentity();
      blk(ms.M0, i, i) *= beta / alphas[i];
      ms.M0.block(off[i], n, a[i].cols(), m) = sign * a[i].transpose();
      ms.M0.block(n, off[i], m, a[i].cols()) = sign * a[i];
    }
    ms.M0.block(n, n, m, m) = (1.0 / beta) * Mat::Identity(m, m);
    ms.M1 = ms.M0;
    return ms;
  }

  // Shared x-block structure of the Gauss-Seidel families.
  for (size_t i = 0; i < s; ++i) {
    const bool implicit_row = detail::is_implicit_row(family, static_cast<int>(i),
                                                      implicit_blocks);
    Mat diag = (beta / alphas[i]) * Mat::Identity(a[i].cols(), a[i].cols());
    if (!implicit_row) diag -= beta * (a[i].transpose() * a[i]);
    blk(ms.M0, i, i) = diag;
    blk(ms.M1, i, i) = diag;
    for (size_t j = i + 1; j < s; ++j) {
      const Mat cross = beta * (a[i].transpose() * a[j]);
      blk(ms.M0, i, j) = -cross;
      blk(ms.M1, i, j) = -2.0 * cross;
      blk(ms.M2, i, j) = cross;
    }
  }
  ms.M0.block(n, n, m, m) = (1.0 / beta) * Mat::Identity(m, m);
  ms.M1.block(n, n, m, m) = (1.0 / beta) * Mat::Identity(m, m);

  if (family == Family::VariantDiag && theta != 0.0) {
    for (size_t i = 0; i < s; ++i) {
      Mat d = (theta * beta / alphas[i]) * Mat::Identity(a[i].cols(), a[i].cols());
      blk(ms.M1, i, i) += d;
      blk(ms.M2, i, i) -= d;
    }
  } else if (family == Family::VariantOffdiag && theta != 0.0) {
    for (size_t i = 0; i < s; ++i)
      for (size_t j = 0; j < i; ++j)
        blk(ms.M0, i, j) = theta * beta * (a[i].transpose() * a[j]);
    ms.M2 *= (1.0 + theta);
    ms.M1 = ms.M0 - ms.M2;
  } else if (family == Family::LadmmDirect) {
    ms.M2.setZero();
    ms.M1 = ms.M0;
  }
  return ms;
}

// ||M2||_2 / beta for the two-step families: the strictly upper block
// operator with (i,j) block A_i^T A_j for i < j, estimated matrix-free. It
// does not depend on beta. Returns 0 for a single block.
inline NormEstimate mtilde_norm(const std::vector<LinearOperator>& a,
                                double tol = 1e-10, int max_iter = 20000) {
  const size_t s = a.size();
  if (s == 0) throw std::invalid_argument("mtilde_norm: no blocks");
  if (s == 1) return NormEstimate{0.0, 0, true};
  const Index m = a[0].rows();
  std::vector<Index> off(s + 1, 0);
  for (size_t i = 0; i < s; ++i) {
    if (a[i].rows() != m) throw std::invalid_argument("mtilde_norm: row mismatch");
    off[i + 1] = off[i] + a[i].cols();
  }
  const Index n = off[s];
  auto fwd = [a, off, s, m, n](const Vec& z) {
    Vec out = Vec::Zero(n);
    Vec suffix = Vec::Zero(m);
    for (size_t i = s; i-- > 0;) {
      if (i + 1 < s) out.segment(off[i], a[i].cols()) = a[i].apply_adjoint(suffix);
      suffix += a[i].apply(z.segment(off[i], a[i].cols()));
    }
    return out;
  };
  auto adj = [a, off, s, m, n](const Vec& u) {
    Vec out = Vec::Zero(n);
    Vec prefix = Vec::Zero(m);
    for (size_t j = 0; j < s; ++j) {
      if (j > 0) out.segment(off[j], a[j].cols()) = a[j].apply_adjoint(prefix);
      prefix += a[j].apply(u.segment(off[j], a[j].cols()));
    }
    return out;
  };
  NormEstimate est = op_norm_sq_est(LinearOperator(n, n, fwd, adj, "M2~"), tol, max_iter);
  est.value = std::sqrt(std::max(est.value, 0.0));
  return est;
}

struct StepSizeCertificate {
  Family family = Family::TwoStepExplicit;
  std::vector<double> alphas;
  double beta = 1.0;
  double theta = 0.0;
  double mtilde = 0.0;                   // ||M2||_2 / beta
  double stacked_norm = 0.0;             // ||A Q||_2, primal-dual families
  std::vector<double> block_norms_sq;    // ||A_i||_2^2 where the bound uses it
  std::vector<double> per_block_bounds;  // strict upper bounds on alpha_i
  double safety = 1.0;
  bool bound_available = true;
  bool certified = false;
  std::vector<int> violated_blocks;
  std::string rule = "theory";
  std::string note;
};

namespace detail {

// Strict per-block alpha bounds for the Gauss-Seidel families. Bounds for
// the theta-variants and the hybrid partition extend the base estimates; a
// nonpositive bound means the analytic route gives nothing for this theta.
inline std::vector<double> family_bounds(Family family, size_t s, double mtilde,
                                         const std::vector<double>& block_norms_sq,
                                         double theta,
                                         const std::vector<int>& implicit_blocks) {
  std::vector<double> bounds(s, std::numeric_limits<double>::infinity());
  auto safe_div = [](double num, double den) {
    return den > 0 ? num / den : std::numeric_limits<double>::infinity();
  };
  for (size_t i = 0; i < s; ++i) {
    switch (family) {
      case Family::TwoStepImplicit:
        bounds[i] = safe_div(1.0, 2.0 * mtilde);
        break;
      case Family::TwoStepExplicit:
      case Family::LadmmDirect:
        bounds[i] = safe_div(1.0, block_norms_sq[i] + 2.0 * mtilde);
        break;
      case Family::VariantDiag:
        bounds[i] = theta < 1.0 / 3.0
                        ? safe_div(1.0 - 3.0 * theta, 2.0 * mtilde)
                        : 0.0;
        break;
      case Family::VariantOffdiag:
        bounds[i] = safe_div(1.0, (2.0 + 4.0 * theta) * mtilde);
        break;
      case Family::Hybrid:
        bounds[i] = is_implicit_row(family, static_cast<int>(i), implicit_blocks)
                        ? safe_div(1.0, 2.0 * mtilde)
                        : safe_div(1.0, block_norms_sq[i] + 2.0 * mtilde);
        break;
      default:
        break;
    }
  }
  return bounds;
}

}  // namespace detail

// Evaluates the family's analytic step-size condition at the given
// parameters. The primal-dual families are certified via ||A Q||_2 < 1 with
// Q = diag(sqrt(alpha_i) I); the Gauss-Seidel families via per-block bounds.
// The direct LADMM carries no guarantee and is never certified.
inline StepSizeCertificate certify_step_sizes(
    Family family, const std::vector<LinearOperator>& a,
    const std::vector<double>& alphas, double beta, double theta = 0.0,
    const std::vector<int>& implicit_blocks = {}) {
  const size_t s = a.size();
  detail::validate_family_params(family, s, alphas, beta, theta);
  StepSizeCertificate cert;
  cert.family = family;
  cert.alphas = alphas;
  cert.beta = beta;
  cert.theta = theta;

  if (family == Family::PdPrimalFirst || family == Family::PdDualFirst) {
    std::vector<LinearOperator> scaled;
    scaled.reserve(s);
    for (size_t i = 0; i < s; ++i) scaled.push_back(make_scaled(std::sqrt(alphas[i]), a[i]));
    const auto est = op_norm_sq_est(BlockRowOperator(scaled).as_operator());
    cert.stacked_norm = std::sqrt(std::max(est.value, 0.0));
    cert.certified = est.converged && cert.stacked_norm < 1.0;
    if (!cert.certified) cert.note = "requires ||A Q||_2 < 1";
    return cert;
  }

  cert.mtilde = mtilde_norm(a).value;
  cert.block_norms_sq.resize(s);
  for (size_t i = 0; i < s; ++i) cert.block_norms_sq[i] = op_norm_sq_est(a[i]).value;
  cert.per_block_bounds = detail::family_bounds(family, s, cert.mtilde,
                                                cert.block_norms_sq, theta,
                                                implicit_blocks);

  if (family == Family::VariantDiag && theta >= 1.0 / 3.0) {
    cert.bound_available = false;
    cert.note =
        "no analytic bound for theta >= 1/3; verify with the dense condition check";
    return cert;
  }

  bool ok = true;
  for (size_t i = 0; i < s; ++i) {
    if (!(alphas[i] < cert.per_block_bounds[i])) {
      ok = false;
      cert.violated_blocks.push_back(static_cast<int>(i));
    }
  }
  if (family == Family::LadmmDirect) {
    cert.certified = false;
    cert.rule = "heuristic";
    cert.note = "direct multi-block LADMM carries no convergence guarantee; "
                "bounds shown are the explicit-family reference values";
  } else {
    cert.certified = ok;
  }
  return cert;
}

// alpha_i = safety * bound_i per the family's condition. Unbounded cases
// (single-block two-step families, zero operator norms) are flagged and fall
// back to safety / ||A_i||_2^2.
inline StepSizeCertificate suggest_step_sizes(
    Family family, const std::vector<LinearOperator>& a, double beta,
    double safety = 0.999999, double theta = 0.0,
    const std::vector<int>& implicit_blocks = {}) {
  if (!(safety > 0 && safety < 1))
    throw std::invalid_argument("suggest_step_sizes: safety must lie in (0,1)");
  const size_t s = a.size();
  if (s == 0) throw std::invalid_argument("suggest_step_sizes: no blocks");
  if (!(beta > 0)) throw std::invalid_argument("suggest_step_sizes: beta must be positive");

  StepSizeCertificate cert;
  cert.family = family;
  cert.beta = beta;
  cert.theta = theta;
  cert.safety = safety;
  cert.alphas.resize(s);
  cert.block_norms_sq.resize(s);
  for (size_t i = 0; i < s; ++i) cert.block_norms_sq[i] = op_norm_sq_est(a[i]).value;

  if (family == Family::PdPrimalFirst || family == Family::PdDualFirst) {
    const auto est = op_norm_sq_est(BlockRowOperator(a).as_operator());
    if (est.value <= 0) {
      cert.bound_available = false;
      cert.note = "zero stacked operator norm; suggestion unbounded";
      std::fill(cert.alphas.begin(), cert.alphas.end(), safety);
      return cert;
    }
    std::fill(cert.alphas.begin(), cert.alphas.end(), safety / est.value);
    cert.stacked_norm = std::sqrt(safety);
    cert.certified = true;
    return cert;
  }

  cert.mtilde = mtilde_norm(a).value;
  cert.per_block_bounds = detail::family_bounds(family, s, cert.mtilde,
                                                cert.block_norms_sq, theta,
                                                implicit_blocks);
  if (family == Family::VariantDiag && theta >= 1.0 / 3.0) {
    cert.bound_available = false;
    cert.note = "no analytic bound for theta >= 1/3";
    for (size_t i = 0; i < s; ++i)
      cert.alphas[i] = cert.block_norms_sq[i] > 0 ? safety / cert.block_norms_sq[i]
                                                  : safety;
    return cert;
  }
  for (size_t i = 0; i < s; ++i) {
    const double b = cert.per_block_bounds[i];
    if (std::isfinite(b) && b > 0) {
      cert.alphas[i] = safety * b;
    } else {
      cert.bound_available = false;
      cert.alphas[i] = cert.block_norms_sq[i] > 0 ? safety / cert.block_norms_sq[i]
                                                  : safety;
    }
  }
  if (!cert.bound_available)
    cert.note = "theory bound unbounded for some block; fell back to safety/||A_i||^2";
  if (family == Family::LadmmDirect) {
    cert.rule = "heuristic";
    cert.note = "explicit-family rule applied to an uncertified family";
  } else {
    cert.certified = cert.bound_available;
  }
  return cert;
}

}  // namespace tsfpp
