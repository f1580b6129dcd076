#pragma once

// Algorithm family tags shared by the steppers and the step-size certifier.

#include <stdexcept>
#include <string>
#include <vector>

namespace tsfpp {

// The solver families and their update rules:
//  - PdPrimalFirst: one-step primal-dual, blocks first, then the multiplier
//    from the extrapolated blocks.
//  - PdDualFirst: one-step primal-dual with the multiplier updated first
//    (Jacobi-type; all blocks then update from the extrapolated multiplier).
//  - TwoStepImplicit: Gauss-Seidel sweep whose block subproblems keep the
//    quadratic coupling (inner iterations).
//  - TwoStepExplicit: the linearized Gauss-Seidel sweep with two-step memory.
//  - LadmmDirect: the direct multi-block linearized ADMM (no two-step
//    extrapolation, no convergence guarantee).
//  - VariantDiag: TwoStepImplicit plus an inertial theta*(x^k - x^{k-1})
//    term in each block (theta in [0,1)).
//  - VariantOffdiag: TwoStepImplicit with theta-weighted off-diagonal
//    coupling (already-updated blocks enter extrapolated).
//  - Hybrid: per-block choice between the implicit and explicit updates.
enum class Family {
  PdPrimalFirst,
  PdDualFirst,
  TwoStepImplicit,
  TwoStepExplicit,
  LadmmDirect,
  VariantDiag,
  VariantOffdiag,
  Hybrid,
};

inline std::string to_string(Family f) {
  switch (f) {
    case Family::PdPrimalFirst: return "pd_primal_first";
    case Family::PdDualFirst: return "pd_dual_first";
    case Family::TwoStepImplicit: return "two_step_implicit";
    case Family::TwoStepExplicit: return "two_step_explicit";
    case Family::LadmmDirect: return "ladmm_direct";
    case Family::VariantDiag: return "variant_diag";
    case Family::VariantOffdiag: return "variant_offdiag";
    case Family::Hybrid: return "hybrid";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "pd_primal_first") return Family::PdPrimalFirst;
  if (s == "pd_dual_first" || s == "jladmm") return Family::PdDualFirst;
  if (s == "two_step_implicit") return Family::TwoStepImplicit;
  if (s == "two_step_explicit" || s == "2sfppa") return Family::TwoStepExplicit;
  if (s == "ladmm_direct" || s == "ladmm") return Family::LadmmDirect;
  if (s == "variant_diag") return Family::VariantDiag;
  if (s == "variant_offdiag") return Family::VariantOffdiag;
  if (s == "hybrid") return Family::Hybrid;
  throw std::invalid_argument("unknown family: " + s);
}

struct InnerSolverConfig {
  int max_inner = 500;
  double tol = 1e-10;
};

struct AlgorithmSpec {
  Family family = Family::TwoStepExplicit;
  std::vector<double> alphas;
  double beta = 1.0;
  double theta = 0.0;                 // variant families only, in [0,1)
  std::vector<int> implicit_blocks;   // hybrid: 0-based blocks updated implicitly
  InnerSolverConfig inner;
};

}  // namespace tsfpp
