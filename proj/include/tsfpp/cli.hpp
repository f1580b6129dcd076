#pragma once

// Configuration-driven entry point: certify step sizes, run solvers, run the
// sparse-MRI benchmark and the rate diagnostics, emitting CSV/JSON/PGM
// artifacts plus a manifest sufficient to re-run exactly.
//
// Exit codes: 0 success, 1 certification rejected, 2 usage error, 3 I/O
// error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tsfpp/condition_m.hpp"
#include "tsfpp/diagnostics.hpp"
#include "tsfpp/engine.hpp"
#include "tsfpp/io.hpp"
#include "tsfpp/mri.hpp"
#include "tsfpp/version.hpp"

namespace tsfpp {

using json = nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitRejected = 1,
  kExitUsage = 2,
  kExitIo = 3,
};

namespace cfg {

// Unknown keys are rejected up front so typos cannot silently change a run.
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& context) {
  if (!obj.is_object()) throw UsageError(context + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) ok = true;
    if (!ok) throw UsageError(context + ": unknown key \"" + item.key() + "\"");
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& context) {
  if (!obj.contains(key))
    throw UsageError(context + ": missing required key \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(context + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback,
         const std::string& context) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(context + "." + key + ": " + e.what());
  }
}

inline Vec vec_from(const json& arr, const std::string& context) {
  if (!arr.is_array()) throw UsageError(context + ": expected an array");
  Vec v(static_cast<Index>(arr.size()));
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw UsageError(context + ": expected numbers");
    v[static_cast<Index>(i)] = arr[i].get<double>();
  }
  return v;
}

inline Mat mat_from(const json& arr, const std::string& context) {
  if (!arr.is_array() || arr.empty())
    throw UsageError(context + ": expected a non-empty array of rows");
  const size_t cols = arr[0].size();
  Mat m(static_cast<Index>(arr.size()), static_cast<Index>(cols));
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_array() || arr[i].size() != cols)
      throw UsageError(context + ": ragged matrix rows");
    for (size_t j = 0; j < cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = arr[i][j].get<double>();
  }
  return m;
}

inline MriConfig mri_config_from(const json& j, const std::string& context) {
  check_keys(j,
             {"type", "d1", "d2", "n_lines", "mu", "lambda_lowpass",
              "lambda_highpass", "alphas", "beta", "tau", "fstar_iters"},
             context);
  MriConfig cfg;
  cfg.d1 = get_or<Index>(j, "d1", 64, context);
  cfg.d2 = get_or<Index>(j, "d2", 64, context);
  cfg.n_lines = get_or<int>(j, "n_lines", 9, context);
  cfg.mu = get_or<double>(j, "mu", 3.0, context);
  cfg.lambda_lowpass = get_or<double>(j, "lambda_lowpass", 0.0, context);
  cfg.lambda_highpass = get_or<double>(j, "lambda_highpass", 0.5, context);
  cfg.beta = get_or<double>(j, "beta", 1.0, context);
  cfg.tau = get_or<double>(j, "tau", 1000.0, context);
  cfg.fstar_iters = get_or<int>(j, "fstar_iters", 0, context);
  if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
  return cfg;
}

inline ProxFunction prox_from(const json& j, Index dim, const std::string& context) {
  check_keys(j, {"kind", "weights", "radii", "mu", "d", "b", "p"}, context);
  const std::string kind = require<std::string>(j, "kind", context);
  if (kind == "l1") {
    Vec w = j.contains("weights") ? vec_from(j.at("weights"), context + ".weights")
                                  : Vec::Ones(dim);
    if (w.size() != dim) throw UsageError(context + ": weights length mismatch");
    return weighted_l1(std::move(w));
  }
  if (kind == "box") {
    Vec r = vec_from(require<json>(j, "radii", context), context + ".radii");
    if (r.size() != dim) throw UsageError(context + ": radii length mismatch");
    return box_indicator(std::move(r));
  }
  if (kind == "group_l2_ball") {
    const double mu = require<double>(j, "mu", context);
    if (dim % 2 != 0) throw UsageError(context + ": group ball needs even dimension");
    return group_ball_indicator(mu, dim / 2);
  }
  if (kind == "linear") {
    Vec b = vec_from(require<json>(j, "b", context), context + ".b");
    if (b.size() != dim) throw UsageError(context + ": b length mismatch");
    return linear_term(std::move(b));
  }
  if (kind == "point") {
    Vec p = vec_from(require<json>(j, "p", context), context + ".p");
    if (p.size() != dim) throw UsageError(context + ": p length mismatch");
    return point_indicator(std::move(p));
  }
  if (kind == "zero") return zero_function(dim);
  throw UsageError(context + ": unknown prox kind \"" + kind + "\"");
}

}  // namespace cfg

// min |x1| + |x2| + |x3| subject to x1 + 2 x2 + 3 x3 = 3; the minimizer puts
// all weight on the largest coefficient: (0, 0, 1), objective 1.
inline BlockProblem builtin_lp3() {
  BlockProblem p;
  for (double c : {1.0, 2.0, 3.0})
    p.blocks.push_back({l1_norm(1), make_dense(Mat::Constant(1, 1, c), "a")});
  p.b = Vec::Constant(1, 3.0);
  return p;
}

inline GapQuery builtin_lp3_saddle() {
  GapQuery q;
  q.x_ref = Vec::Zero(3);
  q.x_ref[2] = 1.0;
  q.y_center = Vec::Constant(1, -1.0 / 3.0);
  q.rho = 0.0;
  return q;
}

namespace detail_cli {

struct LoadedProblem {
  BlockProblem problem;
  std::optional<MriConfig> mri;       // set when the problem is the MRI dual
  std::optional<MriOperators> ops;
  Vec mri_data;                        // observed data b for the MRI dual
  std::string name;
};

inline LoadedProblem load_problem(const json& spec, const std::string& context) {
  LoadedProblem lp;
  if (spec.is_string()) {
    const std::string name = spec.get<std::string>();
    if (name == "lp3") {
      lp.problem = builtin_lp3();
      lp.name = name;
      return lp;
    }
    throw UsageError(context + ": unknown builtin problem \"" + name + "\"");
  }
  const std::string type = cfg::require<std::string>(spec, "type", context);
  if (type == "mri") {
    lp.mri = cfg::mri_config_from(spec, context);
    const auto mask = radial_mask(lp.mri->d1, lp.mri->d2, lp.mri->n_lines);
    lp.ops = build_mri_operators(lp.mri->d1, lp.mri->d2, mask);
    lp.mri_data = lp.ops->K.apply(shepp_logan(lp.mri->d1, lp.mri->d2));
    lp.problem = build_dual_problem(*lp.mri, *lp.ops, lp.mri_data);
    lp.name = "mri";
    return lp;
  }
  if (type == "custom") {
    cfg::check_keys(spec, {"type", "blocks", "b"}, context);
    const json& blocks = cfg::require<json>(spec, "blocks", context);
    if (!blocks.is_array() || blocks.empty())
      throw UsageError(context + ".blocks: expected a non-empty array");
    lp.problem.b = cfg::vec_from(cfg::require<json>(spec, "b", context), context + ".b");
    for (size_t i = 0; i < blocks.size(); ++i) {
      const std::string bctx = context + ".blocks[" + std::to_string(i) + "]";
      cfg::check_keys(blocks[i], {"A", "prox"}, bctx);
      Mat a = cfg::mat_from(cfg::require<json>(blocks[i], "A", bctx), bctx + ".A");
      if (a.rows() != lp.problem.b.size())
        throw UsageError(bctx + ".A: row count must match length of b");
      ProxFunction f = cfg::prox_from(cfg::require<json>(blocks[i], "prox", bctx),
                                      a.cols(), bctx + ".prox");
      lp.problem.blocks.push_back({std::move(f), make_dense(std::move(a))});
    }
    lp.name = "custom";
    return lp;
  }
  throw UsageError(context + ".type: unknown problem type \"" + type + "\"");
}

inline json certificate_to_json(const StepSizeCertificate& c) {
  json j;
  j["family"] = to_string(c.family);
  j["alphas"] = c.alphas;
  j["beta"] = c.beta;
  j["theta"] = c.theta;
  j["mtilde_norm"] = c.mtilde;
  if (c.stacked_norm > 0) j["stacked_norm"] = c.stacked_norm;
  j["block_norms_sq"] = c.block_norms_sq;
  j["per_block_bounds"] = c.per_block_bounds;
  j["safety"] = c.safety;
  j["bound_available"] = c.bound_available;
  j["certified"] = c.certified;
  j["violated_blocks"] = c.violated_blocks;
  j["rule"] = c.rule;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline int env_workers() {
  const char* w = std::getenv("TSFPP_WORKERS");
  if (!w) return 1;
  const int n = std::atoi(w);
  return n >= 1 ? n : 1;
}

// Builds the algorithm spec from the config, deriving alphas when absent:
// the MRI dual uses the experiment's parameter rules, everything else the
// safety-scaled theory bounds.
inline AlgorithmSpec spec_from_config(const json& root, const LoadedProblem& lp,
                                      const std::string& family_override) {
  AlgorithmSpec spec;
  std::string fam = family_override.empty()
                        ? cfg::require<std::string>(root, "family", "config")
                        : family_override;
  try {
    spec.family = parse_family(fam);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config.family: ") + e.what());
  }
  spec.beta = cfg::require<double>(root, "beta", "config");
  spec.theta = cfg::get_or<double>(root, "theta", 0.0, "config");
  spec.implicit_blocks =
      cfg::get_or<std::vector<int>>(root, "implicit_blocks", {}, "config");
  if (root.contains("inner")) {
    const json& inner = root.at("inner");
    cfg::check_keys(inner, {"max_inner", "tol"}, "config.inner");
    spec.inner.max_inner = cfg::get_or<int>(inner, "max_inner", 500, "config.inner");
    spec.inner.tol = cfg::get_or<double>(inner, "tol", 1e-10, "config.inner");
  }
  const double safety = cfg::get_or<double>(root, "safety", 0.999999, "config");
  if (root.contains("alphas")) {
    spec.alphas = root.at("alphas").get<std::vector<double>>();
  } else if (lp.mri) {
    spec.alphas = mri_default_spec(spec.family, *lp.mri, *lp.ops).alphas;
  } else {
    spec.alphas = suggest_step_sizes(spec.family, lp.problem.operators(), spec.beta,
                                     safety, spec.theta, spec.implicit_blocks)
                      .alphas;
  }
  return spec;
}

inline json manifest_base(const std::string& command, const json& config) {
  json m;
  m["tool"] = "tsfpp";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config;
  return m;
}

}  // namespace detail_cli

inline int cmd_check(const json& config, const std::string& out_dir,
                     const std::string& family_override) {
  cfg::check_keys(config,
                  {"problem", "family", "alphas", "beta", "theta",
                   "implicit_blocks", "safety", "rule"},
                  "config");
  auto lp = detail_cli::load_problem(cfg::require<json>(config, "problem", "config"),
                                     "config.problem");
  AlgorithmSpec spec = detail_cli::spec_from_config(config, lp, family_override);
  const std::string rule = cfg::get_or<std::string>(config, "rule", "", "config");

  StepSizeCertificate cert =
      certify_step_sizes(spec.family, lp.problem.operators(), spec.alphas, spec.beta,
                         spec.theta, spec.implicit_blocks);
  if (!config.contains("alphas") && lp.mri &&
      spec.family != Family::PdPrimalFirst && spec.family != Family::PdDualFirst) {
    cert.rule = "paper_practical";
    cert.note = "step sizes follow the experiment's near-tight rule, "
                "not the theory bounds; never labeled certified";
    cert.certified = false;
  } else if (rule == "practical") {
    cert.rule = "paper_practical";
    cert.certified = false;
  }

  ensure_directory(out_dir);
  json j = detail_cli::certificate_to_json(cert);
  detail_cli::write_json(out_dir + "/certificate.json", j);
  json manifest = detail_cli::manifest_base("check", config);
  manifest["certificate"] = j;
  detail_cli::write_json(out_dir + "/manifest.json", manifest);
  std::cout << (cert.certified ? "certified" : "rejected") << "\n";
  return cert.certified ? kExitOk : kExitRejected;
}

inline int cmd_solve(const json& config, const std::string& out_dir,
                     const std::string& family_override, int max_iter_override) {
  cfg::check_keys(config,
                  {"problem", "family", "alphas", "beta", "theta",
                   "implicit_blocks", "safety", "stop", "inner"},
                  "config");
  auto lp = detail_cli::load_problem(cfg::require<json>(config, "problem", "config"),
                                     "config.problem");
  AlgorithmSpec spec = detail_cli::spec_from_config(config, lp, family_override);
  StopRule stop;
  if (config.contains("stop")) {
    const json& s = config.at("stop");
    cfg::check_keys(s, {"max_iter", "eps2_tol", "kkt_tol", "kkt_stride"}, "config.stop");
    stop.max_iter = cfg::get_or<int>(s, "max_iter", 1000, "config.stop");
    stop.eps2_tol = cfg::get_or<double>(s, "eps2_tol", 0.0, "config.stop");
    stop.kkt_tol = cfg::get_or<double>(s, "kkt_tol", 0.0, "config.stop");
    stop.kkt_stride = cfg::get_or<int>(s, "kkt_stride", 1, "config.stop");
  }
  if (max_iter_override > 0) stop.max_iter = max_iter_override;

  StepSizeCertificate cert =
      certify_step_sizes(spec.family, lp.problem.operators(), spec.alphas, spec.beta,
                         spec.theta, spec.implicit_blocks);
  IterateState init = lp.mri ? mri_initial_state(lp.problem, *lp.ops, lp.mri_data)
                             : make_zero_state(lp.problem);
  SolveResult res = solve(lp.problem, spec, stop, {}, std::move(init));

  ensure_directory(out_dir);
  write_trace_csv(out_dir + "/trace.csv", res.trace);

  json summary;
  summary["converged"] = res.converged;
  summary["stop_reason"] = res.stop_reason;
  summary["iterations"] = res.trace.empty() ? 0 : res.trace.back().k;
  summary["inner_failures"] = res.inner_failures;
  if (!res.trace.empty()) {
    const auto& last = res.trace.back();
    summary["final"] = {{"kkt", last.kkt},
                        {"objective", last.objective},
                        {"eps2", last.eps2},
                        {"step_norm_sq", last.step_norm_sq}};
  }
  if (res.trace.size() >= 100) {
    std::vector<double> a;
    a.reserve(res.trace.size());
    for (const auto& r : res.trace) a.push_back(r.step_norm_sq);
    const RateReport rr = rate_report(a);
    summary["rate_report"] = {{"fitted_slope", rr.fitted_slope},
                              {"bounded", rr.bounded},
                              {"vanishing", rr.vanishing}};
  }
  detail_cli::write_json(out_dir + "/summary.json", summary);

  json manifest = detail_cli::manifest_base("solve", config);
  manifest["certificate"] = detail_cli::certificate_to_json(cert);
  manifest["summary"] = summary;
  detail_cli::write_json(out_dir + "/manifest.json", manifest);
  std::cout << (res.converged ? "converged" : "not converged") << " after "
            << summary["iterations"] << " iterations\n";
  return kExitOk;
}

inline int cmd_mri(const json& config, const std::string& out_dir,
                   const std::string& family_override, int max_iter_override) {
  cfg::check_keys(config, {"mri", "families", "max_iter", "eps1_tols", "eps2_tols"},
                  "config");
  const MriConfig mc =
      cfg::mri_config_from(cfg::require<json>(config, "mri", "config"), "config.mri");
  std::vector<std::string> families = cfg::get_or<std::vector<std::string>>(
      config, "families", {"jladmm", "ladmm", "2sfppa"}, "config");
  if (!family_override.empty()) families = {family_override};
  for (const auto& f : families) parse_family(f);  // validate early
  int max_iter = cfg::get_or<int>(config, "max_iter", 5000, "config");
  if (max_iter_override > 0) max_iter = max_iter_override;
  const auto eps1_tols = cfg::get_or<std::vector<double>>(config, "eps1_tols",
                                                          {1e-4}, "config");
  const auto eps2_tols = cfg::get_or<std::vector<double>>(config, "eps2_tols",
                                                          {5e-5}, "config");

  BenchmarkResult bench = benchmark(mc, families, max_iter, eps1_tols, eps2_tols,
                                    detail_cli::env_workers());

  ensure_directory(out_dir);
  write_pgm(out_dir + "/phantom.pgm", bench.phantom, mc.d1, mc.d2);
  write_mask(out_dir + "/mask.txt", bench.mask);
  for (const auto& fr : bench.runs) {
    write_pgm(out_dir + "/recovered_" + fr.name + ".pgm", fr.run.u, mc.d1, mc.d2);
    write_image_csv(out_dir + "/recovered_" + fr.name + ".csv", fr.run.u, mc.d1, mc.d2);
    write_trace_csv(out_dir + "/trace_" + fr.name + ".csv", fr.run.trace, true);
  }
  write_benchmark_csv(out_dir + "/benchmark_eps1.csv", bench.eps1_rows);
  write_benchmark_csv(out_dir + "/benchmark_eps2.csv", bench.eps2_rows);

  const MriOperators ops = build_mri_operators(mc.d1, mc.d2, bench.mask);
  json manifest = detail_cli::manifest_base("mri", config);
  manifest["f_star"] = bench.f_star;
  manifest["sampling_ratio"] = bench.sampling_ratio;
  manifest["mask_size"] = bench.mask.size();
  manifest["operator_norms_sq"] = {{"B", op_norm_sq_est(ops.B, 1e-10, 3000).value},
                                   {"W", op_norm_sq_est(ops.W).value},
                                   {"K", op_norm_sq_est(ops.K).value}};
  json specs = json::object();
  const std::vector<LinearOperator> dual_ops =
      build_dual_problem(mc, ops, bench.data).operators();
  for (const auto& fr : bench.runs) {
    specs[fr.name] = {{"family", to_string(fr.family)},
                      {"alphas", fr.spec.alphas},
                      {"beta", fr.spec.beta}};
    const auto cert =
        certify_step_sizes(fr.family, dual_ops, fr.spec.alphas, fr.spec.beta);
    json cj = detail_cli::certificate_to_json(cert);
    if (fr.family != Family::PdPrimalFirst && fr.family != Family::PdDualFirst &&
        mc.alphas.empty()) {
      cj["rule"] = "paper_practical";
      cj["certified"] = false;
    }
    specs[fr.name]["certificate"] = cj;
  }
  manifest["runs"] = specs;
  detail_cli::write_json(out_dir + "/manifest.json", manifest);
  std::cout << "benchmark complete: " << bench.runs.size() << " families, "
            << "sampling ratio " << bench.sampling_ratio << "\n";
  return kExitOk;
}

inline int cmd_rate(const json& config, const std::string& out_dir,
                    const std::string& family_override, int max_iter_override) {
  cfg::check_keys(config,
                  {"problem", "family", "alphas", "beta", "theta",
                   "implicit_blocks", "safety", "stop", "inner", "gap"},
                  "config");
  auto lp = detail_cli::load_problem(cfg::require<json>(config, "problem", "config"),
                                     "config.problem");
  AlgorithmSpec spec = detail_cli::spec_from_config(config, lp, family_override);
  StopRule stop;
  stop.max_iter = 2000;
  if (config.contains("stop")) {
    const json& s = config.at("stop");
    cfg::check_keys(s, {"max_iter", "eps2_tol", "kkt_tol", "kkt_stride"}, "config.stop");
    stop.max_iter = cfg::get_or<int>(s, "max_iter", 2000, "config.stop");
    stop.eps2_tol = cfg::get_or<double>(s, "eps2_tol", 0.0, "config.stop");
    stop.kkt_tol = cfg::get_or<double>(s, "kkt_tol", 0.0, "config.stop");
  }
  if (max_iter_override > 0) stop.max_iter = max_iter_override;

  std::optional<GapQuery> gap;
  if (config.contains("gap")) {
    const json& g = config.at("gap");
    cfg::check_keys(g, {"x_ref", "y_center", "rho"}, "config.gap");
    GapQuery q;
    q.x_ref = cfg::vec_from(cfg::require<json>(g, "x_ref", "config.gap"),
                            "config.gap.x_ref");
    q.y_center = cfg::vec_from(cfg::require<json>(g, "y_center", "config.gap"),
                               "config.gap.y_center");
    q.rho = cfg::get_or<double>(g, "rho", 0.0, "config.gap");
    gap = q;
  } else if (lp.name == "lp3") {
    gap = builtin_lp3_saddle();
  }

  std::vector<Vec> history;
  history.reserve(static_cast<size_t>(stop.max_iter) + 1);
  IterateState init = lp.mri ? mri_initial_state(lp.problem, *lp.ops, lp.mri_data)
                             : make_zero_state(lp.problem);
  history.push_back(pack_state(init));  // v^0 = v^1 convention: shared entry
  SolveHooks hooks;
  hooks.augment = [&history](const IterateState& st, TraceRecord&) {
    history.push_back(pack_state(st));
  };
  SolveResult res = solve(lp.problem, spec, stop, hooks, std::move(init));

  std::vector<double> a;
  a.reserve(res.trace.size());
  for (const auto& r : res.trace) a.push_back(r.step_norm_sq);
  if (a.size() < 100) throw UsageError("rate: need at least 100 iterations of trace");
  const RateReport rr = rate_report(a);

  // history currently holds v^1 (index 0) .. v^{k}; prepend v^0 = v^1.
  std::vector<Vec> padded;
  padded.reserve(history.size() + 1);
  padded.push_back(history.front());
  for (auto& v : history) padded.push_back(std::move(v));
  std::optional<GapRateReport> gr;
  if (gap) gr = gap_rate_check(lp.problem, padded, *gap);

  ensure_directory(out_dir);
  json report;
  report["fitted_slope"] = rr.fitted_slope;
  report["bounded"] = rr.bounded;
  report["vanishing"] = rr.vanishing;
  if (gr) {
    report["gap"] = {{"fitted_slope", gr->fitted_slope},
                     {"k_gap_bounded", gr->k_gap_bounded},
                     {"negative_gap", gr->negative_gap}};
  }
  detail_cli::write_json(out_dir + "/rate.json", report);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < a.size(); ++i) {
    std::vector<double> row{static_cast<double>(i + 1), a[i], rr.ergodic[i],
                            rr.runmin_scaled[i]};
    row.push_back(gr && i < gr->gaps.size() ? gr->gaps[i]
                                            : std::numeric_limits<double>::quiet_NaN());
    rows.push_back(std::move(row));
  }
  write_csv(out_dir + "/rate.csv", {"k", "a_k", "ergodic", "runmin", "gap"}, rows);

  json manifest = detail_cli::manifest_base("rate", config);
  manifest["report"] = report;
  detail_cli::write_json(out_dir + "/manifest.json", manifest);
  std::cout << "rate report: slope " << rr.fitted_slope << "\n";
  return kExitOk;
}

inline int run_cli(int argc, char** argv) {
  CLI::App app{"two-step fixed-point proximity solvers for multi-block "
               "separable convex problems"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "tsfpp_out", family;
  int max_iter = -1;
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--family", family, "override the configured algorithm family");
  app.add_option("--max-iter", max_iter, "override the iteration budget");
  auto* c_check = app.add_subcommand("check", "certify step sizes");
  auto* c_solve = app.add_subcommand("solve", "run a solver and trace it");
  auto* c_mri = app.add_subcommand("mri", "run the sparse-MRI benchmark");
  auto* c_rate = app.add_subcommand("rate", "run rate diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  json config;
  try {
    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config file " + config_path);
    config = json::parse(in, nullptr, true, true);  // allow comments
  } catch (const json::parse_error& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (c_check->parsed()) return cmd_check(config, out_dir, family);
    if (c_solve->parsed()) return cmd_solve(config, out_dir, family, max_iter);
    if (c_mri->parsed()) return cmd_mri(config, out_dir, family, max_iter);
    if (c_rate->parsed()) return cmd_rate(config, out_dir, family, max_iter);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace tsfpp
