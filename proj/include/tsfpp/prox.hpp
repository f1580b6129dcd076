#pragma once

// Closed-form proximity operators and projections: weighted soft
// thresholding, per-pair disk projection, box clamping, the linear-term
// shift, and the matching objective-value maps.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "tsfpp/linop.hpp"

namespace tsfpp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A prox-capable convex function: prox(u, gamma) evaluates prox_{gamma f}(u)
// for any gamma > 0, value(u) the (extended-real) function value used in
// objective traces.
struct ProxFunction {
  Index dim = 0;
  std::function<Vec(const Vec&, double)> prox;
  std::function<double(const Vec&)> value;
  std::string label;
};

// Componentwise soft threshold at gamma * weights_j.
inline Vec soft_threshold(const Vec& u, double gamma, const Vec& weights) {
  if (gamma <= 0) throw std::invalid_argument("soft_threshold: gamma must be > 0");
  if (u.size() != weights.size())
    throw std::invalid_argument("soft_threshold: size mismatch");
  Vec out(u.size());
  for (Index j = 0; j < u.size(); ++j) {
    const double t = gamma * weights[j];
    if (t < 0) throw std::invalid_argument("soft_threshold: negative weight");
    const double a = std::abs(u[j]) - t;
    out[j] = a > 0 ? (u[j] > 0 ? a : -a) : 0.0;  // ties at the kink map to 0
  }
  return out;
}

// Radial projection of each pair (y_i, y_{d+i}) onto the disk of radius mu.
inline Vec project_group_l2_ball(const Vec& y, double mu, Index d) {
  if (mu <= 0) throw std::invalid_argument("project_group_l2_ball: mu must be > 0");
  if (y.size() != 2 * d)
    throw std::invalid_argument("project_group_l2_ball: length must be 2*d");
  Vec out = y;
  for (Index i = 0; i < d; ++i) {
    const double r = std::hypot(y[i], y[d + i]);
    if (r > mu) {
      const double s = mu / r;
      out[i] *= s;
      out[d + i] *= s;
    }
  }
  return out;
}

// Componentwise clamp to [-radii_j, radii_j]; zero radii clamp exactly to 0.
inline Vec project_box(const Vec& y, const Vec& radii) {
  if (y.size() != radii.size())
    throw std::invalid_argument("project_box: size mismatch");
  Vec out(y.size());
  for (Index j = 0; j < y.size(); ++j) {
    const double r = radii[j];
    if (r < 0) throw std::invalid_argument("project_box: negative radius");
    out[j] = (r == 0.0) ? 0.0 : std::min(std::max(y[j], -r), r);
  }
  return out;
}

// prox of gamma * <b, .>, i.e. the shift y - gamma*b.
inline Vec prox_linear_shift(const Vec& y, double gamma, const Vec& b) {
  if (gamma <= 0) throw std::invalid_argument("prox_linear_shift: gamma must be > 0");
  if (y.size() != b.size())
    throw std::invalid_argument("prox_linear_shift: size mismatch");
  return y - gamma * b;
}

// Sum of pairwise Euclidean norms over (y_i, y_{d+i}); applied to a discrete
// gradient this is the isotropic total variation.
inline double group_l2_value(const Vec& y) {
  if (y.size() % 2 != 0)
    throw std::invalid_argument("group_l2_value: length must be even");
  const Index d = y.size() / 2;
  double s = 0.0;
  for (Index i = 0; i < d; ++i) s += std::hypot(y[i], y[d + i]);
  return s;
}

inline ProxFunction weighted_l1(Vec weights, std::string label = "|Lambda .|_1") {
  const Index n = weights.size();
  auto w = std::make_shared<Vec>(std::move(weights));
  return ProxFunction{
      n,
      [w](const Vec& u, double g) { return soft_threshold(u, g, *w); },
      [w](const Vec& u) { return u.cwiseAbs().dot(*w); },
      std::move(label)};
}

inline ProxFunction l1_norm(Index n) { return weighted_l1(Vec::Ones(n), "|.|_1"); }

inline ProxFunction group_ball_indicator(double mu, Index d) {
  return ProxFunction{
      2 * d,
      [mu, d](const Vec& u, double) { return project_group_l2_ball(u, mu, d); },
      [mu, d](const Vec& u) {
        for (Index i = 0; i < d; ++i)
          if (std::hypot(u[i], u[d + i]) > mu * (1 + 1e-12)) return kInf;
        return 0.0;
      },
      "i_S1"};
}

inline ProxFunction box_indicator(Vec radii) {
  const Index n = radii.size();
  auto r = std::make_shared<Vec>(std::move(radii));
  return ProxFunction{
      n,
      [r](const Vec& u, double) { return project_box(u, *r); },
      [r](const Vec& u) {
        for (Index j = 0; j < u.size(); ++j)
          if (std::abs(u[j]) > (*r)[j] + 1e-12 * std::max(1.0, (*r)[j])) return kInf;
        return 0.0;
      },
      "i_S2"};
}

// f(x) = <b, x>.
inline ProxFunction linear_term(Vec b) {
  const Index n = b.size();
  auto bb = std::make_shared<Vec>(std::move(b));
  return ProxFunction{
      n,
      [bb](const Vec& u, double g) { return prox_linear_shift(u, g, *bb); },
      [bb](const Vec& u) { return bb->dot(u); },
      "<b,.>"};
}

// Indicator of the single point {p}; its prox is the constant map p.
inline ProxFunction point_indicator(Vec p) {
  const Index n = p.size();
  auto pp = std::make_shared<Vec>(std::move(p));
  return ProxFunction{
      n,
      [pp](const Vec&, double) { return *pp; },
      [pp](const Vec& u) { return (u - *pp).norm() <= 1e-12 ? 0.0 : kInf; },
      "i_{p}"};
}

inline ProxFunction zero_function(Index n) {
  return ProxFunction{
      n, [](const Vec& u, double) { return u; }, [](const Vec&) { return 0.0; },
      "0"};
}

}  // namespace tsfpp
