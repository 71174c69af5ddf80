#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace tvlogit {

// One value per design point on the 1..n grid.
using Signal = std::vector<double>;

namespace detail {

inline void require_finite(const std::vector<double>& v, const char* who) {
  for (double x : v)
    if (!std::isfinite(x)) throw InputError(std::string(who) + ": non-finite entry");
}

inline void require_same_length(std::size_t a, std::size_t b, const char* who) {
  if (a != b)
    throw DimensionError(std::string(who) + ": length mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}

}  // namespace detail

// Binary responses observed along the grid.  `truth` carries the generating
// log-odds sequence when it is known (simulation); estimation never reads it.
struct Dataset {
  std::vector<double> y;
  std::optional<Signal> truth;

  std::size_t n() const { return y.size(); }
};

inline void validate_dataset(const Dataset& data) {
  if (data.y.size() < 2) throw InputError("dataset: need at least 2 observations");
  for (double v : data.y)
    if (v != 0.0 && v != 1.0) throw InputError("dataset: responses must be exactly 0 or 1");
  if (data.truth) {
    detail::require_same_length(data.truth->size(), data.y.size(), "dataset truth");
    detail::require_finite(*data.truth, "dataset truth");
  }
}

// log(1 + e^x).  Above 30 the direct form would round the e^{-x} remainder
// away, so switch to x + log1p(e^{-x}) there.
inline double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("logit: argument must lie in (0, 1)");
  return std::log(p / (1.0 - p));
}

// (1/n) sum_i [ -y_i f_i + softplus(f_i) ].  For y_i in {0,1} the summand
// collapses to softplus(-f_i) resp. softplus(f_i); that form keeps the
// leading digits when the per-observation loss is near zero.
inline double empirical_risk(const Signal& f, const Dataset& data) {
  detail::require_same_length(f.size(), data.y.size(), "empirical_risk");
  if (f.empty()) throw InputError("empirical_risk: empty signal");
  detail::require_finite(f, "empirical_risk");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double yi = data.y[i];
    if (yi == 1.0)
      acc += softplus(-f[i]);
    else if (yi == 0.0)
      acc += softplus(f[i]);
    else
      acc += softplus(f[i]) - yi * f[i];
  }
  return acc / double(f.size());
}

// Risk against known success probabilities sigmoid(truth_i).
inline double theoretical_risk(const Signal& f, const Signal& truth) {
  detail::require_same_length(f.size(), truth.size(), "theoretical_risk");
  if (f.empty()) throw InputError("theoretical_risk: empty signal");
  detail::require_finite(f, "theoretical_risk");
  detail::require_finite(truth, "theoretical_risk");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    acc += softplus(f[i]) - sigmoid(truth[i]) * f[i];
  return acc / double(f.size());
}

// theoretical_risk(f, truth) - theoretical_risk(truth, truth), accumulated
// termwise so every summand is a nonnegative curvature gap and nothing is
// lost to cancellation across coordinates.
inline double excess_risk(const Signal& f, const Signal& truth) {
  detail::require_same_length(f.size(), truth.size(), "excess_risk");
  if (f.empty()) throw InputError("excess_risk: empty signal");
  detail::require_finite(f, "excess_risk");
  detail::require_finite(truth, "excess_risk");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    acc += softplus(f[i]) - softplus(truth[i]) - sigmoid(truth[i]) * (f[i] - truth[i]);
  return acc / double(f.size());
}

// d/df_i of empirical_risk: (sigmoid(f_i) - y_i) / n.
inline Signal gradient(const Signal& f, const Dataset& data) {
  detail::require_same_length(f.size(), data.y.size(), "gradient");
  if (f.empty()) throw InputError("gradient: empty signal");
  detail::require_finite(f, "gradient");
  Signal g(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    g[i] = (sigmoid(f[i]) - data.y[i]) / double(f.size());
  return g;
}

// kappa(b) = (1 + e^b)^2 / e^b, evaluated as e^b + 2 + e^{-b} so it never
// overflows before e^b itself does.  Reciprocal of the logistic curvature
// sigmoid'(x) at |x| = b.
inline double kappa(double b) {
  if (!(b >= 0.0)) throw InputError("kappa: radius must be >= 0");
  return std::exp(b) + 2.0 + std::exp(-b);
}

// kappa at the largest magnitude either signal reaches.  On every segment
// between f_i and truth_i the logistic curvature is at least the reciprocal
// of this value.
inline double curvature_bound(const Signal& f, const Signal& truth) {
  detail::require_same_length(f.size(), truth.size(), "curvature_bound");
  detail::require_finite(f, "curvature_bound");
  detail::require_finite(truth, "curvature_bound");
  double m = 0.0;
  for (double v : f) m = std::max(m, std::fabs(v));
  for (double v : truth) m = std::max(m, std::fabs(v));
  return kappa(m);
}

}  // namespace tvlogit
