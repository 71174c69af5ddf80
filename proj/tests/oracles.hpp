#pragma once

// Slow independent references for the test suites.  Everything here solves
// the same problems as the library through a different route: the prox via
// its dual quadratic program, gradients via central differences in long
// double.  Agreement between the two routes is the point, so nothing in this
// file may call fit(), prox_tv(), or prox_tv_box().

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <tvlogit/tvlogit.hpp>

namespace oracles {

using tvlogit::Signal;

inline double half_sq_dist(const Signal& a, const Signal& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return 0.5 * acc;
}

inline double prox_objective(const Signal& f, const Signal& z, double gamma,
                             std::optional<double> box) {
  if (box)
    for (double v : f)
      if (std::fabs(v) > *box * (1.0 + 1e-12)) return std::numeric_limits<double>::infinity();
  return half_sq_dist(f, z) + gamma * tvlogit::tv(f);
}

struct ProxQpResult {
  Signal f;
  double gap = 0.0;  // certified: ||f - prox||_2^2 <= 2 * gap
  std::size_t iterations = 0;
};

// Prox of gamma * ||D f||_1 (optionally restricted to |f_i| <= box) via the
// dual:
//   max_{|u_k| <= gamma}  -0.5 || clip(z - D^T u) - z ||^2 - u^T D clip(z - D^T u)
// by projected gradient ascent with step 1/4 (|| D D^T || <= 4).  The duality
// gap gamma * ||D f||_1 - u^T D f certifies primal accuracy through the
// 1-strong convexity of the objective.
inline ProxQpResult prox_tv_qp(const Signal& z, double gamma, std::optional<double> box = {},
                               std::size_t max_iter = 2000000) {
  const std::size_t n = z.size();
  ProxQpResult out;
  if (gamma == 0.0 || n == 1) {
    out.f = z;
    if (box)
      for (double& v : out.f) v = std::min(std::max(v, -*box), *box);
    return out;
  }
  const std::size_t m = n - 1;
  std::vector<double> u(m, 0.0);
  Signal f(n), g(m);
  double scale = 0.5;
  for (double v : z) scale += v * v;
  scale += gamma * tvlogit::tv(z);
  const double floor_gap = 1e-17 * scale;

  auto refresh = [&]() {
    const Signal dtu = tvlogit::adjoint_diff(u);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = z[i] - dtu[i];
      if (box) f[i] = std::min(std::max(f[i], -*box), *box);
    }
    for (std::size_t k = 0; k < m; ++k) g[k] = f[k + 1] - f[k];
  };

  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t last_drop = 0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    refresh();
    if (it % 64 == 0) {
      double gap = 0.0;
      for (std::size_t k = 0; k < m; ++k) gap += gamma * std::fabs(g[k]) - u[k] * g[k];
      if (gap < 0.99 * best_gap) {
        best_gap = gap;
        last_drop = it;
      }
      out.iterations = it;
      out.gap = gap;
      if (gap <= floor_gap) break;
      if (it > last_drop + 20000) break;  // float floor reached
    }
    for (std::size_t k = 0; k < m; ++k)
      u[k] = std::min(std::max(u[k] + 0.25 * g[k], -gamma), gamma);
  }
  refresh();
  out.f = f;
  return out;
}

// Logistic empirical risk recomputed in long double, split by response so
// neither branch subtracts nearly equal terms.
inline long double risk_ld(const std::vector<long double>& f, const std::vector<double>& y) {
  auto softplus_ld = [](long double x) -> long double {
    if (x > 40.0L) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
  };
  long double acc = 0.0L;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (y[i] == 1.0)
      acc += softplus_ld(-f[i]);
    else if (y[i] == 0.0)
      acc += softplus_ld(f[i]);
    else
      acc += -static_cast<long double>(y[i]) * f[i] + softplus_ld(f[i]);
  }
  return acc / static_cast<long double>(f.size());
}

// Central differences of the empirical risk, evaluated in long double.
inline std::vector<double> fd_gradient(const Signal& f, const tvlogit::Dataset& data,
                                       double h = 1e-6) {
  std::vector<long double> fl(f.begin(), f.end());
  std::vector<double> g(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const long double keep = fl[i];
    fl[i] = keep + h;
    const long double up = risk_ld(fl, data.y);
    fl[i] = keep - h;
    const long double dn = risk_ld(fl, data.y);
    fl[i] = keep;
    g[i] = double((up - dn) / (2.0L * h));
  }
  return g;
}

}  // namespace oracles
