#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "tvprox.hpp"

namespace tvlogit {

// Where a piecewise-constant signal moves and in which direction.  Positions
// are 1-based: a jump at position t means the value at t differs from the
// value at t-1, so t ranges over [2, n].  Segment j (1-based, j = 1..s+1)
// spans positions [t_{j-1}, t_j - 1] with t_0 = 1 and t_{s+1} = n+1; its
// length is d_j and the lengths sum to n.  A segment is "monotone" when the
// jumps on both of its ends exist and share a sign; the first and last
// segments never qualify.
struct JumpStructure {
  std::size_t n = 0;
  std::vector<std::size_t> jumps;           // t_1 < ... < t_s, each in [2, n]
  std::vector<int> signs;                   // +1 or -1 per jump
  std::vector<std::size_t> seg_len;         // d_1..d_{s+1}
  std::vector<unsigned char> seg_monotone;  // one flag per segment
  std::size_t d_max = 0;

  std::size_t s() const { return jumps.size(); }
  std::size_t segments() const { return seg_len.size(); }
};

inline JumpStructure make_jump_structure(std::size_t n, std::vector<std::size_t> jumps,
                                         std::vector<int> signs) {
  if (n < 2) throw InputError("jump structure: n must be >= 2");
  if (jumps.size() != signs.size())
    throw DimensionError("jump structure: need one sign per jump");
  if (jumps.size() >= n) throw InputError("jump structure: at most n-1 jumps");
  for (std::size_t j = 0; j < jumps.size(); ++j) {
    if (jumps[j] < 2 || jumps[j] > n)
      throw InputError("jump structure: positions live in [2, n]");
    if (j > 0 && jumps[j] <= jumps[j - 1])
      throw InputError("jump structure: positions must strictly increase");
    if (signs[j] != 1 && signs[j] != -1)
      throw InputError("jump structure: signs are +1 or -1");
  }
  JumpStructure js;
  js.n = n;
  js.jumps = std::move(jumps);
  js.signs = std::move(signs);
  const std::size_t r = js.jumps.size() + 1;
  js.seg_len.resize(r);
  js.seg_monotone.assign(r, 0);
  std::size_t prev = 1;
  for (std::size_t j = 0; j + 1 < r; ++j) {
    js.seg_len[j] = js.jumps[j] - prev;
    prev = js.jumps[j];
  }
  js.seg_len[r - 1] = n + 1 - prev;
  js.d_max = *std::max_element(js.seg_len.begin(), js.seg_len.end());
  for (std::size_t j = 1; j + 1 < r; ++j)
    js.seg_monotone[j] = (js.signs[j - 1] == js.signs[j]) ? 1 : 0;
  return js;
}

// Jumps of f at the given tolerance: position i+1 is a jump when
// |f_{i+1} - f_i| > tol.
inline JumpStructure extract_jumps(const Signal& f, double tol = 0.0) {
  if (f.size() < 2) throw InputError("extract_jumps: need at least 2 entries");
  detail::require_finite(f, "extract_jumps");
  if (!(tol >= 0.0)) throw InputError("extract_jumps: tol must be >= 0");
  std::vector<std::size_t> jumps;
  std::vector<int> signs;
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double d = f[i] - f[i - 1];
    if (std::fabs(d) > tol) {
      jumps.push_back(i + 1);
      signs.push_back(d > 0.0 ? 1 : -1);
    }
  }
  return make_jump_structure(f.size(), std::move(jumps), std::move(signs));
}

// One weight per position k in [2, n], stored at index k-2 so the vector
// aligns with diff() entries.  Interior of segment j:
//   w_k^2 = ((k - t_{j-1}) / d_j) * ((t_j - k) / n);
// at a jump position, w^2 = 1/n.
struct WeightVector {
  std::size_t n = 0;
  std::vector<double> w;
};

inline WeightVector weights(const JumpStructure& js) {
  WeightVector wv;
  wv.n = js.n;
  wv.w.assign(js.n - 1, 0.0);
  std::size_t t_lo = 1;
  for (std::size_t j = 0; j < js.segments(); ++j) {
    const std::size_t t_hi = t_lo + js.seg_len[j];
    const double d = double(js.seg_len[j]);
    for (std::size_t k = t_lo + 1; k < t_hi; ++k)
      wv.w[k - 2] = std::sqrt((double(k - t_lo) / d) * (double(t_hi - k) / double(js.n)));
    t_lo = t_hi;
  }
  for (std::size_t t : js.jumps) wv.w[t - 2] = std::sqrt(1.0 / double(js.n));
  return wv;
}

struct TheoryParams {
  double t = 1.0;       // tail level of the probability statements
  double nu = 1.0;      // free tradeoff parameter, > 0
  double a0 = 1.0;      // stand-in for the unspecified universal entropy constant
  double lambda = 0.0;  // penalty level under evaluation
};

inline void validate_theory_params(const TheoryParams& p, bool need_lambda) {
  if (!std::isfinite(p.t) || !(p.t > 0.0)) throw InputError("theory: t must be > 0");
  if (!std::isfinite(p.nu) || !(p.nu > 0.0)) throw InputError("theory: nu must be > 0");
  if (!std::isfinite(p.a0) || !(p.a0 > 0.0)) throw InputError("theory: a0 must be > 0");
  if (need_lambda && (!std::isfinite(p.lambda) || !(p.lambda > 0.0)))
    throw InputError("theory: lambda must be > 0");
}

// (4/n) * sum over segments of length >= 2 of (log(d_j - 1) + 1), plus s/n.
inline double delta_n_sq(const JumpStructure& js) {
  double acc = 0.0;
  for (std::size_t d : js.seg_len)
    if (d >= 2) acc += std::log(double(d - 1)) + 1.0;
  return 4.0 * acc / double(js.n) + double(js.s()) / double(js.n);
}

// log(3 + 2 log2 n): the price of a union over dyadic scales.
inline double scale_log(std::size_t n) { return std::log(3.0 + 2.0 * std::log2(double(n))); }

inline double delta_sq_t(const JumpStructure& js, const TheoryParams& p) {
  validate_theory_params(p, false);
  const double nn = double(js.n);
  const double dn = std::sqrt(delta_n_sq(js));
  const double tail = 1.0 + p.t + scale_log(js.n);
  const double main = 4.0 * p.nu * p.a0 * dn + 8.0 * std::sqrt(tail / nn);
  const double coef = 2.0 / p.nu + 4.0 * std::sqrt(p.a0 * dn / nn) + 4.0 * std::sqrt(tail) / nn;
  const double spread = dn + 2.0 * std::sqrt(double(js.s()) / nn);
  return main * main + coef * spread * spread;
}

inline double lambda_n_t(const JumpStructure& js, const TheoryParams& p) {
  validate_theory_params(p, false);
  const double nn = double(js.n);
  const double dn = std::sqrt(delta_n_sq(js));
  const double tail = 1.0 + p.t + scale_log(js.n);
  return (4.0 / p.nu + 8.0 * std::sqrt(p.a0 * dn / nn) + 8.0 * std::sqrt(tail) / nn) /
         std::sqrt(nn);
}

// Smallest penalty the risk statements support: lambda_n(t) * sqrt(d_max / (2n)).
inline double lambda_min(const JumpStructure& js, const TheoryParams& p) {
  return lambda_n_t(js, p) * std::sqrt(double(js.d_max) / (2.0 * double(js.n)));
}

// Effective-sparsity budget: monotone segments cost (lambda_n/lambda)^2 * 8(log d + 1),
// sign-change segments cost 8n(log d + 2)/d.
inline double gamma_n_sq(const JumpStructure& js, const TheoryParams& p) {
  validate_theory_params(p, true);
  const double ratio = lambda_n_t(js, p) / p.lambda;
  double mono = 0.0, change = 0.0;
  for (std::size_t j = 0; j < js.segments(); ++j) {
    const double d = double(js.seg_len[j]);
    if (js.seg_monotone[j])
      mono += 8.0 * (std::log(d) + 1.0);
    else
      change += 8.0 * double(js.n) * (std::log(d) + 2.0) / d;
  }
  return ratio * ratio * mono + change;
}

inline double oracle_rhs(double kappa_b, double delta_sq, double lambda, double gamma_sq) {
  return 4.0 * kappa_b * delta_sq + lambda * lambda * gamma_sq / 4.0;
}

struct BoundSet {
  double delta_n_sq = 0.0;
  double delta_sq_t = 0.0;
  double lambda_n = 0.0;
  double lambda_min = 0.0;
  double gamma_n_sq = 0.0;
  double kappa = 0.0;
  double oracle_rhs = 0.0;
};

inline BoundSet compute_bounds(const JumpStructure& js, const TheoryParams& p, double box_b) {
  validate_theory_params(p, true);
  BoundSet b;
  b.delta_n_sq = delta_n_sq(js);
  b.delta_sq_t = delta_sq_t(js, p);
  b.lambda_n = lambda_n_t(js, p);
  b.lambda_min = lambda_min(js, p);
  b.gamma_n_sq = gamma_n_sq(js, p);
  b.kappa = kappa(box_b);
  b.oracle_rhs = oracle_rhs(b.kappa, b.delta_sq_t, p.lambda, b.gamma_n_sq);
  return b;
}

// A dual certificate for the effective-sparsity budget: +-1 at each jump,
// tapering to zero across each segment as 1 - 2*omega, with the sign handed
// over at the segment midpoint.  Midpoints are half-integers, so the branch
// tests below are exact.  The construction needs room after the last jump;
// a jump at position n is rejected because the last coordinate must be zero.
inline Signal interpolating_vector(const JumpStructure& js, const TheoryParams& p) {
  validate_theory_params(p, true);
  const std::size_t n = js.n, s = js.s();
  Signal q(n, 0.0);
  if (s == 0) return q;
  if (js.jumps.back() == n)
    throw InputError("interpolating_vector: the last jump must sit before position n");
  const double ratio = lambda_n_t(js, p) / p.lambda;
  for (std::size_t j = 0; j < s; ++j) q[js.jumps[j] - 1] = double(js.signs[j]);
  const std::size_t r = s + 1;
  std::size_t t_lo = 1;
  for (std::size_t j = 0; j < r; ++j) {
    const std::size_t t_hi = t_lo + js.seg_len[j];
    const double d = double(js.seg_len[j]);
    const double mid = 0.5 * double(t_lo + t_hi);
    for (std::size_t k = t_lo + 1; k < t_hi; ++k) {
      double omega_sq;
      if (js.seg_monotone[j])
        omega_sq = (double(k - t_lo) / d) * (double(t_hi - k) / double(n)) * ratio;
      else
        omega_sq = (double(k - t_lo) / d) * (double(t_hi - k) / d);
      int sign;
      if (j == 0)
        sign = (double(k) < mid) ? 0 : js.signs[0];
      else if (j + 1 == r)
        sign = (double(k) < mid) ? js.signs[s - 1] : 0;
      else
        sign = (double(k) < mid) ? js.signs[j - 1] : js.signs[j];
      q[k - 1] = (sign == 0) ? 0.0 : double(sign) * (1.0 - 2.0 * std::sqrt(omega_sq));
    }
    t_lo = t_hi;
  }
  return q;
}

struct SparsityOracleConfig {
  std::size_t starts = 8;
  std::size_t max_rounds = 20000;  // per start
  std::size_t window = 400;        // rounds between stall checks
  double stall = 1e-6;
  std::uint64_t seed = 0x5eed;
};

// Numerically maximizes
//   sum over jumps of sign_j * (Df)_{t_j}  -  sum off jumps of (1 - w_k lambda_n / lambda) |(Df)_k|
// over the ball ||f||_2 <= sqrt(n) by projected supergradient ascent from a
// signed staircase plus random starts, and returns the square of the best
// positive value (0 when nothing positive is found or s = 0).  A search, not
// a formula, hence the small-n guard.
inline double effective_sparsity_oracle(const JumpStructure& js, const TheoryParams& p,
                                        const SparsityOracleConfig& oc = {}) {
  validate_theory_params(p, true);
  if (js.n > 64) throw InputError("effective_sparsity_oracle: n must be <= 64");
  if (js.s() == 0) return 0.0;
  if (p.lambda < lambda_min(js, p) * (1.0 - 1e-12))
    throw InputError("effective_sparsity_oracle: lambda is below lambda_min");

  const std::size_t n = js.n, m = n - 1;
  const WeightVector wv = weights(js);
  const double ratio = lambda_n_t(js, p) / p.lambda;
  std::vector<double> cost(m);
  std::vector<int> jump_sign(m, 0);
  for (std::size_t k = 0; k < m; ++k) cost[k] = 1.0 - wv.w[k] * ratio;
  for (std::size_t j = 0; j < js.s(); ++j) jump_sign[js.jumps[j] - 2] = js.signs[j];

  auto value = [&](const Signal& f) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double d = f[k + 1] - f[k];
      acc += jump_sign[k] ? double(jump_sign[k]) * d : -cost[k] * std::fabs(d);
    }
    return acc;
  };
  auto center = [&](Signal& f) {
    double mean = 0.0;
    for (double x : f) mean += x;
    mean /= double(n);
    for (double& x : f) x -= mean;
  };
  auto norm2 = [&](const Signal& f) {
    double acc = 0.0;
    for (double x : f) acc += x * x;
    return std::sqrt(acc);
  };

  const double target = std::sqrt(double(n));
  const auto stream = RngStream::keyed(oc.seed, js.n, js.s());
  double best = 0.0;
  for (std::uint64_t start = 0; start < oc.starts; ++start) {
    Signal f(n, 0.0);
    if (start == 0) {
      // staircase whose jumps match the requested signs
      double level = 0.0;
      std::size_t idx = 0;
      for (std::size_t j = 0; j < js.segments(); ++j) {
        for (std::size_t k = 0; k < js.seg_len[j]; ++k) f[idx++] = level;
        if (j < js.s()) level += double(js.signs[j]);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) f[i] = stream.uniform(start * 1024 + i, -1.0, 1.0);
    }
    center(f);
    double nr = norm2(f);
    if (nr < 1e-12) {
      f[0] += 1.0;
      center(f);
      nr = norm2(f);
    }
    for (double& x : f) x *= target / nr;

    double local = value(f);
    if (local > best) best = local;
    double mark = best;
    for (std::size_t round = 1; round <= oc.max_rounds; ++round) {
      std::vector<double> a(m);
      for (std::size_t k = 0; k < m; ++k) {
        if (jump_sign[k]) {
          a[k] = double(jump_sign[k]);
        } else {
          const double d = f[k + 1] - f[k];
          a[k] = d > 0.0 ? -cost[k] : (d < 0.0 ? cost[k] : 0.0);
        }
      }
      const Signal g = adjoint_diff(a);
      const double gn = norm2(g);
      if (gn == 0.0) break;
      const double alpha = 0.5 * target / (gn * std::sqrt(double(round)));
      for (std::size_t i = 0; i < n; ++i) f[i] += alpha * g[i];
      center(f);
      const double fn = norm2(f);
      if (fn < 1e-12) break;
      if (fn > target)
        for (double& x : f) x *= target / fn;
      const double scaled = value(f) * target / std::max(norm2(f), 1e-300);
      if (scaled > best) best = scaled;
      if (round % oc.window == 0) {
        if (best - mark < oc.stall) break;
        mark = best;
      }
    }
  }
  return best > 0.0 ? best * best : 0.0;
}

struct SupNormWindow {
  double k_sq = 0.0;
  double lambda_hi = 0.0;
  double lambda_lo_entropy = 0.0;
  double lambda_lo_tail = 0.0;
  double lambda_lo = 0.0;
  bool feasible = false;
  const char* blocking = "";  // "entropy" or "tail" when infeasible
  double sup_bound = 0.0;     // (1 + 8 m0) / 2
};

// Penalty window on which the fixed-point argument certifies that an
// unconstrained fit stays inside a known sup-norm ball.  The curvature
// ceiling k_sq is evaluated at the worst admissible excursion
// e = 1 + 16 m0 + f0_inf and pushes the window down from above, while
// entropy and tail requirements push it up from below; at desk-scale n the
// two sides do not meet.
inline SupNormWindow sup_norm_window(double m0, double f0_inf, std::size_t n, double t,
                                     double a0 = 1.0) {
  if (!std::isfinite(m0) || !(m0 >= 1.0)) throw InputError("sup_norm_window: m0 must be >= 1");
  if (!std::isfinite(f0_inf) || f0_inf < 0.0)
    throw InputError("sup_norm_window: f0_inf must be >= 0");
  if (n < 2) throw InputError("sup_norm_window: n must be >= 2");
  if (!std::isfinite(t) || !(t > 0.0)) throw InputError("sup_norm_window: t must be > 0");
  if (!std::isfinite(a0) || !(a0 > 0.0)) throw InputError("sup_norm_window: a0 must be > 0");
  SupNormWindow w;
  const double e = 1.0 + 16.0 * m0 + f0_inf;
  w.k_sq = std::exp(e) + 2.0 + std::exp(-e);
  w.lambda_hi = 1.0 / (32.0 * w.k_sq * m0);
  w.lambda_lo_entropy =
      256.0 * std::pow(double(n), -2.0 / 3.0) * std::pow(a0, 2.0 / 3.0) * std::cbrt(2.0 * w.k_sq);
  w.lambda_lo_tail = 512.0 * w.k_sq * (1.0 + t) / double(n);
  w.lambda_lo = std::max(w.lambda_lo_entropy, w.lambda_lo_tail);
  w.feasible = w.lambda_lo <= w.lambda_hi;
  if (!w.feasible) w.blocking = (w.lambda_lo_entropy >= w.lambda_lo_tail) ? "entropy" : "tail";
  w.sup_bound = 0.5 * (1.0 + 8.0 * m0);
  return w;
}

}  // namespace tvlogit
