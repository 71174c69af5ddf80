#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace tvlogit {

// Successive differences (f_2 - f_1, ..., f_n - f_{n-1}).
inline std::vector<double> diff(const Signal& f) {
  if (f.size() < 2) throw InputError("diff: need at least 2 entries");
  std::vector<double> d(f.size() - 1);
  for (std::size_t i = 0; i + 1 < f.size(); ++i) d[i] = f[i + 1] - f[i];
  return d;
}

// Adjoint of diff: u in R^{n-1} maps to (-u_1, u_1 - u_2, ..., u_{n-1}).
inline Signal adjoint_diff(const std::vector<double>& u) {
  if (u.empty()) throw InputError("adjoint_diff: empty input");
  const std::size_t n = u.size() + 1;
  Signal out(n);
  out[0] = -u[0];
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = u[i - 1] - u[i];
  out[n - 1] = u[n - 2];
  return out;
}

inline double tv(const Signal& f) {
  if (f.size() < 2) throw InputError("tv: need at least 2 entries");
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) acc += std::fabs(f[i + 1] - f[i]);
  return acc;
}

// argmin_x 1/2 ||x - z||^2 + gamma * tv(x), solved exactly in one forward and
// one backward sweep.  The forward pass maintains the derivative of the
// running best-cost function, a piecewise-linear increasing function stored
// as a deque of knots with affine increments; clamping that derivative to
// [-gamma, gamma] at every step yields per-step thresholds, and the backward
// pass threads the solution through them.  Coordinates merged into one
// segment share a stored value, so equal entries compare equal bitwise and
// downstream exact-zero tests on diff() are reliable.
inline Signal prox_tv(const Signal& z, double gamma) {
  const std::size_t n = z.size();
  if (n == 0) throw InputError("prox_tv: empty input");
  detail::require_finite(z, "prox_tv");
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw InputError("prox_tv: gamma must be finite and >= 0");
  Signal out(z);
  if (n == 1 || gamma == 0.0) return out;

  std::vector<double> knot(2 * n), da(2 * n), db(2 * n);
  std::vector<double> clo(n - 1), chi(n - 1);

  std::ptrdiff_t l = std::ptrdiff_t(n) - 1;
  std::ptrdiff_t r = std::ptrdiff_t(n);
  clo[0] = z[0] - gamma;
  chi[0] = z[0] + gamma;
  knot[l] = clo[0];
  knot[r] = chi[0];
  da[l] = 1.0;
  db[l] = -z[0] + gamma;
  da[r] = -1.0;
  db[r] = z[0] + gamma;
  double head_a = 1.0, head_b = -z[1] - gamma;
  double tail_a = -1.0, tail_b = z[1] - gamma;

  for (std::size_t k = 1; k + 1 < n; ++k) {
    // walk right until the clamped derivative rises above -gamma
    double alo = head_a, blo = head_b;
    std::ptrdiff_t lo = l;
    for (; lo <= r; ++lo) {
      if (alo * knot[lo] + blo > -gamma) break;
      alo += da[lo];
      blo += db[lo];
    }
    // walk left until it falls below gamma
    double ahi = tail_a, bhi = tail_b;
    std::ptrdiff_t hi = r;
    for (; hi >= lo; --hi) {
      if (-ahi * knot[hi] - bhi < gamma) break;
      ahi += da[hi];
      bhi += db[hi];
    }
    clo[k] = (-gamma - blo) / alo;
    l = lo - 1;
    knot[l] = clo[k];
    chi[k] = (gamma + bhi) / (-ahi);
    r = hi + 1;
    knot[r] = chi[k];
    da[l] = alo;
    db[l] = blo + gamma;
    da[r] = ahi;
    db[r] = bhi + gamma;
    head_a = 1.0;
    head_b = -z[k + 1] - gamma;
    tail_a = -1.0;
    tail_b = z[k + 1] - gamma;
  }

  // last coordinate sits where the final derivative crosses zero
  double alo = head_a, blo = head_b;
  std::ptrdiff_t lo = l;
  for (; lo <= r; ++lo) {
    if (alo * knot[lo] + blo > 0.0) break;
    alo += da[lo];
    blo += db[lo];
  }
  out[n - 1] = -blo / alo;
  for (std::size_t k = n - 1; k-- > 0;) {
    if (out[k + 1] > chi[k])
      out[k] = chi[k];
    else if (out[k + 1] < clo[k])
      out[k] = clo[k];
    else
      out[k] = out[k + 1];
  }
  return out;
}

// Feasibility residual of the first-order system for
//   (smooth term with gradient g) + bound * ||diff(f)||_1 + optional box.
// A valid certificate assigns a one-signed multiplier to every coordinate
// pinned at a box edge such that the running sum of g plus multipliers visits
// bound * [subdifferential of |.| at diff_k] after every coordinate and ends
// at zero.  The sweep propagates the interval of reachable running sums and
// accumulates the worst distance to the required interval; the result is
// exactly 0 iff some multiplier assignment satisfies the whole system.  Ties
// in diff count only at exactly 0.0, which prox_tv's output delivers.
inline double stationarity_residual(const std::vector<double>& g,
                                    const std::vector<double>& diffs,
                                    double bound,
                                    const std::vector<unsigned char>* pinned_hi,
                                    const std::vector<unsigned char>* pinned_lo) {
  const std::size_t n = g.size();
  if (n < 2 || diffs.size() + 1 != n)
    throw DimensionError("stationarity_residual: lengths do not line up");
  if (!std::isfinite(bound) || bound < 0.0)
    throw InputError("stationarity_residual: bound must be finite and >= 0");
  const double inf = std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lo += g[i];
    hi += g[i];
    if (pinned_hi && (*pinned_hi)[i]) hi = inf;
    if (pinned_lo && (*pinned_lo)[i]) lo = -inf;
    double tlo, thi;
    if (i + 1 < n) {
      const double d = diffs[i];
      if (d > 0.0) {
        tlo = thi = bound;
      } else if (d < 0.0) {
        tlo = thi = -bound;
      } else {
        tlo = -bound;
        thi = bound;
      }
    } else {
      tlo = thi = 0.0;
    }
    const double gap = std::max(std::max(lo - thi, tlo - hi), 0.0);
    if (gap > worst) worst = gap;
    double nlo = std::max(lo, tlo), nhi = std::min(hi, thi);
    if (nlo > nhi) {
      const double p = (lo > thi) ? thi : tlo;
      nlo = nhi = p;
    }
    lo = nlo;
    hi = nhi;
  }
  return worst;
}

// Residual of the prox system: running sums of (f - z) must track
// gamma * sign(diff(f)).  Zero iff f == prox_tv(z, gamma).
inline double prox_kkt_residual(const Signal& f, const Signal& z, double gamma) {
  detail::require_same_length(f.size(), z.size(), "prox_kkt_residual");
  if (f.size() < 2) throw InputError("prox_kkt_residual: need at least 2 entries");
  detail::require_finite(f, "prox_kkt_residual");
  detail::require_finite(z, "prox_kkt_residual");
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw InputError("prox_kkt_residual: gamma must be finite and >= 0");
  std::vector<double> g(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) g[i] = f[i] - z[i];
  return stationarity_residual(g, diff(f), gamma, nullptr, nullptr);
}

namespace detail {

inline void box_pins(const Signal& f, double b, std::vector<unsigned char>& up,
                     std::vector<unsigned char>& dn) {
  const double edge = 1e-12 * std::max(1.0, b);
  up.resize(f.size());
  dn.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    up[i] = f[i] >= b - edge ? 1 : 0;
    dn[i] = f[i] <= -b + edge ? 1 : 0;
  }
}

}  // namespace detail

// Residual of the box-constrained prox system; zero iff f minimizes
// 1/2 ||. - z||^2 + gamma * tv over the box [-b, b]^n.
inline double prox_box_kkt_residual(const Signal& f, const Signal& z, double gamma, double b) {
  detail::require_same_length(f.size(), z.size(), "prox_box_kkt_residual");
  if (f.size() < 2) throw InputError("prox_box_kkt_residual: need at least 2 entries");
  detail::require_finite(f, "prox_box_kkt_residual");
  detail::require_finite(z, "prox_box_kkt_residual");
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw InputError("prox_box_kkt_residual: gamma must be finite and >= 0");
  if (!std::isfinite(b) || b <= 0.0)
    throw InputError("prox_box_kkt_residual: box must be finite and > 0");
  std::vector<unsigned char> up, dn;
  detail::box_pins(f, b, up, dn);
  std::vector<double> g(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) g[i] = f[i] - z[i];
  return stationarity_residual(g, diff(f), gamma, &up, &dn);
}

// Prox over the box: for a common interval box, clamping the unconstrained
// prox is exact, and the result is certified against the stationarity system
// before it is returned.  Should the certificate ever fail, the answer is
// refined by Dykstra alternation between prox_tv and the box projection,
// which converges to the prox of the sum.
inline Signal prox_tv_box(const Signal& z, double gamma, double b) {
  if (!std::isfinite(b) || b <= 0.0) throw InputError("prox_tv_box: box must be finite and > 0");
  Signal f = prox_tv(z, gamma);
  if (f.size() < 2) {
    for (double& v : f) v = std::clamp(v, -b, b);
    return f;
  }
  for (double& v : f) v = std::clamp(v, -b, b);
  double zmax = 0.0;
  for (double v : z) zmax = std::max(zmax, std::fabs(v));
  const double tol = 1e-8 * (1.0 + gamma + zmax);
  if (prox_box_kkt_residual(f, z, gamma, b) <= tol) return f;

  const std::size_t n = z.size();
  Signal x = z, p(n, 0.0), q(n, 0.0), best = f;
  double best_res = prox_box_kkt_residual(f, z, gamma, b);
  for (std::size_t round = 0; round < 2000; ++round) {
    Signal tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + p[i];
    const Signal y1 = prox_tv(tmp, gamma);
    for (std::size_t i = 0; i < n; ++i) p[i] = tmp[i] - y1[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = y1[i] + q[i];
      x[i] = std::clamp(v, -b, b);
      q[i] = v - x[i];
    }
    if (round % 50 == 49) {
      const double res = prox_box_kkt_residual(x, z, gamma, b);
      if (res < best_res) {
        best_res = res;
        best = x;
      }
      if (res <= tol) return x;
    }
  }
  return best;
}

}  // namespace tvlogit
