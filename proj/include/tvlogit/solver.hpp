#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "tvprox.hpp"

namespace tvlogit {

struct FitConfig {
  double lambda = 0.0;
  std::optional<double> box;  // sup-norm half-width of the feasible set, if any
  double tol = 1e-8;          // stop once the stationarity residual drops below this
  std::size_t max_iter = 50000;
  double step = 0.0;          // initial proximal step; 0 picks 4n, the inverse of the curvature cap
  double shrink = 0.5;        // backtracking factor
};

struct FitResult {
  Signal f_hat;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective per accepted state, never increasing
};

inline void validate_fit_config(const FitConfig& cfg) {
  if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0)
    throw InputError("fit: lambda must be finite and >= 0");
  if (cfg.box && (!std::isfinite(*cfg.box) || *cfg.box <= 0.0))
    throw InputError("fit: box must be finite and > 0");
  if (!(cfg.tol > 0.0)) throw InputError("fit: tol must be > 0");
  if (cfg.max_iter == 0) throw InputError("fit: max_iter must be >= 1");
  if (!std::isfinite(cfg.step) || cfg.step < 0.0)
    throw InputError("fit: step must be finite and >= 0");
  if (!(cfg.shrink > 0.0 && cfg.shrink < 1.0))
    throw InputError("fit: shrink must lie in (0, 1)");
}

// Stationarity residual of the penalized objective at f: running sums of the
// risk gradient (plus one-signed multipliers where f is pinned to the box
// edge) must track lambda times the sign structure of diff(f) and vanish at
// the end.  Exactly zero iff f is optimal.
inline double kkt_residual(const Signal& f, const Dataset& data, const FitConfig& cfg) {
  validate_fit_config(cfg);
  detail::require_same_length(f.size(), data.y.size(), "kkt_residual");
  if (f.size() < 2) throw InputError("kkt_residual: need at least 2 entries");
  const Signal g = gradient(f, data);
  const std::vector<double> d = diff(f);
  if (!cfg.box) return stationarity_residual(g, d, cfg.lambda, nullptr, nullptr);
  std::vector<unsigned char> up, dn;
  detail::box_pins(f, *cfg.box, up, dn);
  return stationarity_residual(g, d, cfg.lambda, &up, &dn);
}

namespace detail {

inline std::string divergence_note(const Dataset& data, bool zero_lambda) {
  std::string msg = "fit: no minimizer without a box constraint: ";
  if (zero_lambda) {
    msg += "with lambda = 0 each coordinate escapes on its own (";
    std::size_t shown = 0;
    for (std::size_t i = 0; i < data.y.size() && shown < 6; ++i, ++shown) {
      if (shown) msg += ", ";
      msg += "f_" + std::to_string(i + 1) + " -> " + (data.y[i] == 1.0 ? "+inf" : "-inf");
    }
    if (data.y.size() > 6) msg += ", ...";
    msg += ")";
  } else {
    const bool ones = !data.y.empty() && data.y[0] == 1.0;
    msg += "all responses equal, so every coordinate escapes to ";
    msg += ones ? "+inf" : "-inf";
    msg += " along the constant direction, which the penalty does not charge";
  }
  msg += "; add a box constraint";
  if (zero_lambda) msg += " or a positive lambda";
  return msg;
}

inline double sup_norm(const Signal& f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace detail

// Accelerated proximal descent with monotone restarts.  Steps are proximal
// gradient steps at the extrapolated point; a step whose full objective
// would rise is retried without extrapolation, so the recorded objective
// trace never increases.  Convergence is declared on the stationarity
// residual, not on objective stalls.
inline FitResult fit(const Dataset& data, const FitConfig& cfg) {
  validate_fit_config(cfg);
  validate_dataset(data);
  const std::size_t n = data.n();
  if (!cfg.box) {
    bool has0 = false, has1 = false;
    for (double v : data.y) (v == 1.0 ? has1 : has0) = true;
    if (cfg.lambda == 0.0) throw NonAttainableError(detail::divergence_note(data, true));
    if (!(has0 && has1)) throw NonAttainableError(detail::divergence_note(data, false));
  }

  const double lam = cfg.lambda;
  double step = cfg.step > 0.0 ? cfg.step : 4.0 * double(n);

  double ybar = 0.0;
  for (double v : data.y) ybar += v;
  ybar /= double(n);
  const double floor_p = 1.0 / double(n);
  double level = logit(std::clamp(ybar, floor_p, 1.0 - floor_p));
  if (cfg.box) level = std::clamp(level, -*cfg.box, *cfg.box);

  Signal x(n, level), x_prev = x, v = x;
  auto penalized = [&](const Signal& f, double risk) {
    return lam > 0.0 ? risk + lam * tv(f) : risk;
  };
  double fx = penalized(x, empirical_risk(x, data));

  FitResult res;
  res.objective_trace.push_back(fx);
  double residual = kkt_residual(x, data, cfg);
  double t = 1.0;
  bool plain = true;  // v coincides with x, no extrapolation pending
  std::size_t it = 0;

  if (residual > cfg.tol) {
    for (it = 1; it <= cfg.max_iter; ++it) {
      const Signal gv = gradient(v, data);
      const double risk_v = empirical_risk(v, data);
      Signal cand;
      double risk_c = 0.0;
      for (;;) {
        Signal u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = v[i] - step * gv[i];
        cand = cfg.box ? prox_tv_box(u, step * lam, *cfg.box) : prox_tv(u, step * lam);
        risk_c = empirical_risk(cand, data);
        double lin = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = cand[i] - v[i];
          lin += gv[i] * d;
          sq += d * d;
        }
        const double model = risk_v + lin + sq / (2.0 * step);
        if (risk_c <= model + 1e-12 * (1.0 + std::fabs(model))) break;
        step *= cfg.shrink;
        if (step <= 1e-12) break;  // the curvature cap is 1/(4n); this is unreachable
      }
      const double fc = penalized(cand, risk_c);
      if (fc <= fx) {
        x_prev.swap(x);
        x = std::move(cand);
        fx = fc;
        res.objective_trace.push_back(fx);
        residual = kkt_residual(x, data, cfg);
        if (residual <= cfg.tol) break;
        if (!cfg.box && detail::sup_norm(x) > 400.0)
          throw NonAttainableError(
              "fit: iterates escape any bounded set; the objective has no minimizer here");
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / tn;
        for (std::size_t i = 0; i < n; ++i) v[i] = x[i] + beta * (x[i] - x_prev[i]);
        t = tn;
        plain = false;
      } else if (!plain) {
        // extrapolation overshot: retry from the accepted state
        v = x;
        t = 1.0;
        plain = true;
        res.objective_trace.push_back(fx);
      } else {
        // even the plain step cannot improve: floating-point floor
        res.objective_trace.push_back(fx);
        break;
      }
    }
  }

  res.f_hat = std::move(x);
  res.iterations = std::min(it, cfg.max_iter);
  res.objective = penalized(res.f_hat, empirical_risk(res.f_hat, data));
  res.kkt_residual = kkt_residual(res.f_hat, data, cfg);
  res.converged = res.kkt_residual <= cfg.tol;
  return res;
}

// Long-horizon plain proximal descent from several random starts plus the
// accelerated fit, returning whichever candidate ends lowest.  Test oracle
// for tiny problems; refuses anything bigger.
inline FitResult brute_force_fit(const Dataset& data, const FitConfig& cfg,
                                 std::uint64_t seed = 20260814) {
  if (data.n() > 6) throw InputError("brute_force_fit: supports n <= 6 only");
  const FitResult accel = fit(data, cfg);
  const std::size_t n = data.n();
  const double lam = cfg.lambda;
  const double step = 4.0 * double(n);
  const double radius = cfg.box ? *cfg.box : 6.0;

  Signal best = accel.f_hat;
  double best_obj = accel.objective;
  const auto stream = RngStream::keyed(seed, 0xb0);
  std::size_t used = 0;
  for (std::uint64_t start = 0; start < 8; ++start) {
    Signal x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = stream.uniform(start * 64 + i, -radius, radius);
    for (std::size_t k = 0; k < 12000; ++k, ++used) {
      const Signal g = gradient(x, data);
      for (std::size_t i = 0; i < n; ++i) x[i] -= step * g[i];
      x = cfg.box ? prox_tv_box(x, step * lam, *cfg.box) : prox_tv(x, step * lam);
    }
    const double obj = lam > 0.0 ? empirical_risk(x, data) + lam * tv(x) : empirical_risk(x, data);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }

  FitResult out;
  out.f_hat = std::move(best);
  out.objective = best_obj;
  out.kkt_residual = kkt_residual(out.f_hat, data, cfg);
  out.iterations = used;
  out.converged = out.kkt_residual <= cfg.tol;
  out.objective_trace.push_back(best_obj);
  return out;
}

}  // namespace tvlogit
