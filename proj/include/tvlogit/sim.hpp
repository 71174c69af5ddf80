#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "solver.hpp"
#include "theory.hpp"

namespace tvlogit {

// Runs fn(0..count-1) across a pool.  Items may execute in any order, so fn
// must write only to its own slot; given that, results are identical for any
// worker count.  workers == 0 picks the hardware default.
template <class Fn>
inline void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (workers == 0) {
    workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
  }
  if (count < workers) workers = unsigned(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  auto body = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

enum class TruthKind { constant, monotone, alternating };

inline const char* truth_kind_name(TruthKind k) {
  switch (k) {
    case TruthKind::constant: return "constant";
    case TruthKind::monotone: return "monotone";
    case TruthKind::alternating: return "alternating";
  }
  return "?";
}

inline TruthKind truth_kind_from_name(const std::string& name) {
  if (name == "constant") return TruthKind::constant;
  if (name == "monotone") return TruthKind::monotone;
  if (name == "alternating") return TruthKind::alternating;
  throw InputError("scenario: unknown kind '" + name +
                   "' (expected constant, monotone, or alternating)");
}

struct ScenarioSpec {
  TruthKind kind = TruthKind::alternating;
  std::size_t n = 256;
  std::size_t s = 2;
  double magnitude = 1.0;
  double base = std::numeric_limits<double>::quiet_NaN();  // NaN: per-kind default
  double box = 1.5;                                        // 0 disables the constraint
  TheoryParams params;                                     // lambda resolved per run
  double lambda_mult = 1.0;  // lambda = mult * lambda_min unless explicit
  std::optional<double> lambda_explicit;
  bool allow_small_lambda = false;
  double fit_tol = 1e-8;
  std::size_t fit_max_iter = 50000;
};

inline double resolved_base(const ScenarioSpec& sp) {
  if (!std::isnan(sp.base)) return sp.base;
  switch (sp.kind) {
    case TruthKind::constant: return 0.0;
    case TruthKind::monotone: return -0.5 * double(sp.s) * sp.magnitude;
    case TruthKind::alternating: return -0.5 * sp.magnitude;
  }
  return 0.0;
}

// Piecewise-constant truth with exactly s jumps at near-equidistant
// positions; when n is not divisible by s+1 the longer segments come first.
inline Signal make_truth(const ScenarioSpec& sp) {
  if (sp.n < 2) throw InputError("scenario: n must be >= 2");
  const std::size_t r = sp.s + 1;
  if (r > sp.n) throw InputError("scenario: needs s < n");
  if (sp.s > 0 && !(sp.magnitude > 0.0))
    throw InputError("scenario: magnitude must be > 0 when s > 0");
  if (!std::isfinite(sp.magnitude) || (!std::isnan(sp.base) && !std::isfinite(sp.base)))
    throw InputError("scenario: magnitude and base must be finite");
  if (sp.kind == TruthKind::constant && sp.s != 0)
    throw InputError("scenario: constant truth has s = 0");
  const double base = resolved_base(sp);
  const std::size_t q = sp.n / r, rem = sp.n % r;
  Signal f;
  f.reserve(sp.n);
  for (std::size_t j = 0; j < r; ++j) {
    double level = base;
    if (sp.kind == TruthKind::monotone)
      level = base + double(j) * sp.magnitude;
    else if (sp.kind == TruthKind::alternating)
      level = base + double(j % 2) * sp.magnitude;
    f.insert(f.end(), q + (j < rem ? 1 : 0), level);
  }
  return f;
}

inline std::string scenario_label(const ScenarioSpec& sp) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s(n=%zu,s=%zu,mag=%g,base=%g)", truth_kind_name(sp.kind),
                sp.n, sp.s, sp.magnitude, resolved_base(sp));
  return std::string(buf);
}

// One Bernoulli response per position from a counter stream keyed by
// (seed, replicate): replicate r reads the same stream no matter which
// worker runs it or in which order.
inline Dataset draw_response(const Signal& truth, std::uint64_t seed, std::uint64_t rep) {
  if (truth.size() < 2) throw InputError("draw_response: need at least 2 positions");
  detail::require_finite(truth, "draw_response");
  const auto stream = RngStream::keyed(seed, rep, 0xbe);
  Dataset d;
  d.y.resize(truth.size());
  d.truth = truth;
  for (std::size_t i = 0; i < truth.size(); ++i)
    d.y[i] = stream.uniform(i) < sigmoid(truth[i]) ? 1.0 : 0.0;
  return d;
}

inline double resolve_lambda(const ScenarioSpec& sp, const JumpStructure& js) {
  const double floor_v = lambda_min(js, sp.params);
  const double lam = sp.lambda_explicit ? *sp.lambda_explicit : sp.lambda_mult * floor_v;
  if (!std::isfinite(lam) || lam <= 0.0) throw InputError("scenario: lambda must be > 0");
  if (lam < floor_v * (1.0 - 1e-12) && !sp.allow_small_lambda)
    throw InputError("scenario: lambda below lambda_min; set allow_small_lambda to override");
  return lam;
}

struct ReplicateRecord {
  std::uint64_t rep = 0;
  bool converged = false;
  bool sup_ok = false;
  bool violated = false;
  double excess = 0.0;
  double tv_dist = 0.0;
  double sup_dist = 0.0;
  double kkt = 0.0;
};

struct OracleExperiment {
  std::string scenario;
  std::size_t n = 0, s = 0, reps = 0;
  double lambda = 0.0, box = 0.0, tail_target = 0.0;
  BoundSet bounds;
  std::size_t converged = 0, sup_ok = 0, violations = 0;
  double violation_fraction = 0.0;
  bool coverage_ok = false;
  std::vector<ReplicateRecord> records;
};

// Draws responses from the scenario truth, fits with the box constraint, and
// counts how often the excess risk beats its high-probability budget.
// Violations are counted among converged replicates inside the box; the rest
// are reported separately.
inline OracleExperiment run_oracle_experiment(const ScenarioSpec& sp, std::size_t reps,
                                              std::uint64_t seed, unsigned workers) {
  if (reps == 0) throw InputError("oracle experiment: reps must be >= 1");
  if (!(sp.box > 0.0) || !std::isfinite(sp.box))
    throw InputError("oracle experiment: needs a box constraint (box > 0)");
  const Signal truth = make_truth(sp);
  for (double v : truth)
    if (std::fabs(v) > sp.box * (1.0 + 1e-12))
      throw InputError("oracle experiment: truth exceeds the box");
  const JumpStructure js = extract_jumps(truth);
  TheoryParams p = sp.params;
  p.lambda = resolve_lambda(sp, js);

  OracleExperiment out;
  out.scenario = scenario_label(sp);
  out.n = sp.n;
  out.s = js.s();
  out.reps = reps;
  out.lambda = p.lambda;
  out.box = sp.box;
  out.tail_target = std::exp(-p.t);
  out.bounds = compute_bounds(js, p, sp.box);
  out.records.assign(reps, ReplicateRecord{});

  FitConfig cfg;
  cfg.lambda = p.lambda;
  cfg.box = sp.box;
  cfg.tol = sp.fit_tol;
  cfg.max_iter = sp.fit_max_iter;
  const double rhs = out.bounds.oracle_rhs;

  parallel_for(reps, workers, [&](std::size_t i) {
    ReplicateRecord rec;
    rec.rep = i;
    const Dataset data = draw_response(truth, seed, i);
    const FitResult fr = fit(data, cfg);
    rec.converged = fr.converged;
    rec.kkt = fr.kkt_residual;
    rec.excess = excess_risk(fr.f_hat, truth);
    double sup_fit = 0.0, sup_dist = 0.0;
    Signal dv(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) {
      sup_fit = std::max(sup_fit, std::fabs(fr.f_hat[k]));
      dv[k] = fr.f_hat[k] - truth[k];
      sup_dist = std::max(sup_dist, std::fabs(dv[k]));
    }
    rec.sup_dist = sup_dist;
    rec.tv_dist = tv(dv);
    rec.sup_ok = sup_fit <= sp.box * (1.0 + 1e-12);
    rec.violated = rec.excess > rhs;
    out.records[i] = rec;
  });

  std::size_t denom = 0;
  for (const auto& rec : out.records) {
    if (rec.converged) ++out.converged;
    if (rec.sup_ok) ++out.sup_ok;
    if (rec.converged && rec.sup_ok) {
      ++denom;
      if (rec.violated) ++out.violations;
    }
  }
  out.violation_fraction = denom ? double(out.violations) / double(denom) : 0.0;
  out.coverage_ok = out.violation_fraction <= out.tail_target;
  return out;
}

struct BoundedLambdaRow {
  double lambda = 0.0;
  double qn_tv_threshold = 0.0;  // 4 lambda m0
  std::size_t converged = 0;
  std::size_t qn_tv_ok = 0;
  std::size_t sup_ok = 0;
  double qn_tv_fraction = 0.0;
  double sup_fraction = 0.0;
};

struct BoundedExperiment {
  std::string scenario;
  std::size_t n = 0, reps = 0;
  double m0 = 0.0, truth_tv = 0.0, truth_sup = 0.0;
  SupNormWindow window;
  std::vector<BoundedLambdaRow> rows;
  std::vector<std::vector<ReplicateRecord>> records;  // one vector per row
};

// Unconstrained fits monitored against the sup-norm window conclusions: the
// weighted distance-plus-penalty budget 4*lambda*m0 and the sup-norm ceiling
// (1 + 8 m0)/2.  Frequencies are reported per penalty level; nothing is
// asserted here because at desk-scale n the certifying window is empty.
inline BoundedExperiment run_boundedness_experiment(const ScenarioSpec& sp, double m0,
                                                    const std::vector<double>& lambda_mults,
                                                    std::size_t reps, std::uint64_t seed,
                                                    unsigned workers) {
  if (reps == 0) throw InputError("bounded experiment: reps must be >= 1");
  if (lambda_mults.empty()) throw InputError("bounded experiment: need at least one lambda");
  const Signal truth = make_truth(sp);
  const JumpStructure js = extract_jumps(truth);
  const double tv0 = tv(truth);
  double sup0 = 0.0;
  for (double v : truth) sup0 = std::max(sup0, std::fabs(v));
  if (!(m0 >= std::max(1.0, tv0)))
    throw InputError("bounded experiment: m0 must be >= max(1, tv(truth))");

  BoundedExperiment out;
  out.scenario = scenario_label(sp);
  out.n = sp.n;
  out.reps = reps;
  out.m0 = m0;
  out.truth_tv = tv0;
  out.truth_sup = sup0;
  out.window = sup_norm_window(m0, sup0, sp.n, sp.params.t, sp.params.a0);

  const double floor_v = lambda_min(js, sp.params);
  for (double mult : lambda_mults) {
    if (!(mult > 0.0)) throw InputError("bounded experiment: lambda multipliers must be > 0");
    BoundedLambdaRow row;
    row.lambda = mult * floor_v;
    row.qn_tv_threshold = 4.0 * row.lambda * m0;
    out.rows.push_back(row);
    out.records.emplace_back(reps);
  }

  for (std::size_t ri = 0; ri < out.rows.size(); ++ri) {
    BoundedLambdaRow& row = out.rows[ri];
    auto& recs = out.records[ri];
    FitConfig cfg;
    cfg.lambda = row.lambda;
    cfg.tol = sp.fit_tol;
    cfg.max_iter = sp.fit_max_iter;
    parallel_for(reps, workers, [&](std::size_t i) {
      ReplicateRecord rec;
      rec.rep = i;
      const Dataset data = draw_response(truth, seed, i);
      try {
        const FitResult fr = fit(data, cfg);
        rec.converged = fr.converged;
        rec.kkt = fr.kkt_residual;
        rec.excess = excess_risk(fr.f_hat, truth);
        Signal dv(truth.size());
        double sup_dist = 0.0, qsq = 0.0;
        for (std::size_t k = 0; k < truth.size(); ++k) {
          dv[k] = fr.f_hat[k] - truth[k];
          sup_dist = std::max(sup_dist, std::fabs(dv[k]));
          qsq += dv[k] * dv[k];
        }
        qsq /= double(truth.size());
        rec.sup_dist = sup_dist;
        rec.tv_dist = tv(dv);
        rec.sup_ok = sup_dist <= out.window.sup_bound;
        rec.violated = qsq / (2.0 * out.window.k_sq) + row.lambda * rec.tv_dist >
                       row.qn_tv_threshold;
      } catch (const NonAttainableError&) {
        rec.converged = false;  // degenerate draw; excluded from the fractions
      }
      recs[i] = rec;
    });
    for (const auto& rec : recs) {
      if (!rec.converged) continue;
      ++row.converged;
      if (!rec.violated) ++row.qn_tv_ok;
      if (rec.sup_ok) ++row.sup_ok;
    }
    row.qn_tv_fraction = row.converged ? double(row.qn_tv_ok) / double(row.converged) : 0.0;
    row.sup_fraction = row.converged ? double(row.sup_ok) / double(row.converged) : 0.0;
  }
  return out;
}

struct RatePoint {
  std::size_t n = 0;
  double lambda = 0.0;
  double mean_excess = 0.0;
  std::size_t converged = 0;
  std::size_t reps = 0;
};

struct RateReport {
  std::string scenario;
  std::vector<RatePoint> points;
  std::optional<double> slope;  // log-log least squares over the grid
};

// Mean excess risk along a grid of sample sizes, each fit at that size's
// lambda_min.  The slope of log(mean excess) against log(n) summarizes the
// decay rate.
inline RateReport run_rate_experiment(ScenarioSpec sp, const std::vector<std::size_t>& n_grid,
                                      std::size_t reps, std::uint64_t seed, unsigned workers) {
  if (n_grid.empty()) throw InputError("rate experiment: empty n grid");
  if (reps == 0) throw InputError("rate experiment: reps must be >= 1");
  RateReport out;
  for (std::size_t nv : n_grid) {
    if (nv < 4 * (sp.s + 1))
      throw InputError("rate experiment: each n must be at least 4(s+1)");
    sp.n = nv;
    const Signal truth = make_truth(sp);
    const JumpStructure js = extract_jumps(truth);
    TheoryParams p = sp.params;
    p.lambda = lambda_min(js, p);
    FitConfig cfg;
    cfg.lambda = p.lambda;
    if (sp.box > 0.0) cfg.box = sp.box;
    cfg.tol = sp.fit_tol;
    cfg.max_iter = sp.fit_max_iter;
    const std::uint64_t sub_seed = RngStream::keyed(seed, nv, 0x9a).key;

    std::vector<double> excess(reps, 0.0);
    std::vector<unsigned char> ok(reps, 0);
    parallel_for(reps, workers, [&](std::size_t i) {
      const Dataset data = draw_response(truth, sub_seed, i);
      const FitResult fr = fit(data, cfg);
      ok[i] = fr.converged ? 1 : 0;
      excess[i] = excess_risk(fr.f_hat, truth);
    });

    RatePoint pt;
    pt.n = nv;
    pt.lambda = p.lambda;
    pt.reps = reps;
    double acc = 0.0;
    for (std::size_t i = 0; i < reps; ++i)
      if (ok[i]) {
        ++pt.converged;
        acc += excess[i];
      }
    pt.mean_excess = pt.converged ? acc / double(pt.converged) : 0.0;
    out.points.push_back(pt);
  }
  out.scenario = scenario_label(sp);

  std::size_t usable = 0;
  for (const auto& pt : out.points)
    if (pt.converged > 0 && pt.mean_excess > 0.0) ++usable;
  if (usable >= 2) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, cnt = 0.0;
    for (const auto& pt : out.points) {
      if (pt.converged == 0 || !(pt.mean_excess > 0.0)) continue;
      const double lx = std::log(double(pt.n)), ly = std::log(pt.mean_excess);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      cnt += 1.0;
    }
    out.slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  }
  return out;
}

struct TailPoint {
  double t = 0.0;
  double threshold = 0.0;
  double bound = 0.0;  // exp(-t)
  double fraction = 0.0;
  double slack3 = 0.0;  // 3 binomial sigmas at the bound
  std::size_t exceed = 0;
  bool ok = false;
};

struct TailCheck {
  std::size_t draws = 0;
  double g_norm = 0.0;
  std::vector<TailPoint> points;
};

// Empirical tail of <eps, g> with eps_i = y_i - theta_i and y_i Bernoulli
// with mean theta_i, compared against the level exp(-t) at the threshold
// ||g||_2 sqrt(2t).
inline TailCheck hoeffding_tail_check(const std::vector<double>& g,
                                      const std::vector<double>& theta,
                                      const std::vector<double>& ts, std::size_t draws,
                                      std::uint64_t seed, unsigned workers = 1) {
  detail::require_same_length(g.size(), theta.size(), "hoeffding_tail_check");
  if (g.empty()) throw InputError("hoeffding_tail_check: empty g");
  detail::require_finite(g, "hoeffding_tail_check");
  for (double th : theta)
    if (!(th > 0.0 && th < 1.0))
      throw InputError("hoeffding_tail_check: theta entries must lie in (0, 1)");
  if (draws < 10000) throw InputError("hoeffding_tail_check: need at least 10000 draws");
  if (ts.empty()) throw InputError("hoeffding_tail_check: need at least one t");
  for (double t : ts)
    if (!(t > 0.0)) throw InputError("hoeffding_tail_check: t values must be > 0");

  TailCheck out;
  out.draws = draws;
  double nsq = 0.0;
  for (double v : g) nsq += v * v;
  out.g_norm = std::sqrt(nsq);

  std::vector<double> dots(draws, 0.0);
  parallel_for(draws, workers, [&](std::size_t d) {
    const auto stream = RngStream::keyed(seed, d, 0x7a);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = stream.uniform(i) < theta[i] ? 1.0 : 0.0;
      acc += (y - theta[i]) * g[i];
    }
    dots[d] = acc;
  });

  for (double t : ts) {
    TailPoint pt;
    pt.t = t;
    pt.threshold = out.g_norm * std::sqrt(2.0 * t);
    pt.bound = std::exp(-t);
    for (double v : dots)
      if (v >= pt.threshold) ++pt.exceed;
    pt.fraction = double(pt.exceed) / double(draws);
    pt.slack3 = 3.0 * std::sqrt(pt.bound * (1.0 - pt.bound) / double(draws));
    pt.ok = pt.fraction <= pt.bound + pt.slack3;
    out.points.push_back(pt);
  }
  return out;
}

}  // namespace tvlogit
