#include "uot/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "uot/error.hpp"

namespace uot {

StepSchedule parse_step_schedule(const std::string& s) {
  if (s == "poly") return StepSchedule::Poly;
  if (s == "poly_offset") return StepSchedule::PolyOffset;
  if (s == "opt_linear") return StepSchedule::OptLinear;
  if (s == "inverse_offset_poly") return StepSchedule::InverseOffsetPoly;
  throw_invalid("unknown schedule '" + s +
                "' (expected poly, poly_offset, opt_linear or inverse_offset_poly)");
}

Averaging parse_averaging(const std::string& s) {
  if (s == "full") return Averaging::Full;
  if (s == "suffix_half") return Averaging::SuffixHalf;
  throw_invalid("unknown averaging '" + s + "' (expected full or suffix_half)");
}

RestartMode parse_restart_mode(const std::string& s) {
  if (s == "zero_momentum") return RestartMode::ZeroMomentum;
  if (s == "literal") return RestartMode::Literal;
  throw_invalid("unknown restart_mode '" + s + "' (expected zero_momentum or literal)");
}

const char* to_string(StepSchedule s) {
  switch (s) {
    case StepSchedule::Poly: return "poly";
    case StepSchedule::PolyOffset: return "poly_offset";
    case StepSchedule::OptLinear: return "opt_linear";
    case StepSchedule::InverseOffsetPoly: return "inverse_offset_poly";
  }
  return "?";
}

const char* to_string(Averaging a) { return a == Averaging::Full ? "full" : "suffix_half"; }

const char* to_string(RestartMode m) {
  return m == RestartMode::ZeroMomentum ? "zero_momentum" : "literal";
}

CostFn metric_cost(RowMatrix target_points, Metric metric) {
  auto pts = std::make_shared<const RowMatrix>(std::move(target_points));
  return [pts, metric](std::size_t, const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) {
    cost_row(x, *pts, metric, out);
  };
}

CostFn tabulated_cost(std::shared_ptr<const CostMatrix> costs) {
  if (!costs) throw_invalid("tabulated_cost needs a cost matrix");
  return [costs](std::size_t index, const Eigen::Ref<const Vector>&, Eigen::Ref<Vector> out) {
    if (index >= costs->rows()) throw_invalid("tabulated_cost: draw has no dataset index");
    out = costs->row(index);
  };
}

Batch draw_batch(SampleSource& source, std::size_t m) {
  if (m == 0) throw_invalid("batch size must be >= 1");
  Batch b;
  b.points.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(source.dim()));
  b.indices.resize(m);
  b.total_mass = source.total_mass();
  Vector x(static_cast<Eigen::Index>(source.dim()));
  for (std::size_t k = 0; k < m; ++k) {
    b.indices[k] = source.draw(x);
    b.points.row(static_cast<Eigen::Index>(k)) = x.transpose();
  }
  return b;
}

Batch exact_batch(const DiscreteMeasure& source) {
  Batch b;
  b.points = source.points();
  b.indices.resize(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) b.indices[i] = i;
  b.sample_weights = source.weights() / source.total_mass();
  b.total_mass = source.total_mass();
  return b;
}

namespace {

/// Preallocated buffers for the transport part of the estimator.
struct EstimatorWork {
  Vector crow;
  Vector w;
  Vector acc;
  double max_cost = 0.0;

  explicit EstimatorWork(Eigen::Index n) : crow(n), w(n), acc(n) {}
};

void check_shapes(const Eigen::Ref<const Vector>& g, const DiscreteMeasure& target) {
  if (static_cast<std::size_t>(g.size()) != target.size()) {
    throw_invalid("potential has length " + std::to_string(g.size()) + ", expected " +
                  std::to_string(target.size()));
  }
  if (!g.allFinite()) throw_invalid("potential must be finite");
}

}  // namespace

Vector stochastic_gradient(const Eigen::Ref<const Vector>& g, const Batch& batch,
                           const CostFn& cost_fn, const DiscreteMeasure& target,
                           const UotParams& params) {
  params.validate();
  check_shapes(g, target);
  const std::size_t m = batch.size();
  if (m == 0) throw_invalid("batch must be non-empty");
  if (static_cast<std::size_t>(batch.points.rows()) != m) throw_invalid("batch points/indices mismatch");
  const bool weighted = batch.sample_weights.size() > 0;
  if (weighted && static_cast<std::size_t>(batch.sample_weights.size()) != m) {
    throw_invalid("batch sample weights have wrong length");
  }
  EstimatorWork work(g.size());
  work.acc.setZero();
  for (std::size_t k = 0; k < m; ++k) {
    cost_fn(batch.indices[k], batch.points.row(static_cast<Eigen::Index>(k)).transpose(), work.crow);
    const RowStats r = evaluate_row(work.crow, g, params, target.log_weights(), work.w);
    if (!std::isfinite(r.sigma)) throw_numeric("non-finite transport density in batch", k);
    const double omega = weighted ? batch.sample_weights[static_cast<Eigen::Index>(k)]
                                  : 1.0 / static_cast<double>(m);
    work.acc.noalias() += (omega * r.sigma) * work.w;
  }
  const Vector& beta = target.weights();
  return batch.total_mass * work.acc.array() + beta.array() * g.array() / params.rho2 - beta.array();
}

void PasgdConfig::validate() const {
  if (!(scale_c > 0.0) || !std::isfinite(scale_c)) throw_invalid("scale_c must be > 0");
  if (schedule == StepSchedule::Poly || schedule == StepSchedule::PolyOffset) {
    if (!(exponent_gamma > 0.5 && exponent_gamma < 1.0)) {
      throw_invalid("exponent_gamma must lie in (1/2, 1)");
    }
  } else if (!(exponent_gamma > 0.0) || !std::isfinite(exponent_gamma)) {
    throw_invalid("exponent_gamma must be > 0");
  }
  if (batch_size < 1) throw_invalid("batch_size must be >= 1");
  if (max_iters < 1) throw_invalid("max_iters must be >= 1");
  if (!(projection_margin >= 0.0) || !std::isfinite(projection_margin)) {
    throw_invalid("projection_margin must be >= 0");
  }
  if (!(divergence_factor > 0.0)) throw_invalid("divergence_factor must be > 0");
}

double step_size(const PasgdConfig& config, const UotParams& params, std::size_t t) {
  if (t < 1) throw_invalid("step index starts at 1");
  const double td = static_cast<double>(t);
  const double c = config.scale_c;
  switch (config.schedule) {
    case StepSchedule::Poly: return c * std::pow(td, -config.exponent_gamma);
    case StepSchedule::PolyOffset:
      return c * std::pow(td + 1.0 / params.epsilon, -config.exponent_gamma);
    case StepSchedule::OptLinear: return c / (1.0 / params.epsilon + params.rho2 * td);
    case StepSchedule::InverseOffsetPoly:
      return c / (1.0 / params.epsilon + std::pow(td, config.exponent_gamma));
  }
  return 0.0;
}

PasgdResult pasgd_solve(const SampleSource& source_in, const CostFn& cost_fn,
                        const DiscreteMeasure& target, const UotParams& params,
                        const PasgdConfig& config, const PasgdReference* reference) {
  params.validate();
  config.validate();
  if (source_in.dim() == 0) throw_invalid("sample source has zero dimension");
  SampleSource source = source_in;
  source.reseed(config.seed);

  const Eigen::Index n = static_cast<Eigen::Index>(target.size());
  const double cap = params.rho2 + config.projection_margin;
  const double mass = source.total_mass();
  const double inv_m = 1.0 / static_cast<double>(config.batch_size);
  const Vector& beta = target.weights();

  std::vector<std::size_t> checks = config.checkpoints;
  checks.push_back(config.max_iters);
  std::sort(checks.begin(), checks.end());
  checks.erase(std::unique(checks.begin(), checks.end()), checks.end());
  while (!checks.empty() && checks.front() == 0) checks.erase(checks.begin());
  checks.erase(std::remove_if(checks.begin(), checks.end(),
                              [&](std::size_t c) { return c > config.max_iters; }),
               checks.end());

  // Suffix averages at checkpoint T use S_T - S_{floor(T/2)}, so the prefix sum
  // is snapshotted at every half-checkpoint.
  const bool suffix = config.averaging == Averaging::SuffixHalf;
  std::vector<std::size_t> halves;
  std::vector<Vector> half_sums;
  if (suffix) {
    for (auto c : checks) halves.push_back(c / 2);
    half_sums.assign(halves.size(), Vector::Zero(n));
  }

  PasgdResult res{Potential::zeros(target.size()), Potential::zeros(target.size()),
                  Trace(config.record_clock), {}, 0};
  Vector g = Vector::Zero(n);
  Vector mean = Vector::Zero(n);
  Vector sum = Vector::Zero(n);
  Vector grad(n);
  Vector x(static_cast<Eigen::Index>(source.dim()));
  EstimatorWork work(n);

  std::size_t next_check = 0;
  for (std::size_t t = 1; t <= config.max_iters; ++t) {
    work.acc.setZero();
    for (std::size_t k = 0; k < config.batch_size; ++k) {
      const std::size_t idx = source.draw(x);
      cost_fn(idx, x, work.crow);
      work.max_cost = std::max(work.max_cost, work.crow.maxCoeff());
      const RowStats r = evaluate_row(work.crow, g, params, target.log_weights(), work.w);
      if (!std::isfinite(r.sigma)) throw_numeric("non-finite transport density at iteration " + std::to_string(t));
      work.acc.noalias() += r.sigma * work.w;
    }
    grad = (mass * inv_m) * work.acc.array() + beta.array() * g.array() / params.rho2 - beta.array();
    const double eta = step_size(config, params, t);
    g = (g - eta * grad).cwiseMin(cap);
    res.max_coordinate = std::max(res.max_coordinate, g.maxCoeff());

    const double g_inf = g.lpNorm<Eigen::Infinity>();
    const double limit = config.divergence_factor * (params.rho2 + 1.0 + work.max_cost);
    if (!(g_inf <= limit)) {
      throw_numeric("PASGD diverged at iteration " + std::to_string(t) + ": ||g||_inf = " +
                    std::to_string(g_inf) + " exceeds " + std::to_string(limit) + " (eta_t = " +
                    std::to_string(eta) + ")");
    }

    if (suffix) {
      sum += g;
      for (std::size_t h = 0; h < halves.size(); ++h) {
        if (halves[h] == t) half_sums[h] = sum;
      }
    } else {
      mean += (g - mean) / static_cast<double>(t);
    }

    if (next_check < checks.size() && checks[next_check] == t) {
      Vector avg;
      if (suffix) {
        const std::size_t h = checks[next_check] / 2;
        avg = (sum - half_sums[next_check]) / static_cast<double>(t - h);
      } else {
        avg = mean;
      }
      PasgdCheckpoint cp;
      cp.iter = t;
      if (reference && reference->objective) {
        cp.objective_average = reference->objective(avg);
        cp.objective_last = reference->objective(g);
        cp.gap_average = cp.objective_average - reference->j_star;
        cp.gap_last = cp.objective_last - reference->j_star;
      }
      if (reference && reference->g_star.size() == n) {
        cp.dist2_average = (avg - reference->g_star).squaredNorm();
        cp.dist2_last = (g - reference->g_star).squaredNorm();
      }
      res.checkpoints.push_back(cp);
      res.trace.add(t, cp.objective_average, grad.norm(), grad.lpNorm<Eigen::Infinity>(), eta, false);
      if (t == config.max_iters) res.average = Potential(avg);
      ++next_check;
    }
  }
  res.last = Potential(g);
  res.iterations = config.max_iters;
  return res;
}

double nesterov_momentum(double L, double mu) {
  const double a = std::sqrt(L);
  const double b = std::sqrt(mu);
  return (a - b) / (a + b);
}

namespace {

enum class Method { Anag, AdaptiveGd, FixedGd, FixedNag };

struct Tracker {
  SolveResult& res;
  const FullBatchConfig& config;
  double best = std::numeric_limits<double>::infinity();

  void record(std::size_t t, const Vector& g, const EvalReport& ev, double step, bool restart,
              bool force) {
    res.objectives.push_back(ev.objective);
    if (t > 0) {
      res.step_bounds.push_back(step);
      res.restart_flags.push_back(restart);
    }
    if (force || t % config.trace_every == 0) {
      res.trace.add(t, ev.objective, ev.gradient.norm(), ev.gradient.lpNorm<Eigen::Infinity>(),
                    step, restart);
    }
    if (ev.objective < best) {
      best = ev.objective;
      res.g = Potential(g);
      res.objective = ev.objective;
      res.grad_norm = ev.gradient.norm();
    }
  }
};

SolveResult run_full_batch(const SemiDual& problem, Method method, double step_L,
                           const FullBatchConfig& config, const std::optional<Vector>& g0) {
  if (!(config.tol > 0.0)) throw_invalid("tol must be > 0");
  if (config.trace_every < 1) throw_invalid("trace_every must be >= 1");
  if ((method == Method::FixedGd || method == Method::FixedNag) &&
      (!(step_L > 0.0) || !std::isfinite(step_L))) {
    throw_invalid("step_L must be a positive finite constant");
  }
  const UotParams& p = problem.params();
  const Eigen::Index n = static_cast<Eigen::Index>(problem.target_size());
  const double cap_project = p.rho2 + p.margin_project;
  const double cap_safeguard = p.rho2 + p.margin_safeguard;
  const double mu = problem.strong_convexity();

  Vector g = g0 ? *g0 : Vector::Zero(n);
  if (g.size() != n) throw_invalid("initial potential has wrong length");
  g = g.cwiseMin(cap_project);

  SolveResult res;
  res.trace = Trace(config.record_clock);
  Tracker tracker{res, config};

  Vector y = g;
  bool y_is_g = true;
  EvalReport ev_g = problem.evaluate(g);
  double last_step = 0.0;
  bool last_restart = false;
  const double fixed_theta = nesterov_momentum(step_L, mu);

  for (std::size_t t = 0;; ++t) {
    const bool done = ev_g.gradient.norm() <= config.tol;
    const bool out_of_budget = t >= config.max_iters;
    tracker.record(t, g, ev_g, last_step, last_restart, done || out_of_budget || t == 0);
    if (done) {
      res.converged = true;
      res.iterations = t;
      res.g = Potential(g);
      res.objective = ev_g.objective;
      res.grad_norm = ev_g.gradient.norm();
      break;
    }
    if (out_of_budget) {
      res.iterations = t;
      break;
    }

    const EvalReport ev_y = y_is_g ? ev_g : problem.evaluate(y);
    res.max_step_point = std::max(res.max_step_point, y.maxCoeff());
    double L = step_L;
    if (method == Method::Anag || method == Method::AdaptiveGd) L = ev_y.anag_step_bound;
    Vector g_next = (y - ev_y.gradient / L).cwiseMin(cap_project);

    bool restart = false;
    if (method == Method::Anag || method == Method::FixedNag) {
      const double theta = method == Method::Anag ? nesterov_momentum(L, mu) : fixed_theta;
      Vector y_next = g_next + theta * (g_next - g);
      if (method == Method::Anag && y_next.maxCoeff() > cap_safeguard) {
        restart = true;
        ++res.restarts;
        y_next = config.restart_mode == RestartMode::ZeroMomentum ? g_next : g;
      }
      y = std::move(y_next);
      g = std::move(g_next);
      y_is_g = (theta == 0.0) || (restart && config.restart_mode == RestartMode::ZeroMomentum);
    } else {
      g = std::move(g_next);
      y = g;
      y_is_g = true;
    }
    ev_g = problem.evaluate(g);
    if (y_is_g) y = g;
    last_step = L;
    last_restart = restart;
  }
  return res;
}

}  // namespace

SolveResult anag_solve(const SemiDual& problem, const FullBatchConfig& config,
                       const std::optional<Vector>& g0) {
  return run_full_batch(problem, Method::Anag, 0.0, config, g0);
}

SolveResult adaptive_gd_solve(const SemiDual& problem, const FullBatchConfig& config,
                              const std::optional<Vector>& g0) {
  return run_full_batch(problem, Method::AdaptiveGd, 0.0, config, g0);
}

SolveResult gd_solve(const SemiDual& problem, double step_L, const FullBatchConfig& config,
                     const std::optional<Vector>& g0) {
  return run_full_batch(problem, Method::FixedGd, step_L, config, g0);
}

SolveResult nag_solve_fixed(const SemiDual& problem, double step_L, const FullBatchConfig& config,
                            const std::optional<Vector>& g0) {
  return run_full_batch(problem, Method::FixedNag, step_L, config, g0);
}

double global_smoothness(const SemiDual& problem, double delta) {
  const double cb = c_bound(problem.source().total_mass(), problem.target().total_mass(),
                            problem.params(), delta);
  return cb / problem.params().epsilon + problem.beta_max() / problem.params().rho2;
}

}  // namespace uot
