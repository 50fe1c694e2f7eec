#include "uot/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "uot/error.hpp"
#include "uot/io.hpp"

namespace uot {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

fs::path experiment_dir(const ExperimentConfig& c) { return c.output_dir / c.experiment; }

fs::path make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory " + p.string() + ": " + ec.message());
  return p;
}

fs::path run_dir(const ExperimentConfig& c, const std::string& id) {
  return make_dir(experiment_dir(c) / id);
}

void write_trace(const Trace& t, const ExperimentConfig& c, const std::string& id) {
  t.write_csv(run_dir(c, id) / "trace.csv");
}

Json summary_header(const ExperimentConfig& c) {
  return Json{{"schema", kSummarySchema},
              {"scale", "desk"},
              {"experiment", c.experiment},
              {"config", to_json(c)}};
}

void write_summary(const ExperimentConfig& c, const Json& s) {
  const fs::path p = make_dir(experiment_dir(c)) / "summary.json";
  std::ofstream out(p);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  out << s.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + p.string());
}

Json solve_json(const SolveResult& r) {
  return Json{{"iterations", r.iterations}, {"converged", r.converged}, {"restarts", r.restarts},
              {"objective", r.objective},   {"grad_norm", r.grad_norm},  {"max_g", r.g.max()},
              {"max_step_point", r.max_step_point}};
}

FullBatchConfig full_config(const ExperimentConfig& c, double tol, std::size_t max_iters,
                            std::size_t trace_every) {
  FullBatchConfig f;
  f.tol = tol;
  f.max_iters = max_iters;
  f.restart_mode = c.solver.restart_mode;
  f.record_clock = c.record_clock;
  f.trace_every = trace_every;
  return f;
}

SolveResult ground_truth(const SemiDual& J, const ExperimentConfig& c) {
  return anag_solve(J, full_config(c, c.solver.ground_truth_tol, c.solver.ground_truth_max_iters, 10));
}

PasgdConfig pasgd_config(const ExperimentConfig& c, double step_c, std::uint64_t seed) {
  PasgdConfig p;
  p.schedule = c.solver.schedule;
  p.scale_c = step_c;
  p.exponent_gamma = c.solver.exponent_gamma;
  p.batch_size = c.solver.batch_size;
  p.averaging = c.solver.averaging;
  p.max_iters = c.solver.max_iters;
  p.seed = seed;
  p.projection_margin = c.params.margin_project;
  p.checkpoints = log_checkpoints(c.solver.max_iters, c.solver.checkpoints_per_decade);
  p.record_clock = c.record_clock;
  return p;
}

/// Same records with the objective of the last iterate in place of the average.
Trace last_iterate_trace(const PasgdResult& r) {
  Trace t;
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    TraceRecord rec = r.trace.records()[k];
    rec.objective = r.checkpoints[k].objective_last;
    t.append(rec);
  }
  return t;
}

std::string seed_id(std::uint64_t s) { return "seed" + std::to_string(s); }

}  // namespace

std::vector<std::size_t> log_checkpoints(std::size_t max_iters, std::size_t per_decade) {
  if (per_decade == 0) throw_invalid("checkpoints per decade must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t k = 0;; ++k) {
    const double t = 100.0 * std::pow(10.0, static_cast<double>(k) / static_cast<double>(per_decade));
    const auto ti = static_cast<std::size_t>(std::llround(t));
    if (ti > max_iters) break;
    if (out.empty() || out.back() != ti) out.push_back(ti);
  }
  if (max_iters > 0 && (out.empty() || out.back() != max_iters)) out.push_back(max_iters);
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double x_lo,
                    double x_hi) {
  if (x.size() != y.size()) throw_invalid("loglog_slope needs equal-length inputs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] < x_lo || x[k] > x_hi || !(x[k] > 0.0) || !(y[k] > 0.0)) continue;
    const double a = std::log(x[k]);
    const double b = std::log(y[k]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double md = static_cast<double>(m);
  return (md * sxy - sx * sy) / (md * sxx - sx * sx);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

MixtureProblem make_mixture_problem(const DataSettings& d, const UotParams& params) {
  const RowMatrix means = uniform_cube_points(d.modes, d.dim, d.mixture_seed);
  std::vector<GaussianMode> modes;
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    modes.push_back({means.row(k).transpose(), d.covariance_scale});
  }
  auto gen = gaussian_mixture_sampler(modes, d.dim, d.sample_seed);
  RowMatrix xs(static_cast<Eigen::Index>(d.n_source), static_cast<Eigen::Index>(d.dim));
  RowMatrix ys(static_cast<Eigen::Index>(d.n), static_cast<Eigen::Index>(d.dim));
  Vector v(static_cast<Eigen::Index>(d.dim));
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    gen.draw(v);
    xs.row(i) = v.transpose();
  }
  for (Eigen::Index j = 0; j < ys.rows(); ++j) {
    gen.draw(v);
    ys.row(j) = v.transpose();
  }
  CostMatrix cost = build_cost_matrix(xs, ys, d.metric);
  auto [mu, source] = empirical_source(
      xs, Vector::Constant(xs.rows(), 1.0 / static_cast<double>(xs.rows())), d.sample_seed);
  auto problem = std::make_shared<const SemiDual>(std::move(mu), std::move(cost),
                                                  DiscreteMeasure::uniform(ys), params);
  // The tabulated cost shares the problem's matrix instead of copying it.
  std::shared_ptr<const CostMatrix> costs(problem, &problem->cost());
  return {problem, std::move(source), tabulated_cost(std::move(costs))};
}

SemiDual make_cube_problem(std::size_t n, std::size_t dim, std::uint64_t seed,
                           const UotParams& params) {
  const RowMatrix x = uniform_cube_points(n, dim, 2 * seed + 1);
  const RowMatrix y = uniform_cube_points(n, dim, 2 * seed + 2);
  return SemiDual(DiscreteMeasure::uniform(x), build_cost_matrix(x, y),
                  DiscreteMeasure::uniform(y), params);
}

Json run_pasgd_rate(const ExperimentConfig& c) {
  const auto mp = make_mixture_problem(c.data, c.params);
  const SemiDual& J = *mp.problem;
  const SolveResult gt = ground_truth(J, c);
  write_trace(gt.trace, c, "ground_truth");
  const PasgdReference ref{[&](const Eigen::Ref<const Vector>& g) { return J.objective(g); },
                           gt.objective, gt.g.values()};
  const auto checks = log_checkpoints(c.solver.max_iters, c.solver.checkpoints_per_decade);
  const double hi = static_cast<double>(c.solver.max_iters);
  const double lo = hi / 100.0;
  const std::vector<double> xs(checks.begin(), checks.end());

  Json s = summary_header(c);
  s["ground_truth"] = solve_json(gt);
  s["checkpoints"] = checks;
  s["fit_window"] = {lo, hi};
  Json per_scale = Json::array();
  for (double cs : c.solver.c_scales) {
    const double step_c = cs * static_cast<double>(J.target_size()) / c.params.rho2;
    std::vector<double> mean_avg(checks.size(), 0.0), mean_last(checks.size(), 0.0);
    std::vector<double> final_avg, final_last, final_dist;
    Json failures = Json::array();
    for (auto seed : c.seeds) {
      const std::string tag = "c" + num(cs) + "_" + seed_id(seed);
      PasgdResult r;
      try {
        r = pasgd_solve(mp.source, mp.cost, J.target(), c.params, pasgd_config(c, step_c, seed), &ref);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NumericFailure) throw;
        failures.push_back({{"seed", seed}, {"error", e.what()}});
        continue;
      }
      write_trace(r.trace, c, "pasgd_" + tag);
      write_trace(last_iterate_trace(r), c, "sgd_" + tag);
      for (std::size_t k = 0; k < checks.size(); ++k) {
        mean_avg[k] += r.checkpoints[k].gap_average;
        mean_last[k] += r.checkpoints[k].gap_last;
      }
      final_avg.push_back(r.checkpoints.back().gap_average);
      final_last.push_back(r.checkpoints.back().gap_last);
      final_dist.push_back(r.checkpoints.back().dist2_average);
    }
    const double done = static_cast<double>(final_avg.size());
    for (std::size_t k = 0; k < checks.size(); ++k) {
      mean_avg[k] /= done;
      mean_last[k] /= done;
    }
    Json e{{"c_scale", cs},
           {"step_constant", step_c},
           {"completed_seeds", final_avg.size()},
           {"diverged", failures},
           {"pasgd",
            {{"slope", loglog_slope(xs, mean_avg, lo, hi)},
             {"final_gap_median", median(final_avg)},
             {"final_dist2_median", median(final_dist)},
             {"mean_gap", mean_avg}}},
           {"sgd",
            {{"slope", loglog_slope(xs, mean_last, lo, hi)},
             {"final_gap_median", median(final_last)},
             {"mean_gap", mean_last}}}};
    e["pasgd_beats_sgd"] = !final_avg.empty() && median(final_avg) < median(final_last);
    per_scale.push_back(e);
  }
  s["c_scales"] = per_scale;
  write_summary(c, s);
  return s;
}

Json run_eps_sweep(const ExperimentConfig& c) {
  Json s = summary_header(c);
  Json rows = Json::array();
  std::vector<double> gaps, dists, eps_done;
  for (double eps : c.data.epsilons) {
    UotParams p = c.params;
    p.epsilon = eps;
    const auto mp = make_mixture_problem(c.data, p);
    const SemiDual& J = *mp.problem;
    const SolveResult gt = ground_truth(J, c);
    write_trace(gt.trace, c, "ground_truth_eps" + num(eps));
    const PasgdReference ref{[&](const Eigen::Ref<const Vector>& g) { return J.objective(g); },
                             gt.objective, gt.g.values()};
    const double step_c = c.solver.c_scales.front() * static_cast<double>(J.target_size()) / p.rho2;
    std::vector<double> fg, fd;
    for (auto seed : c.seeds) {
      ExperimentConfig ce = c;
      ce.params = p;
      const auto r = pasgd_solve(mp.source, mp.cost, J.target(), p, pasgd_config(ce, step_c, seed), &ref);
      write_trace(r.trace, c, "eps" + num(eps) + "_" + seed_id(seed));
      fg.push_back(r.checkpoints.back().gap_average);
      fd.push_back(r.checkpoints.back().dist2_average);
    }
    gaps.push_back(median(fg));
    dists.push_back(median(fd));
    eps_done.push_back(eps);
    rows.push_back({{"epsilon", eps},
                    {"final_gap_median", gaps.back()},
                    {"final_dist2_median", dists.back()},
                    {"ground_truth", solve_json(gt)}});
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  // Gaps ordered inversely with eps: sorting by decreasing eps must sort gaps increasingly.
  std::vector<std::size_t> order(eps_done.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return eps_done[a] > eps_done[b]; });
  bool inverse = true;
  for (std::size_t k = 1; k < order.size(); ++k) inverse = inverse && gaps[order[k]] > gaps[order[k - 1]];
  s["epsilons"] = rows;
  s["gap_spread"] = spread(gaps);
  s["param_spread"] = spread(dists);
  s["gaps_inverse_in_eps"] = inverse;
  s["param_spread_smaller"] = spread(dists) < spread(gaps);
  write_summary(c, s);
  return s;
}

namespace {

SolveResult run_method(const std::string& m, const SemiDual& J, double L, const FullBatchConfig& f) {
  if (m == "anag") return anag_solve(J, f);
  if (m == "adaptive_gd") return adaptive_gd_solve(J, f);
  if (m == "gd") return gd_solve(J, L, f);
  if (m == "nag") return nag_solve_fixed(J, L, f);
  throw_invalid("unknown method '" + m + "'");
}

Json run_deterministic(const ExperimentConfig& c) {
  Json s = summary_header(c);
  Json runs = Json::array();
  const FullBatchConfig f = full_config(c, c.solver.tol, c.solver.full_max_iters, c.solver.trace_every);
  auto has = [&](const char* m) {
    return std::find(c.solver.methods.begin(), c.solver.methods.end(), m) != c.solver.methods.end();
  };
  double worst_ratio = 0.0;
  bool agd_beats_nag = true;
  bool restart_free = true;
  for (auto seed : c.seeds) {
    std::vector<double> anag_iters;
    for (std::size_t n : c.data.sizes) {
      const SemiDual J = make_cube_problem(n, c.data.dim, seed * 1000003 + n, c.params);
      const double L = global_smoothness(J, c.params.margin_project);
      std::size_t agd = 0, nag = 0;
      for (const auto& m : c.solver.methods) {
        const SolveResult r = run_method(m, J, L, f);
        write_trace(r.trace, c, m + "_n" + std::to_string(n) + "_" + seed_id(seed));
        Json e = solve_json(r);
        e["method"] = m;
        e["n"] = n;
        e["seed"] = seed;
        e["global_smoothness"] = L;
        runs.push_back(e);
        const std::size_t it = r.converged ? r.iterations : std::numeric_limits<std::size_t>::max();
        if (m == "anag") {
          anag_iters.push_back(static_cast<double>(it));
          restart_free = restart_free && r.restarts == 0;
        }
        if (m == "adaptive_gd") agd = it;
        if (m == "nag") nag = it;
      }
      if (has("adaptive_gd") && has("nag")) agd_beats_nag = agd_beats_nag && agd < nag;
    }
    if (!anag_iters.empty()) {
      worst_ratio = std::max(worst_ratio, *std::max_element(anag_iters.begin(), anag_iters.end()) /
                                              *std::min_element(anag_iters.begin(), anag_iters.end()));
    }
  }
  s["runs"] = runs;
  if (has("anag")) {
    s["anag_iteration_ratio"] = worst_ratio;
    s["anag_restart_free"] = restart_free;
  }
  if (has("adaptive_gd") && has("nag")) s["adaptive_gd_beats_nag"] = agd_beats_nag;
  write_summary(c, s);
  return s;
}

struct TransferStats {
  RowMatrix colors;
  double transported_mass = 0.0;
};

TransferStats transfer(const RowMatrix& points, const Vector& weights, const DiscreteMeasure& target,
                       const Eigen::Ref<const Vector>& g, const UotParams& params, Metric metric) {
  TransferStats out;
  out.colors.resize(points.rows(), target.dim());
  Vector crow(static_cast<Eigen::Index>(target.size()));
  Vector w(crow.size());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    cost_row(points.row(i).transpose(), target.points(), metric, crow);
    const RowStats r = evaluate_row(crow, g, params, target.log_weights(), w);
    out.colors.row(i) = w.transpose() * target.points();
    out.transported_mass += weights[i] * r.sigma;
  }
  return out;
}

double semi_discrete_objective(const RowMatrix& points, const Vector& weights,
                               const DiscreteMeasure& target, const Eigen::Ref<const Vector>& g,
                               const UotParams& params, Metric metric) {
  Vector crow(static_cast<Eigen::Index>(target.size()));
  Vector w(crow.size());
  double j = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    cost_row(points.row(i).transpose(), target.points(), metric, crow);
    j += weights[i] * transport_integrand(evaluate_row(crow, g, params, target.log_weights(), w), params);
  }
  const Vector& b = target.weights();
  return j + (b.array() * (g.array().square() / (2.0 * params.rho2) - g.array())).sum();
}

}  // namespace

RowMatrix barycentric_map(const RowMatrix& points, const DiscreteMeasure& target,
                          const Eigen::Ref<const Vector>& g, const UotParams& params, Metric metric) {
  const Vector uniform = Vector::Constant(points.rows(), 1.0 / static_cast<double>(points.rows()));
  return transfer(points, uniform, target, g, params, metric).colors;
}

Json run_anag_scale(const ExperimentConfig& c) { return run_deterministic(c); }
Json run_baselines(const ExperimentConfig& c) { return run_deterministic(c); }

Json run_color_transfer(const ExperimentConfig& c) {
  if (c.data.source_image.empty() || c.data.target_image.empty()) {
    throw_invalid("color_transfer needs data.source_image and data.target_image");
  }
  const RgbImage src = load_png(c.data.source_image);
  const RgbImage tgt = load_png(c.data.target_image);
  const RowMatrix x = image_colors(src);
  const Vector a = Vector::Constant(x.rows(), 1.0 / static_cast<double>(x.rows()));
  const DiscreteMeasure nu = measure_from_image(tgt);
  const CostFn cost = metric_cost(nu.points(), c.data.metric);

  Json s = summary_header(c);
  Json rows = Json::array();
  std::vector<double> rhos = c.data.rhos;
  std::vector<double> fraction_first_seed;
  for (double rho : rhos) {
    UotParams p = c.params;
    p.rho1 = p.rho2 = rho;
    for (auto seed : c.seeds) {
      const auto t0 = std::chrono::steady_clock::now();
      const SampleSource source = SampleSource::finite(x, a, seed);
      const double step_c = c.solver.c_scales.front() * static_cast<double>(nu.size()) * rho;
      const PasgdReference ref{[&](const Eigen::Ref<const Vector>& g) {
                                 return semi_discrete_objective(x, a, nu, g, p, c.data.metric);
                               },
                               std::numeric_limits<double>::quiet_NaN(), Vector()};
      ExperimentConfig ce = c;
      ce.params = p;
      const auto r = pasgd_solve(source, cost, nu, p, pasgd_config(ce, step_c, seed), &ref);
      const TransferStats ts = transfer(x, a, nu, r.average.values(), p, c.data.metric);
      const RgbImage out = image_from_colors(ts.colors, src.width, src.height);
      const std::string id = "rho" + num(rho) + "_" + seed_id(seed);
      write_trace(r.trace, c, id);
      const fs::path png = run_dir(c, id) / "output.png";
      save_png(out, png);
      int max_err = 0;
      for (std::size_t k = 0; k < out.data.size(); ++k) {
        max_err = std::max(max_err, std::abs(int(out.data[k]) - int(src.data[k])));
      }
      const double fraction = ts.transported_mass / nu.total_mass();
      if (seed == c.seeds.front()) fraction_first_seed.push_back(fraction);
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      rows.push_back({{"rho", rho},
                      {"seed", seed},
                      {"mass_fraction", fraction},
                      {"max_channel_error_255", max_err},
                      {"final_objective", r.checkpoints.back().objective_average},
                      {"output", png.string()},
                      {"runtime_ms", c.record_clock ? ms : 0.0}});
    }
  }
  // Mass fraction must increase along the rho list sorted ascending.
  std::vector<std::size_t> order(rhos.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return rhos[i] < rhos[j]; });
  bool increasing = true;
  for (std::size_t k = 1; k < order.size(); ++k) {
    increasing = increasing && fraction_first_seed[order[k]] > fraction_first_seed[order[k - 1]];
  }
  s["runs"] = rows;
  s["mass_fraction_increasing"] = increasing;
  write_summary(c, s);
  return s;
}

Json run_verify(const ExperimentConfig& c) {
  VerifyOptions o;
  o.seed = c.seeds.front();
  const auto checks = run_verify_checks(o);
  Json s = summary_header(c);
  Json list = Json::array();
  bool ok = true;
  for (const auto& r : checks) {
    list.push_back(to_json(r));
    ok = ok && r.passed;
  }
  s["checks"] = list;
  s["passed"] = ok;
  write_summary(c, s);
  return s;
}

Json run_experiment(const ExperimentConfig& c) {
  if (c.experiment == "pasgd_rate") return run_pasgd_rate(c);
  if (c.experiment == "eps_sweep") return run_eps_sweep(c);
  if (c.experiment == "anag_scale") return run_anag_scale(c);
  if (c.experiment == "baselines") return run_baselines(c);
  if (c.experiment == "color_transfer") return run_color_transfer(c);
  if (c.experiment == "verify") return run_verify(c);
  throw_invalid("unknown experiment '" + c.experiment + "'");
}

}  // namespace uot
