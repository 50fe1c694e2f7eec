#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uot/kernels.hpp"
#include "uot/measures.hpp"
#include "uot/semidual.hpp"
#include "uot/solvers.hpp"

namespace uot {

using Json = nlohmann::json;

inline constexpr int kSummarySchema = 1;

/// Solver knobs shared by all experiments; each experiment reads the ones it needs.
struct SolverSettings {
  StepSchedule schedule = StepSchedule::PolyOffset;
  /// PASGD step constant is c_scale * n / rho2 for each entry.
  std::vector<double> c_scales{0.05, 1.0, 10.0};
  double exponent_gamma = 2.0 / 3.0;
  std::size_t batch_size = 8;
  Averaging averaging = Averaging::Full;
  std::size_t max_iters = 100000;
  /// Checkpoints per decade of iterations, starting at 100.
  std::size_t checkpoints_per_decade = 4;
  /// Stopping tolerance of the deterministic solvers.
  double tol = 1e-8;
  std::size_t full_max_iters = 200000;
  RestartMode restart_mode = RestartMode::ZeroMomentum;
  double ground_truth_tol = 1e-12;
  std::size_t ground_truth_max_iters = 50000;
  std::size_t trace_every = 1;
  /// Deterministic methods compared by anag_scale / baselines: anag, adaptive_gd, gd, nag.
  std::vector<std::string> methods{"anag", "adaptive_gd", "gd", "nag"};
};

struct DataSettings {
  /// Target support size (and mixture samples used as target).
  std::size_t n = 2000;
  /// Empirical source size used for the ground truth and for sampling.
  std::size_t n_source = 10000;
  std::size_t dim = 10;
  std::size_t modes = 4;
  double covariance_scale = 0.01;
  std::uint64_t mixture_seed = 7;
  std::uint64_t sample_seed = 11;
  Metric metric = Metric::SquaredEuclidean;
  std::vector<std::size_t> sizes{100, 200, 400};
  std::vector<double> epsilons{0.1, 0.01, 0.001};
  std::vector<double> rhos{0.1, 1.0, 10.0};
  std::string source_image;
  std::string target_image;
};

struct ExperimentConfig {
  std::string experiment;
  UotParams params;
  SolverSettings solver;
  DataSettings data;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "uot_out";
  bool record_clock = true;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"pasgd_rate", "eps_sweep",      "anag_scale",
                                              "baselines",  "color_transfer", "verify"};
  return names;
}

/// Defaults for one experiment before the JSON overrides are applied.
ExperimentConfig default_config(const std::string& experiment);
/// Strict parse: unknown keys, wrong types and empty seed lists are errors.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
Json to_json(const ExperimentConfig& c);

/// Quarter-decade style checkpoints from 100 up to max_iters (inclusive).
std::vector<std::size_t> log_checkpoints(std::size_t max_iters, std::size_t per_decade);
/// Least-squares slope of log(y) against log(x); pairs outside [x_lo, x_hi] or with y <= 0 are skipped.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double x_lo,
                    double x_hi);
double median(std::vector<double> v);

/// Semi-discrete mixture benchmark: a finite empirical source of n_source mixture
/// draws and n target draws from the same generator.
struct MixtureProblem {
  std::shared_ptr<const SemiDual> problem;
  SampleSource source;
  CostFn cost;
};
MixtureProblem make_mixture_problem(const DataSettings& data, const UotParams& params);
/// Uniform [0,1]^dim point clouds with uniform weights summing to 1.
SemiDual make_cube_problem(std::size_t n, std::size_t dim, std::uint64_t seed,
                           const UotParams& params);

/// Each runner writes `<output_dir>/<experiment>/<run_id>/trace.csv` per run and
/// `<output_dir>/<experiment>/summary.json`, and returns the summary.
Json run_pasgd_rate(const ExperimentConfig& c);
Json run_eps_sweep(const ExperimentConfig& c);
Json run_anag_scale(const ExperimentConfig& c);
Json run_baselines(const ExperimentConfig& c);
Json run_color_transfer(const ExperimentConfig& c);
Json run_verify(const ExperimentConfig& c);
Json run_experiment(const ExperimentConfig& c);

/// Barycentric recoloring: pixel x maps to sum_j w_j(x, g) y_j.
RowMatrix barycentric_map(const RowMatrix& points, const DiscreteMeasure& target,
                          const Eigen::Ref<const Vector>& g, const UotParams& params,
                          Metric metric = Metric::SquaredEuclidean);

// ---- property checks behind `verify` ----

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};
Json to_json(const CheckResult& r);

/// Gradient used by the finite-difference checks; replaceable for mutation tests.
using GradientOracle = std::function<Vector(const SemiDual&, const Eigen::Ref<const Vector>&)>;

struct VerifyOptions {
  std::uint64_t seed = 1;
  std::size_t instances = 20;
  std::size_t max_points = 10;
  std::vector<double> epsilons{1.0, 0.1, 0.01};
  std::size_t bound_points = 100;
  std::size_t concordance_pairs = 50;
  std::size_t duality_instances = 10;
  std::size_t variance_points = 5;
  std::size_t variance_batches = 10000;
  std::vector<std::size_t> batch_sizes{1, 8, 32};
  GradientOracle gradient;
};

/// Random small instances: n1, n2 in [2, max_points], divergences alternating,
/// eps cycling through the list.
std::vector<SemiDual> verify_instances(const VerifyOptions& o);
/// Random 2x3 instances with eps in [0.2, 1], rho in [0.5, 2], costs in [0, 1].
std::vector<SemiDual> duality_instances(const VerifyOptions& o);

CheckResult check_gradient_fd(const std::vector<SemiDual>& inst, const VerifyOptions& o);
CheckResult check_hessian_fd(const std::vector<SemiDual>& inst, const VerifyOptions& o);
CheckResult check_hessian_upper_bound(const std::vector<SemiDual>& inst, const VerifyOptions& o);
CheckResult check_strong_convexity(const std::vector<SemiDual>& inst, const VerifyOptions& o);
CheckResult check_self_concordance(const std::vector<SemiDual>& inst, const VerifyOptions& o);
/// Solves each instance with ANAG to 1e-12; box and marginal checks reuse the solutions.
std::vector<SolveResult> solve_instances(const std::vector<SemiDual>& inst);
CheckResult check_box_constraint(const std::vector<SolveResult>& sol, const std::vector<SemiDual>& inst);
CheckResult check_marginal_identity(const std::vector<SolveResult>& sol,
                                    const std::vector<SemiDual>& inst);
/// Strong duality against the pinned constant; detail also reports the residual
/// against rho1 mu(X) - J* (rho1 mu(X) / 2 - J* for chi^2).
std::vector<CheckResult> check_duality(const std::vector<SemiDual>& inst);
CheckResult check_variance_bound(const VerifyOptions& o);
std::vector<CheckResult> run_verify_checks(const VerifyOptions& o);

}  // namespace uot
