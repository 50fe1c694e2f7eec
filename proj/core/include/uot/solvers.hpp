#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uot/kernels.hpp"
#include "uot/measures.hpp"
#include "uot/semidual.hpp"
#include "uot/trace.hpp"

namespace uot {

/// Step-size rules eta_t, t >= 1:
///   Poly              C t^-gamma
///   PolyOffset        C (t + 1/eps)^-gamma
///   OptLinear         C / (1/eps + rho2 t)
///   InverseOffsetPoly C / (1/eps + t^gamma)
enum class StepSchedule { Poly, PolyOffset, OptLinear, InverseOffsetPoly };
enum class Averaging { Full, SuffixHalf };
/// ZeroMomentum: on restart y <- g_{t+1} and the momentum history is dropped.
/// Literal: on restart y <- g_t.
enum class RestartMode { ZeroMomentum, Literal };

StepSchedule parse_step_schedule(const std::string& s);
Averaging parse_averaging(const std::string& s);
RestartMode parse_restart_mode(const std::string& s);
const char* to_string(StepSchedule s);
const char* to_string(Averaging a);
const char* to_string(RestartMode m);

/// Fills out_j = c(x, y_j) for one sampled source point. `index` is the dataset
/// index of the draw (SampleSource::kNoIndex for generator streams).
using CostFn = std::function<void(std::size_t index, const Eigen::Ref<const Vector>& x,
                                  Eigen::Ref<Vector> out)>;

/// Costs computed from coordinates against the given target points.
CostFn metric_cost(RowMatrix target_points, Metric metric = Metric::SquaredEuclidean);
/// Costs looked up by dataset index; rows of `costs` align with the source dataset.
CostFn tabulated_cost(std::shared_ptr<const CostMatrix> costs);

/// Mini-batch of source points. With empty `sample_weights` every draw counts
/// 1/m_b; otherwise the weights (summing to 1) replace the uniform average.
struct Batch {
  RowMatrix points;
  std::vector<std::size_t> indices;
  Vector sample_weights;
  double total_mass = 1.0;

  std::size_t size() const { return indices.size(); }
};

/// m draws from `source` (with replacement).
Batch draw_batch(SampleSource& source, std::size_t m);
/// The whole finite support with its normalized weights.
Batch exact_batch(const DiscreteMeasure& source);

/// (mu(X)/m_b) sum_i sigma(X_i, g) w(X_i, g) + beta * g / rho2 - beta.
Vector stochastic_gradient(const Eigen::Ref<const Vector>& g, const Batch& batch,
                           const CostFn& cost_fn, const DiscreteMeasure& target,
                           const UotParams& params);

struct PasgdConfig {
  StepSchedule schedule = StepSchedule::PolyOffset;
  double scale_c = 1.0;
  double exponent_gamma = 2.0 / 3.0;
  std::size_t batch_size = 32;
  Averaging averaging = Averaging::Full;
  std::size_t max_iters = 10000;
  std::uint64_t seed = 0;
  double projection_margin = 0.1;
  /// Divergence is declared when ||g||_inf > divergence_factor (rho2 + 1 + max cost seen).
  double divergence_factor = 10.0;
  /// Iterations at which averaged and last iterates are evaluated; the final
  /// iteration is always included.
  std::vector<std::size_t> checkpoints;
  bool record_clock = true;

  void validate() const;
};

double step_size(const PasgdConfig& config, const UotParams& params, std::size_t t);

/// Full objective and solution used to report gaps at checkpoints.
struct PasgdReference {
  std::function<double(const Eigen::Ref<const Vector>&)> objective;
  double j_star = std::numeric_limits<double>::quiet_NaN();
  Vector g_star;
};

struct PasgdCheckpoint {
  std::size_t iter = 0;
  double objective_average = std::numeric_limits<double>::quiet_NaN();
  double objective_last = std::numeric_limits<double>::quiet_NaN();
  double gap_average = std::numeric_limits<double>::quiet_NaN();
  double gap_last = std::numeric_limits<double>::quiet_NaN();
  double dist2_average = std::numeric_limits<double>::quiet_NaN();
  double dist2_last = std::numeric_limits<double>::quiet_NaN();
};

struct PasgdResult {
  Potential average;
  Potential last;
  Trace trace;
  std::vector<PasgdCheckpoint> checkpoints;
  std::size_t iterations = 0;
  /// Largest coordinate over all iterates.
  double max_coordinate = -std::numeric_limits<double>::infinity();
};

/// Projected averaged SGD, g_{t+1} = min(g_t - eta_t grad_hat, rho2 + margin).
/// The source is copied and reseeded with config.seed, so runs are reproducible.
/// The trace holds one record per checkpoint: objective of the averaged iterate
/// (NaN without a reference), norms of the last stochastic gradient, eta_t.
PasgdResult pasgd_solve(const SampleSource& source, const CostFn& cost_fn,
                        const DiscreteMeasure& target, const UotParams& params,
                        const PasgdConfig& config, const PasgdReference* reference = nullptr);

struct FullBatchConfig {
  std::size_t max_iters = 100000;
  /// Stop once ||grad J(g_t)||_2 <= tol.
  double tol = 1e-9;
  RestartMode restart_mode = RestartMode::ZeroMomentum;
  bool record_clock = true;
  /// Keep one trace record every `trace_every` iterations (the last is always kept).
  std::size_t trace_every = 1;
};

struct SolveResult {
  /// Lowest-objective iterate seen (the last one when converged).
  Potential g;
  Trace trace;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  /// J(g_t) for t = 0..iterations.
  std::vector<double> objectives;
  /// Smoothness constant used for the step taken at iteration t.
  std::vector<double> step_bounds;
  std::vector<bool> restart_flags;
  /// Largest coordinate of any point at which a gradient step was taken.
  double max_step_point = -std::numeric_limits<double>::infinity();
};

/// (sqrt(L) - sqrt(mu)) / (sqrt(L) + sqrt(mu)).
double nesterov_momentum(double L, double mu);

/// Smoothness-adaptive Nesterov method with safeguard restarts.
SolveResult anag_solve(const SemiDual& problem, const FullBatchConfig& config,
                       const std::optional<Vector>& g0 = std::nullopt);
/// Projected gradient descent with step 1/L(g_t).
SolveResult adaptive_gd_solve(const SemiDual& problem, const FullBatchConfig& config,
                              const std::optional<Vector>& g0 = std::nullopt);
/// Projected gradient descent with fixed step 1/step_L.
SolveResult gd_solve(const SemiDual& problem, double step_L, const FullBatchConfig& config,
                     const std::optional<Vector>& g0 = std::nullopt);
/// Constant-momentum Nesterov method with step 1/step_L.
SolveResult nag_solve_fixed(const SemiDual& problem, double step_L, const FullBatchConfig& config,
                            const std::optional<Vector>& g0 = std::nullopt);

/// c_bound(delta)/eps + beta_max/rho2: a smoothness constant valid on K_delta.
double global_smoothness(const SemiDual& problem, double delta);

}  // namespace uot
