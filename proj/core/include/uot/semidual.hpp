#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "uot/kernels.hpp"
#include "uot/measures.hpp"

namespace uot {

/// Target dual vector g, aligned with the support of the target measure.
class Potential {
 public:
  Potential() = default;
  explicit Potential(Vector values) : values_(std::move(values)) {}
  static Potential zeros(std::size_t n) { return Potential(Vector::Zero(static_cast<Eigen::Index>(n))); }

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }
  double max() const { return values_.maxCoeff(); }
  bool is_finite() const { return values_.allFinite(); }

  /// Membership in K_delta = {g : g_k <= rho2 + delta for all k}.
  bool in_feasible_set(double rho2, double delta) const { return max() <= rho2 + delta; }

 private:
  Vector values_;
};

/// Objective, gradient and the two smoothness estimates at one potential.
struct EvalReport {
  double objective = 0.0;
  Vector gradient;
  /// Second marginal of the induced coupling; entrywise >= 0.
  Vector transport_gradient;
  /// ||transport_gradient||_inf / eps + beta_max / rho2 (bounds ||Hessian||_op).
  double local_smoothness_bound = 0.0;
  /// Step-size constant L(g) of the adaptive accelerated solver.
  double anag_step_bound = 0.0;
};

struct ConditionReport {
  double kappa = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  /// (beta_max / beta_min)(1 + max_k(rho2 - g_k)/eps).
  double bound = 0.0;
};

/// Smoothness constant multiplier C: (2 + 3 alpha) e for KL source, 6 e for chi^2.
double anag_constant(const UotParams& params);

/// L(g) = (C/eps)||t||_inf + C beta_max/rho2 + (C/(e eps))||grad||_inf.
double anag_step_bound(const UotParams& params, double transport_inf, double gradient_inf,
                       double beta_max);

/// Uniform bound on ||transport gradient||_1 over K_delta.
double c_bound(double source_mass, double target_mass, const UotParams& params, double delta);

/// Eliminated source potential for one source point.
double recover_f(const Eigen::Ref<const Vector>& g, const Eigen::Ref<const Vector>& cost_row,
                 const UotParams& params, const Eigen::Ref<const Vector>& target_log_weights);

/// Semi-dual functional of a full-batch instance
///
///   J(g) = sum_i a_i T(x_i, g) + sum_j b_j (g_j^2 / (2 rho2) - g_j),
///
/// with T the transport integrand of the chosen source divergence. All kernel
/// arithmetic is in the log domain; reductions run sequentially over source
/// points so repeated evaluations are bit-identical.
class SemiDual {
 public:
  static constexpr std::size_t kDefaultDenseLimit = 2000;

  SemiDual(DiscreteMeasure source, CostMatrix cost, DiscreteMeasure target, UotParams params);

  const DiscreteMeasure& source() const { return source_; }
  const DiscreteMeasure& target() const { return target_; }
  const CostMatrix& cost() const { return cost_; }
  const UotParams& params() const { return params_; }
  std::size_t source_size() const { return source_.size(); }
  std::size_t target_size() const { return target_.size(); }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  /// beta_min / rho2.
  double strong_convexity() const { return beta_min_ / params_.rho2; }

  void set_dense_limit(std::size_t n) { dense_limit_ = n; }
  /// Test hook: drops the transport term, leaving the quadratic target penalty.
  void set_transport_enabled(bool enabled) { transport_enabled_ = enabled; }
  bool transport_enabled() const { return transport_enabled_; }

  double objective(const Eigen::Ref<const Vector>& g) const;
  double objective(const Potential& g) const { return objective(g.values()); }

  EvalReport evaluate(const Eigen::Ref<const Vector>& g) const;
  EvalReport evaluate(const Potential& g) const { return evaluate(g.values()); }

  /// Dense Hessian; throws Capacity when n exceeds the dense limit.
  Eigen::MatrixXd hessian(const Eigen::Ref<const Vector>& g) const;
  /// Matrix-free Hessian action.
  Vector hvp(const Eigen::Ref<const Vector>& g, const Eigen::Ref<const Vector>& direction) const;

  /// f*(x_i; g) for every source point.
  Vector source_potentials(const Eigen::Ref<const Vector>& g) const;
  /// pi_ij = a_i b_j exp((f*_i + g_j - c_ij)/eps).
  RowMatrix coupling(const Eigen::Ref<const Vector>& g) const;

  /// Dense eigen-decomposition at an approximately stationary point.
  ConditionReport local_condition_number(const Eigen::Ref<const Vector>& g_star,
                                         double stationarity_tol = 1e-6) const;

 private:
  void check_potential(const Eigen::Ref<const Vector>& g) const;
  void check_dense() const;

  DiscreteMeasure source_;
  CostMatrix cost_;
  DiscreteMeasure target_;
  UotParams params_;
  double beta_min_ = 0.0;
  double beta_max_ = 0.0;
  std::size_t dense_limit_ = kDefaultDenseLimit;
  bool transport_enabled_ = true;
};

}  // namespace uot
