#pragma once

#include <Eigen/Dense>

#include <string>

#include "uot/measures.hpp"

namespace uot {

/// Penalty on the source marginal; the target marginal is always Pearson chi^2.
enum class SourceDivergence { KL, Chi2 };

const char* to_string(SourceDivergence d);
SourceDivergence parse_source_divergence(const std::string& s);

/// Problem constants of the entropic unbalanced problem.
struct UotParams {
  double epsilon = 1.0;
  double rho1 = 1.0;
  double rho2 = 1.0;
  SourceDivergence source = SourceDivergence::KL;
  /// Margin of the projection set {g_k <= rho2 + margin_project}.
  double margin_project = 0.1;
  /// Margin of the safeguard set used by accelerated restarts.
  double margin_safeguard = 1.0;

  /// eps / (eps + rho1): exponent of the partition function for KL source.
  double alpha() const { return epsilon / (epsilon + rho1); }
  /// Contraction constant of the self-concordance bound: (2 + 3 alpha)/eps or 6/eps.
  double self_concordance() const;
  /// Throws InvalidInput unless eps, rho1, rho2 > 0 and 0 <= margin_project <= margin_safeguard.
  void validate() const;
};

/// Per source point statistics of the Gibbs kernel B_j = beta_j exp((g_j - c_j)/eps).
struct SoftmaxStats {
  Vector log_b;
  double log_z = 0.0;
  /// w_j = B_j / Z.
  Vector w;
  /// Transport density: Z^alpha (KL) or (eps/rho1) W(U) (chi^2).
  double sigma = 0.0;
  /// Coefficient of the rank-one Hessian correction: 1 - alpha (KL) or W/(1+W) (chi^2).
  double concavity_coeff = 0.0;
};

SoftmaxStats softmax_stats(const Eigen::Ref<const Vector>& cost_row,
                           const Eigen::Ref<const Vector>& g, const UotParams& params,
                           const Eigen::Ref<const Vector>& target_log_weights);

/// Scalar part of softmax_stats. `lambert` holds W(U) for chi^2 source (0 for KL).
struct RowStats {
  double log_z = 0.0;
  double sigma = 0.0;
  double concavity = 0.0;
  double lambert = 0.0;
};

/// Allocation-free kernel used by the solvers: fills `w` (length n) and returns
/// the scalar statistics. Inputs are not validated.
RowStats evaluate_row(const Eigen::Ref<const Vector>& cost_row, const Eigen::Ref<const Vector>& g,
                      const UotParams& params, const Eigen::Ref<const Vector>& target_log_weights,
                      Eigen::Ref<Vector> w);

/// Scalar statistics from log Z alone.
RowStats row_stats_from_log_z(double log_z, const UotParams& params);

/// Semi-dual transport integrand per unit source mass:
/// (rho1 + eps) Z^alpha (KL) or (eps^2/rho1)(W + W^2/2) (chi^2).
double transport_integrand(const RowStats& row, const UotParams& params);

/// Eliminated source potential f*(x; g).
double source_potential(const RowStats& row, const UotParams& params);

/// log U = log(rho1/eps) + rho1/eps + log Z for the chi^2 source.
double chi2_log_argument(double log_z, const UotParams& params);

/// Principal-branch Lambert W evaluated from log of its argument: returns w > 0
/// with w + ln w = log_u. Valid for log_u far beyond the overflow range of exp.
double lambert_w_from_log(double log_u);

/// Numerically stable log(sum_j exp(v_j)).
double log_sum_exp(const Eigen::Ref<const Vector>& v);

/// Convex conjugate of t -> (t - 1)^2 / 2 over t >= 0.
double conjugate_chi2(double s);
/// Convex conjugate of t -> t log t - t + 1.
double conjugate_kl(double s);

}  // namespace uot
