#pragma once

#include <cstddef>
#include <functional>

#include "uot/kernels.hpp"
#include "uot/measures.hpp"
#include "uot/semidual.hpp"

namespace uot {

using ScalarFn = std::function<double(const Eigen::Ref<const Vector>&)>;
using VectorFn = std::function<Vector(const Eigen::Ref<const Vector>&)>;

/// Default gradient step 1e-5 (1 + ||g||_inf).
double fd_gradient_step(const Eigen::Ref<const Vector>& g);

/// Central differences, O(h^2) truncation.
Vector fd_gradient(const ScalarFn& f, const Eigen::Ref<const Vector>& g, double h);
/// Column k is (grad(g + h e_k) - grad(g - h e_k)) / 2h; not symmetrized.
Eigen::MatrixXd fd_hessian(const VectorFn& grad, const Eigen::Ref<const Vector>& g, double h);
/// d^3/ds^3 f(g + s dir) at s = 0 from the four-point stencil
/// (f(2h) - 2 f(h) + 2 f(-h) - f(-2h)) / (2 h^3), O(h^2) truncation.
double fd_third_directional(const ScalarFn& f, const Eigen::Ref<const Vector>& g,
                            const Eigen::Ref<const Vector>& dir, double h);

/// Candidate plan of the discrete primal problem.
struct PrimalPlan {
  RowMatrix pi;
  double objective = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  /// Norm of the projected gradient at the returned plan.
  double grad_norm = 0.0;

  Vector row_marginal() const { return pi.rowwise().sum(); }
  Vector col_marginal() const { return pi.colwise().sum().transpose(); }
};

/// Entries at or below this floor count as zero mass.
inline constexpr double kPrimalFloor = 1e-300;

/// sum c pi + eps KL(pi | a b^T) + rho1 D1(pi 1 | a) + rho2 chi2(pi^T 1 | b), with
/// KL(p|q) = sum p log(p/q) - p + q and chi2(p|q) = sum (p - q)^2 / (2 q).
double primal_objective(const RowMatrix& pi, const DiscreteMeasure& source, const CostMatrix& cost,
                        const DiscreteMeasure& target, const UotParams& params);

/// Projected gradient with Armijo backtracking on {pi >= floor}. Limited to
/// n1 * n2 <= 100.
PrimalPlan primal_solve_tiny(const DiscreteMeasure& source, const CostMatrix& cost,
                             const DiscreteMeasure& target, const UotParams& params,
                             double tol = 1e-10, std::size_t max_iters = 1000000);

/// Constant K such that the primal optimum equals K - inf J:
/// rho1 mu(X) + eps mu(X) ||nu||_1 (KL source) or rho1 mu(X)/2 + eps mu(X) ||nu||_1 (chi^2).
double duality_constant(const DiscreteMeasure& source, const DiscreteMeasure& target,
                        const UotParams& params);

struct DualityReport {
  double primal = 0.0;
  double dual = 0.0;
  /// primal - dual.
  double gap = 0.0;
  PrimalPlan plan;
};

/// Solves the primal with primal_solve_tiny and compares with K - J(g_star).
/// Requires ||grad J(g_star)||_2 <= stationarity_tol.
DualityReport duality_gap(const SemiDual& problem, const Eigen::Ref<const Vector>& g_star,
                          double stationarity_tol = 1e-10);

}  // namespace uot
