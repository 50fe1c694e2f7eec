#include "uot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "uot/error.hpp"

namespace uot {

double fd_gradient_step(const Eigen::Ref<const Vector>& g) {
  return 1e-5 * (1.0 + g.lpNorm<Eigen::Infinity>());
}

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw_numeric(std::string("non-finite evaluation in ") + what);
  return v;
}

void check_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw_invalid("finite-difference step must be > 0");
}

}  // namespace

Vector fd_gradient(const ScalarFn& f, const Eigen::Ref<const Vector>& g, double h) {
  check_step(h);
  Vector out(g.size());
  Vector x = g;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    x[k] = g[k] + h;
    const double fp = checked(f(x), "fd_gradient");
    x[k] = g[k] - h;
    const double fm = checked(f(x), "fd_gradient");
    x[k] = g[k];
    out[k] = (fp - fm) / (2.0 * h);
  }
  return out;
}

Eigen::MatrixXd fd_hessian(const VectorFn& grad, const Eigen::Ref<const Vector>& g, double h) {
  check_step(h);
  const Eigen::Index n = g.size();
  Eigen::MatrixXd out(n, n);
  Vector x = g;
  for (Eigen::Index k = 0; k < n; ++k) {
    x[k] = g[k] + h;
    const Vector gp = grad(x);
    x[k] = g[k] - h;
    const Vector gm = grad(x);
    x[k] = g[k];
    if (!gp.allFinite() || !gm.allFinite()) throw_numeric("non-finite evaluation in fd_hessian");
    out.col(k) = (gp - gm) / (2.0 * h);
  }
  return out;
}

double fd_third_directional(const ScalarFn& f, const Eigen::Ref<const Vector>& g,
                            const Eigen::Ref<const Vector>& dir, double h) {
  check_step(h);
  if (dir.size() != g.size()) throw_invalid("direction has wrong length");
  auto at = [&](double s) { return checked(f(g + s * dir), "fd_third_directional"); };
  return (at(2.0 * h) - 2.0 * at(h) + 2.0 * at(-h) - at(-2.0 * h)) / (2.0 * h * h * h);
}

namespace {

void check_primal_shapes(const DiscreteMeasure& source, const CostMatrix& cost,
                         const DiscreteMeasure& target) {
  if (cost.rows() != source.size() || cost.cols() != target.size()) {
    throw_invalid("cost matrix does not match the measures");
  }
}

double xlogy_ratio(double p, double q) { return p > kPrimalFloor ? p * std::log(p / q) : 0.0; }

}  // namespace

double primal_objective(const RowMatrix& pi, const DiscreteMeasure& source, const CostMatrix& cost,
                        const DiscreteMeasure& target, const UotParams& params) {
  check_primal_shapes(source, cost, target);
  if (static_cast<std::size_t>(pi.rows()) != source.size() ||
      static_cast<std::size_t>(pi.cols()) != target.size()) {
    throw_invalid("plan has wrong shape");
  }
  if ((pi.array() < 0.0).any() || !pi.allFinite()) throw_invalid("plan must be finite and >= 0");
  const Vector& a = source.weights();
  const Vector& b = target.weights();
  double transport = (cost.values().array() * pi.array()).sum();
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      const double q = a[i] * b[j];
      entropy += xlogy_ratio(pi(i, j), q) - pi(i, j) + q;
    }
  }
  const Vector r = pi.rowwise().sum();
  const Vector s = pi.colwise().sum().transpose();
  double d1 = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (params.source == SourceDivergence::KL) {
      d1 += xlogy_ratio(r[i], a[i]) - r[i] + a[i];
    } else {
      d1 += (r[i] - a[i]) * (r[i] - a[i]) / (2.0 * a[i]);
    }
  }
  const double d2 = ((s - b).array().square() / (2.0 * b.array())).sum();
  return transport + params.epsilon * entropy + params.rho1 * d1 + params.rho2 * d2;
}

PrimalPlan primal_solve_tiny(const DiscreteMeasure& source, const CostMatrix& cost,
                             const DiscreteMeasure& target, const UotParams& params, double tol,
                             std::size_t max_iters) {
  params.validate();
  check_primal_shapes(source, cost, target);
  const Eigen::Index n1 = static_cast<Eigen::Index>(source.size());
  const Eigen::Index n2 = static_cast<Eigen::Index>(target.size());
  if (n1 * n2 > 100) {
    throw Error(ErrorKind::Capacity, "primal oracle limited to n1 * n2 <= 100");
  }
  if (!(tol > 0.0)) throw_invalid("tol must be > 0");
  const Vector& a = source.weights();
  const Vector& b = target.weights();
  const RowMatrix& c = cost.values();

  auto gradient = [&](const RowMatrix& pi) {
    const Vector r = pi.rowwise().sum();
    const Vector s = pi.colwise().sum().transpose();
    RowMatrix gr(n1, n2);
    for (Eigen::Index i = 0; i < n1; ++i) {
      const double d1 = params.source == SourceDivergence::KL ? std::log(r[i] / a[i])
                                                              : r[i] / a[i] - 1.0;
      for (Eigen::Index j = 0; j < n2; ++j) {
        const double ent = params.epsilon * std::log(std::max(pi(i, j), kPrimalFloor) / (a[i] * b[j]));
        gr(i, j) = c(i, j) + ent + params.rho1 * d1 + params.rho2 * (s[j] - b[j]) / b[j];
      }
    }
    return gr;
  };
  auto project = [](RowMatrix m) { return RowMatrix(m.cwiseMax(kPrimalFloor)); };
  auto projected_grad_norm = [&](const RowMatrix& pi, const RowMatrix& gr) {
    return (project(pi - gr) - pi).norm();
  };

  PrimalPlan plan;
  RowMatrix pi = a * b.transpose();
  double obj = primal_objective(pi, source, cost, target, params);
  RowMatrix gr = gradient(pi);
  double step = 1.0 / (params.epsilon / pi.minCoeff() + params.rho1 + params.rho2);
  std::deque<double> history{obj};
  constexpr std::size_t kMemory = 10;
  constexpr double kArmijo = 1e-4;

  std::size_t it = 0;
  for (; it < max_iters; ++it) {
    plan.grad_norm = projected_grad_norm(pi, gr);
    if (plan.grad_norm <= tol) {
      plan.converged = true;
      break;
    }
    const double ref = *std::max_element(history.begin(), history.end());
    RowMatrix cand;
    double cand_obj = 0.0;
    double s = step;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      cand = project(pi - s * gr);
      cand_obj = primal_objective(cand, source, cost, target, params);
      const double decrease = (gr.array() * (pi - cand).array()).sum();
      if (std::isfinite(cand_obj) && cand_obj <= ref - kArmijo * decrease) {
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;
    const RowMatrix gr_new = gradient(cand);
    const RowMatrix dpi = cand - pi;
    const RowMatrix dg = gr_new - gr;
    const double curv = (dpi.array() * dg.array()).sum();
    step = curv > 0.0 ? dpi.squaredNorm() / curv : s * 2.0;
    step = std::clamp(step, 1e-12, 1e12);
    pi = cand;
    gr = gr_new;
    obj = cand_obj;
    history.push_back(obj);
    if (history.size() > kMemory) history.pop_front();
  }
  plan.iterations = it;
  plan.pi = pi;
  plan.objective = obj;
  if (!plan.converged) plan.grad_norm = projected_grad_norm(pi, gr);
  return plan;
}

double duality_constant(const DiscreteMeasure& source, const DiscreteMeasure& target,
                        const UotParams& params) {
  const double m = source.total_mass();
  const double entropic = params.epsilon * m * target.total_mass();
  return (params.source == SourceDivergence::KL ? params.rho1 * m : 0.5 * params.rho1 * m) +
         entropic;
}

DualityReport duality_gap(const SemiDual& problem, const Eigen::Ref<const Vector>& g_star,
                          double stationarity_tol) {
  const EvalReport ev = problem.evaluate(g_star);
  if (!(ev.gradient.norm() <= stationarity_tol)) {
    throw_invalid("duality_gap needs a stationary g_star (||grad|| = " +
                  std::to_string(ev.gradient.norm()) + ")");
  }
  DualityReport rep;
  rep.plan = primal_solve_tiny(problem.source(), problem.cost(), problem.target(), problem.params());
  rep.primal = rep.plan.objective;
  rep.dual = duality_constant(problem.source(), problem.target(), problem.params()) - ev.objective;
  rep.gap = rep.primal - rep.dual;
  return rep;
}

}  // namespace uot
