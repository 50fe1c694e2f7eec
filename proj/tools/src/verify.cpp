#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "uot/error.hpp"
#include "uot/experiments.hpp"
#include "uot/oracle.hpp"

namespace uot {

namespace {

Vector random_weights(std::size_t n, double mass, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vector w(static_cast<Eigen::Index>(n));
  for (auto& x : w) x = u(rng);
  return w * (mass / w.sum());
}

/// Uniform in [-2, rho2 + delta]^n, which lies in K_delta.
Vector random_point(std::size_t n, double rho2, double delta, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, rho2 + delta);
  Vector g(static_cast<Eigen::Index>(n));
  for (auto& x : g) x = u(rng);
  return g;
}

Vector random_direction(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector h(static_cast<Eigen::Index>(n));
  for (auto& x : h) x = u(rng);
  return h;
}

/// Steps shrink with eps so the O(h^2 / eps^2) truncation stays small.
double fd_step(const SemiDual& J, const Eigen::Ref<const Vector>& g) {
  return 1e-4 * J.params().epsilon * (1.0 + g.lpNorm<Eigen::Infinity>());
}

Vector analytic_gradient(const SemiDual& J, const Eigen::Ref<const Vector>& g,
                         const VerifyOptions& o) {
  return o.gradient ? o.gradient(J, g) : J.evaluate(g).gradient;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

CheckResult make(std::string name, double measured, double tol, bool passed, std::string detail = {}) {
  return {std::move(name), passed, measured, tol, std::move(detail)};
}

constexpr std::size_t kFdPoints = 3;

}  // namespace

Json to_json(const CheckResult& r) {
  return Json{{"name", r.name},
              {"passed", r.passed},
              {"measured", r.measured},
              {"tolerance", r.tolerance},
              {"detail", r.detail}};
}

std::vector<SemiDual> verify_instances(const VerifyOptions& o) {
  if (o.epsilons.empty()) throw_invalid("verify needs at least one epsilon");
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, o.max_points));
  std::uniform_real_distribution<double> rho(0.5, 2.0);
  std::vector<SemiDual> out;
  for (std::size_t k = 0; k < o.instances; ++k) {
    const std::size_t n1 = size(rng);
    const std::size_t n2 = size(rng);
    UotParams p;
    p.epsilon = o.epsilons[k % o.epsilons.size()];
    p.rho1 = rho(rng);
    p.rho2 = rho(rng);
    p.source = k % 2 == 0 ? SourceDivergence::KL : SourceDivergence::Chi2;
    const RowMatrix x = uniform_cube_points(n1, 2, rng());
    const RowMatrix y = uniform_cube_points(n2, 2, rng());
    const double ma = rho(rng);
    const double mb = rho(rng);
    out.emplace_back(DiscreteMeasure(x, random_weights(n1, ma, rng)), build_cost_matrix(x, y),
                     DiscreteMeasure(y, random_weights(n2, mb, rng)), p);
  }
  return out;
}

std::vector<SemiDual> duality_instances(const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 1000);
  std::uniform_real_distribution<double> eps(0.2, 1.0);
  std::uniform_real_distribution<double> rho(0.5, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SemiDual> out;
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    for (std::size_t k = 0; k < o.duality_instances; ++k) {
      UotParams p;
      p.epsilon = eps(rng);
      p.rho1 = rho(rng);
      p.rho2 = rho(rng);
      p.source = d;
      RowMatrix c(2, 3);
      for (auto& v : c.reshaped()) v = unit(rng);
      const RowMatrix x = RowMatrix::Zero(2, 1);
      const RowMatrix y = RowMatrix::Zero(3, 1);
      out.emplace_back(DiscreteMeasure(x, random_weights(2, rho(rng), rng)), CostMatrix(c),
                       DiscreteMeasure(y, random_weights(3, rho(rng), rng)), p);
    }
  }
  return out;
}

CheckResult check_gradient_fd(const std::vector<SemiDual>& inst, const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 1);
  double worst = 0.0;
  for (const auto& J : inst) {
    ScalarFn f = [&](const Eigen::Ref<const Vector>& g) { return J.objective(g); };
    for (std::size_t k = 0; k < kFdPoints; ++k) {
      const Vector g = random_point(J.target_size(), J.params().rho2, 1.0, rng);
      const Vector fd = fd_gradient(f, g, fd_step(J, g));
      const Vector an = analytic_gradient(J, g, o);
      worst = std::max(worst, (an - fd).norm() / std::max(fd.norm(), 1e-300));
    }
  }
  return make("gradient_fd", worst, 1e-6, worst < 1e-6,
              std::to_string(inst.size() * kFdPoints) + " points, relative 2-norm error");
}

CheckResult check_hessian_fd(const std::vector<SemiDual>& inst, const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 2);
  double worst = 0.0;
  for (const auto& J : inst) {
    VectorFn grad = [&](const Eigen::Ref<const Vector>& g) { return analytic_gradient(J, g, o); };
    for (std::size_t k = 0; k < kFdPoints; ++k) {
      const Vector g = random_point(J.target_size(), J.params().rho2, 1.0, rng);
      const Eigen::MatrixXd fd = fd_hessian(grad, g, fd_step(J, g));
      const Eigen::MatrixXd H = J.hessian(g);
      worst = std::max(worst, (H - fd).cwiseAbs().maxCoeff() / H.cwiseAbs().maxCoeff());
    }
  }
  return make("hessian_fd", worst, 1e-5, worst < 1e-5,
              "entrywise error relative to the largest Hessian entry");
}

CheckResult check_hessian_upper_bound(const std::vector<SemiDual>& inst, const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 3);
  std::size_t violations = 0;
  double worst = 0.0;
  for (const auto& J : inst) {
    for (std::size_t k = 0; k < o.bound_points; ++k) {
      const Vector g = random_point(J.target_size(), J.params().rho2, 1.0, rng);
      const EvalReport ev = J.evaluate(g);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J.hessian(g), Eigen::EigenvaluesOnly);
      const double ratio = es.eigenvalues().maxCoeff() / ev.local_smoothness_bound;
      worst = std::max(worst, ratio);
      if (ratio > 1.0) ++violations;
    }
  }
  return make("hessian_upper_bound", worst, 1.0, violations == 0,
              "max lambda_max / bound; " + std::to_string(violations) + " violations");
}

CheckResult check_strong_convexity(const std::vector<SemiDual>& inst, const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 3);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  for (const auto& J : inst) {
    for (std::size_t k = 0; k < o.bound_points; ++k) {
      const Vector g = random_point(J.target_size(), J.params().rho2, 1.0, rng);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J.hessian(g), Eigen::EigenvaluesOnly);
      const double margin = es.eigenvalues().minCoeff() - J.strong_convexity();
      worst = std::min(worst, margin);
      if (margin < -1e-10) ++violations;
    }
  }
  return make("strong_convexity", worst, -1e-10, violations == 0,
              "min lambda_min - beta_min/rho2; " + std::to_string(violations) + " violations");
}

CheckResult check_self_concordance(const std::vector<SemiDual>& inst, const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 4);
  double worst = 0.0;
  for (const auto& J : inst) {
    ScalarFn f = [&](const Eigen::Ref<const Vector>& g) { return J.objective(g); };
    const double M = J.params().self_concordance();
    for (std::size_t k = 0; k < o.concordance_pairs; ++k) {
      const Vector g = random_point(J.target_size(), J.params().rho2, 1.0, rng);
      // Both sides are cubic in h, so a unit sup-norm direction loses nothing and
      // keeps the stencil's roundoff small next to the Hessian form.
      Vector h = random_direction(J.target_size(), rng);
      h /= h.lpNorm<Eigen::Infinity>();
      const double third = fd_third_directional(f, g, h, 1e-2 * J.params().epsilon);
      const double quad = h.dot(J.hvp(g, h));
      worst = std::max(worst, std::abs(third) / (M * quad));
    }
  }
  return make("self_concordance", worst, 1.0 + 1e-3, worst <= 1.0 + 1e-3,
              "max |D3 J[h,h,h]| / (M ||h||_inf <h, H h>)");
}

std::vector<SolveResult> solve_instances(const std::vector<SemiDual>& inst) {
  FullBatchConfig c;
  c.tol = 1e-12;
  c.max_iters = 200000;
  c.record_clock = false;
  c.trace_every = 1000000;
  std::vector<SolveResult> out;
  out.reserve(inst.size());
  for (const auto& J : inst) out.push_back(anag_solve(J, c));
  return out;
}

CheckResult check_box_constraint(const std::vector<SolveResult>& sol, const std::vector<SemiDual>& inst) {
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t counted = 0;
  for (std::size_t k = 0; k < sol.size(); ++k) {
    if (!(sol[k].converged && sol[k].grad_norm <= 1e-9)) continue;
    ++counted;
    worst = std::max(worst, sol[k].g.max() - inst[k].params().rho2);
  }
  const bool ok = counted == sol.size() && worst <= 1e-6;
  return make("box_constraint", worst, 1e-6, ok,
              "max_k g_k - rho2 over " + std::to_string(counted) + "/" + std::to_string(sol.size()) +
                  " converged runs");
}

CheckResult check_marginal_identity(const std::vector<SolveResult>& sol,
                                    const std::vector<SemiDual>& inst) {
  double worst = 0.0;
  for (std::size_t k = 0; k < sol.size(); ++k) {
    const auto& J = inst[k];
    const Vector& g = sol[k].g.values();
    const Vector cols = J.coupling(g).colwise().sum().transpose();
    const Vector expect = J.target().weights().array() * (1.0 - g.array() / J.params().rho2);
    worst = std::max(worst, (cols - expect).cwiseAbs().maxCoeff());
  }
  return make("marginal_identity", worst, 1e-6, worst <= 1e-6,
              "max |coupling column sums - beta (1 - g*/rho2)|");
}

std::vector<CheckResult> check_duality(const std::vector<SemiDual>& inst) {
  const auto sol = solve_instances(inst);
  double gap = 0.0, literal = 0.0, plan_err = 0.0, marg_err = 0.0;
  bool converged = true;
  for (std::size_t k = 0; k < inst.size(); ++k) {
    const auto& J = inst[k];
    const Vector& g = sol[k].g.values();
    const DualityReport rep = duality_gap(J, g);
    converged = converged && rep.plan.converged && sol[k].converged;
    gap = std::max(gap, std::abs(rep.gap));
    const double m = J.source().total_mass();
    const double lit = (J.params().source == SourceDivergence::KL ? J.params().rho1 * m
                                                                   : 0.5 * J.params().rho1 * m) -
                       sol[k].objective;
    literal = std::max(literal, std::abs(rep.primal - lit));
    plan_err = std::max(plan_err, (J.coupling(g) - rep.plan.pi).cwiseAbs().maxCoeff());
    const Vector expect = J.target().weights().array() * (1.0 - g.array() / J.params().rho2);
    marg_err = std::max(marg_err, (rep.plan.col_marginal() - expect).cwiseAbs().maxCoeff());
  }
  const std::string n = std::to_string(inst.size()) + " instances";
  return {make("duality_gap", gap, 1e-4, converged && gap <= 1e-4,
               n + "; without the eps mu(X)||nu|| term the residual is " + fmt(literal)),
          make("coupling_vs_primal", plan_err, 1e-3, converged && plan_err <= 1e-3, n),
          make("primal_marginal", marg_err, 1e-3, converged && marg_err <= 1e-3, n)};
}

CheckResult check_variance_bound(const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 5);
  double worst = 0.0;
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    UotParams p;
    p.epsilon = 0.1;
    p.rho1 = 1.0;
    p.rho2 = 1.0;
    p.source = d;
    const RowMatrix x = uniform_cube_points(50, 2, rng());
    const RowMatrix y = uniform_cube_points(10, 2, rng());
    const DiscreteMeasure mu(x, random_weights(50, 1.5, rng));
    const DiscreteMeasure nu(y, random_weights(10, 0.8, rng));
    const SemiDual J(mu, build_cost_matrix(x, y), nu, p);
    auto source = SampleSource::finite(x, mu.weights(), rng());
    const CostFn cost = tabulated_cost(std::make_shared<CostMatrix>(J.cost()));
    const double cb = c_bound(mu.total_mass(), nu.total_mass(), p, p.margin_project);
    for (std::size_t k = 0; k < o.variance_points; ++k) {
      const Vector g = random_point(10, p.rho2, p.margin_project, rng);
      const Vector full = J.evaluate(g).gradient;
      for (std::size_t m : o.batch_sizes) {
        double var = 0.0;
        for (std::size_t b = 0; b < o.variance_batches; ++b) {
          var += (stochastic_gradient(g, draw_batch(source, m), cost, nu, p) - full).squaredNorm();
        }
        var /= static_cast<double>(o.variance_batches);
        worst = std::max(worst, var / (4.0 * cb * cb / static_cast<double>(m)));
      }
    }
  }
  return make("variance_bound", worst, 1.0, worst <= 1.0, "max E||grad_hat - grad||^2 / (4 c_bound^2 / m_b)");
}

std::vector<CheckResult> run_verify_checks(const VerifyOptions& o) {
  const auto inst = verify_instances(o);
  std::vector<CheckResult> out;
  out.push_back(check_gradient_fd(inst, o));
  out.push_back(check_hessian_fd(inst, o));
  out.push_back(check_hessian_upper_bound(inst, o));
  out.push_back(check_strong_convexity(inst, o));
  out.push_back(check_self_concordance(inst, o));
  const auto sol = solve_instances(inst);
  out.push_back(check_box_constraint(sol, inst));
  out.push_back(check_marginal_identity(sol, inst));
  for (auto& r : check_duality(duality_instances(o))) out.push_back(std::move(r));
  out.push_back(check_variance_bound(o));
  return out;
}

}  // namespace uot
