#include "uot/semidual.hpp"

#include <cmath>
#include <numbers>

#include "uot/error.hpp"

namespace uot {

double anag_constant(const UotParams& params) {
  const double base = params.source == SourceDivergence::KL ? 2.0 + 3.0 * params.alpha() : 6.0;
  return base * std::numbers::e;
}

double anag_step_bound(const UotParams& params, double transport_inf, double gradient_inf,
                       double beta_max) {
  const double c = anag_constant(params);
  return c / params.epsilon * transport_inf + c * beta_max / params.rho2 +
         c / (std::numbers::e * params.epsilon) * gradient_inf;
}

double c_bound(double source_mass, double target_mass, const UotParams& params, double delta) {
  params.validate();
  if (!(source_mass > 0.0) || !(target_mass > 0.0)) throw_invalid("c_bound needs positive masses");
  if (params.source == SourceDivergence::KL) {
    return source_mass * std::pow(target_mass, params.alpha()) *
           std::exp((params.rho2 + delta) / (params.rho1 + params.epsilon));
  }
  const double r = params.rho1 / params.epsilon;
  const double log_arg = std::log(r) + r + std::log(target_mass) + (params.rho2 + delta) / params.epsilon;
  return source_mass * params.epsilon / params.rho1 * lambert_w_from_log(log_arg);
}

double recover_f(const Eigen::Ref<const Vector>& g, const Eigen::Ref<const Vector>& cost_row,
                 const UotParams& params, const Eigen::Ref<const Vector>& target_log_weights) {
  const SoftmaxStats s = softmax_stats(cost_row, g, params, target_log_weights);
  return source_potential(row_stats_from_log_z(s.log_z, params), params);
}

SemiDual::SemiDual(DiscreteMeasure source, CostMatrix cost, DiscreteMeasure target,
                   UotParams params)
    : source_(std::move(source)),
      cost_(std::move(cost)),
      target_(std::move(target)),
      params_(params) {
  params_.validate();
  if (cost_.rows() != source_.size() || cost_.cols() != target_.size()) {
    throw_invalid("cost matrix is " + std::to_string(cost_.rows()) + "x" +
                  std::to_string(cost_.cols()) + " but measures have " +
                  std::to_string(source_.size()) + " and " + std::to_string(target_.size()) +
                  " points");
  }
  beta_min_ = target_.min_weight();
  beta_max_ = target_.max_weight();
}

void SemiDual::check_potential(const Eigen::Ref<const Vector>& g) const {
  if (static_cast<std::size_t>(g.size()) != target_size()) {
    throw_invalid("potential has length " + std::to_string(g.size()) + ", expected " +
                  std::to_string(target_size()));
  }
  if (!g.allFinite()) throw_invalid("potential must be finite");
}

void SemiDual::check_dense() const {
  if (target_size() > dense_limit_) {
    throw Error(ErrorKind::Capacity, "dense Hessian limited to n <= " +
                                         std::to_string(dense_limit_) + " (n = " +
                                         std::to_string(target_size()) + "); use hvp");
  }
}

namespace {

double quadratic_part(const Eigen::Ref<const Vector>& g, const Vector& beta, double rho2) {
  return (beta.array() * (g.array().square() / (2.0 * rho2) - g.array())).sum();
}

}  // namespace

double SemiDual::objective(const Eigen::Ref<const Vector>& g) const {
  check_potential(g);
  double transport = 0.0;
  if (transport_enabled_) {
    Vector w(g.size());
    const Vector& a = source_.weights();
    for (std::size_t i = 0; i < source_size(); ++i) {
      const RowStats r = evaluate_row(cost_.row(i), g, params_, target_.log_weights(), w);
      const double term = transport_integrand(r, params_);
      if (!std::isfinite(term)) throw_numeric("non-finite transport term", i);
      transport += a[static_cast<Eigen::Index>(i)] * term;
    }
  }
  const double j = transport + quadratic_part(g, target_.weights(), params_.rho2);
  if (!std::isfinite(j)) throw_numeric("non-finite objective");
  return j;
}

EvalReport SemiDual::evaluate(const Eigen::Ref<const Vector>& g) const {
  check_potential(g);
  const Eigen::Index n = g.size();
  EvalReport rep;
  rep.transport_gradient = Vector::Zero(n);
  double transport = 0.0;
  if (transport_enabled_) {
    Vector w(n);
    const Vector& a = source_.weights();
    for (std::size_t i = 0; i < source_size(); ++i) {
      const RowStats r = evaluate_row(cost_.row(i), g, params_, target_.log_weights(), w);
      const double term = transport_integrand(r, params_);
      if (!std::isfinite(term) || !std::isfinite(r.sigma)) {
        throw_numeric("non-finite transport term", i);
      }
      const double ai = a[static_cast<Eigen::Index>(i)];
      transport += ai * term;
      rep.transport_gradient.noalias() += (ai * r.sigma) * w;
    }
  }
  const Vector& beta = target_.weights();
  rep.objective = transport + quadratic_part(g, beta, params_.rho2);
  rep.gradient = rep.transport_gradient.array() + beta.array() * g.array() / params_.rho2 - beta.array();
  if (!std::isfinite(rep.objective) || !rep.gradient.allFinite()) {
    throw_numeric("non-finite objective or gradient");
  }
  const double t_inf = rep.transport_gradient.lpNorm<Eigen::Infinity>();
  rep.local_smoothness_bound = t_inf / params_.epsilon + beta_max_ / params_.rho2;
  rep.anag_step_bound =
      anag_step_bound(params_, t_inf, rep.gradient.lpNorm<Eigen::Infinity>(), beta_max_);
  return rep;
}

Eigen::MatrixXd SemiDual::hessian(const Eigen::Ref<const Vector>& g) const {
  check_potential(g);
  check_dense();
  const Eigen::Index n = g.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  if (transport_enabled_) {
    Vector w(n);
    const Vector& a = source_.weights();
    for (std::size_t i = 0; i < source_size(); ++i) {
      const RowStats r = evaluate_row(cost_.row(i), g, params_, target_.log_weights(), w);
      const double scale = a[static_cast<Eigen::Index>(i)] * r.sigma / params_.epsilon;
      if (!std::isfinite(scale)) throw_numeric("non-finite Hessian weight", i);
      h.diagonal().noalias() += scale * w;
      h.selfadjointView<Eigen::Lower>().rankUpdate(w, -scale * r.concavity);
    }
    h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
  }
  h.diagonal() += target_.weights() / params_.rho2;
  return h;
}

Vector SemiDual::hvp(const Eigen::Ref<const Vector>& g,
                     const Eigen::Ref<const Vector>& direction) const {
  check_potential(g);
  if (direction.size() != g.size()) throw_invalid("direction has wrong length");
  const Eigen::Index n = g.size();
  Vector out = target_.weights().cwiseProduct(direction) / params_.rho2;
  if (transport_enabled_) {
    Vector w(n);
    const Vector& a = source_.weights();
    for (std::size_t i = 0; i < source_size(); ++i) {
      const RowStats r = evaluate_row(cost_.row(i), g, params_, target_.log_weights(), w);
      const double scale = a[static_cast<Eigen::Index>(i)] * r.sigma / params_.epsilon;
      if (!std::isfinite(scale)) throw_numeric("non-finite Hessian weight", i);
      const double wd = w.dot(direction);
      out.array() += scale * w.array() * (direction.array() - r.concavity * wd);
    }
  }
  return out;
}

Vector SemiDual::source_potentials(const Eigen::Ref<const Vector>& g) const {
  check_potential(g);
  Vector f(static_cast<Eigen::Index>(source_size()));
  Vector w(g.size());
  for (std::size_t i = 0; i < source_size(); ++i) {
    const RowStats r = evaluate_row(cost_.row(i), g, params_, target_.log_weights(), w);
    f[static_cast<Eigen::Index>(i)] = source_potential(r, params_);
  }
  return f;
}

RowMatrix SemiDual::coupling(const Eigen::Ref<const Vector>& g) const {
  const Vector f = source_potentials(g);
  const Vector& a = source_.log_weights();
  const Vector& b = target_.log_weights();
  RowMatrix pi(static_cast<Eigen::Index>(source_size()), g.size());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    const auto c = cost_.row(static_cast<std::size_t>(i));
    pi.row(i) = (a[i] + b.array() + (f[i] + g.array() - c.array()) / params_.epsilon).exp().transpose();
  }
  return pi;
}

ConditionReport SemiDual::local_condition_number(const Eigen::Ref<const Vector>& g_star,
                                                 double stationarity_tol) const {
  check_dense();
  const EvalReport rep = evaluate(g_star);
  const double gnorm = rep.gradient.norm();
  if (!(gnorm <= stationarity_tol)) {
    throw_invalid("local_condition_number needs a stationary point (||grad|| = " +
                  std::to_string(gnorm) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(g_star), Eigen::EigenvaluesOnly);
  ConditionReport out;
  out.lambda_min = es.eigenvalues().minCoeff();
  out.lambda_max = es.eigenvalues().maxCoeff();
  out.kappa = out.lambda_max / out.lambda_min;
  const double gap = (params_.rho2 - g_star.array()).maxCoeff();
  out.bound = beta_max_ / beta_min_ * (1.0 + gap / params_.epsilon);
  return out;
}

}  // namespace uot
