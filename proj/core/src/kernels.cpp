#include "uot/kernels.hpp"

#include <cmath>
#include <limits>

#include "uot/error.hpp"

namespace uot {

const char* to_string(SourceDivergence d) { return d == SourceDivergence::KL ? "kl" : "chi2"; }

SourceDivergence parse_source_divergence(const std::string& s) {
  if (s == "kl" || s == "KL") return SourceDivergence::KL;
  if (s == "chi2" || s == "Chi2" || s == "CHI2") return SourceDivergence::Chi2;
  throw_invalid("unknown source divergence '" + s + "' (expected kl or chi2)");
}

double UotParams::self_concordance() const {
  return source == SourceDivergence::KL ? (2.0 + 3.0 * alpha()) / epsilon : 6.0 / epsilon;
}

void UotParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(epsilon)) throw_invalid("epsilon must be > 0");
  if (!positive(rho1)) throw_invalid("rho1 must be > 0");
  if (!positive(rho2)) throw_invalid("rho2 must be > 0");
  if (!(margin_project >= 0.0) || !std::isfinite(margin_project)) {
    throw_invalid("margin_project must be >= 0");
  }
  if (!(margin_safeguard >= margin_project) || !std::isfinite(margin_safeguard)) {
    throw_invalid("margin_safeguard must be >= margin_project");
  }
}

double lambert_w_from_log(double log_u) {
  if (!std::isfinite(log_u)) throw_invalid("lambert_w_from_log needs a finite argument");
  // Newton on f(v) = e^v + v - log_u with v = ln w. f is convex and increasing,
  // so iterates started right of the root decrease monotonically onto it.
  double v;
  if (log_u > 1.0) {
    v = std::log(log_u - std::log(log_u));
  } else {
    v = log_u;
  }
  for (int it = 0; it < 100; ++it) {
    const double ev = std::exp(v);
    const double f = ev + v - log_u;
    const double step = f / (ev + 1.0);
    v -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(v))) {
      break;
    }
  }
  double w = std::exp(v);
  if (w > 1.0) {
    // One step in w itself removes the rounding of exp(v); w - log_u is exact
    // here since both are within a factor of two of each other.
    const double r = (w - log_u) + std::log(w);
    w -= r * w / (w + 1.0);
  }
  return w;
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double conjugate_chi2(double s) { return s >= -1.0 ? s + 0.5 * s * s : -0.5; }

double conjugate_kl(double s) { return std::expm1(s); }

double chi2_log_argument(double log_z, const UotParams& params) {
  const double r = params.rho1 / params.epsilon;
  return std::log(r) + r + log_z;
}

RowStats row_stats_from_log_z(double log_z, const UotParams& params) {
  RowStats out;
  out.log_z = log_z;
  if (params.source == SourceDivergence::KL) {
    const double a = params.alpha();
    out.sigma = std::exp(a * log_z);
    out.concavity = 1.0 - a;
  } else {
    const double w = lambert_w_from_log(chi2_log_argument(log_z, params));
    out.lambert = w;
    out.sigma = params.epsilon / params.rho1 * w;
    out.concavity = w / (1.0 + w);
  }
  return out;
}

RowStats evaluate_row(const Eigen::Ref<const Vector>& cost_row, const Eigen::Ref<const Vector>& g,
                      const UotParams& params, const Eigen::Ref<const Vector>& target_log_weights,
                      Eigen::Ref<Vector> w) {
  const double inv_eps = 1.0 / params.epsilon;
  w.array() = target_log_weights.array() + (g.array() - cost_row.array()) * inv_eps;
  const double m = w.maxCoeff();
  w.array() = (w.array() - m).exp();
  const double s = w.sum();
  w /= s;
  return row_stats_from_log_z(m + std::log(s), params);
}

double transport_integrand(const RowStats& row, const UotParams& params) {
  if (params.source == SourceDivergence::KL) return (params.rho1 + params.epsilon) * row.sigma;
  const double w = row.lambert;
  return params.epsilon * params.epsilon / params.rho1 * (w + 0.5 * w * w);
}

double source_potential(const RowStats& row, const UotParams& params) {
  if (params.source == SourceDivergence::KL) {
    return -(params.rho1 * params.epsilon / (params.rho1 + params.epsilon)) * row.log_z;
  }
  return params.rho1 - params.epsilon * row.lambert;
}

SoftmaxStats softmax_stats(const Eigen::Ref<const Vector>& cost_row,
                           const Eigen::Ref<const Vector>& g, const UotParams& params,
                           const Eigen::Ref<const Vector>& target_log_weights) {
  params.validate();
  const auto n = cost_row.size();
  if (n == 0) throw_invalid("softmax_stats needs at least one target point");
  if (g.size() != n || target_log_weights.size() != n) {
    throw_invalid("softmax_stats inputs must have equal length");
  }
  if (!cost_row.allFinite() || !g.allFinite() || !target_log_weights.allFinite()) {
    throw_invalid("softmax_stats inputs must be finite");
  }
  SoftmaxStats out;
  out.log_b = target_log_weights + (g - cost_row) / params.epsilon;
  out.w.resize(n);
  const RowStats row = evaluate_row(cost_row, g, params, target_log_weights, out.w);
  out.log_z = row.log_z;
  out.sigma = row.sigma;
  out.concavity_coeff = row.concavity;
  return out;
}

}  // namespace uot
