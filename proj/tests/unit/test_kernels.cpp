#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "uot/error.hpp"
#include "uot/kernels.hpp"

namespace uot {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

UotParams params(double eps, double rho1, double rho2, SourceDivergence d = SourceDivergence::KL) {
  UotParams p;
  p.epsilon = eps;
  p.rho1 = rho1;
  p.rho2 = rho2;
  p.source = d;
  return p;
}

// Bisection on w + ln w = L, independent of the Newton iteration under test.
double lambert_bisect(double L) {
  double lo = 1e-300;
  double hi = std::max(1.0, L) + 1.0;
  for (int k = 0; k < 3000 && hi - lo > 1e-18 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (mid + std::log(mid) < L ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(SoftmaxStats, SinglePointUnitPartition) {
  for (double rho1 : {0.1, 1.0, 7.0}) {
    const auto s = softmax_stats(vec({0}), vec({0}), params(0.3, rho1, 1.0), vec({0}));
    EXPECT_DOUBLE_EQ(s.log_z, 0.0);
    EXPECT_DOUBLE_EQ(s.w[0], 1.0);
    EXPECT_DOUBLE_EQ(s.sigma, 1.0);
  }
}

TEST(SoftmaxStats, SymmetricPair) {
  const auto s = softmax_stats(vec({0, 0}), vec({0, 0}), params(1, 1, 1), vec({std::log(0.5), std::log(0.5)}));
  EXPECT_NEAR(s.w[0], 0.5, 1e-15);
  EXPECT_NEAR(s.w[1], 0.5, 1e-15);
  EXPECT_NEAR(s.log_z, 0.0, 1e-15);
}

TEST(SoftmaxStats, LogTwoShift) {
  const double eps = 0.2;
  const auto p = params(eps, 1.3, 1.0);
  const auto s = softmax_stats(vec({0}), vec({eps * std::log(2.0)}), p, vec({0}));
  EXPECT_NEAR(s.log_z, std::log(2.0), 1e-15);
  EXPECT_NEAR(s.sigma, std::pow(2.0, p.alpha()), 1e-14);
  EXPECT_DOUBLE_EQ(s.concavity_coeff, 1.0 - p.alpha());
}

TEST(SoftmaxStats, Chi2Concavity) {
  const auto p = params(1, 1, 1, SourceDivergence::Chi2);
  const auto s = softmax_stats(vec({0}), vec({0}), p, vec({0}));
  // U = e, W(e) = 1.
  EXPECT_NEAR(s.sigma, 1.0, 1e-14);
  EXPECT_NEAR(s.concavity_coeff, 0.5, 1e-14);
}

TEST(SoftmaxStats, InvalidInputs) {
  const auto p = params(1, 1, 1);
  EXPECT_THROW(softmax_stats(Vector(0), Vector(0), p, Vector(0)), Error);
  EXPECT_THROW(softmax_stats(vec({0, 1}), vec({0}), p, vec({0, 0})), Error);
  EXPECT_THROW(softmax_stats(vec({NAN}), vec({0}), p, vec({0})), Error);
  EXPECT_THROW(softmax_stats(vec({0}), vec({INFINITY}), p, vec({0})), Error);
}

TEST(SoftmaxStats, ShiftCovariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    const auto p = params(0.05, 0.7, 2.0, d);
    for (int trial = 0; trial < 50; ++trial) {
      Vector c(8), g(8), lb(8);
      for (int k = 0; k < 8; ++k) {
        c[k] = u(rng) + 1.0;
        g[k] = u(rng);
        lb[k] = std::log(0.125);
      }
      const double t = u(rng);
      const auto a = softmax_stats(c, g, p, lb);
      const auto b = softmax_stats(c, (g.array() + t).matrix(), p, lb);
      EXPECT_NEAR(b.log_z - a.log_z, t / p.epsilon, 1e-12 * (1 + std::abs(t / p.epsilon)));
      EXPECT_LT((a.w - b.w).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_NEAR(a.w.sum(), 1.0, 1e-12);
    }
  }
}

TEST(SoftmaxStats, SigmaMonotoneInEachCoordinate) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    const auto p = params(0.1, 1.0, 1.0, d);
    for (int trial = 0; trial < 30; ++trial) {
      Vector c(5), g(5), lb = Vector::Constant(5, std::log(0.2));
      for (int k = 0; k < 5; ++k) {
        c[k] = u(rng) + 1.0;
        g[k] = u(rng);
      }
      const double base = softmax_stats(c, g, p, lb).sigma;
      for (int k = 0; k < 5; ++k) {
        Vector gp = g;
        gp[k] += 1e-6;
        EXPECT_GE(softmax_stats(c, gp, p, lb).sigma, base);
      }
    }
  }
}

TEST(SoftmaxStats, NoOverflowAtTinyEpsilon) {
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    auto p = params(1e-4, 1.0, 1.0, d);
    const double gmax = p.rho2 + p.margin_project;
    // exp((rho2 + delta)/eps) = exp(11000) overflows a double.
    const auto s = softmax_stats(vec({0, 0.5, 1e-3}), vec({gmax, gmax, -3}), p,
                                 vec({std::log(1 / 3.0), std::log(1 / 3.0), std::log(1 / 3.0)}));
    EXPECT_TRUE(std::isfinite(s.log_z));
    EXPECT_TRUE(std::isfinite(s.sigma));
    EXPECT_TRUE(s.w.allFinite());
    EXPECT_GT(s.sigma, 0.0);
  }
}

TEST(Lambert, ExactValues) {
  EXPECT_NEAR(lambert_w_from_log(1.0), 1.0, 1e-15);
  EXPECT_NEAR(lambert_w_from_log(std::log(2.0) + 2.0), 2.0, 2e-15);
}

TEST(Lambert, LargeArgumentAgainstBisection) {
  const double w = lambert_w_from_log(100.0);
  EXPECT_LT(std::abs(w + std::log(w) - 100.0), 1e-10);
  EXPECT_NEAR(w, lambert_bisect(100.0), 1e-12 * w);
}

TEST(Lambert, ResidualOverWideRange) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30.0, 1e6);
  std::uniform_real_distribution<double> small(-30.0, 30.0);
  for (int k = 0; k < 10000; ++k) {
    const double L = k % 2 ? u(rng) : small(rng);
    const double w = lambert_w_from_log(L);
    ASSERT_GT(w, 0.0);
    // Residual in extended precision so that it measures the returned value only.
    const long double res = static_cast<long double>(w) + std::log(static_cast<long double>(w)) - L;
    ASSERT_LT(std::abs(static_cast<double>(res)), 1e-10) << "log_u = " << L;
    if (k % 500 == 0) {
      EXPECT_NEAR(w, lambert_bisect(L), 1e-12 * w + 1e-300) << "log_u = " << L;
    }
  }
}

TEST(Lambert, NonFiniteIsInvalid) {
  EXPECT_THROW(lambert_w_from_log(NAN), Error);
  EXPECT_THROW(lambert_w_from_log(INFINITY), Error);
}

TEST(Conjugates, PiecewiseValues) {
  EXPECT_EQ(conjugate_chi2(0.0), 0.0);
  EXPECT_EQ(conjugate_chi2(-2.0), -0.5);
  EXPECT_DOUBLE_EQ(conjugate_chi2(1.0), 1.5);
  EXPECT_DOUBLE_EQ(conjugate_chi2(-1.0), -0.5);
  EXPECT_EQ(conjugate_kl(0.0), 0.0);
  EXPECT_DOUBLE_EQ(conjugate_kl(1.0), std::exp(1.0) - 1.0);
}

TEST(Conjugates, MatchBruteForceSupremum) {
  // sup_{t >= 0} s t - phi(t) on a fine grid.
  for (double s : {-3.0, -1.0, -0.2, 0.0, 0.4, 1.1}) {
    double best_chi2 = -1e300;
    double best_kl = -1e300;
    for (int k = 0; k <= 400000; ++k) {
      const double t = k * 1e-5;
      best_chi2 = std::max(best_chi2, s * t - 0.5 * (t - 1) * (t - 1));
      const double tlogt = t > 0 ? t * std::log(t) : 0.0;
      best_kl = std::max(best_kl, s * t - (tlogt - t + 1));
    }
    EXPECT_NEAR(conjugate_chi2(s), best_chi2, 1e-8) << s;
    EXPECT_NEAR(conjugate_kl(s), best_kl, 1e-8) << s;
  }
}

TEST(UotParams, AlphaAndValidation) {
  const auto p = params(0.3, 0.7, 1.0);
  EXPECT_EQ(p.alpha(), 0.3 / (0.3 + 0.7));
  EXPECT_GT(p.alpha(), 0.0);
  EXPECT_LT(p.alpha(), 1.0);
  EXPECT_DOUBLE_EQ(p.self_concordance(), (2 + 3 * p.alpha()) / 0.3);
  EXPECT_DOUBLE_EQ(params(0.3, 0.7, 1, SourceDivergence::Chi2).self_concordance(), 6 / 0.3);
  EXPECT_THROW(params(0, 1, 1).validate(), Error);
  EXPECT_THROW(params(1, -1, 1).validate(), Error);
  EXPECT_THROW(params(1, 1, NAN).validate(), Error);
  auto q = params(1, 1, 1);
  q.margin_safeguard = 0.05;
  EXPECT_THROW(q.validate(), Error);
  EXPECT_EQ(parse_source_divergence("chi2"), SourceDivergence::Chi2);
  EXPECT_THROW(parse_source_divergence("tv"), Error);
}

TEST(LogSumExp, StableForLargeValues) {
  EXPECT_NEAR(log_sum_exp(vec({1000, 1000})), 1000 + std::log(2.0), 1e-12);
  EXPECT_NEAR(log_sum_exp(vec({-1000, -1000})), -1000 + std::log(2.0), 1e-12);
}

}  // namespace
}  // namespace uot
