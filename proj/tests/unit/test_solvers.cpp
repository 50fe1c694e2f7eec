#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"
#include "uot/error.hpp"
#include "uot/solvers.hpp"

namespace uot {
namespace {

using testing::InstanceSpec;
using testing::make_instance;
using testing::random_potential;

struct Stochastic {
  SemiDual problem;
  SampleSource source;
  CostFn cost;
};

Stochastic stochastic_instance(const InstanceSpec& s, std::uint64_t seed) {
  auto J = make_instance(s, seed);
  auto src = SampleSource::finite(J.source().points(), J.source().weights(), seed);
  auto cost = tabulated_cost(std::make_shared<CostMatrix>(J.cost()));
  return {std::move(J), std::move(src), std::move(cost)};
}

TEST(StepSchedule, Values) {
  UotParams p;
  p.epsilon = 0.01;
  p.rho2 = 2.0;
  PasgdConfig c;
  c.scale_c = 3.0;
  c.schedule = StepSchedule::Poly;
  EXPECT_DOUBLE_EQ(step_size(c, p, 1), 3.0);
  EXPECT_DOUBLE_EQ(step_size(c, p, 8), 3.0 / 4.0);
  c.schedule = StepSchedule::PolyOffset;
  EXPECT_DOUBLE_EQ(step_size(c, p, 25), 3.0 * std::pow(125.0, -2.0 / 3.0));
  c.schedule = StepSchedule::OptLinear;
  EXPECT_DOUBLE_EQ(step_size(c, p, 50), 3.0 / (100.0 + 100.0));
  c.schedule = StepSchedule::InverseOffsetPoly;
  EXPECT_DOUBLE_EQ(step_size(c, p, 8), 3.0 / (100.0 + 4.0));
  EXPECT_THROW(step_size(c, p, 0), Error);
}

TEST(PasgdConfig, Validation) {
  PasgdConfig c;
  c.schedule = StepSchedule::Poly;
  c.exponent_gamma = 0.4;
  EXPECT_THROW(c.validate(), Error);
  c.exponent_gamma = 2.0 / 3.0;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c.batch_size = 1;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(parse_step_schedule("opt_linear"), StepSchedule::OptLinear);
  EXPECT_THROW(parse_step_schedule("cosine"), Error);
  EXPECT_EQ(parse_restart_mode("literal"), RestartMode::Literal);
  EXPECT_EQ(parse_averaging("suffix_half"), Averaging::SuffixHalf);
}

TEST(StochasticGradient, ExactBatchEqualsFullGradient) {
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    InstanceSpec s;
    s.n1 = 7;
    s.n2 = 5;
    s.source = d;
    s.source_mass = 2.5;
    s.epsilon = 0.1;
    auto inst = stochastic_instance(s, 31);
    std::mt19937_64 rng(31);
    const Vector g = random_potential(5, s.rho2, 0.1, 2.0, rng);
    const Vector est = stochastic_gradient(g, exact_batch(inst.problem.source()), inst.cost,
                                           inst.problem.target(), inst.problem.params());
    EXPECT_LT((est - inst.problem.evaluate(g).gradient).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(StochasticGradient, SinglePointSourceIsDeterministic) {
  InstanceSpec s;
  s.n1 = 1;
  s.n2 = 6;
  s.source_mass = 3.0;
  auto inst = stochastic_instance(s, 32);
  std::mt19937_64 rng(32);
  const Vector g = random_potential(6, s.rho2, 0.1, 2.0, rng);
  const Vector full = inst.problem.evaluate(g).gradient;
  for (int k = 0; k < 5; ++k) {
    const Batch b = draw_batch(inst.source, 4);
    const Vector est = stochastic_gradient(g, b, inst.cost, inst.problem.target(), inst.problem.params());
    EXPECT_LT((est - full).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(StochasticGradient, MetricCostMatchesTabulated) {
  InstanceSpec s;
  s.n1 = 4;
  s.n2 = 3;
  auto inst = stochastic_instance(s, 33);
  const auto metric = metric_cost(inst.problem.target().points());
  const Batch b = draw_batch(inst.source, 6);
  const Vector g = Vector::Constant(3, 0.3);
  const Vector a = stochastic_gradient(g, b, inst.cost, inst.problem.target(), inst.problem.params());
  const Vector c = stochastic_gradient(g, b, metric, inst.problem.target(), inst.problem.params());
  EXPECT_LT((a - c).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(StochasticGradient, UnbiasedMonteCarlo) {
  InstanceSpec s;
  s.n1 = 20;
  s.n2 = 5;
  s.epsilon = 0.1;
  auto inst = stochastic_instance(s, 34);
  std::mt19937_64 rng(34);
  const Vector g = random_potential(5, s.rho2, 0.1, 1.0, rng);
  const std::size_t m = 4;
  const int batches = 100000;
  Vector mean = Vector::Zero(5);
  for (int k = 0; k < batches; ++k) {
    mean += stochastic_gradient(g, draw_batch(inst.source, m), inst.cost, inst.problem.target(),
                                inst.problem.params());
  }
  mean /= batches;
  const double cb = c_bound(1.0, 1.0, inst.problem.params(), 0.1);
  const double tol = 3.0 * 2.0 * cb / std::sqrt(static_cast<double>(batches) * m);
  EXPECT_LT((mean - inst.problem.evaluate(g).gradient).lpNorm<1>(), tol);
}

TEST(StochasticGradient, VarianceBound) {
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    InstanceSpec s;
    s.n1 = 30;
    s.n2 = 6;
    s.source = d;
    s.epsilon = 0.05;
    auto inst = stochastic_instance(s, 35);
    std::mt19937_64 rng(35);
    const Vector g = random_potential(6, s.rho2, 0.1, 2.0, rng);
    const Vector full = inst.problem.evaluate(g).gradient;
    const double cb = c_bound(1.0, 1.0, inst.problem.params(), 0.1);
    for (std::size_t m : {1u, 8u}) {
      double var = 0.0;
      const int batches = 10000;
      for (int k = 0; k < batches; ++k) {
        const Vector e = stochastic_gradient(g, draw_batch(inst.source, m), inst.cost,
                                             inst.problem.target(), inst.problem.params());
        var += (e - full).squaredNorm();
      }
      EXPECT_LE(var / batches, 4.0 * cb * cb / static_cast<double>(m));
    }
  }
}

TEST(Pasgd, IteratesStayInProjectionSet) {
  InstanceSpec s;
  s.n1 = 40;
  s.n2 = 10;
  s.epsilon = 0.05;
  auto inst = stochastic_instance(s, 36);
  PasgdConfig c;
  c.scale_c = 10.0 / s.rho2;
  c.batch_size = 2;
  c.max_iters = 3000;
  c.projection_margin = 0.1;
  const auto r = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
  EXPECT_LE(r.max_coordinate, s.rho2 + 0.1);
  EXPECT_LE(r.average.max(), s.rho2 + 0.1);
  EXPECT_EQ(r.iterations, 3000u);
}

TEST(Pasgd, ZeroNoiseConvergesToStationarity) {
  // Single source point: the estimator is exact and PASGD is deterministic descent.
  InstanceSpec s;
  s.n1 = 1;
  s.n2 = 3;
  s.epsilon = 0.5;
  s.rho1 = 1.0;
  s.rho2 = 0.5;
  s.target_mass = 3.0;
  auto inst = stochastic_instance(s, 37);
  PasgdConfig c;
  c.schedule = StepSchedule::OptLinear;
  c.scale_c = 2.0;
  c.batch_size = 1;
  c.max_iters = 10000;
  const auto r = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
  EXPECT_LE(inst.problem.evaluate(r.last.values()).gradient.norm(), 1e-8);
}

TEST(Pasgd, ReproducibleFromSeed) {
  InstanceSpec s;
  s.n1 = 30;
  s.n2 = 8;
  auto inst = stochastic_instance(s, 38);
  PasgdConfig c;
  c.scale_c = 8.0;
  c.batch_size = 3;
  c.max_iters = 500;
  c.seed = 5;
  const auto a = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
  const auto b = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
  EXPECT_EQ(a.average.values(), b.average.values());
  EXPECT_EQ(a.last.values(), b.last.values());
  c.seed = 6;
  const auto d = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
  EXPECT_NE(a.last.values(), d.last.values());
}

TEST(Pasgd, AveragingModes) {
  InstanceSpec s;
  s.n1 = 30;
  s.n2 = 8;
  auto inst = stochastic_instance(s, 39);
  PasgdConfig c;
  c.scale_c = 8.0;
  c.max_iters = 1;
  auto r = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
  EXPECT_EQ(r.average.values(), r.last.values());
  c.max_iters = 2;
  c.averaging = Averaging::SuffixHalf;
  r = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
  EXPECT_LT((r.average.values() - r.last.values()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Pasgd, CheckpointsReportGaps) {
  InstanceSpec s;
  s.n1 = 30;
  s.n2 = 8;
  s.epsilon = 0.1;
  auto inst = stochastic_instance(s, 40);
  FullBatchConfig fc;
  fc.tol = 1e-12;
  const auto ref_run = anag_solve(inst.problem, fc);
  ASSERT_TRUE(ref_run.converged);
  PasgdReference ref{[&](const Eigen::Ref<const Vector>& g) { return inst.problem.objective(g); },
                     ref_run.objective, ref_run.g.values()};
  PasgdConfig c;
  c.scale_c = 8.0 / s.rho2;
  c.batch_size = 4;
  c.max_iters = 4000;
  c.checkpoints = {10, 100, 1000};
  const auto r = pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c, &ref);
  ASSERT_EQ(r.checkpoints.size(), 4u);
  EXPECT_EQ(r.checkpoints.back().iter, 4000u);
  EXPECT_EQ(r.trace.size(), 4u);
  for (const auto& cp : r.checkpoints) {
    EXPECT_GE(cp.gap_average, -1e-12);
    EXPECT_GE(cp.dist2_last, 0.0);
  }
  EXPECT_LT(r.checkpoints.back().gap_average, r.checkpoints.front().gap_average);
}

TEST(Pasgd, DivergenceDetector) {
  InstanceSpec s;
  s.n1 = 30;
  s.n2 = 8;
  auto inst = stochastic_instance(s, 41);
  PasgdConfig c;
  c.schedule = StepSchedule::Poly;
  c.scale_c = 1e7;
  c.batch_size = 1;
  c.max_iters = 100;
  try {
    pasgd_solve(inst.source, inst.cost, inst.problem.target(), inst.problem.params(), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericFailure);
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(Pasgd, GeneratorStream) {
  InstanceSpec s;
  s.n2 = 5;
  s.dim = 3;
  auto J = make_instance(s, 42);
  auto src = gaussian_mixture_sampler({{Vector::Constant(3, 0.5), 0.01}}, 3, 1);
  PasgdConfig c;
  c.scale_c = 5.0;
  c.batch_size = 4;
  c.max_iters = 200;
  const auto r = pasgd_solve(src, metric_cost(J.target().points()), J.target(), J.params(), c);
  EXPECT_TRUE(r.average.is_finite());
  EXPECT_THROW(pasgd_solve(src, tabulated_cost(std::make_shared<CostMatrix>(J.cost())), J.target(),
                           J.params(), c),
               Error);
}

TEST(Anag, MomentumVanishesAtStrongConvexity) {
  EXPECT_EQ(nesterov_momentum(0.25, 0.25), 0.0);
  EXPECT_GT(nesterov_momentum(4.0, 1.0), 0.0);
}

TEST(Anag, StartAtOptimumStopsImmediately) {
  InstanceSpec s;
  s.n1 = 8;
  s.n2 = 6;
  const auto J = make_instance(s, 43);
  FullBatchConfig c;
  c.tol = 1e-11;
  const auto first = anag_solve(J, c);
  ASSERT_TRUE(first.converged);
  const auto again = anag_solve(J, c, first.g.values());
  EXPECT_TRUE(again.converged);
  EXPECT_EQ(again.iterations, 0u);
  EXPECT_EQ(again.restarts, 0u);
}

TEST(Anag, ConvergesOnSmallEpsilonInstance) {
  InstanceSpec s;
  s.n1 = 200;
  s.n2 = 200;
  s.dim = 10;
  s.epsilon = 0.01;
  s.rho1 = s.rho2 = 10.0;
  s.weight_spread = 0.0;
  const auto J = make_instance(s, 44);
  FullBatchConfig c;
  c.tol = 1e-9;
  const auto r = anag_solve(J, c);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.grad_norm, 1e-9);
  EXPECT_LE(r.g.max(), s.rho2 + 1e-6);
  EXPECT_LE(r.max_step_point, s.rho2 + J.params().margin_safeguard);
  EXPECT_EQ(r.objectives.size(), r.iterations + 1);
  EXPECT_EQ(r.step_bounds.size(), r.iterations);
}

TEST(Anag, RestartsKeepStepPointsInSafeguardSet) {
  // Half of the targets are unreachable (costs shifted by 3) and carry ten times
  // the weight. Their coordinates follow a quadratic stiffer than mu, so the
  // momentum overshoots rho2 on the way up from g0.
  const RowMatrix x = uniform_cube_points(20, 2, 1);
  const RowMatrix y = uniform_cube_points(15, 2, 2);
  RowMatrix c = build_cost_matrix(x, y).values();
  Vector b = Vector::Ones(15);
  for (int j = 0; j < 15; j += 2) {
    c.col(j).array() += 3.0;
    b[j] = 10.0;
  }
  UotParams p;
  p.epsilon = 0.05;
  p.rho1 = p.rho2 = 0.5;
  p.margin_project = 0.1;
  p.margin_safeguard = 0.1;
  const SemiDual J(DiscreteMeasure::uniform(x), CostMatrix(c), DiscreteMeasure(y, b / b.sum()), p);
  for (auto mode : {RestartMode::ZeroMomentum, RestartMode::Literal}) {
    FullBatchConfig cfg;
    cfg.tol = 1e-9;
    cfg.restart_mode = mode;
    const auto r = anag_solve(J, cfg, Vector::Constant(15, -20.0));
    EXPECT_TRUE(r.converged) << to_string(mode);
    EXPECT_GT(r.restarts, 0u) << to_string(mode);
    EXPECT_LE(r.max_step_point, p.rho2 + p.margin_safeguard) << to_string(mode);
    EXPECT_EQ(std::count(r.restart_flags.begin(), r.restart_flags.end(), true),
              static_cast<std::ptrdiff_t>(r.restarts));
  }
}

TEST(Anag, ContractionBoundOnRestartFreeRuns) {
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    InstanceSpec s;
    s.n1 = 30;
    s.n2 = 20;
    s.dim = 5;
    s.source = d;
    s.epsilon = 0.05;
    const auto J = make_instance(s, 46);
    FullBatchConfig c;
    c.tol = 1e-13;
    const auto star = anag_solve(J, c);
    c.tol = 1e-7;
    const auto r = anag_solve(J, c);
    ASSERT_TRUE(r.converged);
    ASSERT_EQ(r.restarts, 0u);
    const double mu = J.strong_convexity();
    const Vector g0 = Vector::Zero(20);
    double bound = r.objectives[0] - star.objective + 0.5 * mu * (g0 - star.g.values()).squaredNorm();
    for (std::size_t t = 0; t < r.iterations; ++t) {
      bound *= 1.0 - std::sqrt(mu / r.step_bounds[t]);
      EXPECT_LE(r.objectives[t + 1] - star.objective, 1.05 * bound) << "t = " << t;
    }
  }
}

TEST(Anag, StepBoundShrinksNearOptimum) {
  InstanceSpec s;
  s.n1 = 60;
  s.n2 = 40;
  s.dim = 5;
  s.epsilon = 0.02;
  const auto J = make_instance(s, 47);
  FullBatchConfig c;
  c.tol = 1e-10;
  const auto r = anag_solve(J, c);
  ASSERT_TRUE(r.converged);
  const double threshold = J.beta_max() * (1.0 / s.epsilon + 1.0 / s.rho2);
  bool active = false;
  for (std::size_t t = 0; t + 1 < r.step_bounds.size(); ++t) {
    if (!active && r.trace.records().size() > t && r.trace.records()[t].grad_norm_2 < threshold) active = true;
    if (active) EXPECT_LE(r.step_bounds[t + 1], 1.1 * r.step_bounds[t]) << "t = " << t;
  }
  EXPECT_TRUE(active);
}

TEST(GradientDescent, QuadraticContraction) {
  InstanceSpec s;
  s.n1 = 3;
  s.n2 = 6;
  s.rho2 = 2.0;
  auto J = make_instance(s, 48);
  J.set_transport_enabled(false);
  const double L = 3.0 * J.beta_max() / s.rho2;
  const double mu = J.strong_convexity();
  FullBatchConfig c;
  c.tol = 1e-12;
  const auto r = gd_solve(J, L, c, Vector::Constant(6, -5.0));
  ASSERT_TRUE(r.converged);
  const auto& rec = r.trace.records();
  for (std::size_t t = 1; t < rec.size(); ++t) {
    EXPECT_LE(rec[t].grad_norm_2, (1.0 - mu / L) * rec[t - 1].grad_norm_2 * (1 + 1e-12));
  }
}

TEST(GradientDescent, MonotoneWithGlobalStep) {
  InstanceSpec s;
  s.n1 = 50;
  s.n2 = 50;
  s.dim = 5;
  s.epsilon = 0.1;
  const auto J = make_instance(s, 49);
  FullBatchConfig c;
  c.max_iters = 3000;
  c.tol = 1e-10;
  const auto r = gd_solve(J, global_smoothness(J, J.params().margin_project), c);
  for (std::size_t t = 1; t < r.objectives.size(); ++t) {
    ASSERT_LE(r.objectives[t], r.objectives[t - 1] + 1e-12) << "t = " << t;
  }
}

TEST(Baselines, AllMethodsReachTheSameOptimum) {
  InstanceSpec s;
  s.n1 = 15;
  s.n2 = 12;
  s.epsilon = 0.2;
  const auto J = make_instance(s, 50);
  FullBatchConfig c;
  c.tol = 1e-9;
  c.max_iters = 200000;
  const double L = global_smoothness(J, J.params().margin_project);
  const auto a = anag_solve(J, c);
  const auto b = adaptive_gd_solve(J, c);
  const auto g = gd_solve(J, L, c);
  const auto n = nag_solve_fixed(J, L, c);
  for (const auto* r : {&a, &b, &g, &n}) {
    ASSERT_TRUE(r->converged);
    EXPECT_LT((r->g.values() - a.g.values()).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_LT(a.iterations, g.iterations);
  EXPECT_THROW(gd_solve(J, -1.0, c), Error);
}

}  // namespace
}  // namespace uot
