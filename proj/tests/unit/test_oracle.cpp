#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "uot/error.hpp"
#include "uot/oracle.hpp"
#include "uot/solvers.hpp"

namespace uot {
namespace {

using testing::InstanceSpec;
using testing::make_instance;

TEST(FiniteDifference, QuadraticAndLinear) {
  Eigen::MatrixXd A(3, 3);
  A << 4, 1, 0, 1, 3, -1, 0, -1, 2;
  const Vector b = Vector::LinSpaced(3, -1.0, 1.0);
  ScalarFn f = [&](const Eigen::Ref<const Vector>& x) { return 0.5 * x.dot(A * x) + b.dot(x); };
  VectorFn grad = [&](const Eigen::Ref<const Vector>& x) -> Vector { return A * x + b; };
  const Vector x = Vector::Constant(3, 0.7);
  const double h = fd_gradient_step(x);
  EXPECT_LT((fd_gradient(f, x, h) - grad(x)).norm(), 1e-8);
  EXPECT_LT((fd_hessian(grad, x, h) - A).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(fd_third_directional(f, x, Vector::Ones(3), 1e-2), 0.0, 1e-8);
  ScalarFn cube = [](const Eigen::Ref<const Vector>& v) { return v[0] * v[0] * v[0]; };
  EXPECT_NEAR(fd_third_directional(cube, Vector::Zero(1), Vector::Ones(1), 1e-2), 6.0, 1e-8);
  EXPECT_THROW(fd_gradient(f, x, 0.0), Error);
}

TEST(PrimalOracle, SingleCellMatchesGridSearch) {
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    InstanceSpec s;
    s.n1 = 1;
    s.n2 = 1;
    s.source = d;
    s.source_mass = 1.3;
    s.target_mass = 0.6;
    const auto J = make_instance(s, 60);
    const auto plan = primal_solve_tiny(J.source(), J.cost(), J.target(), J.params());
    ASSERT_TRUE(plan.converged);
    double best = std::numeric_limits<double>::infinity();
    RowMatrix p(1, 1);
    for (int k = 1; k <= 400000; ++k) {
      p(0, 0) = 4.0 * k / 400000.0;
      best = std::min(best, primal_objective(p, J.source(), J.cost(), J.target(), J.params()));
    }
    EXPECT_LE(plan.objective, best + 1e-9);
    EXPECT_GE(plan.objective, best - 1e-8);
  }
}

TEST(PrimalOracle, WeakDualityOnRandomPotentials) {
  std::mt19937_64 rng(61);
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    InstanceSpec s;
    s.n1 = 3;
    s.n2 = 4;
    s.source = d;
    const auto J = make_instance(s, 61);
    const auto plan = primal_solve_tiny(J.source(), J.cost(), J.target(), J.params());
    ASSERT_TRUE(plan.converged);
    const double K = duality_constant(J.source(), J.target(), J.params());
    for (int k = 0; k < 50; ++k) {
      const Vector g = testing::random_potential(4, s.rho2, 0.0, 3.0, rng);
      EXPECT_LE(K - J.objective(g), plan.objective + 1e-10);
    }
  }
}

TEST(PrimalOracle, StrongDualityAndCoupling) {
  for (auto d : {SourceDivergence::KL, SourceDivergence::Chi2}) {
    InstanceSpec s;
    s.n1 = 2;
    s.n2 = 3;
    s.source = d;
    s.epsilon = 0.3;
    s.rho1 = 0.8;
    s.rho2 = 1.5;
    s.source_mass = 1.4;
    s.target_mass = 0.9;
    const auto J = make_instance(s, 62);
    FullBatchConfig c;
    c.tol = 1e-12;
    const auto star = anag_solve(J, c);
    ASSERT_TRUE(star.converged);
    const auto rep = duality_gap(J, star.g.values());
    ASSERT_TRUE(rep.plan.converged);
    EXPECT_LT(std::abs(rep.gap), 1e-8) << to_string(d);
    const RowMatrix pi = J.coupling(star.g.values());
    EXPECT_LT((pi - rep.plan.pi).cwiseAbs().maxCoeff(), 1e-3);
    const Vector expected_cols =
        J.target().weights().array() * (1.0 - star.g.values().array() / s.rho2);
    EXPECT_LT((rep.plan.col_marginal() - expected_cols).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(PrimalOracle, DualityGapNeedsStationarity) {
  InstanceSpec s;
  const auto J = make_instance(s, 63);
  EXPECT_THROW(duality_gap(J, Vector::Zero(4)), Error);
}

TEST(PrimalOracle, CapacityLimit) {
  InstanceSpec s;
  s.n1 = 11;
  s.n2 = 10;
  const auto J = make_instance(s, 64);
  try {
    primal_solve_tiny(J.source(), J.cost(), J.target(), J.params());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Capacity);
  }
}

TEST(PrimalOracle, ObjectiveRejectsBadPlans) {
  InstanceSpec s;
  const auto J = make_instance(s, 65);
  RowMatrix pi = RowMatrix::Constant(3, 4, 0.1);
  EXPECT_NO_THROW(primal_objective(pi, J.source(), J.cost(), J.target(), J.params()));
  pi(0, 0) = -1.0;
  EXPECT_THROW(primal_objective(pi, J.source(), J.cost(), J.target(), J.params()), Error);
  EXPECT_THROW(primal_objective(RowMatrix::Zero(2, 4), J.source(), J.cost(), J.target(), J.params()),
               Error);
}

}  // namespace
}  // namespace uot
