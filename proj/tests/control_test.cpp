#include <random>

#include "gtest/gtest.h"
#include "tvcbf/control.hpp"
#include "oracles.hpp"

namespace tvcbf {
namespace {

ConstraintRow make_row(const Eigen::VectorXd& a, double c, int j = 0) {
  ConstraintRow r;
  r.a = a;
  r.c = c;
  r.obstacle_index = j;
  return r;
}

TEST(TvcbfQp, NoRowsPassesThrough) {
  const Eigen::Vector2d u_ref(0.3, -0.7);
  const auto res = tvcbf_qp(u_ref, {}, ControlBox::symmetric(2, 1.0));
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_EQ(res.u, Eigen::VectorXd(u_ref));
}

TEST(TvcbfQp, HalfspaceProjection) {
  const auto res = tvcbf_qp(Eigen::Vector2d(-2, 0), {make_row(Eigen::Vector2d(1, 0), 0.0)}, ControlBox::symmetric(2, 10.0));
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_LT(res.u.norm(), 1e-12);
  ASSERT_EQ(res.active_rows.size(), 1u);
}

TEST(TvcbfQp, ContradictoryRowsAreInfeasible) {
  const std::vector<ConstraintRow> rows = {make_row(Eigen::Vector2d(1, 0), 1.0), make_row(Eigen::Vector2d(-1, 0), 1.0)};
  EXPECT_EQ(tvcbf_qp(Eigen::Vector2d::Zero(), rows, ControlBox::symmetric(2, 10.0)).status, QpStatus::kInfeasible);
}

TEST(TvcbfQp, BoxClampsReference) {
  const auto res = tvcbf_qp(Eigen::Vector2d(50, 0), {}, ControlBox::symmetric(2, 1.0));
  EXPECT_LT((res.u - Eigen::Vector2d(1, 0)).norm(), 1e-12);
}

TEST(TvcbfQp, FeasibleReferencePassthroughIsExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int m = 2 + t % 3;
    const Eigen::VectorXd u_ref = Eigen::VectorXd::NullaryExpr(m, [&] { return 0.5 * g(rng); });
    std::vector<ConstraintRow> rows;
    for (int i = 0; i < 1 + t % 5; ++i) {
      const Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(m, [&] { return g(rng); });
      rows.push_back(make_row(a, a.dot(u_ref) - std::abs(g(rng)) - 1e-3, i));
    }
    const auto res = tvcbf_qp(u_ref, rows, ControlBox::symmetric(m, 2.0));
    ASSERT_EQ(res.status, QpStatus::kOptimal);
    EXPECT_LT((res.u - u_ref).norm(), 1e-9);
  }
}

TEST(TvcbfQp, MatchesDenseEnumeration) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const int m = 2 + t % 2;
    const Eigen::VectorXd u_ref = Eigen::VectorXd::NullaryExpr(m, [&] { return 2.0 * g(rng); });
    std::vector<ConstraintRow> rows;
    for (int i = 0; i < 1 + t % 3; ++i) {
      rows.push_back(make_row(Eigen::VectorXd::NullaryExpr(m, [&] { return g(rng); }), g(rng), i));
    }
    const Eigen::VectorXd expected = testing::enumerate_projection(u_ref, rows);
    const auto res = tvcbf_qp(u_ref, rows, ControlBox::unbounded(m));
    if (expected.size() == 0) {
      EXPECT_NE(res.status, QpStatus::kOptimal);
      continue;
    }
    ASSERT_EQ(res.status, QpStatus::kOptimal);
    EXPECT_LT((res.u - expected).norm(), 1e-7);
    // complementary slackness: inactive rows carry no multiplier, active rows are tight
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double slack = rows[i].a.dot(res.u) - rows[i].c;
      EXPECT_GE(slack, -1e-7);
      if (res.row_duals[i] > 0.0) {
        EXPECT_LT(std::abs(slack), 1e-7);
      }
      if (slack > 1e-7) {
        EXPECT_EQ(res.row_duals[i], 0.0);
      }
    }
    ++checked;
  }
  EXPECT_GT(checked, 200);
}

TEST(InfeasibleFallback, MaximizesWorstMargin) {
  const std::vector<ConstraintRow> rows = {make_row(Eigen::Vector2d(1, 0), 1.0), make_row(Eigen::Vector2d(-1, 0), 1.0)};
  const Eigen::VectorXd u = infeasible_fallback(Eigen::Vector2d(0.8, 0.3), rows, ControlBox::symmetric(2, 1.0));
  EXPECT_NEAR(u.x(), 0.0, 1e-4);
  EXPECT_NEAR(u.y(), 0.3, 1e-4);
}

TEST(InfeasibleFallback, StaysInBox) {
  const std::vector<ConstraintRow> rows = {make_row(Eigen::Vector2d(1, 0), 5.0)};
  const Eigen::VectorXd u = infeasible_fallback(Eigen::Vector2d(0, 0), rows, ControlBox::symmetric(2, 1.0));
  EXPECT_NEAR(u.x(), 1.0, 1e-9);
  EXPECT_TRUE(ControlBox::symmetric(2, 1.0).contains(u, 1e-12));
}

TEST(SafetyFilter, FallbackAndEmergencyAreFlagged) {
  SafetyFilter f(CbfConfig{}, ControlBox::symmetric(2, 1.0));
  auto res = f.filter(Eigen::Vector2d(0.5, 0), {make_row(Eigen::Vector2d(1, 0), 5.0)});
  EXPECT_TRUE(res.fallback);
  EXPECT_EQ(res.status, QpStatus::kInfeasible);
  ConstraintRow stop = make_row(Eigen::Vector2d::Zero(), 0.0);
  stop.emergency = true;
  res = f.filter(Eigen::Vector2d(0.5, 0), {stop});
  EXPECT_TRUE(res.emergency);
  EXPECT_EQ(res.u, Eigen::VectorXd(Eigen::Vector2d::Zero()));
}

TEST(SafetyFilter, PrunesFarRows) {
  SafetyFilter f(CbfConfig{}, ControlBox::symmetric(2, 1.0));
  ConstraintRow far = make_row(Eigen::Vector2d(1, 0), 5.0);
  far.alpha_star = 80.0;
  far.h = 500.0;
  const auto res = f.filter(Eigen::Vector2d(0.5, 0), {far});
  EXPECT_EQ(res.rows_used, 0);
  EXPECT_FALSE(res.fallback);
  // an inflated value far above the threshold does not hide a near pair
  far.alpha_star = 2.0;
  EXPECT_EQ(f.filter(Eigen::Vector2d(0.5, 0), {far}).rows_used, 1);
}

TEST(References, Proportional) {
  EXPECT_LT(proportional_reference(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2), 2.0).norm(), 1e-15);
  EXPECT_EQ(proportional_reference(Eigen::Vector2d(-5, -0.5), Eigen::Vector2d(20, -0.5), 2.0),
            Eigen::VectorXd(Eigen::Vector2d(50, 0)));
  EXPECT_EQ(proportional_reference(Eigen::Vector2d(-5, -0.5), Eigen::Vector2d(20, -0.5), 0.0).norm(), 0.0);
}

TEST(References, ProportionalDerivative) {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  EXPECT_EQ(pd_reference(one, one, Eigen::VectorXd::Zero(1), one, one).norm(), 0.0);
  EXPECT_DOUBLE_EQ(pd_reference(Eigen::VectorXd::Zero(1), 2 * one, one, one, one)[0], 1.0);
  const Eigen::Vector3d q(1, 2, 3), qb(0, 0, 1), kp(2, 2, 2);
  EXPECT_LT((pd_reference(q, qb, Eigen::Vector3d(4, 5, 6), kp, Eigen::Vector3d::Zero()) -
             proportional_reference(q, qb, 2.0)).norm(), 1e-15);
  EXPECT_THROW(pd_reference(q, qb, q, -kp, kp), ParameterError);
}

std::vector<Eigen::VectorXd> constant_velocity(const Eigen::Vector2d& p0, const Eigen::Vector2d& v, const MpcConfig& cfg) {
  std::vector<Eigen::VectorXd> out;
  for (int k = 1; k <= cfg.steps(); ++k) out.push_back(p0 + v * k * cfg.sample_time);
  return out;
}

TEST(Mpc, ConfigValidation) {
  MpcConfig cfg;
  EXPECT_EQ(cfg.steps(), 30);
  EXPECT_NO_THROW(cfg.validate());
  cfg.sample_time = 0.04;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = MpcConfig{};
  cfg.w_avoid = -1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(Mpc, FarObstacleTracksTarget) {
  MpcConfig cfg;
  const auto res = mpc_baseline(Eigen::Vector2d(-5, -0.5), Eigen::Vector2d(20, -0.5),
                                constant_velocity(Eigen::Vector2d(100, 50), Eigen::Vector2d::Zero(), cfg), cfg,
                                ControlBox::symmetric(2, 1.0));
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_EQ(res.avoidance_rows, 0);
  EXPECT_NEAR(res.u.x(), 1.0, 1e-9);
  EXPECT_NEAR(res.u.y(), 0.0, 1e-9);
}

TEST(Mpc, ZeroAvoidWeightMovesTowardTarget) {
  MpcConfig cfg;
  cfg.w_avoid = 0.0;
  const Eigen::Vector2d x0(0, 0), target(3, 4);
  const auto res = mpc_baseline(x0, target, constant_velocity(Eigen::Vector2d(2, 2), Eigen::Vector2d::Zero(), cfg), cfg,
                                ControlBox::unbounded(2));
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_GT(res.u.normalized().dot((target - x0).normalized()), 0.0);
}

TEST(Mpc, HalfspacesPushPlanAway) {
  MpcConfig cfg;
  const Eigen::Vector2d obstacle(2.5, 0.0);
  const auto res = mpc_baseline(Eigen::Vector2d(0, -0.5), Eigen::Vector2d(20, -0.5),
                                constant_velocity(obstacle, Eigen::Vector2d::Zero(), cfg), cfg,
                                ControlBox::symmetric(2, 1.0));
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_GT(res.avoidance_rows, 0);
  EXPECT_LT(res.u.x(), 1.0 - 1e-3);
}

}  // namespace
}  // namespace tvcbf
