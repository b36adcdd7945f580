#include <cmath>
#include <map>
#include <memory>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "tvcbf/cbf.hpp"
#include "tvcbf/estimation.hpp"

namespace tvcbf {

const char* kind_name(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::kSphere: return "Sphere";
    case PrimitiveKind::kCapsule: return "Capsule";
    case PrimitiveKind::kPolytope: return "Polytope";
  }
  return "Unknown";
}

void PrintTo(PrimitiveKind kind, std::ostream* os) { *os << kind_name(kind); }

namespace {

Eigen::MatrixXd planar_jacobian() {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(6, 2);
  j(0, 0) = 1.0;
  j(1, 1) = 1.0;
  return j;
}

struct CirclePair {
  ConvexPrimitive robot = ConvexPrimitive::sphere(0.5);
  ConvexPrimitive obstacle = ConvexPrimitive::sphere(1.5);
  BodyPairState state;

  CirclePair(const Vec3& pr, const Vec3& po, const Vec3& vo = Vec3::Zero(), double dt = 0.01) {
    state.robot = &robot;
    state.obstacle = &obstacle;
    state.robot_pose = Pose(pr);
    state.pose_jacobian = planar_jacobian();
    state.obstacle_pose = Pose(po);
    state.obstacle_velocity = vo;
    state.obstacle_pose_next = Pose(po + dt * vo);
    state.obstacle_covariance = Mat3::Identity() * 0.5;
  }
  CirclePair(const CirclePair&) = delete;
};

TEST(CbfValue, MovingCirclesStart) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0));
  EXPECT_NEAR(cbf_value(p.state, CbfConfig{}), 3.97625, 1e-4);
}

TEST(CbfValue, TouchingCircles) {
  CirclePair p(Vec3(0, 0, 0), Vec3(2, 0, 0));
  CbfConfig cfg;
  cfg.beta = 1.0;
  EXPECT_NEAR(cbf_value(p.state, cfg), 0.0, 1e-12);
  cfg.beta = 1.03;
  EXPECT_NEAR(cbf_value(p.state, cfg), -0.03, 1e-12);
}

TEST(CbfValue, DegenerateGivesSentinelAndEmergencyRow) {
  CirclePair p(Vec3(1, 1, 0), Vec3(1, 1, 0));
  EXPECT_EQ(cbf_value(p.state, CbfConfig{}), kUnsafeSentinel);
  const auto row = constraint_row(p.state, CbfConfig{}, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_TRUE(row.emergency);
}

TEST(CbfConfig, Validation) {
  CbfConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.beta = 0.5;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = CbfConfig{};
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = CbfConfig{};
  cfg.dt = -1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(CbfTimePartial, StaticObstacleIsZero) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0));
  EXPECT_EQ(cbf_time_partial(p.state, CbfConfig{}), 0.0);
}

TEST(CbfTimePartial, HeadOnApproach) {
  CirclePair p(Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(-4, 0, 0));
  EXPECT_NEAR(cbf_time_partial(p.state, CbfConfig{}), -2.0, 1e-6);
}

TEST(CbfTimePartial, PerpendicularMotion) {
  const double dt = 0.01;
  CirclePair p(Vec3(0, 0, 0), Vec3(5, 0, 0), Vec3(0, 4, 0), dt);
  EXPECT_LE(std::abs(cbf_time_partial(p.state, CbfConfig{})), 10 * dt);
}

TEST(CbfTimePartial, ForcedZeroWhenNotTimeVarying) {
  CirclePair p(Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(-4, 0, 0));
  CbfConfig cfg;
  cfg.time_varying = false;
  EXPECT_EQ(cbf_time_partial(p.state, cfg), 0.0);
}

TEST(CbfTimePartial, FirstOrderConvergence) {
  // alpha = |p_o - p_r| / 2 with p_o(t) = (5, -1 + 4t).
  const double analytic = (-1.0 * 4.0) / (std::sqrt(26.0) * 2.0);
  double prev_err = 0.0;
  for (double dt : {1e-2, 1e-3, 1e-4}) {
    CirclePair p(Vec3(0, 0, 0), Vec3(5, -1, 0), Vec3(0, 4, 0), dt);
    CbfConfig cfg;
    cfg.dt = dt;
    const double err = std::abs(cbf_time_partial(p.state, cfg) - analytic);
    EXPECT_LT(err, 2.0 * dt);
    if (prev_err > 0.0) EXPECT_LT(err, 0.2 * prev_err);
    prev_err = err;
  }
}

TEST(WorstCase, Examples) {
  const Vec3 mu(1, 2, 3);
  EXPECT_EQ(worst_case_position(mu, Mat3::Identity(), 0.0, Vec3(1, 0, 0)).position, mu);
  const Vec3 g = Vec3(1, 2, -2);
  const auto iso = worst_case_position(mu, Mat3::Identity() * 0.25, 3.0, g);
  EXPECT_LT((iso.position - (mu + 3.0 * 0.5 * g.normalized())).norm(), 1e-12);
  const auto aniso = worst_case_position(mu, Vec3(4, 1, 1).asDiagonal().toDenseMatrix(), 3.0, Vec3(1, 0, 0));
  EXPECT_LT((aniso.position - (mu + Vec3(6, 0, 0))).norm(), 1e-12);
  const auto flat = worst_case_position(mu, Mat3::Identity(), 3.0, Vec3::Zero());
  EXPECT_TRUE(flat.fallback);
  EXPECT_EQ(flat.position, mu);
}

TEST(WorstCase, LiesOnMahalanobisShell) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Mat3 l = Mat3::Random();
    const Mat3 cov = l * l.transpose() + 0.05 * Mat3::Identity();
    const Vec3 mu = testing::random_vec(rng, -5, 5);
    const double k = 0.1 + 3.0 * std::abs(testing::random_vec(rng, -1, 1).x());
    const auto wc = worst_case_position(mu, cov, k, testing::random_vec(rng, -1, 1));
    EXPECT_NEAR(mahalanobis(wc.position, mu, cov), k, 1e-9);
  }
}

TEST(WorstCase, IsotropicCirclesMatchClosedForm) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0));
  const double sigma = std::sqrt(0.5), k = 3.0, beta = 1.03;
  const double d = std::sqrt(100.25);
  const double expected = (d - k * sigma) / 2.0 - beta;
  CbfConfig cfg;
  cfg.k = k;
  cfg.noise_robust = true;
  EXPECT_NEAR(cbf_value(p.state, cfg), expected, 1e-9);
  const auto bf = brute_force_worst_config(p.state, beta, k, p.state.obstacle_covariance, 24);
  EXPECT_NEAR(bf.h, expected, 2e-3);
  EXPECT_GE(bf.h, expected - 1e-9);
}

TEST(WorstCase, BruteForceKZeroIsMean) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0));
  const auto bf = brute_force_worst_config(p.state, 1.03, 0.0, Mat3::Identity(), 16);
  EXPECT_EQ(bf.position, Vec3(5, 0, 0));
}

CbfConfig robust_config() {
  CbfConfig cfg;
  cfg.k = 3.0;
  cfg.noise_robust = true;
  return cfg;
}

Mat3 random_anisotropic_covariance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.3, 0.6);
  const Mat3 r = testing::random_quat(rng).toRotationMatrix();
  const Vec3 sd(u(rng), u(rng), u(rng));
  return r * sd.cwiseAbs2().asDiagonal() * r.transpose();
}

struct RandomWorstCase {
  std::shared_ptr<ConvexPrimitive> obstacle;
  BodyPairState state;
  double h_d = 0.0;
  BruteForceResult grid;
};

const ConvexPrimitive& unit_robot() {
  static const ConvexPrimitive robot = ConvexPrimitive::sphere(0.5);
  return robot;
}

// 50 well-separated cases per obstacle kind; the grid search is the slow part.
const std::vector<RandomWorstCase>& random_worst_cases(PrimitiveKind kind) {
  static std::map<PrimitiveKind, std::vector<RandomWorstCase>> cache;
  auto& out = cache[kind];
  if (!out.empty()) return out;
  std::mt19937_64 rng(11 + static_cast<int>(kind));
  while (out.size() < 50) {
    RandomWorstCase c;
    c.obstacle = std::make_shared<ConvexPrimitive>(testing::random_primitive(rng, kind));
    BodyPairState& s = c.state;
    s.robot = &unit_robot();
    s.obstacle = c.obstacle.get();
    s.robot_pose = Pose(testing::random_vec(rng, -1, 1));
    s.pose_jacobian = planar_jacobian();
    s.obstacle_pose = Pose(Vec3(6, 0, 0) + testing::random_vec(rng, -2, 2), testing::random_quat(rng));
    s.obstacle_pose_next = s.obstacle_pose;
    s.obstacle_covariance = random_anisotropic_covariance(rng);
    c.h_d = cbf_value(s, robust_config());
    c.grid = brute_force_worst_config(s, robust_config().beta, robust_config().k, s.obstacle_covariance, 16);
    if (!std::isfinite(c.h_d) || c.grid.h < 0.2) continue;  // keep bodies well apart
    out.push_back(std::move(c));
  }
  return out;
}

class WorstCaseRandom : public ::testing::TestWithParam<PrimitiveKind> {};

TEST_P(WorstCaseRandom, HeuristicDominatesMean) {
  for (const auto& c : random_worst_cases(GetParam())) {
    EXPECT_LE(c.h_d, cbf_value(c.state, CbfConfig{}) + 1e-12);
  }
}

TEST_P(WorstCaseRandom, HeuristicTracksGridOracle) {
  for (const auto& c : random_worst_cases(GetParam())) {
    EXPECT_LE(c.h_d, c.grid.h + 0.02);
  }
}

// alpha* is a gauge in the relative translation, hence convex: the grid
// minimum cannot fall below the linearized ellipsoid minimum.
TEST_P(WorstCaseRandom, GridOracleRespectsConvexityBound) {
  const CbfConfig cfg = robust_config();
  for (const auto& c : random_worst_cases(GetParam())) {
    const BodyPairState& s = c.state;
    const auto sol = min_scaling(*s.robot, s.robot_pose, *s.obstacle, s.obstacle_pose);
    const auto g = min_scaling_gradient(*s.robot, s.robot_pose, *s.obstacle, s.obstacle_pose, sol).b.position;
    const double lower = sol.alpha_star - cfg.beta - cfg.k * std::sqrt(g.dot(s.obstacle_covariance * g));
    EXPECT_GE(c.grid.h, lower - 1e-6);
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, WorstCaseRandom,
                         ::testing::Values(PrimitiveKind::kSphere, PrimitiveKind::kCapsule, PrimitiveKind::kPolytope),
                         [](const auto& info) -> std::string { return kind_name(info.param); });

TEST(WorstCase, FlippedDirectionIsNotWorse) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0));
  CbfConfig cfg;
  cfg.k = 3.0;
  cfg.noise_robust = true;
  const double h = cbf_value(p.state, cfg);
  cfg.flip_worst_case = true;
  EXPECT_GT(cbf_value(p.state, cfg), h);
}

TEST(InflatedCbf, EqualVelocitiesGiveMinusBeta) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0), Vec3(1, 0, 0));
  p.state.robot_velocity = Vec3(1, 0, 0);
  EXPECT_DOUBLE_EQ(inflated_cbf_value(p.state, CbfConfig{}), -1.03);
}

TEST(InflatedCbf, ZeroGainUnitProjection) {
  CirclePair p(Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(-1.0 / 3.0, 0, 0));
  CbfConfig cfg;
  cfg.b = 0.0;
  EXPECT_NEAR(inflated_cbf_value(p.state, cfg), 1.5 - 1.03, 1e-12);
}

TEST(InflatedCbf, ActuationSetup) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0), Vec3(-4, 0, 0));
  p.state.robot_velocity = Vec3(1, 0, 0);
  EXPECT_DOUBLE_EQ(relative_approach(Vec3(-5, -0.5, 0), Vec3(1, 0, 0), Vec3(5, 0, 0), Vec3(-4, 0, 0)), 50.0);
  CbfConfig cfg;
  cfg.b = 1.0;
  EXPECT_NEAR(inflated_cbf_value(p.state, cfg), 499.595, 1e-3);
}

double fd_along(const BodyPairState& base, CbfConfig cfg, int axis, bool inflated) {
  const double eps = 1e-6;
  BodyPairState s = base;
  auto value = [&](double delta) {
    s.robot_pose.position = base.robot_pose.position + delta * Vec3::Unit(axis);
    return inflated ? inflated_cbf_value(s, cfg) : cbf_value(s, cfg);
  };
  return (value(eps) - value(-eps)) / (2 * eps);
}

TEST(ConstraintRow, IntegratorRowIsPositionGradient) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0), Vec3(-4, 0, 0));
  const auto row = constraint_row(p.state, CbfConfig{}, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(row.a(i), fd_along(p.state, CbfConfig{}, i, false), 1e-7);
}

TEST(ConstraintRow, InflatedGradientWeightsPlainGradient) {
  CirclePair p(Vec3(-3, -0.5, 0), Vec3(4, 0.3, 0), Vec3(-4, 0, 0));
  p.state.robot_velocity = Vec3(0.8, -0.2, 0);
  CbfConfig cfg;
  cfg.actuation_inflated = true;
  cfg.b = 1.0;
  const double av = relative_approach(p.state.robot_pose.position, p.state.robot_velocity,
                                      p.state.obstacle_pose.position, p.state.obstacle_velocity);
  EXPECT_NEAR(av, 33.44, 1e-12);
  const auto row = constraint_row(p.state, cfg, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  for (int i = 0; i < 2; ++i) {
    const double fd = 2.0 * av * fd_along(p.state, cfg, i, false);
    EXPECT_NEAR(row.a(i), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
  EXPECT_NEAR(row.h, inflated_cbf_value(p.state, cfg), 1e-12);
}

TEST(ConstraintRow, InflationFloorsAtPlainValue) {
  // receding obstacle: a_v < 0
  CirclePair p(Vec3(-3, -0.5, 0), Vec3(4, 0.3, 0), Vec3(4, 0, 0));
  CbfConfig cfg;
  cfg.actuation_inflated = true;
  cfg.b = 1.0;
  const auto plain = constraint_row(p.state, CbfConfig{}, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const auto row = constraint_row(p.state, cfg, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(row.h, plain.h);
  EXPECT_EQ(row.c, plain.c);
  EXPECT_LT(inflated_cbf_value(p.state, cfg), -1.0);
  cfg.plain_floor = false;
  EXPECT_EQ(constraint_row(p.state, cfg, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)).h,
            inflated_cbf_value(p.state, cfg));
}

TEST(ConstraintRow, RhsOnlyKeepsPlainGradient) {
  CirclePair p(Vec3(-3, -0.5, 0), Vec3(4, 0.3, 0), Vec3(-4, 0, 0));
  p.state.robot_velocity = Vec3(1, 0, 0);
  CbfConfig cfg;
  cfg.actuation_inflated = true;
  cfg.rhs_only = true;
  cfg.b = 1.0;
  const auto plain = constraint_row(p.state, CbfConfig{}, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const auto row = constraint_row(p.state, cfg, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_LT((row.a - plain.a).norm(), 1e-15);
  EXPECT_NEAR(row.c, -cfg.gamma * inflated_cbf_value(p.state, cfg) - plain.dh_dt, 1e-9);
}

TEST(ConstraintRow, FarStaticObstacleRowInactive) {
  CirclePair p(Vec3(-5, -0.5, 0), Vec3(5, 0, 0));
  CbfConfig cfg;
  const auto row = constraint_row(p.state, cfg, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_LT(row.c, -3.0 * cfg.gamma);
  EXPECT_GT(row.a.dot(Eigen::Vector2d(2, 0)) - row.c, 0.0);
}

TEST(ConstraintRow, TouchingBoundaryRhs) {
  CirclePair p(Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(-1, 0.5, 0));
  CbfConfig cfg;
  cfg.beta = 1.0;
  const auto row = constraint_row(p.state, cfg, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_NEAR(row.c, -row.dh_dt, 1e-12);
}

TEST(ConstraintRow, AlgebraMatchesConstraintDefinition) {
  std::mt19937_64 rng(99);
  const ConvexPrimitive robot = ConvexPrimitive::capsule(0.3, 0.1);
  const ConvexPrimitive obstacle = ConvexPrimitive::box(Vec3(1.0, 0.6, 0.4));
  for (int i = 0; i < 50; ++i) {
    const int n = 3, m = 2;
    BodyPairState s;
    s.robot = &robot;
    s.obstacle = &obstacle;
    s.robot_pose = Pose(testing::random_vec(rng, -1, 1), testing::random_quat(rng));
    s.robot_velocity = testing::random_vec(rng, -1, 1);
    s.pose_jacobian = Eigen::MatrixXd::Random(6, n);
    s.obstacle_pose = Pose(Vec3(3, 0, 0) + testing::random_vec(rng, -0.5, 0.5), testing::random_quat(rng));
    s.obstacle_velocity = testing::random_vec(rng, -2, 2);
    s.obstacle_pose_next = Pose(s.obstacle_pose.position + 0.01 * s.obstacle_velocity, s.obstacle_pose.orientation);
    CbfConfig cfg;
    cfg.actuation_inflated = (i % 2 == 1);
    cfg.b = 0.5;
    const Eigen::VectorXd f = Eigen::VectorXd::Random(n);
    const Eigen::MatrixXd g = Eigen::MatrixXd::Random(n, m);
    const Eigen::VectorXd u = Eigen::VectorXd::Random(m);
    const auto row = constraint_row(s, cfg, f, g);
    const auto ev = evaluate_cbf(s, cfg);
    const Eigen::RowVectorXd dh_dx = ev.dh_dpose.transpose() * s.pose_jacobian;
    const double lhs = row.a.dot(u) - row.c;
    const double rhs = dh_dx.dot(f + g * u) + ev.dh_dt + cfg.gamma * ev.h_rhs;
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

}  // namespace
}  // namespace tvcbf
