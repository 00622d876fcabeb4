#include "cpi/core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cpi;

TEST(Dataset, RejectsBadShapes)
{
  EXPECT_THROW(Dataset(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)), std::invalid_argument);
  EXPECT_THROW(Dataset(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(2)),
               std::invalid_argument);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Dataset(x, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST(Dataset, Subset)
{
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Dataset d(x, Eigen::Vector3d(10, 20, 30));
  Dataset s = d.subset({ 2, 0 });
  ASSERT_EQ(s.n(), 2);
  EXPECT_EQ(s.y()(0), 30);
  EXPECT_EQ(s.x()(1, 1), 2);
}

TEST(BuildGrid, EqualSpacingWithEndpoints)
{
  Grid g = build_grid(Eigen::Vector2d(0, 10), 5);
  std::vector<double> want{ 0, 2.5, 5, 7.5, 10 };
  ASSERT_EQ(g.size(), 5u);
  for (std::size_t j = 0; j < 5; ++j)
    EXPECT_DOUBLE_EQ(g[j], want[j]);
  EXPECT_DOUBLE_EQ(g.spacing(), 2.5);
}

TEST(BuildGrid, HandExample)
{
  Grid g = build_grid(Eigen::Vector3d(-1, 0, 2), 4);
  std::vector<double> want{ -1, 0, 1, 2 };
  for (std::size_t j = 0; j < 4; ++j)
    EXPECT_DOUBLE_EQ(g[j], want[j]);
  EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
}

TEST(BuildGrid, DegenerateRange)
{
  try {
    build_grid(Eigen::Vector3d(3, 3, 3), 10);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate response range"), std::string::npos);
  }
  EXPECT_THROW(build_grid(Eigen::Vector2d(0, 1), 1), std::invalid_argument);
}

TEST(BuildGrid, RandomInputsSatisfyGridInvariants)
{
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 50.0);
  std::uniform_int_distribution<int> gs(2, 400);
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::VectorXd y(20);
    for (auto& v : y)
      v = z(rng);
    std::size_t g = static_cast<std::size_t>(gs(rng));
    Grid grid = build_grid(y, g);
    ASSERT_EQ(grid.size(), g);
    EXPECT_EQ(grid.front(), y.minCoeff());
    EXPECT_EQ(grid.back(), y.maxCoeff());
    for (std::size_t j = 1; j < g; ++j)
      EXPECT_NEAR(grid[j] - grid[j - 1], grid.spacing(), 1e-9 * grid.spacing());
  }
}

TEST(Grid, RejectsUnequalSpacing)
{
  EXPECT_THROW(Grid({ 0.0, 1.0, 3.0 }), std::invalid_argument);
  EXPECT_THROW(Grid({ 0.0 }), std::invalid_argument);
  EXPECT_THROW(Grid({ 1.0, 0.0 }), std::invalid_argument);
}

TEST(CdfProfile, CorrectedInvariants)
{
  Grid g({ 0.0, 1.0, 2.0 });
  EXPECT_THROW(CdfProfile(g, { 0.1, 0.05, 0.9 }, true), std::invalid_argument);
  EXPECT_THROW(CdfProfile(g, { 0.1, 0.5, 1.2 }, true), std::invalid_argument);
  EXPECT_THROW(CdfProfile(g, { 0.1, 0.5 }, false), std::invalid_argument);
  EXPECT_NO_THROW(CdfProfile(g, { 0.1, -0.5, 1.2 }, false));
}

TEST(EvalProfile, Examples)
{
  CdfProfile p(Grid({ 0.0, 1.0 }), { 0.2, 0.4 }, true);
  EXPECT_DOUBLE_EQ(eval_profile(p, 0.5), 0.3);
  EXPECT_DOUBLE_EQ(eval_profile(p, -5.0), 0.2);
  EXPECT_DOUBLE_EQ(eval_profile(p, 7.0), 0.4);
  CdfProfile q(Grid({ 0.0, 1.0, 2.0 }), { 0.0, 0.5, 1.0 }, true);
  EXPECT_DOUBLE_EQ(eval_profile(q, 1.5), 0.75);
  CdfProfile raw(Grid({ 0.0, 1.0 }), { 0.2, 0.4 }, false);
  EXPECT_THROW(eval_profile(raw, 0.5), std::invalid_argument);
}

TEST(EvalProfile, ExactAtGridAndMonotone)
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t g = 2 + trial % 40;
    std::vector<double> pts(g), vals(g);
    for (std::size_t j = 0; j < g; ++j) {
      pts[j] = -3.0 + 0.25 * static_cast<double>(j);
      vals[j] = u(rng);
    }
    std::sort(vals.begin(), vals.end());
    CdfProfile p(Grid(pts), vals, true);
    for (std::size_t j = 0; j < g; ++j)
      EXPECT_EQ(eval_profile(p, pts[j]), vals[j]);
    double prev = -1.0;
    for (double t = -4.0; t < pts.back() + 1.0; t += 0.01) {
      double v = eval_profile(p, t);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Method, NamesRoundTrip)
{
  for (Method m : { Method::b, Method::quantile, Method::m, Method::sa, Method::st, Method::aa,
                    Method::at, Method::aaa, Method::aak, Method::aaak })
    EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("zz"), std::invalid_argument);
}

TEST(PredictionInterval, Containment)
{
  PredictionInterval a{ 0.0, 2.0 };
  PredictionInterval b{ 0.5, 1.5 };
  EXPECT_TRUE(a.contains(b));
  EXPECT_FALSE(b.contains(a));
  EXPECT_TRUE(a.contains(2.0));
  EXPECT_FALSE(a.contains(2.0001));
  EXPECT_DOUBLE_EQ(a.length(), 2.0);
}
