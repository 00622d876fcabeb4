#include "cpi/simbench.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cpi;

namespace {

// t5 CDF for odd degrees of freedom, closed form.
double student_t5_cdf(double t)
{
  double th = std::atan(t / std::sqrt(5.0));
  double c = std::cos(th);
  return 0.5 + (th + std::sin(th) * c * (1.0 + 2.0 / 3.0 * c * c)) / std::numbers::pi;
}

template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf)
{
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double f = cdf(xs[i]);
    d = std::max({ d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f });
  }
  return d;
}

Eigen::VectorXd point(double a, double b, double c, double d, double e)
{
  Eigen::VectorXd x(5);
  x << a, b, c, d, e;
  return x;
}

EvalConfig tiny_eval()
{
  EvalConfig c;
  c.replications = 2;
  c.test_points = 6;
  c.draws = 200;
  c.grid_points = 8;
  c.estimator.mlp.layer_widths = { 4 };
  c.estimator.mlp.epochs = 15;
  c.estimator.mlp.batch_size = 50;
  c.estimator.mlp.seed = 11;
  c.seed = 5;
  c.keep_points = true;
  return c;
}

} // namespace

TEST(Simulate, NoiselessMeanFunctions)
{
  for (int id : { 1, 4 }) {
    SimModelSpec spec;
    spec.id = id;
    spec.n = 50;
    spec.noise = false;
    Dataset d = simulate(spec);
    ASSERT_EQ(d.n(), 50);
    ASSERT_EQ(d.d(), 5);
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      auto x = d.x().row(i);
      double want = id == 1 ? x(0) * x(0) + std::sin(x(1) + x(2))
                            : x(0) * x(0) + std::exp(x(1) + x(2) / 3.0) + x(3) - x(4);
      EXPECT_NEAR(d.y()(i), want, 1e-12);
    }
  }
}

TEST(Simulate, SeedDeterminism)
{
  SimModelSpec spec;
  spec.id = 5;
  spec.n = 100;
  Dataset a = simulate(spec), b = simulate(spec);
  EXPECT_EQ(a.y(), b.y());
  spec.seed = 2;
  EXPECT_NE(simulate(spec).y(), a.y());
  spec.id = 7;
  EXPECT_THROW(simulate(spec), std::invalid_argument);
}

TEST(Noise, SkewNormalMoments)
{
  Rng rng = make_rng(3, 0);
  const int n = 1'000'000;
  std::vector<double> e(n);
  for (auto& v : e)
    v = draw_noise(NoiseKind::skew_normal, rng);
  double m = 0.0;
  for (double v : e)
    m += v;
  m /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : e) {
    m2 += (v - m) * (v - m);
    m3 += (v - m) * (v - m) * (v - m);
  }
  double var = m2 / (n - 1);
  double skew = (m3 / n) / std::pow(m2 / n, 1.5);
  EXPECT_GE(var, 0.99);
  EXPECT_LE(var, 1.01);
  EXPECT_GT(skew, 0.5);
}

TEST(Noise, EmpiricalSkewScaling)
{
  SimModelSpec spec;
  spec.id = 3;
  spec.n = 2000;
  spec.empirical_skew_scaling = true;
  Dataset d = simulate(spec);
  spec.noise = false;
  Dataset mu = simulate(spec);
  Eigen::VectorXd e = d.y() - mu.y();
  double m = e.mean();
  double var = (e.array() - m).square().sum() / static_cast<double>(e.size() - 1);
  EXPECT_NEAR(var, 1.0, 1e-12);
}

TEST(Noise, KolmogorovSmirnov)
{
  const int n = 100'000;
  Rng rng = make_rng(17, 0);
  std::vector<double> z(n), t(n);
  for (int i = 0; i < n; ++i)
    z[i] = draw_noise(NoiseKind::normal, rng);
  for (int i = 0; i < n; ++i)
    t[i] = draw_noise(NoiseKind::student_t5, rng);
  EXPECT_LE(ks_statistic(z, [](double v) { return normal::cdf(v); }), 0.006);
  EXPECT_LE(ks_statistic(t, student_t5_cdf), 0.006);
}

TEST(TrueConditionalCdf, MedianAndClosedForm)
{
  const std::size_t v = 20000;
  const double tol = 3.0 / std::sqrt(static_cast<double>(v));
  Rng rng = make_rng(23, 0);
  Eigen::VectorXd x = point(0.3, -1.0, 0.4, 1.2, -0.7);
  EXPECT_NEAR(true_conditional_cdf(1, x, mean_function(1, x), v, rng), 0.5, tol);
  for (int id : { 1, 4 })
    for (double q : { -1.0, 0.5, 1.7, 3.0 })
      EXPECT_NEAR(true_conditional_cdf(id, x, q, v, rng), closed_form_cdf(id, x, q), tol)
        << id << " " << q;
  EXPECT_THROW(closed_form_cdf(2, x, 0.0), std::invalid_argument);
}

TEST(McCoverage, Examples)
{
  const std::size_t v = 10000;
  const double tol = 3.0 / std::sqrt(static_cast<double>(v));
  Rng rng = make_rng(29, 0);
  Eigen::VectorXd x = point(-0.5, 0.2, 0.9, 0.0, 0.1);
  double mu = mean_function(1, x);
  EXPECT_GE(mc_coverage(1, x, PredictionInterval{ mu - 10.0, mu + 10.0 }, v, rng), 0.9999);
  EXPECT_LE(mc_coverage(1, x, PredictionInterval{ mu, mu }, v, rng), 1e-3);
  EXPECT_NEAR(mc_coverage(1, x, PredictionInterval{ mu - 1.96, mu + 1.96 }, v, rng), 0.95, tol);
}

TEST(McCoverage, OracleBenchmarkInterval)
{
  const std::size_t v = 1000;
  Rng rng = make_rng(derive_seed(1, coverage_stream + 1), 0);
  Eigen::MatrixXd xt = test_predictors(1, 1);
  Eigen::VectorXd x = xt.row(0).transpose();
  double mu = mean_function(1, x);
  auto pi = benchmark_pi(mu, mu * mu + 1.0, 0.05);
  EXPECT_NEAR(pi.length(), 2.0 * 1.959963984540054, 1e-9);
  EXPECT_NEAR(mc_coverage(1, x, pi, v, rng), 0.95, 3.0 / std::sqrt(static_cast<double>(v)));
}

TEST(SeedStream, DeterminismAndSeparation)
{
  Rng a = seed_stream(7, 1), b = seed_stream(7, 1), c = seed_stream(7, 2);
  bool differ = false;
  for (int i = 0; i < 1000; ++i) {
    auto va = a(), vb = b(), vc = c();
    ASSERT_EQ(va, vb);
    differ = differ || va != vc;
  }
  EXPECT_TRUE(differ);
}

TEST(SeedStream, ChiSquareUniformity)
{
  // 100 bins, df 99; 0.999 quantile of chi-square(99)
  const double critical = 148.23035916510173;
  for (std::uint64_t rep : { std::uint64_t{ 1 }, std::uint64_t{ 2 }, test_stream }) {
    Rng rng = seed_stream(42, rep);
    std::uniform_real_distribution<double> u;
    std::vector<int> counts(100, 0);
    const int n = 100'000;
    for (int i = 0; i < n; ++i)
      ++counts[std::min(99, static_cast<int>(u(rng) * 100.0))];
    double chi = 0.0;
    for (int c : counts)
      chi += (c - n / 100.0) * (c - n / 100.0) / (n / 100.0);
    EXPECT_LT(chi, critical) << rep;
  }
}

TEST(TestPredictors, FixedAcrossCalls)
{
  EXPECT_EQ(test_predictors(3, 10), test_predictors(3, 10));
  EXPECT_NE(test_predictors(3, 10), test_predictors(4, 10));
}

TEST(EvaluateMethods, OrderingAndRanges)
{
  SimModelSpec spec;
  spec.n = 200;
  std::vector<Method> methods{ Method::b, Method::quantile, Method::sa, Method::st,
                               Method::aa, Method::at, Method::aaa };
  EvalOutcome out = evaluate_methods(spec, methods, tiny_eval());
  ASSERT_EQ(out.reports.size(), methods.size());
  for (const auto& r : out.reports) {
    EXPECT_GE(r.cr, 0.0);
    EXPECT_LE(r.cr, 1.0);
    EXPECT_GE(r.al, 0.0);
    EXPECT_GE(r.replications, 1);
    EXPECT_LE(r.replications + out.failed_replications, 2);
  }
  ASSERT_EQ(out.records.size(), 2u);
  for (const auto& rec : out.records)
    for (const auto& p : rec.points) {
      if (!p.valid)
        continue;
      // columns: b quantile sa st aa at aaa
      EXPECT_GE(p.coverage[6], p.coverage[4]);
      EXPECT_GE(p.coverage[3], p.coverage[2]);
      EXPECT_GE(p.coverage[5], p.coverage[4]);
      EXPECT_TRUE(p.intervals[6]->contains(*p.intervals[4]));
    }
}

TEST(EvaluateMethods, DeterministicAcrossThreadCounts)
{
  SimModelSpec spec;
  spec.id = 4;
  spec.n = 150;
  std::vector<Method> methods{ Method::m, Method::aa, Method::aaa };
  EvalConfig c = tiny_eval();
  c.keep_points = false;
  auto a = evaluate_methods(spec, methods, c);
  auto b = evaluate_methods(spec, methods, c);
  c.threads = 2;
  auto p = evaluate_methods(spec, methods, c);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    EXPECT_EQ(a.reports[m].cr, b.reports[m].cr);
    EXPECT_EQ(a.reports[m].al, b.reports[m].al);
    EXPECT_NEAR(a.reports[m].cr, p.reports[m].cr, 1e-12);
    EXPECT_NEAR(a.reports[m].al, p.reports[m].al, 1e-12);
  }
}

TEST(EvaluateMethods, RejectsBadConfig)
{
  SimModelSpec spec;
  EvalConfig c = tiny_eval();
  EXPECT_THROW(evaluate_methods(spec, {}, c), std::invalid_argument);
  EXPECT_THROW(evaluate_methods(spec, { Method::aak }, c), std::invalid_argument);
  c.draws = 0;
  EXPECT_THROW(evaluate_methods(spec, { Method::aa }, c), std::invalid_argument);
}
