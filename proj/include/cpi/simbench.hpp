#pragma once

#include "calibrate.hpp"
#include "core.hpp"
#include "estimator.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpi {

enum class NoiseKind
{
  normal,
  student_t5,
  skew_normal
};

//! Models 1-3 are homoscedastic, 4-6 heteroscedastic; within each triple the
//! noise is normal, t5, skew-normal(0, 1, 10).
struct SimModelSpec
{
  int id = 1;
  Eigen::Index n = 2000;
  std::uint64_t seed = 1;
  //! test hook: responses equal the mean function
  bool noise = true;
  //! scale skew-normal noise by the sample sd instead of the theoretical one
  bool empirical_skew_scaling = false;

  void validate() const
  {
    if (id < 1 || id > 6)
      throw std::invalid_argument("model id must be in 1..6, got " + std::to_string(id));
    if (n < 1)
      throw std::invalid_argument("model sample size must be >= 1");
  }
};

inline constexpr Eigen::Index sim_dimension = 5;
inline constexpr double skew_shape = 10.0;

inline NoiseKind noise_kind(int id)
{
  switch ((id - 1) % 3) {
    case 0: return NoiseKind::normal;
    case 1: return NoiseKind::student_t5;
    default: return NoiseKind::skew_normal;
  }
}

inline double mean_function(int id, const Eigen::Ref<const Eigen::VectorXd>& x)
{
  if (id <= 3)
    return x(0) * x(0) + std::sin(x(1) + x(2));
  return x(0) * x(0) + std::exp(x(1) + x(2) / 3.0) + x(3) - x(4);
}

inline double scale_function(int id, const Eigen::Ref<const Eigen::VectorXd>& x)
{
  if (id <= 3)
    return 1.0;
  return 0.5 + x(1) * x(1) / 2.0 + x(4) * x(4) / 2.0;
}

inline double skew_delta() { return skew_shape / std::sqrt(1.0 + skew_shape * skew_shape); }

//! sd of skew-normal(0, 1, a): sqrt(1 - 2 delta^2 / pi).
inline double skew_normal_sd()
{
  double d = skew_delta();
  return std::sqrt(1.0 - 2.0 * d * d / std::numbers::pi);
}

//! Raw skew-normal(0, 1, a) draw from two independent normals.
inline double draw_skew_normal(Rng& rng)
{
  std::normal_distribution<double> z;
  const double d = skew_delta();
  double u0 = z(rng);
  double u1 = z(rng);
  return d * std::abs(u0) + std::sqrt(1.0 - d * d) * u1;
}

//! One noise draw; skew-normal noise is divided by its theoretical sd.
inline double draw_noise(NoiseKind kind, Rng& rng)
{
  switch (kind) {
    case NoiseKind::normal: return std::normal_distribution<double>{}(rng);
    case NoiseKind::student_t5: return std::student_t_distribution<double>{ 5.0 }(rng);
    case NoiseKind::skew_normal: return draw_skew_normal(rng) / skew_normal_sd();
  }
  return 0.0;
}

inline Dataset simulate(const SimModelSpec& spec, Rng& rng)
{
  spec.validate();
  const Eigen::Index n = spec.n;
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(n, sim_dimension);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < sim_dimension; ++c)
      x(i, c) = z(rng);
  const NoiseKind kind = noise_kind(spec.id);
  Eigen::VectorXd eps = Eigen::VectorXd::Zero(n);
  if (spec.noise) {
    for (Eigen::Index i = 0; i < n; ++i)
      eps(i) = kind == NoiseKind::skew_normal && spec.empirical_skew_scaling ? draw_skew_normal(rng)
                                                                            : draw_noise(kind, rng);
    if (kind == NoiseKind::skew_normal && spec.empirical_skew_scaling && n > 1) {
      double mu = eps.mean();
      double sd = std::sqrt((eps.array() - mu).square().sum() / static_cast<double>(n - 1));
      if (sd > 0.0)
        eps /= sd;
    }
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xi = x.row(i).transpose();
    y(i) = mean_function(spec.id, xi) + scale_function(spec.id, xi) * eps(i);
  }
  return Dataset(std::move(x), std::move(y));
}

inline Dataset simulate(const SimModelSpec& spec)
{
  Rng rng = make_rng(spec.seed, 0);
  return simulate(spec, rng);
}

//! Reserved replication index for the shared test set.
inline constexpr std::uint64_t test_stream = 1ULL << 48;
//! Offset of the coverage draws, kept away from training and test streams.
inline constexpr std::uint64_t coverage_stream = 1ULL << 32;

inline Rng seed_stream(std::uint64_t base, std::uint64_t replication)
{
  return make_rng(base, replication);
}

//! v fresh conditional responses at x, sorted ascending.
inline std::vector<double> conditional_draws(int id, const Eigen::VectorXd& x, std::size_t v,
                                             Rng& rng)
{
  if (x.size() != sim_dimension)
    throw std::invalid_argument("simulation models take 5 predictors");
  const NoiseKind kind = noise_kind(id);
  const double mu = mean_function(id, x);
  const double s = scale_function(id, x);
  std::vector<double> ys(v);
  for (auto& y : ys)
    y = mu + s * draw_noise(kind, rng);
  std::sort(ys.begin(), ys.end());
  return ys;
}

//! Fraction of sorted draws inside [lo, hi].
inline double fraction_inside(const std::vector<double>& sorted, double lo, double hi)
{
  if (sorted.empty() || hi < lo)
    return 0.0;
  auto a = std::lower_bound(sorted.begin(), sorted.end(), lo);
  auto b = std::upper_bound(sorted.begin(), sorted.end(), hi);
  return static_cast<double>(b - a) / static_cast<double>(sorted.size());
}

inline double true_conditional_cdf(int id, const Eigen::VectorXd& x, double q, std::size_t v,
                                   Rng& rng)
{
  if (v < 1)
    throw std::invalid_argument("draw count must be >= 1");
  auto ys = conditional_draws(id, x, v, rng);
  auto it = std::upper_bound(ys.begin(), ys.end(), q);
  return static_cast<double>(it - ys.begin()) / static_cast<double>(v);
}

//! Exact conditional CDF for the normal-noise models 1 and 4.
inline double closed_form_cdf(int id, const Eigen::VectorXd& x, double q)
{
  if (id != 1 && id != 4)
    throw std::invalid_argument("closed-form CDF exists only for models 1 and 4");
  return normal::cdf((q - mean_function(id, x)) / scale_function(id, x));
}

inline double mc_coverage(int id, const Eigen::VectorXd& x, const PredictionInterval& pi,
                          std::size_t v, Rng& rng)
{
  if (v < 1)
    throw std::invalid_argument("draw count must be >= 1");
  if (!(pi.hi >= pi.lo))
    throw std::invalid_argument("interval has hi < lo");
  return fraction_inside(conditional_draws(id, x, v, rng), pi.lo, pi.hi);
}

struct EvalConfig
{
  int replications = 20; // S
  int test_points = 200; // T
  int draws = 1000;      // V
  double alpha = 0.05;
  std::size_t grid_points = 200;
  EstimatorConfig estimator;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  //! keep every interval and coverage so callers can inspect them
  bool keep_points = false;

  void validate() const
  {
    if (replications < 1 || test_points < 1 || draws < 1)
      throw std::invalid_argument("S, T and V must all be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("alpha must lie in (0, 1)");
    if (grid_points < 2)
      throw std::invalid_argument("grid needs at least 2 points");
    estimator.mlp.validate();
    estimator.bandwidth.validate();
  }
};

struct EvalReport
{
  Method method = Method::aa;
  double cr = 0.0;
  double al = 0.0;
  //! replications that contributed
  int replications = 0;
  //! average number of test points kept per replication
  double test_points_used = 0.0;
  //! test points dropped because the benchmark PI was undefined, summed over replications
  long skipped_benchmark_points = 0;
};

struct PointRecord
{
  std::vector<std::optional<PredictionInterval>> intervals; // aligned with methods
  std::vector<double> coverage;
  bool valid = true;
};

struct ReplicationRecord
{
  bool failed = false;
  std::string error;
  std::vector<PointRecord> points;
};

struct EvalOutcome
{
  std::vector<Method> methods;
  std::vector<EvalReport> reports;
  int failed_replications = 0;
  double wall_seconds = 0.0;
  //! filled when EvalConfig::keep_points is set
  std::vector<ReplicationRecord> records;
};

//! Shared test predictors, drawn from the reserved stream.
inline Eigen::MatrixXd test_predictors(std::uint64_t seed, int t)
{
  Rng rng = seed_stream(seed, test_stream);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(t, sim_dimension);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index c = 0; c < sim_dimension; ++c)
      x(i, c) = z(rng);
  return x;
}

namespace detail {

struct ReplicationSums
{
  bool failed = false;
  std::vector<double> coverage_mean;
  std::vector<double> length_mean;
  int used = 0;
  int skipped = 0;
};

} // namespace detail

// Replication i (1-based) trains on seed_stream(seed, i); coverage at test
// point j uses the same V draws for every method.
inline EvalOutcome evaluate_methods(const SimModelSpec& train_spec,
                                    const std::vector<Method>& methods, const EvalConfig& cfg)
{
  train_spec.validate();
  cfg.validate();
  check_methods(cfg.estimator.kind, methods);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t k = methods.size();
  const Eigen::MatrixXd xt = test_predictors(cfg.seed, cfg.test_points);
  const bool has_b = needs_second_moment(methods);
  const auto S = static_cast<std::size_t>(cfg.replications);

  std::vector<detail::ReplicationSums> sums(S);
  std::vector<ReplicationRecord> records(cfg.keep_points ? S : 0);

  parallel_for(S, cfg.threads, [&](std::size_t r) {
    const std::uint64_t rep = r + 1;
    auto& out = sums[r];
    std::optional<FittedEstimator> est;
    try {
      Rng rng = seed_stream(cfg.seed, rep);
      Dataset train = simulate(train_spec, rng);
      Grid grid = build_grid(train.y(), cfg.grid_points);
      EstimatorConfig ec = cfg.estimator;
      ec.mlp.seed = derive_seed(cfg.estimator.mlp.seed, rep);
      est.emplace(fit_estimator(train, grid, ec, methods));
    } catch (const std::exception& e) {
      out.failed = true;
      if (cfg.keep_points) {
        records[r].failed = true;
        records[r].error = e.what();
      }
      return;
    }
    out.coverage_mean.assign(k, 0.0);
    out.length_mean.assign(k, 0.0);
    if (cfg.keep_points)
      records[r].points.resize(static_cast<std::size_t>(cfg.test_points));
    for (int j = 0; j < cfg.test_points; ++j) {
      Eigen::VectorXd x = xt.row(j).transpose();
      auto pis = intervals_at(est->at(x), methods, cfg.alpha);
      bool valid = std::all_of(pis.begin(), pis.end(), [](const auto& p) { return p.has_value(); });
      PointRecord* rec = cfg.keep_points ? &records[r].points[static_cast<std::size_t>(j)] : nullptr;
      if (rec) {
        rec->intervals = pis;
        rec->valid = valid;
      }
      if (!valid) {
        ++out.skipped;
        continue;
      }
      Rng crng = make_rng(derive_seed(cfg.seed, coverage_stream + rep), static_cast<std::uint64_t>(j));
      auto ys = conditional_draws(train_spec.id, x, static_cast<std::size_t>(cfg.draws), crng);
      ++out.used;
      if (rec)
        rec->coverage.resize(k);
      for (std::size_t m = 0; m < k; ++m) {
        double c = fraction_inside(ys, pis[m]->lo, pis[m]->hi);
        out.coverage_mean[m] += c;
        out.length_mean[m] += pis[m]->length();
        if (rec)
          rec->coverage[m] = c;
      }
    }
    if (out.used > 0) {
      for (std::size_t m = 0; m < k; ++m) {
        out.coverage_mean[m] /= out.used;
        out.length_mean[m] /= out.used;
      }
    }
  });

  EvalOutcome res;
  res.methods = methods;
  res.reports.resize(k);
  for (std::size_t m = 0; m < k; ++m)
    res.reports[m].method = methods[m];
  long skipped = 0;
  double used_total = 0.0;
  int contributing = 0;
  for (const auto& s : sums) {
    if (s.failed) {
      ++res.failed_replications;
      continue;
    }
    skipped += s.skipped;
    if (s.used == 0)
      continue;
    ++contributing;
    used_total += s.used;
    for (std::size_t m = 0; m < k; ++m) {
      res.reports[m].cr += s.coverage_mean[m];
      res.reports[m].al += s.length_mean[m];
    }
  }
  for (auto& rep : res.reports) {
    if (contributing > 0) {
      rep.cr /= contributing;
      rep.al /= contributing;
      rep.test_points_used = used_total / contributing;
    } else {
      rep.cr = rep.al = std::numeric_limits<double>::quiet_NaN();
    }
    rep.replications = contributing;
    rep.skipped_benchmark_points = has_b ? skipped : 0;
  }
  res.records = std::move(records);
  res.wall_seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

} // namespace cpi
