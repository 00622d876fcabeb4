#pragma once

#include "core.hpp"
#include "nelder_mead.hpp"
#include "neuralnet.hpp" // Standardizer
#include "normal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpi {

inline double gauss_kernel(double v) { return normal::pdf(v); }

//! Closed form of the integral over y of k0((y - a)/h0) k0((y - b)/h0).
inline double gaussian_pair_convolution(double a, double b, double h0)
{
  return h0 / std::numbers::sqrt2 * normal::pdf((a - b) / (std::numbers::sqrt2 * h0));
}

class DegenerateDensity : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Product-Gaussian conditional density estimator with a common predictor
//! bandwidth h and a response bandwidth h0.
class KernelModel
{
public:
  KernelModel(Dataset data, double h, double h0)
    : KernelModel(std::move(data), h, h0, Standardizer{})
  {
  }

  //! `data` is already in the model's input space; queries go through `s` first.
  KernelModel(Dataset data, double h, double h0, Standardizer s)
    : data_(std::move(data))
    , h_(h)
    , h0_(h0)
    , standardizer_(std::move(s))
  {
    if (!(h > 0.0) || !(h0 > 0.0))
      throw std::invalid_argument("kernel bandwidths must be positive");
    if (standardizer_.mean.size() == 0)
      standardizer_ = Standardizer::identity(data_.d());
    if (standardizer_.mean.size() != data_.d())
      throw std::invalid_argument("standardizer dimension does not match data");
  }

  const Dataset& data() const { return data_; }
  double h() const { return h_; }
  double h0() const { return h0_; }
  const Standardizer& standardizer() const { return standardizer_; }

  //! Normalized kernel weights w_i(x) for a raw query; sums to 1.
  Eigen::VectorXd weights(const Eigen::VectorXd& x) const
  {
    Eigen::VectorXd lw = log_kernels(standardized(x));
    double m = lw.maxCoeff();
    Eigen::VectorXd w = (lw.array() - m).exp().matrix();
    return w / w.sum();
  }

  // Sum of per-point log product kernels, without the 1/h^d factor.
  Eigen::VectorXd log_kernels(const Eigen::VectorXd& xs) const
  {
    const Eigen::Index n = data_.n();
    const Eigen::Index d = data_.d();
    Eigen::VectorXd lw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        double u = (xs(c) - data_.x()(i, c)) / h_;
        s += normal::log_pdf(u);
      }
      lw(i) = s;
    }
    return lw;
  }

  Eigen::VectorXd standardized(const Eigen::VectorXd& x) const
  {
    if (x.size() != data_.d())
      throw std::invalid_argument("kernel query has dimension " + std::to_string(x.size()) +
                                  ", model expects " + std::to_string(data_.d()));
    return standardizer_.apply(x);
  }

private:
  Dataset data_;
  double h_;
  double h0_;
  Standardizer standardizer_;
};

//! (1/(n h^d)) sum_i prod_s phi((x_s - X_is)/h), in the model's input space.
inline double marginal_density(const KernelModel& model, const Eigen::VectorXd& x)
{
  Eigen::VectorXd lw = model.log_kernels(model.standardized(x));
  double m = lw.maxCoeff();
  double s = (lw.array() - m).exp().sum();
  double d = static_cast<double>(model.data().d());
  return std::exp(m + std::log(s) - std::log(static_cast<double>(model.data().n())) -
                  d * std::log(model.h()));
}

inline double conditional_cdf(const KernelModel& model, const Eigen::VectorXd& x, double q)
{
  Eigen::VectorXd w = model.weights(x);
  const auto& y = model.data().y();
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    s += w(i) * normal::cdf((q - y(i)) / model.h0());
  return s;
}

inline double conditional_mean(const KernelModel& model, const Eigen::VectorXd& x)
{
  return model.weights(x).dot(model.data().y());
}

//! E[Y^2 | x] under the smoothed estimator: sum_i w_i (Y_i^2 + h0^2).
inline double conditional_second_moment(const KernelModel& model, const Eigen::VectorXd& x)
{
  Eigen::VectorXd w = model.weights(x);
  return w.dot(model.data().y().cwiseAbs2()) + model.h0() * model.h0();
}

// Profile values are conditional_cdf at each grid point. Monotone by
// construction, so the profile is marked corrected.
inline CdfProfile kernel_profile(const KernelModel& model, const Eigen::VectorXd& x_f,
                                 const Grid& grid)
{
  Eigen::VectorXd w = model.weights(x_f);
  const auto& y = model.data().y();
  std::vector<double> values(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      s += w(i) * normal::cdf((grid[j] - y(i)) / model.h0());
    values[j] = std::min(1.0, std::max(0.0, s));
    if (j > 0)
      values[j] = std::max(values[j], values[j - 1]); // guards against last-bit rounding
  }
  return CdfProfile(grid, std::move(values), true);
}

namespace detail {

//! Pairwise log product kernels log prod_s phi((X_is - X_js)/h) (no 1/h^d).
inline Eigen::MatrixXd pairwise_log_kernels(const Eigen::MatrixXd& x, double h)
{
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd lk(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lk(i, i) = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double sq = (x.row(i) - x.row(j)).squaredNorm() / (h * h);
      double v = -0.5 * sq - 0.918938533204672741780329736406 * static_cast<double>(x.cols());
      lk(i, j) = v;
      lk(j, i) = v;
    }
  }
  return lk;
}

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v)
{
  double m = v.maxCoeff();
  if (!std::isfinite(m))
    return m;
  return m + std::log((v.array() - m).exp().sum());
}

} // namespace detail

// Leave-one-out log-likelihood sum_i ln f_{-i}(Y_i | X_i).
inline double mlcv_objective(const Dataset& data, double h, double h0)
{
  const Eigen::Index n = data.n();
  if (n < 2)
    throw std::invalid_argument("mlcv needs n >= 2");
  if (!(h > 0.0) || !(h0 > 0.0))
    throw std::invalid_argument("bandwidths must be positive");
  const double d = static_cast<double>(data.d());
  const Eigen::MatrixXd lk = detail::pairwise_log_kernels(data.x(), h);
  const double log_floor = std::log(1e-300);
  const double log_norm = std::log(static_cast<double>(n - 1)) + d * std::log(h);
  const auto& y = data.y();
  double total = 0.0;
  Eigen::VectorXd joint(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double log_marg = detail::log_sum_exp(lk.col(i)) - log_norm;
    if (!(log_marg >= log_floor))
      throw DegenerateDensity("degenerate leave-one-out density");
    for (Eigen::Index j = 0; j < n; ++j)
      joint(j) = lk(j, i) + normal::log_pdf((y(i) - y(j)) / h0);
    double log_joint = detail::log_sum_exp(joint) - log_norm - std::log(h0);
    total += log_joint - log_marg;
  }
  return total;
}

// Least-squares criterion I1 - 2 I2 with leave-one-out estimates:
//   I1 = (1/n) sum_i  integral f_{-i}(y | X_i)^2 dy
//   I2 = (1/n) sum_i  f_{-i}(Y_i | X_i)
inline double lscv_objective(const Dataset& data, double h, double h0)
{
  const Eigen::Index n = data.n();
  if (n < 3)
    throw std::invalid_argument("lscv needs n >= 3");
  if (!(h > 0.0) || !(h0 > 0.0))
    throw std::invalid_argument("bandwidths must be positive");
  const double d = static_cast<double>(data.d());
  const Eigen::MatrixXd lk = detail::pairwise_log_kernels(data.x(), h);
  const auto& y = data.y();
  // squared leave-one-out marginal below this is numerically zero
  const double log_floor = 0.5 * std::log(1e-300);
  const double log_norm = std::log(static_cast<double>(n - 1)) + d * std::log(h);

  Eigen::MatrixXd conv(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j; k < n; ++k)
      conv(j, k) = conv(k, j) = gaussian_pair_convolution(y(j), y(k), h0) / (h0 * h0);

  double i1 = 0.0;
  double i2 = 0.0;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double lse = detail::log_sum_exp(lk.col(i));
    if (!(lse - log_norm >= log_floor))
      throw DegenerateDensity("lscv unstable: leave-one-out density is numerically zero");
    w = (lk.col(i).array() - lse).exp().matrix();
    w(i) = 0.0;
    i1 += w.dot(conv * w);
    double f = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i)
        f += w(j) * normal::pdf((y(i) - y(j)) / h0);
    i2 += f / h0;
  }
  return (i1 - 2.0 * i2) / static_cast<double>(n);
}

enum class BandwidthRule
{
  fixed,
  mlcv,
  lscv
};

struct BandwidthStrategy
{
  BandwidthRule rule = BandwidthRule::mlcv;
  double h = 1.0;  // used when rule == fixed
  double h0 = 1.0; // used when rule == fixed
  //! maximum number of objective evaluations for the CV rules
  int budget = 200;

  void validate() const
  {
    if (rule == BandwidthRule::fixed && (!(h > 0.0) || !(h0 > 0.0)))
      throw std::invalid_argument("fixed bandwidths must be positive");
    if (rule != BandwidthRule::fixed && budget < 1)
      throw std::invalid_argument("bandwidth search budget must be >= 1");
  }
};

inline std::string bandwidth_rule_name(BandwidthRule r)
{
  switch (r) {
    case BandwidthRule::fixed: return "fixed";
    case BandwidthRule::mlcv: return "mlcv";
    case BandwidthRule::lscv: return "lscv";
  }
  return "?";
}

inline BandwidthRule parse_bandwidth_rule(const std::string& s)
{
  if (s == "fixed")
    return BandwidthRule::fixed;
  if (s == "mlcv")
    return BandwidthRule::mlcv;
  if (s == "lscv")
    return BandwidthRule::lscv;
  throw std::invalid_argument("unknown bandwidth rule '" + s + "'");
}

struct BandwidthChoice
{
  double h = 0.0;
  double h0 = 0.0;
  //! set when the CV objective failed at the starting simplex
  bool fell_back_to_silverman = false;
  int evaluations = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {
inline double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v)
{
  if (v.size() < 2)
    return 1.0;
  double mu = v.mean();
  double s = std::sqrt((v.array() - mu).square().sum() / static_cast<double>(v.size() - 1));
  return s > 0.0 ? s : 1.0;
}
} // namespace detail

//! 1.06 sd n^{-1/(4+d)}; the predictor sd is averaged over coordinates.
inline BandwidthChoice silverman_bandwidths(const Dataset& data)
{
  const double n = static_cast<double>(data.n());
  const double rate = std::pow(n, -1.0 / (4.0 + static_cast<double>(data.d())));
  double sx = 0.0;
  for (Eigen::Index c = 0; c < data.d(); ++c)
    sx += detail::sample_sd(data.x().col(c));
  sx /= static_cast<double>(data.d());
  BandwidthChoice out;
  out.h = 1.06 * sx * rate;
  out.h0 = 1.06 * detail::sample_sd(data.y()) * rate;
  return out;
}

// CV search stays within this factor of the Silverman start on each axis;
// discrete responses otherwise drive h0 to zero.
inline constexpr double cv_search_factor = 1e3;

inline BandwidthChoice select_bandwidth(const Dataset& data, const BandwidthStrategy& strategy)
{
  strategy.validate();
  if (strategy.rule == BandwidthRule::fixed) {
    BandwidthChoice out;
    out.h = strategy.h;
    out.h0 = strategy.h0;
    return out;
  }
  if (data.n() < 4)
    throw std::invalid_argument("cross-validated bandwidths need n >= 4");
  const BandwidthChoice start = silverman_bandwidths(data);
  const bool ml = strategy.rule == BandwidthRule::mlcv;
  // minimized: -loglik for mlcv, the ISE surrogate for lscv
  auto objective = [&](double h, double h0) {
    return ml ? -mlcv_objective(data, h, h0) : lscv_objective(data, h, h0);
  };
  bool start_failed = false;
  Eigen::VectorXd x0(2);
  x0 << std::log(start.h), std::log(start.h0);
  const double radius = std::log(cv_search_factor);
  auto f = [&](const Eigen::VectorXd& p) {
    if ((p - x0).cwiseAbs().maxCoeff() > radius)
      return std::numeric_limits<double>::infinity();
    const double h = std::exp(p(0)), h0 = std::exp(p(1));
    try {
      return objective(h, h0);
    } catch (const DegenerateDensity&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  if (!std::isfinite(f(x0)))
    start_failed = true;
  if (strategy.budget == 1 || start_failed) {
    BandwidthChoice out = start;
    out.fell_back_to_silverman = start_failed;
    out.evaluations = 1;
    if (!start_failed)
      out.objective = f(x0);
    return out;
  }
  NelderMeadOptions opt;
  opt.max_evaluations = strategy.budget - 1;
  NelderMeadResult r = nelder_mead(f, x0, opt);
  BandwidthChoice out;
  if (!std::isfinite(r.value)) {
    out = start;
    out.fell_back_to_silverman = true;
  } else {
    out.h = std::exp(r.x(0));
    out.h0 = std::exp(r.x(1));
    out.objective = r.value;
  }
  out.evaluations = r.evaluations + 1;
  return out;
}

//! Standardizes predictors, selects bandwidths, and keeps the sample.
inline KernelModel fit_kernel_model(const Dataset& data, const BandwidthStrategy& strategy,
                                    bool standardize = true,
                                    BandwidthChoice* choice_out = nullptr)
{
  Standardizer s = standardize ? Standardizer::fit(data.x()) : Standardizer::identity(data.d());
  Dataset std_data(s.apply_transposed(data.x()).transpose(), data.y());
  BandwidthChoice choice = select_bandwidth(std_data, strategy);
  if (choice_out)
    *choice_out = choice;
  return KernelModel(std::move(std_data), choice.h, choice.h0, std::move(s));
}

} // namespace cpi
