#pragma once

#include "calibrate.hpp"
#include "core.hpp"
#include "kernel.hpp"
#include "monotone.hpp"
#include "neuralnet.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpi {

enum class EstimatorKind
{
  network,
  kernel
};

inline std::string estimator_name(EstimatorKind k)
{
  return k == EstimatorKind::network ? "network" : "kernel";
}

inline EstimatorKind parse_estimator(const std::string& s)
{
  if (s == "network")
    return EstimatorKind::network;
  if (s == "kernel")
    return EstimatorKind::kernel;
  throw std::invalid_argument("unknown estimator '" + s + "'");
}

//! Methods each estimator family can produce.
inline const std::vector<Method>& supported_methods(EstimatorKind k)
{
  static const std::vector<Method> net{ Method::b,  Method::quantile, Method::m,  Method::sa,
                                        Method::st, Method::aa,       Method::at, Method::aaa };
  static const std::vector<Method> ker{ Method::b,  Method::quantile, Method::m,   Method::sa,
                                        Method::st, Method::aak,      Method::aaak };
  return k == EstimatorKind::network ? net : ker;
}

inline void check_methods(EstimatorKind k, const std::vector<Method>& methods)
{
  if (methods.empty())
    throw std::invalid_argument("methods list is empty");
  const auto& ok = supported_methods(k);
  for (Method m : methods)
    if (std::find(ok.begin(), ok.end(), m) == ok.end())
      throw std::invalid_argument("method '" + std::string(method_name(m)) +
                                  "' is not available for the " + estimator_name(k) +
                                  " estimator");
}

inline bool needs_mean(const std::vector<Method>& methods)
{
  return std::any_of(methods.begin(), methods.end(), [](Method m) {
    return m == Method::b || m == Method::sa || m == Method::st;
  });
}

inline bool needs_second_moment(const std::vector<Method>& methods)
{
  return std::find(methods.begin(), methods.end(), Method::b) != methods.end();
}

struct EstimatorConfig
{
  EstimatorKind kind = EstimatorKind::network;
  MlpConfig mlp;
  BandwidthStrategy bandwidth;
  bool standardize_kernel = true;
};

//! Everything the calibration step needs at one query point.
struct PointEstimate
{
  CdfProfile raw;
  CorrectedProfiles corrected;
  std::optional<double> mean;
  std::optional<double> second_moment;
};

//! A conditional-CDF estimator fitted on one training set for one grid.
class FittedEstimator
{
public:
  static FittedEstimator fit_network(const Dataset& train, const Grid& grid, const MlpConfig& cfg,
                                     bool with_mean, bool with_second_moment, unsigned threads = 1)
  {
    FittedEstimator f;
    f.ensemble_ = std::make_shared<CdfEnsemble>(fit_cdf_ensemble(train, grid, cfg, with_mean, threads));
    if (with_second_moment) {
      Eigen::VectorXd y2 = train.y().cwiseAbs2();
      f.second_ = std::make_shared<MlpModel>(
        train_mse(train, y2, with_seed(cfg, derive_seed(cfg.seed, second_moment_stream))));
    }
    f.grid_ = grid;
    return f;
  }

  static FittedEstimator from_kernel(std::shared_ptr<const KernelModel> model, const Grid& grid)
  {
    FittedEstimator f;
    f.kernel_ = std::move(model);
    f.grid_ = grid;
    return f;
  }

  const Grid& grid() const { return *grid_; }

  PointEstimate at(const Eigen::VectorXd& x) const
  {
    if (kernel_) {
      CdfProfile p = kernel_profile(*kernel_, x, *grid_);
      CorrectedProfiles c = correct_all(p);
      return { std::move(p), std::move(c), conditional_mean(*kernel_, x),
               conditional_second_moment(*kernel_, x) };
    }
    CdfProfile raw = ensemble_profile(*ensemble_, x);
    CorrectedProfiles c = correct_all(raw);
    std::optional<double> mean;
    if (ensemble_->mean_model)
      mean = forward(*ensemble_->mean_model, x);
    std::optional<double> second;
    if (second_)
      second = forward(*second_, x);
    return { std::move(raw), std::move(c), mean, second };
  }

private:
  FittedEstimator() = default;

  std::shared_ptr<const CdfEnsemble> ensemble_;
  std::shared_ptr<const MlpModel> second_;
  std::shared_ptr<const KernelModel> kernel_;
  std::optional<Grid> grid_;
};

inline FittedEstimator fit_estimator(const Dataset& train, const Grid& grid,
                                     const EstimatorConfig& cfg,
                                     const std::vector<Method>& methods,
                                     unsigned threads = 1)
{
  if (cfg.kind == EstimatorKind::network)
    return FittedEstimator::fit_network(train, grid, cfg.mlp, needs_mean(methods),
                                        needs_second_moment(methods), threads);
  auto model = std::make_shared<const KernelModel>(
    fit_kernel_model(train, cfg.bandwidth, cfg.standardize_kernel));
  return FittedEstimator::from_kernel(std::move(model), grid);
}

//! Intervals for every requested method at one point; b is empty when undefined.
inline std::vector<std::optional<PredictionInterval>>
intervals_at(const PointEstimate& e, const std::vector<Method>& methods, double alpha)
{
  CalibrationRequest req{ alpha, e.corrected.avg, e.corrected.ltor, e.corrected.rtol, e.mean };
  std::vector<std::optional<PredictionInterval>> out;
  out.reserve(methods.size());
  for (Method m : methods) {
    try {
      out.push_back(make_interval(m, req, e.second_moment));
    } catch (const BenchmarkUndefined&) {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

} // namespace cpi
