// Fits both estimators on a small Model-1 sample and prints intervals at one
// predictor value.

#include "cpi/estimator.hpp"
#include "cpi/simbench.hpp"

#include <cstdio>

int main()
{
  cpi::SimModelSpec spec;
  spec.n = 500;
  cpi::Dataset train = cpi::simulate(spec);
  cpi::Grid grid = cpi::build_grid(train.y(), 50);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(cpi::sim_dimension);
  std::printf("true mean %.3f\n", cpi::mean_function(spec.id, x));

  cpi::EstimatorConfig net;
  std::vector<cpi::Method> nm{ cpi::Method::m, cpi::Method::aa, cpi::Method::aaa };
  cpi::FittedEstimator fitted = cpi::fit_estimator(train, grid, net, nm);
  auto pis = cpi::intervals_at(fitted.at(x), nm, 0.05);
  for (const auto& pi : pis)
    std::printf("network %-4s [%.3f, %.3f]\n", std::string(cpi::method_name(pi->method)).c_str(),
                pi->lo, pi->hi);

  cpi::EstimatorConfig ker;
  ker.kind = cpi::EstimatorKind::kernel;
  std::vector<cpi::Method> km{ cpi::Method::aak, cpi::Method::aaak };
  cpi::FittedEstimator kfit = cpi::fit_estimator(train, grid, ker, km);
  for (const auto& pi : cpi::intervals_at(kfit.at(x), km, 0.05))
    std::printf("kernel  %-4s [%.3f, %.3f]\n", std::string(cpi::method_name(pi->method)).c_str(),
                pi->lo, pi->hi);
}
