#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace cpi {

struct NelderMeadResult
{
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

struct NelderMeadOptions
{
  int max_evaluations = 200;
  double initial_step = 0.5;
  //! stop once the simplex values spread by less than this
  double f_tolerance = 1e-8;
};

// Derivative-free minimization with the standard reflection (1), expansion (2),
// contraction (1/2) and shrink (1/2) coefficients. Non-finite objective values
// are treated as +inf. Never spends more than max_evaluations calls.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0,
                                    const NelderMeadOptions& opt = {})
{
  const Eigen::Index n = x0.size();
  NelderMeadResult best;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    double v = f(x);
    if (!std::isfinite(v))
      v = std::numeric_limits<double>::infinity();
    if (v < best.value || best.x.size() == 0) {
      best.value = v;
      best.x = x;
    }
    return v;
  };
  auto budget_left = [&] { return evals < opt.max_evaluations; };

  std::vector<Eigen::VectorXd> simplex{ x0 };
  std::vector<double> fv{ eval(x0) };
  for (Eigen::Index i = 0; i < n && budget_left(); ++i) {
    Eigen::VectorXd x = x0;
    x(i) += opt.initial_step;
    simplex.push_back(x);
    fv.push_back(eval(x));
  }
  if (static_cast<Eigen::Index>(simplex.size()) < n + 1) {
    best.evaluations = evals;
    return best;
  }

  std::vector<std::size_t> order(simplex.size());
  while (budget_left()) {
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second = order[order.size() - 2];
    if (std::isfinite(fv[hi]) && std::abs(fv[hi] - fv[lo]) <= opt.f_tolerance)
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < simplex.size(); ++k)
      if (k != hi)
        centroid += simplex[k];
    centroid /= static_cast<double>(n);

    Eigen::VectorXd xr = centroid + (centroid - simplex[hi]);
    double fr = eval(xr);
    if (fr < fv[lo]) {
      if (!budget_left()) {
        simplex[hi] = xr;
        fv[hi] = fr;
        break;
      }
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - simplex[hi]);
      double fe = eval(xe);
      if (fe < fr) {
        simplex[hi] = xe;
        fv[hi] = fe;
      } else {
        simplex[hi] = xr;
        fv[hi] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[hi] = xr;
      fv[hi] = fr;
      continue;
    }
    if (!budget_left())
      break;
    bool outside = fr < fv[hi];
    Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                 : Eigen::VectorXd(centroid + 0.5 * (simplex[hi] - centroid));
    double fc = eval(xc);
    if (fc < (outside ? fr : fv[hi])) {
      simplex[hi] = xc;
      fv[hi] = fc;
      continue;
    }
    for (std::size_t k = 0; k < simplex.size() && budget_left(); ++k) {
      if (k == lo)
        continue;
      simplex[k] = simplex[lo] + 0.5 * (simplex[k] - simplex[lo]);
      fv[k] = eval(simplex[k]);
    }
  }
  best.evaluations = evals;
  return best;
}

} // namespace cpi
