#pragma once

#include "core.hpp"
#include "normal.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace cpi {

//! Slack on covered-mass comparisons so that e.g. 0.96 - 0.01 counts as 0.95.
inline constexpr double mass_tolerance = 1e-12;

class BenchmarkUndefined : public std::domain_error
{
public:
  BenchmarkUndefined()
    : std::domain_error("benchmark PI undefined: estimated variance is negative")
  {
  }
};

struct CalibrationRequest
{
  double alpha = 0.05;
  CdfProfile profile_avg;
  std::optional<CdfProfile> profile_ltor;
  std::optional<CdfProfile> profile_rtol;
  std::optional<double> mean_estimate;

  const Grid& grid() const { return profile_avg.grid; }

  void validate() const
  {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!profile_avg.corrected)
      throw std::invalid_argument("calibration needs corrected profiles");
    for (const auto* p : { &profile_ltor, &profile_rtol }) {
      if (*p && (!(*p)->corrected || !((*p)->grid == profile_avg.grid)))
        throw std::invalid_argument("all profiles must be corrected and share one grid");
    }
  }
};

enum class CalibrationMode
{
  avg,
  twosided
};

namespace detail {

inline PredictionInterval from_indices(const Grid& grid, std::size_t l, std::size_t r,
                                       Method method, double alpha, bool feasible = true)
{
  PredictionInterval pi;
  pi.lo = grid[l];
  pi.hi = grid[r];
  pi.method = method;
  pi.level = 1.0 - alpha;
  pi.feasible = feasible;
  pi.indices = std::make_pair(l, r);
  return pi;
}

inline PredictionInterval full_range(const Grid& grid, Method method, double alpha)
{
  return from_indices(grid, 0, grid.size() - 1, method, alpha, false);
}

} // namespace detail

//! mu +/- z_{alpha/2} sqrt(kappa - mu^2).
inline PredictionInterval benchmark_pi(double mu, double kappa, double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1)");
  double var = kappa - mu * mu;
  if (!(var >= 0.0))
    throw BenchmarkUndefined();
  double z = normal::quantile(1.0 - alpha / 2.0);
  double s = std::sqrt(var);
  PredictionInterval pi;
  pi.lo = mu - z * s;
  pi.hi = mu + z * s;
  pi.method = Method::b;
  pi.level = 1.0 - alpha;
  return pi;
}

namespace detail {

// inf{t in [q_1, q_g] : F(t) >= level} on the linear interpolant, q_g if never reached.
inline double invert_profile(const CdfProfile& p, double level)
{
  const auto& v = p.values;
  if (v.front() >= level)
    return p.grid.front();
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] >= level) {
      double w = (level - v[j - 1]) / (v[j] - v[j - 1]);
      return p.grid[j - 1] + w * (p.grid[j] - p.grid[j - 1]);
    }
  }
  return p.grid.back();
}

} // namespace detail

//! Equal-tailed interval from the interpolated quantiles of a corrected profile.
inline PredictionInterval quantile_pi(const CdfProfile& p, double alpha)
{
  if (!p.corrected)
    throw std::invalid_argument("quantile_pi needs a corrected profile");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1)");
  PredictionInterval pi;
  pi.lo = detail::invert_profile(p, alpha / 2.0);
  pi.hi = detail::invert_profile(p, 1.0 - alpha / 2.0);
  pi.method = Method::quantile;
  pi.level = 1.0 - alpha;
  return pi;
}

// Shortest [q_l, q_r] with F(q_r) - F(q_l) >= 1 - alpha; ties go to the larger
// covered mass, then the smaller l.
inline PredictionInterval pi_minimal(const CalibrationRequest& req)
{
  req.validate();
  const auto& F = req.profile_avg.values;
  const std::size_t g = F.size();
  const double need = 1.0 - req.alpha - mass_tolerance;
  std::optional<std::pair<std::size_t, std::size_t>> best;
  double best_mass = 0.0;
  std::size_t r = 0;
  for (std::size_t l = 0; l < g; ++l) {
    if (r < l)
      r = l;
    while (r < g && F[r] - F[l] < need)
      ++r;
    if (r == g)
      break; // F[l] only grows with l, so no later l qualifies either
    double mass = F[r] - F[l];
    if (!best) {
      best = { l, r };
      best_mass = mass;
      continue;
    }
    std::size_t len = r - l;
    std::size_t best_len = best->second - best->first;
    if (len < best_len || (len == best_len && mass > best_mass)) {
      best = { l, r };
      best_mass = mass;
    }
  }
  if (!best)
    return detail::full_range(req.grid(), Method::m, req.alpha);
  return detail::from_indices(req.grid(), best->first, best->second, Method::m, req.alpha);
}

//! Grid index closest to t; the smaller index wins a tie.
inline std::size_t nearest_index(const Grid& grid, double t)
{
  std::size_t c = 0;
  double best = std::abs(grid[0] - t);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    double d = std::abs(grid[j] - t);
    if (d < best) {
      best = d;
      c = j;
    }
  }
  return c;
}

// Expands [q_{c-k}, q_{c+k}] around the grid point nearest the mean until the
// covered mass reaches 1 - alpha.
inline PredictionInterval pi_symmetric(const CalibrationRequest& req, CalibrationMode mode)
{
  req.validate();
  if (!req.mean_estimate)
    throw std::invalid_argument("symmetric calibration needs a mean estimate");
  if (mode == CalibrationMode::twosided && (!req.profile_ltor || !req.profile_rtol))
    throw std::invalid_argument("two-sided calibration needs LtoR and RtoL profiles");
  const Grid& grid = req.grid();
  const std::size_t g = grid.size();
  const auto& left = mode == CalibrationMode::avg ? req.profile_avg.values : req.profile_ltor->values;
  const auto& right = mode == CalibrationMode::avg ? req.profile_avg.values : req.profile_rtol->values;
  const Method tag = mode == CalibrationMode::avg ? Method::sa : Method::st;
  const double need = 1.0 - req.alpha - mass_tolerance;
  const std::size_t c = nearest_index(grid, *req.mean_estimate);
  for (std::size_t k = 0;; ++k) {
    std::size_t l = k >= c ? 0 : c - k;
    std::size_t r = std::min(c + k, g - 1);
    if (right[r] - left[l] >= need)
      return detail::from_indices(grid, l, r, tag, req.alpha);
    if (l == 0 && r == g - 1)
      break;
  }
  return detail::full_range(grid, tag, req.alpha);
}

// l = largest index with left-profile value <= alpha/2 (else the first point),
// r = smallest index with right-profile value >= 1 - alpha/2 (else the last).
inline PredictionInterval pi_asymmetric(const CalibrationRequest& req, CalibrationMode mode,
                                        Method tag = Method::aa)
{
  req.validate();
  if (mode == CalibrationMode::twosided && (!req.profile_ltor || !req.profile_rtol))
    throw std::invalid_argument("two-sided calibration needs LtoR and RtoL profiles");
  const auto& left = mode == CalibrationMode::avg ? req.profile_avg.values : req.profile_ltor->values;
  const auto& right = mode == CalibrationMode::avg ? req.profile_avg.values : req.profile_rtol->values;
  if (mode == CalibrationMode::twosided && tag == Method::aa)
    tag = Method::at;
  const std::size_t g = left.size();
  const double lo_level = req.alpha / 2.0 + mass_tolerance;
  const double hi_level = 1.0 - req.alpha / 2.0 - mass_tolerance;
  std::size_t l = 0;
  for (std::size_t k = g; k-- > 0;) {
    if (left[k] <= lo_level) {
      l = k;
      break;
    }
  }
  std::size_t r = g - 1;
  for (std::size_t k = 0; k < g; ++k) {
    if (right[k] >= hi_level) {
      r = k;
      break;
    }
  }
  if (r < l)
    r = l;
  return detail::from_indices(req.grid(), l, r, tag, req.alpha);
}

//! Widens an index-based interval by one grid step on each side.
inline PredictionInterval adjust_pi(const PredictionInterval& pi, const Grid& grid)
{
  if (!pi.indices)
    throw std::invalid_argument("adjust_pi needs an index-based interval");
  auto [l, r] = *pi.indices;
  if (l > r || r >= grid.size())
    throw std::invalid_argument("adjust_pi: indices out of range");
  std::size_t la = l == 0 ? 0 : l - 1;
  std::size_t ra = std::min(grid.size() - 1, r + 1);
  Method tag = pi.method;
  if (tag == Method::aa)
    tag = Method::aaa;
  else if (tag == Method::aak)
    tag = Method::aaak;
  PredictionInterval out = detail::from_indices(grid, la, ra, tag, 1.0 - pi.level, pi.feasible);
  out.level = pi.level;
  return out;
}

//! Dispatches one method over the estimates available at a query point.
inline PredictionInterval make_interval(Method method, const CalibrationRequest& req,
                                        std::optional<double> second_moment = std::nullopt)
{
  switch (method) {
    case Method::b:
      if (!req.mean_estimate || !second_moment)
        throw std::invalid_argument("benchmark PI needs mean and second-moment estimates");
      return benchmark_pi(*req.mean_estimate, *second_moment, req.alpha);
    case Method::quantile: return quantile_pi(req.profile_avg, req.alpha);
    case Method::m: return pi_minimal(req);
    case Method::sa: return pi_symmetric(req, CalibrationMode::avg);
    case Method::st: return pi_symmetric(req, CalibrationMode::twosided);
    case Method::aa: return pi_asymmetric(req, CalibrationMode::avg, Method::aa);
    case Method::at: return pi_asymmetric(req, CalibrationMode::twosided, Method::at);
    case Method::aaa:
      return adjust_pi(pi_asymmetric(req, CalibrationMode::avg, Method::aa), req.grid());
    case Method::aak: return pi_asymmetric(req, CalibrationMode::avg, Method::aak);
    case Method::aaak:
      return adjust_pi(pi_asymmetric(req, CalibrationMode::avg, Method::aak), req.grid());
  }
  throw std::invalid_argument("unknown method");
}

} // namespace cpi
