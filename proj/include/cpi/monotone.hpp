#pragma once

#include "core.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpi {

enum class CorrectionMethod
{
  ltor,
  rtol,
  avg
};

inline std::string correction_name(CorrectionMethod m)
{
  switch (m) {
    case CorrectionMethod::ltor: return "ltor";
    case CorrectionMethod::rtol: return "rtol";
    case CorrectionMethod::avg: return "avg";
  }
  return "?";
}

inline CorrectionMethod parse_correction(const std::string& s)
{
  if (s == "ltor")
    return CorrectionMethod::ltor;
  if (s == "rtol")
    return CorrectionMethod::rtol;
  if (s == "avg")
    return CorrectionMethod::avg;
  throw std::invalid_argument("unknown correction method '" + s + "'");
}

namespace detail {
inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }
} // namespace detail

//! Running maximum from the left, clamped to [0, 1].
inline std::vector<double> correct_ltor(const std::vector<double>& values)
{
  std::vector<double> out(values.size());
  double run = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < values.size(); ++j) {
    run = std::max(run, values[j]);
    out[j] = detail::clamp01(run);
  }
  return out;
}

//! Running minimum from the right, clamped to [0, 1].
inline std::vector<double> correct_rtol(const std::vector<double>& values)
{
  std::vector<double> out(values.size());
  double run = std::numeric_limits<double>::infinity();
  for (std::size_t j = values.size(); j-- > 0;) {
    run = std::min(run, values[j]);
    out[j] = detail::clamp01(run);
  }
  return out;
}

//! Elementwise mean of the LtoR and RtoL corrections.
inline std::vector<double> correct_avg(const std::vector<double>& values)
{
  std::vector<double> l = correct_ltor(values);
  std::vector<double> r = correct_rtol(values);
  for (std::size_t j = 0; j < l.size(); ++j)
    l[j] = 0.5 * (l[j] + r[j]);
  return l;
}

inline std::vector<double> correct(const std::vector<double>& values, CorrectionMethod m)
{
  switch (m) {
    case CorrectionMethod::ltor: return correct_ltor(values);
    case CorrectionMethod::rtol: return correct_rtol(values);
    case CorrectionMethod::avg: return correct_avg(values);
  }
  throw std::invalid_argument("bad correction method");
}

inline CdfProfile correct_profile(const CdfProfile& p, CorrectionMethod m)
{
  return CdfProfile(p.grid, correct(p.values, m), true);
}

//! The three corrections of one raw profile.
struct CorrectedProfiles
{
  CdfProfile avg;
  CdfProfile ltor;
  CdfProfile rtol;
};

inline CorrectedProfiles correct_all(const CdfProfile& raw)
{
  return { correct_profile(raw, CorrectionMethod::avg),
           correct_profile(raw, CorrectionMethod::ltor),
           correct_profile(raw, CorrectionMethod::rtol) };
}

} // namespace cpi
