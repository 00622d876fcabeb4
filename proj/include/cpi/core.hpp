#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cpi {

//! Paired predictor matrix (n x d) and response vector (n).
class Dataset
{
public:
  Dataset() = default;

  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y)
    : x_(std::move(x))
    , y_(std::move(y))
  {
    if (x_.rows() < 1 || x_.cols() < 1)
      throw std::invalid_argument("dataset needs n >= 1 and d >= 1");
    if (x_.rows() != y_.size())
      throw std::invalid_argument("dataset: x has " + std::to_string(x_.rows()) +
                                  " rows but y has " + std::to_string(y_.size()));
    if (!x_.allFinite() || !y_.allFinite())
      throw std::invalid_argument("dataset contains non-finite values");
  }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  Eigen::Index n() const { return y_.size(); }
  Eigen::Index d() const { return x_.cols(); }
  bool empty() const { return y_.size() == 0; }

  //! Rows picked by index, in the given order.
  Dataset subset(const std::vector<std::size_t>& rows) const
  {
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x_.cols());
    Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      auto i = static_cast<Eigen::Index>(rows[k]);
      xs.row(static_cast<Eigen::Index>(k)) = x_.row(i);
      ys(static_cast<Eigen::Index>(k)) = y_(i);
    }
    Dataset out;
    out.x_ = std::move(xs);
    out.y_ = std::move(ys);
    return out;
  }

private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

//! Equally spaced points on the response axis.
class Grid
{
public:
  Grid(std::vector<double> points)
    : points_(std::move(points))
  {
    if (points_.size() < 2)
      throw std::invalid_argument("grid needs at least 2 points");
    spacing_ = points_[1] - points_[0];
    if (!(spacing_ > 0.0))
      throw std::invalid_argument("grid points must be strictly increasing");
    for (std::size_t j = 1; j < points_.size(); ++j) {
      double gap = points_[j] - points_[j - 1];
      if (std::abs(gap - spacing_) > 1e-9 * std::max(std::abs(spacing_), 1.0))
        throw std::invalid_argument("grid points are not equally spaced");
    }
  }

  std::size_t size() const { return points_.size(); }
  double spacing() const { return spacing_; }
  double operator[](std::size_t j) const { return points_[j]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  const std::vector<double>& points() const { return points_; }

  bool operator==(const Grid& other) const { return points_ == other.points_; }

private:
  std::vector<double> points_;
  double spacing_ = 0.0;
};

// g points from min(y) to max(y) inclusive.
inline Grid build_grid(const Eigen::VectorXd& y, std::size_t g)
{
  if (g < 2)
    throw std::invalid_argument("grid count must be >= 2");
  if (y.size() == 0)
    throw std::invalid_argument("empty response vector");
  if (!y.allFinite())
    throw std::invalid_argument("response vector contains non-finite values");
  double lo = y.minCoeff();
  double hi = y.maxCoeff();
  if (!(hi > lo))
    throw std::invalid_argument("degenerate response range");
  double step = (hi - lo) / static_cast<double>(g - 1);
  std::vector<double> pts(g);
  for (std::size_t j = 0; j < g; ++j)
    pts[j] = lo + step * static_cast<double>(j);
  pts.back() = hi;
  return Grid(std::move(pts));
}

//! Conditional CDF values at grid points for one query predictor.
struct CdfProfile
{
  Grid grid;
  std::vector<double> values;
  bool corrected = false;

  CdfProfile(Grid grid_, std::vector<double> values_, bool corrected_ = false)
    : grid(std::move(grid_))
    , values(std::move(values_))
    , corrected(corrected_)
  {
    if (values.size() != grid.size())
      throw std::invalid_argument("profile length does not match grid");
    if (corrected) {
      for (std::size_t j = 0; j < values.size(); ++j) {
        if (!(values[j] >= 0.0 && values[j] <= 1.0) ||
            (j > 0 && values[j] < values[j - 1]))
          throw std::invalid_argument(
            "corrected profile must be nondecreasing and within [0, 1]");
      }
    }
  }
};

// Piecewise-linear interpolation of a corrected profile; clamped outside the grid.
inline double eval_profile(const CdfProfile& p, double t)
{
  if (!p.corrected)
    throw std::invalid_argument("eval_profile needs a corrected profile");
  const auto& pts = p.grid.points();
  if (t <= pts.front())
    return p.values.front();
  if (t >= pts.back())
    return p.values.back();
  auto it = std::upper_bound(pts.begin(), pts.end(), t);
  std::size_t j = static_cast<std::size_t>(it - pts.begin()); // pts[j-1] <= t < pts[j]
  double t0 = pts[j - 1];
  double t1 = pts[j];
  double w = (t - t0) / (t1 - t0);
  return p.values[j - 1] + w * (p.values[j] - p.values[j - 1]);
}

enum class Method
{
  b,
  quantile,
  m,
  sa,
  st,
  aa,
  at,
  aaa,
  aak,
  aaak
};

inline std::string_view method_name(Method m)
{
  switch (m) {
    case Method::b: return "b";
    case Method::quantile: return "quantile";
    case Method::m: return "m";
    case Method::sa: return "sa";
    case Method::st: return "st";
    case Method::aa: return "aa";
    case Method::at: return "at";
    case Method::aaa: return "aaa";
    case Method::aak: return "aak";
    case Method::aaak: return "aaak";
  }
  return "?";
}

inline Method parse_method(std::string_view s)
{
  for (Method m : { Method::b, Method::quantile, Method::m, Method::sa,
                    Method::st, Method::aa, Method::at, Method::aaa,
                    Method::aak, Method::aaak })
    if (method_name(m) == s)
      return m;
  throw std::invalid_argument("unknown PI method '" + std::string(s) + "'");
}

//! Closed interval [lo, hi] with the method that produced it.
struct PredictionInterval
{
  double lo = 0.0;
  double hi = 0.0;
  Method method = Method::aa;
  double level = 0.95;
  //! false when no index pair met the level and the full grid range was returned
  bool feasible = true;
  //! Grid indices (0-based) of the endpoints for grid-based methods.
  std::optional<std::pair<std::size_t, std::size_t>> indices;

  double length() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
  bool contains(const PredictionInterval& o) const
  {
    return lo <= o.lo && o.hi <= hi;
  }
};

} // namespace cpi
