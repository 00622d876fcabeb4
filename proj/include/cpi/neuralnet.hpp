#pragma once

#include "core.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpi {

enum class Optimizer
{
  sgd,
  adam,
  rmsprop
};

inline std::string optimizer_name(Optimizer o)
{
  switch (o) {
    case Optimizer::sgd: return "sgd";
    case Optimizer::adam: return "adam";
    case Optimizer::rmsprop: return "rmsprop";
  }
  return "?";
}

inline Optimizer parse_optimizer(const std::string& s)
{
  if (s == "sgd")
    return Optimizer::sgd;
  if (s == "adam")
    return Optimizer::adam;
  if (s == "rmsprop")
    return Optimizer::rmsprop;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

struct MlpConfig
{
  std::vector<int> layer_widths{ 10, 10 };
  double lr = 0.001;
  int batch_size = 200;
  int epochs = 2000;
  double clip = 20.0;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 1;
  //! z-score the predictors with training-set moments
  bool standardize = true;

  void validate() const
  {
    if (layer_widths.empty())
      throw std::invalid_argument("network needs at least one hidden layer");
    for (int w : layer_widths)
      if (w < 1)
        throw std::invalid_argument("hidden layer widths must be >= 1");
    if (!(lr > 0.0))
      throw std::invalid_argument("learning rate must be > 0");
    if (batch_size < 1)
      throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 1)
      throw std::invalid_argument("epochs must be >= 1");
    if (!(clip > 0.0))
      throw std::invalid_argument("clip bound must be > 0");
  }
};

//! Column-wise affine map x -> (x - mean) / scale.
struct Standardizer
{
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer identity(Eigen::Index d)
  {
    return { Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d) };
  }

  static Standardizer fit(const Eigen::MatrixXd& x)
  {
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double var = (x.col(c).array() - s.mean(c)).square().sum() /
                   static_cast<double>(std::max<Eigen::Index>(x.rows() - 1, 1));
      double sd = std::sqrt(var);
      s.scale(c) = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const
  {
    return ((x - mean).array() / scale.array()).matrix();
  }

  //! Standardized copy laid out d x n (one sample per column).
  Eigen::MatrixXd apply_transposed(const Eigen::MatrixXd& x) const
  {
    Eigen::MatrixXd out = x.transpose();
    out.colwise() -= mean;
    out.array().colwise() /= scale.array();
    return out;
  }
};

//! Fully connected ReLU network with a linear scalar output.
struct MlpModel
{
  std::vector<Eigen::MatrixXd> weights; // layer l: out_l x in_l
  std::vector<Eigen::VectorXd> biases;
  MlpConfig config;
  Eigen::Index input_dim = 0;
  Standardizer standardizer;

  std::size_t layers() const { return weights.size(); }

  std::size_t parameter_count() const
  {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }

  double max_abs_parameter() const
  {
    double m = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].size())
        m = std::max(m, weights[l].cwiseAbs().maxCoeff());
      if (biases[l].size())
        m = std::max(m, biases[l].cwiseAbs().maxCoeff());
    }
    return m;
  }

  //! Weights (row-major per layer) then biases, layer by layer.
  std::vector<double> flat_parameters() const
  {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
        for (Eigen::Index c = 0; c < weights[l].cols(); ++c)
          out.push_back(weights[l](r, c));
      for (Eigen::Index r = 0; r < biases[l].size(); ++r)
        out.push_back(biases[l](r));
    }
    return out;
  }

  void set_flat_parameters(const std::vector<double>& p)
  {
    if (p.size() != parameter_count())
      throw std::invalid_argument("parameter vector has wrong length");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
        for (Eigen::Index c = 0; c < weights[l].cols(); ++c)
          weights[l](r, c) = p[k++];
      for (Eigen::Index r = 0; r < biases[l].size(); ++r)
        biases[l](r) = p[k++];
    }
  }
};

struct Gradients
{
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static Gradients zeros_like(const MlpModel& m)
  {
    Gradients g;
    for (std::size_t l = 0; l < m.layers(); ++l) {
      g.weights.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
      g.biases.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
    }
    return g;
  }
};

class TrainingDiverged : public std::runtime_error
{
public:
  TrainingDiverged(int epoch, std::optional<std::size_t> grid_index = std::nullopt)
    : std::runtime_error(message(epoch, grid_index))
    , epoch_(epoch)
    , grid_index_(grid_index)
  {
  }

  int epoch() const { return epoch_; }
  std::optional<std::size_t> grid_index() const { return grid_index_; }

private:
  static std::string message(int epoch, std::optional<std::size_t> j)
  {
    std::string s = "training diverged at epoch " + std::to_string(epoch);
    if (j)
      s += " (grid index " + std::to_string(*j) + ")";
    return s;
  }

  int epoch_;
  std::optional<std::size_t> grid_index_;
};

// Weights ~ U[-sqrt(6/fan_in), sqrt(6/fan_in)], biases zero.
inline MlpModel init_network(Eigen::Index input_dim, const MlpConfig& config)
{
  config.validate();
  if (input_dim < 1)
    throw std::invalid_argument("input dimension must be >= 1");
  MlpModel m;
  m.config = config;
  m.input_dim = input_dim;
  m.standardizer = Standardizer::identity(input_dim);
  Rng rng = make_rng(config.seed, 0x1417);
  Eigen::Index fan_in = input_dim;
  std::vector<int> outs = config.layer_widths;
  outs.push_back(1);
  for (int out : outs) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = u(rng);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(out));
    fan_in = out;
  }
  return m;
}

//! Network output for a predictor already in the model's input space.
inline double forward_standardized(const MlpModel& model, const Eigen::VectorXd& x)
{
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l + 1 < model.layers(); ++l)
    h = (model.weights[l] * h + model.biases[l]).cwiseMax(0.0);
  return (model.weights.back() * h + model.biases.back())(0);
}

inline double forward(const MlpModel& model, const Eigen::VectorXd& x)
{
  if (x.size() != model.input_dim)
    throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.input_dim));
  return forward_standardized(model, model.standardizer.apply(x));
}

//! Reusable activation buffers for batched forward/backward passes.
class BackpropWorkspace
{
public:
  // Mean squared error over the batch columns of xb (d x B) and its gradient.
  double mse_gradients(const MlpModel& m,
                       const Eigen::Ref<const Eigen::MatrixXd>& xb,
                       const Eigen::Ref<const Eigen::RowVectorXd>& zb,
                       Gradients& grad)
  {
    const std::size_t L = m.layers();
    const Eigen::Index B = xb.cols();
    acts_.resize(L);
    deltas_.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      acts_[l].resize(m.weights[l].rows(), B);
      if (l == 0)
        acts_[l].noalias() = m.weights[l] * xb;
      else
        acts_[l].noalias() = m.weights[l] * acts_[l - 1];
      acts_[l].colwise() += m.biases[l];
      if (l + 1 < L)
        acts_[l] = acts_[l].cwiseMax(0.0);
    }
    auto& out = acts_[L - 1];
    deltas_[L - 1] = out;
    deltas_[L - 1].row(0) -= zb;
    double loss = deltas_[L - 1].squaredNorm() / static_cast<double>(B);
    deltas_[L - 1] *= 2.0 / static_cast<double>(B);
    for (std::size_t l = L; l-- > 0;) {
      if (l == 0)
        grad.weights[l].noalias() = deltas_[l] * xb.transpose();
      else
        grad.weights[l].noalias() = deltas_[l] * acts_[l - 1].transpose();
      grad.biases[l] = deltas_[l].rowwise().sum();
      if (l > 0) {
        deltas_[l - 1].resize(m.weights[l].cols(), B);
        deltas_[l - 1].noalias() = m.weights[l].transpose() * deltas_[l];
        // ReLU derivative: post-activation > 0 iff pre-activation > 0
        deltas_[l - 1].array() *= (acts_[l - 1].array() > 0.0).cast<double>();
      }
    }
    return loss;
  }

private:
  std::vector<Eigen::MatrixXd> acts_;
  std::vector<Eigen::MatrixXd> deltas_;
};

inline double mse_gradients(const MlpModel& m,
                            const Eigen::MatrixXd& xb,
                            const Eigen::RowVectorXd& zb,
                            Gradients& grad)
{
  BackpropWorkspace ws;
  return ws.mse_gradients(m, xb, zb, grad);
}

struct OptimizerState
{
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long step = 0;

  static OptimizerState for_model(const MlpModel& model)
  {
    OptimizerState s;
    for (std::size_t l = 0; l < model.layers(); ++l) {
      s.m_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
      s.v_w.push_back(s.m_w.back());
      s.m_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
      s.v_b.push_back(s.m_b.back());
    }
    return s;
  }
};

inline constexpr double adam_beta1 = 0.9;
inline constexpr double adam_beta2 = 0.999;
inline constexpr double adam_eps = 1e-8;
inline constexpr double rmsprop_decay = 0.9;
inline constexpr double rmsprop_eps = 1e-8;

namespace detail {

template <typename P, typename G, typename S>
void update_block(P& param, const G& grad, S& m, S& v, const MlpConfig& cfg,
                  double bias1, double bias2)
{
  switch (cfg.optimizer) {
    case Optimizer::sgd:
      param.array() -= cfg.lr * grad.array();
      break;
    case Optimizer::adam:
      m = adam_beta1 * m + (1.0 - adam_beta1) * grad;
      v.array() = adam_beta2 * v.array() + (1.0 - adam_beta2) * grad.array().square();
      param.array() -= cfg.lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + adam_eps);
      break;
    case Optimizer::rmsprop:
      v.array() = rmsprop_decay * v.array() + (1.0 - rmsprop_decay) * grad.array().square();
      param.array() -= cfg.lr * grad.array() / (v.array().sqrt() + rmsprop_eps);
      break;
  }
  param = param.cwiseMax(-cfg.clip).cwiseMin(cfg.clip);
}

} // namespace detail

// One update of every parameter, followed by clipping to [-clip, clip].
inline void optimizer_step(MlpModel& model, OptimizerState& state, const Gradients& grad,
                           const MlpConfig& cfg)
{
  if (grad.weights.size() != model.layers() || grad.biases.size() != model.layers())
    throw std::invalid_argument("gradient layer count mismatch");
  ++state.step;
  double bias1 = 1.0 - std::pow(adam_beta1, static_cast<double>(state.step));
  double bias2 = 1.0 - std::pow(adam_beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < model.layers(); ++l) {
    if (grad.weights[l].rows() != model.weights[l].rows() ||
        grad.weights[l].cols() != model.weights[l].cols() ||
        grad.biases[l].size() != model.biases[l].size())
      throw std::invalid_argument("gradient shape mismatch at layer " + std::to_string(l));
    detail::update_block(model.weights[l], grad.weights[l], state.m_w[l], state.v_w[l], cfg,
                         bias1, bias2);
    detail::update_block(model.biases[l], grad.biases[l], state.m_b[l], state.v_b[l], cfg,
                         bias1, bias2);
  }
}

//! Mini-batch MSE training on predictors laid out d x n, already standardized.
inline MlpModel train_mse_standardized(const Eigen::MatrixXd& xt,
                                       const Eigen::VectorXd& z,
                                       const MlpConfig& config,
                                       std::vector<double>* epoch_losses = nullptr)
{
  const Eigen::Index n = xt.cols();
  if (n < 1 || z.size() != n)
    throw std::invalid_argument("train_mse: targets and predictors disagree in length");
  MlpModel model = init_network(xt.rows(), config);
  OptimizerState state = OptimizerState::for_model(model);
  Gradients grad = Gradients::zeros_like(model);
  BackpropWorkspace ws;
  Rng rng = make_rng(config.seed, 0x5aff1e);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{ 0 });
  const Eigen::Index B = std::min<Eigen::Index>(config.batch_size, n);
  Eigen::MatrixXd xb(xt.rows(), B);
  Eigen::RowVectorXd zb(B);
  if (epoch_losses)
    epoch_losses->clear();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += B) {
      Eigen::Index len = std::min(B, n - start);
      if (xb.cols() != len) {
        xb.resize(xt.rows(), len);
        zb.resize(len);
      }
      for (Eigen::Index k = 0; k < len; ++k) {
        auto i = perm[static_cast<std::size_t>(start + k)];
        xb.col(k) = xt.col(i);
        zb(k) = z(i);
      }
      double loss = ws.mse_gradients(model, xb, zb, grad);
      if (!std::isfinite(loss))
        throw TrainingDiverged(epoch);
      loss_sum += loss * static_cast<double>(len);
      optimizer_step(model, state, grad, config);
    }
    if (epoch_losses)
      epoch_losses->push_back(loss_sum / static_cast<double>(n));
  }
  return model;
}

inline MlpModel train_mse(const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& z,
                          const MlpConfig& config,
                          std::vector<double>* epoch_losses = nullptr)
{
  config.validate();
  if (x.rows() != z.size())
    throw std::invalid_argument("train_mse: targets and predictors disagree in length");
  Standardizer s = config.standardize ? Standardizer::fit(x) : Standardizer::identity(x.cols());
  MlpModel m = train_mse_standardized(s.apply_transposed(x), z, config, epoch_losses);
  m.standardizer = std::move(s);
  return m;
}

inline MlpModel train_mse(const Dataset& data, const Eigen::VectorXd& z, const MlpConfig& config,
                          std::vector<double>* epoch_losses = nullptr)
{
  return train_mse(data.x(), z, config, epoch_losses);
}

inline Eigen::VectorXd make_indicators(const Eigen::VectorXd& y, double q)
{
  return (y.array() <= q).cast<double>().matrix();
}

//! One indicator-regression network per grid point, plus an optional mean model.
struct CdfEnsemble
{
  std::vector<MlpModel> models;
  Grid grid;
  std::optional<MlpModel> mean_model;
};

// Stream ids for per-model seeds; grid index j uses j itself.
inline constexpr std::uint64_t mean_model_stream = 1ULL << 40;
inline constexpr std::uint64_t second_moment_stream = (1ULL << 40) + 1;

inline MlpConfig with_seed(MlpConfig c, std::uint64_t seed)
{
  c.seed = seed;
  return c;
}

inline CdfEnsemble fit_cdf_ensemble(const Dataset& data, const Grid& grid, const MlpConfig& config,
                                    bool with_mean, unsigned threads = 1)
{
  config.validate();
  Standardizer s = config.standardize ? Standardizer::fit(data.x())
                                      : Standardizer::identity(data.d());
  const Eigen::MatrixXd xt = s.apply_transposed(data.x());
  const std::size_t g = grid.size();
  std::vector<std::optional<MlpModel>> trained(g + (with_mean ? 1 : 0));
  parallel_for(trained.size(), threads, [&](std::size_t k) {
    if (k < g) {
      try {
        trained[k] = train_mse_standardized(xt, make_indicators(data.y(), grid[k]),
                                            with_seed(config, derive_seed(config.seed, k)));
      } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(e.epoch(), k);
      }
    } else {
      trained[k] = train_mse_standardized(
        xt, data.y(), with_seed(config, derive_seed(config.seed, mean_model_stream)));
    }
    trained[k]->standardizer = s;
  });
  CdfEnsemble ens{ {}, grid, std::nullopt };
  ens.models.reserve(g);
  for (std::size_t j = 0; j < g; ++j)
    ens.models.push_back(std::move(*trained[j]));
  if (with_mean)
    ens.mean_model = std::move(*trained[g]);
  return ens;
}

// Raw network outputs at every grid point; not monotone, not clamped.
inline CdfProfile ensemble_profile(const CdfEnsemble& ens, const Eigen::VectorXd& x_f)
{
  if (ens.models.empty())
    throw std::invalid_argument("empty ensemble");
  if (x_f.size() != ens.models.front().input_dim)
    throw std::invalid_argument("ensemble_profile: input dimension mismatch");
  Eigen::VectorXd xs = ens.models.front().standardizer.apply(x_f);
  std::vector<double> values(ens.models.size());
  for (std::size_t j = 0; j < ens.models.size(); ++j)
    values[j] = forward_standardized(ens.models[j], xs);
  return CdfProfile(ens.grid, std::move(values), false);
}

// ---------------------------------------------------------------------------
// Serialization: JSON text, parameters written with 17 significant digits.

namespace detail {

inline void write_number(std::ostream& os, double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

template <typename Range>
void write_array(std::ostream& os, const Range& r)
{
  os << '[';
  bool first = true;
  for (double v : r) {
    if (!first)
      os << ',';
    write_number(os, v);
    first = false;
  }
  os << ']';
}

inline std::vector<double> to_std(const Eigen::VectorXd& v)
{
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v)
{
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace detail

inline void write_model(std::ostream& os, const MlpModel& m)
{
  os << "{\"format\":\"cpi-mlp\",\"version\":1,\"input_dim\":" << m.input_dim;
  os << ",\"config\":{\"layer_widths\":[";
  for (std::size_t i = 0; i < m.config.layer_widths.size(); ++i)
    os << (i ? "," : "") << m.config.layer_widths[i];
  os << "],\"lr\":";
  detail::write_number(os, m.config.lr);
  os << ",\"batch_size\":" << m.config.batch_size << ",\"epochs\":" << m.config.epochs
     << ",\"clip\":";
  detail::write_number(os, m.config.clip);
  os << ",\"optimizer\":\"" << optimizer_name(m.config.optimizer) << "\",\"seed\":"
     << m.config.seed << ",\"standardize\":" << (m.config.standardize ? "true" : "false") << "}";
  os << ",\"standardizer\":{\"mean\":";
  detail::write_array(os, detail::to_std(m.standardizer.mean));
  os << ",\"scale\":";
  detail::write_array(os, detail::to_std(m.standardizer.scale));
  os << "},\"layers\":[";
  for (std::size_t l = 0; l < m.layers(); ++l) {
    const auto& w = m.weights[l];
    std::vector<double> rows;
    rows.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        rows.push_back(w(r, c));
    os << (l ? "," : "") << "{\"rows\":" << w.rows() << ",\"cols\":" << w.cols()
       << ",\"weights\":";
    detail::write_array(os, rows);
    os << ",\"bias\":";
    detail::write_array(os, detail::to_std(m.biases[l]));
    os << '}';
  }
  os << "]}";
}

inline MlpModel model_from_json(const nlohmann::json& j)
{
  if (j.value("format", "") != "cpi-mlp")
    throw std::runtime_error("not a serialized network");
  MlpModel m;
  m.input_dim = j.at("input_dim").get<Eigen::Index>();
  const auto& c = j.at("config");
  m.config.layer_widths = c.at("layer_widths").get<std::vector<int>>();
  m.config.lr = c.at("lr").get<double>();
  m.config.batch_size = c.at("batch_size").get<int>();
  m.config.epochs = c.at("epochs").get<int>();
  m.config.clip = c.at("clip").get<double>();
  m.config.optimizer = parse_optimizer(c.at("optimizer").get<std::string>());
  m.config.seed = c.at("seed").get<std::uint64_t>();
  m.config.standardize = c.at("standardize").get<bool>();
  m.standardizer.mean = detail::to_eigen(j.at("standardizer").at("mean").get<std::vector<double>>());
  m.standardizer.scale =
    detail::to_eigen(j.at("standardizer").at("scale").get<std::vector<double>>());
  Eigen::Index fan_in = m.input_dim;
  for (const auto& layer : j.at("layers")) {
    auto rows = layer.at("rows").get<Eigen::Index>();
    auto cols = layer.at("cols").get<Eigen::Index>();
    auto w = layer.at("weights").get<std::vector<double>>();
    auto b = layer.at("bias").get<std::vector<double>>();
    if (cols != fan_in || static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows)
      throw std::runtime_error("serialized network has inconsistent layer shapes");
    Eigen::MatrixXd wm(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index cc = 0; cc < cols; ++cc)
        wm(r, cc) = w[static_cast<std::size_t>(r * cols + cc)];
    m.weights.push_back(std::move(wm));
    m.biases.push_back(detail::to_eigen(b));
    fan_in = rows;
  }
  if (m.weights.empty() || fan_in != 1)
    throw std::runtime_error("serialized network must end in a scalar output");
  return m;
}

inline void save_ensemble(const std::string& path, const CdfEnsemble& ens)
{
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "{\"format\":\"cpi-ensemble\",\"version\":1,\"grid\":";
  detail::write_array(os, ens.grid.points());
  os << ",\"models\":[";
  for (std::size_t j = 0; j < ens.models.size(); ++j) {
    os << (j ? ",\n" : "\n");
    write_model(os, ens.models[j]);
  }
  os << "],\"mean_model\":";
  if (ens.mean_model)
    write_model(os, *ens.mean_model);
  else
    os << "null";
  os << "}\n";
}

inline CdfEnsemble load_ensemble(const std::string& path)
{
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(is);
  if (j.value("format", "") != "cpi-ensemble")
    throw std::runtime_error("'" + path + "' is not a serialized ensemble");
  CdfEnsemble ens{ {}, Grid(j.at("grid").get<std::vector<double>>()), std::nullopt };
  for (const auto& mj : j.at("models"))
    ens.models.push_back(model_from_json(mj));
  if (ens.models.size() != ens.grid.size())
    throw std::runtime_error("ensemble model count does not match grid");
  if (!j.at("mean_model").is_null())
    ens.mean_model = model_from_json(j.at("mean_model"));
  return ens;
}

} // namespace cpi
