#pragma once

#include "core.hpp"
#include "estimator.hpp"
#include "rng.hpp"
#include "simbench.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace cpi {

// ---------------------------------------------------------------------------
// CSV input

namespace detail {

inline std::string trim_cell(std::string s)
{
  auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back())))
    s.pop_back();
  std::size_t a = 0;
  while (a < s.size() && issp(static_cast<unsigned char>(s[a])))
    ++a;
  s.erase(0, a);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_line(const std::string& line, char delim)
{
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, delim))
    out.push_back(trim_cell(cur));
  if (!line.empty() && line.back() == delim)
    out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& v)
{
  if (s.empty())
    return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+')
    ++first;
  auto [p, ec] = std::from_chars(first, last, v);
  return ec == std::errc() && p == last && std::isfinite(v);
}

} // namespace detail

// Header row required. Rows are numbered as file lines, so the header is row 1.
inline Dataset load_csv(const std::string& path, char delimiter = ';',
                        const std::string& target = "quality")
{
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("'" + path + "' is empty");
  const auto header = detail::split_line(line, delimiter);
  auto tit = std::find(header.begin(), header.end(), target);
  if (tit == header.end())
    throw std::runtime_error("'" + path + "' has no column named '" + target + "'");
  const auto tcol = static_cast<std::size_t>(tit - header.begin());
  if (header.size() < 2)
    throw std::runtime_error("'" + path + "' needs at least one predictor column");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim_cell(line).empty())
      continue;
    auto cells = detail::split_line(line, delimiter);
    if (cells.size() != header.size())
      throw std::runtime_error("row " + std::to_string(lineno) + " has " +
                               std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(header.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (!detail::parse_double(cells[c], vals[c]))
        throw std::runtime_error("non-numeric cell '" + cells[c] + "' at row " +
                                 std::to_string(lineno) + ", column " + header[c]);
    rows.push_back(std::move(vals));
  }
  if (rows.empty())
    throw std::runtime_error("'" + path + "' has no data rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c = 0;
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (k == tcol)
        y(i) = rows[static_cast<std::size_t>(i)][k];
      else
        x(i, c++) = rows[static_cast<std::size_t>(i)][k];
    }
  }
  return Dataset(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------
// Train/test split

struct SplitResult
{
  Dataset train;
  Dataset test; // empty when test_size == 0
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

inline SplitResult split(const Dataset& data, Eigen::Index train_size, Eigen::Index test_size,
                         std::uint64_t seed)
{
  if (train_size < 1 || test_size < 0 || train_size + test_size > data.n())
    throw std::invalid_argument("split sizes " + std::to_string(train_size) + " + " +
                                std::to_string(test_size) + " exceed " +
                                std::to_string(data.n()) + " rows");
  std::vector<std::size_t> perm(static_cast<std::size_t>(data.n()));
  std::iota(perm.begin(), perm.end(), std::size_t{ 0 });
  Rng rng = make_rng(seed, 0x5b117);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + train_size);
  std::vector<std::size_t> te(perm.begin() + train_size, perm.begin() + train_size + test_size);
  Dataset train = data.subset(tr);
  Dataset test = data.subset(te);
  return { std::move(train), std::move(test), std::move(tr), std::move(te) };
}

// ---------------------------------------------------------------------------
// Empirical evaluation

//! CR_t and AL_t for each method on one test set. Points where b is undefined
//! are dropped for every method.
inline std::vector<EvalReport> empirical_eval(const FittedEstimator& est,
                                              const std::vector<Method>& methods,
                                              const Dataset& test, double alpha)
{
  const std::size_t k = methods.size();
  std::vector<EvalReport> out(k);
  for (std::size_t m = 0; m < k; ++m) {
    out[m].method = methods[m];
    out[m].replications = 1;
  }
  long used = 0;
  long skipped = 0;
  for (Eigen::Index i = 0; i < test.n(); ++i) {
    Eigen::VectorXd x = test.x().row(i).transpose();
    auto pis = intervals_at(est.at(x), methods, alpha);
    if (!std::all_of(pis.begin(), pis.end(), [](const auto& p) { return p.has_value(); })) {
      ++skipped;
      continue;
    }
    ++used;
    for (std::size_t m = 0; m < k; ++m) {
      out[m].cr += pis[m]->contains(test.y()(i)) ? 1.0 : 0.0;
      out[m].al += pis[m]->length();
    }
  }
  for (auto& r : out) {
    if (used > 0) {
      r.cr /= static_cast<double>(used);
      r.al /= static_cast<double>(used);
    } else {
      r.cr = r.al = std::numeric_limits<double>::quiet_NaN();
    }
    r.test_points_used = static_cast<double>(used);
    r.skipped_benchmark_points = skipped;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

enum class RunMode
{
  simulate,
  csv
};

struct ExperimentConfig
{
  RunMode mode = RunMode::simulate;
  // simulate mode
  int model = 1;
  long n = 2000;
  bool empirical_skew_scaling = false;
  int replications = 20;
  int test_points = 200;
  int draws = 1000;
  // csv mode
  std::string input;
  char delimiter = ';';
  std::string target = "quality";
  long train_size = 199;
  long test_size = 1120;
  // estimator
  EstimatorKind estimator = EstimatorKind::network;
  std::vector<int> widths{ 10, 10 };
  double lr = 0.001;
  int batch_size = 200;
  int epochs = 2000;
  double clip = 20.0;
  Optimizer optimizer = Optimizer::adam;
  BandwidthRule bandwidth = BandwidthRule::mlcv;
  double h = 1.0;
  double h0 = 1.0;
  int bandwidth_budget = 200;
  // calibration sweep
  std::vector<std::size_t> grid{ 200 };
  std::vector<Method> methods{ Method::b,  Method::m,  Method::sa,
                               Method::st, Method::aa, Method::at };
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = "out";

  bool operator==(const ExperimentConfig&) const = default;

  // Everything a run checks before it starts computing.
  void validate() const
  {
    if (grid.empty())
      throw std::invalid_argument("config: g list is empty");
    for (auto g : grid)
      if (g < 2)
        throw std::invalid_argument("config: every g must be >= 2");
    check_methods(estimator, methods);
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("config: alpha must lie in (0, 1)");
    if (mode == RunMode::simulate) {
      if (model < 1 || model > 6)
        throw std::invalid_argument("config: model must be in 1..6");
      if (n < 1)
        throw std::invalid_argument("config: n must be >= 1");
      if (replications < 1 || test_points < 1 || draws < 1)
        throw std::invalid_argument("config: S, T and V must be >= 1");
    } else {
      if (input.empty())
        throw std::invalid_argument("config: csv mode needs an input path");
      if (!std::filesystem::is_regular_file(input))
        throw std::invalid_argument("config: input file '" + input + "' does not exist");
      if (train_size < 1 || test_size < 1)
        throw std::invalid_argument("config: train_size and test_size must be >= 1");
    }
    mlp_config().validate();
    bandwidth_strategy().validate();
    if (out.empty())
      throw std::invalid_argument("config: output directory is empty");
  }

  MlpConfig mlp_config() const
  {
    MlpConfig c;
    c.layer_widths = widths;
    c.lr = lr;
    c.batch_size = batch_size;
    c.epochs = epochs;
    c.clip = clip;
    c.optimizer = optimizer;
    c.seed = derive_seed(seed, 0x6e6e);
    return c;
  }

  BandwidthStrategy bandwidth_strategy() const
  {
    BandwidthStrategy b;
    b.rule = bandwidth;
    b.h = h;
    b.h0 = h0;
    b.budget = bandwidth_budget;
    return b;
  }

  EstimatorConfig estimator_config() const
  {
    EstimatorConfig e;
    e.kind = estimator;
    e.mlp = mlp_config();
    e.bandwidth = bandwidth_strategy();
    return e;
  }
};

//! Named size presets; they set S, T, V and, for smoke, a cheaper network.
inline void apply_profile(ExperimentConfig& c, const std::string& profile)
{
  if (profile == "smoke") {
    c.replications = 2;
    c.test_points = 20;
    c.draws = 200;
    c.n = 500;
    c.epochs = 300;
    c.grid = { 50 };
  } else if (profile == "desk") {
    c.replications = 20;
    c.test_points = 200;
    c.draws = 1000;
  } else if (profile == "paper") {
    c.replications = 500;
    c.test_points = 2000;
    c.draws = 5000;
  } else {
    throw std::invalid_argument("unknown profile '" + profile + "' (smoke, desk, paper)");
  }
}

inline nlohmann::json to_json(const ExperimentConfig& c)
{
  nlohmann::json j;
  j["mode"] = c.mode == RunMode::simulate ? "simulate" : "csv";
  j["model"] = c.model;
  j["n"] = c.n;
  j["empirical_skew_scaling"] = c.empirical_skew_scaling;
  j["S"] = c.replications;
  j["T"] = c.test_points;
  j["V"] = c.draws;
  j["input"] = c.input;
  j["delimiter"] = std::string(1, c.delimiter);
  j["target"] = c.target;
  j["train_size"] = c.train_size;
  j["test_size"] = c.test_size;
  j["estimator"] = estimator_name(c.estimator);
  j["widths"] = c.widths;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["clip"] = c.clip;
  j["optimizer"] = optimizer_name(c.optimizer);
  j["bandwidth"] = bandwidth_rule_name(c.bandwidth);
  j["h"] = c.h;
  j["h0"] = c.h0;
  j["bandwidth_budget"] = c.bandwidth_budget;
  j["g"] = c.grid;
  std::vector<std::string> ms;
  for (Method m : c.methods)
    ms.emplace_back(method_name(m));
  j["methods"] = ms;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  return j;
}

// Keys missing from `j` keep their current values in `c`; unknown keys are errors.
inline void merge_json(ExperimentConfig& c, const nlohmann::json& j)
{
  if (!j.is_object())
    throw std::invalid_argument("config must be a JSON object");
  const nlohmann::json known = to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "'");
  try {
    if (j.contains("mode")) {
      auto m = j["mode"].get<std::string>();
      if (m == "simulate")
        c.mode = RunMode::simulate;
      else if (m == "csv")
        c.mode = RunMode::csv;
      else
        throw std::invalid_argument("config: mode must be simulate or csv");
    }
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key))
        field = j[key].get<std::decay_t<decltype(field)>>();
    };
    take("model", c.model);
    take("n", c.n);
    take("empirical_skew_scaling", c.empirical_skew_scaling);
    take("S", c.replications);
    take("T", c.test_points);
    take("V", c.draws);
    take("input", c.input);
    if (j.contains("delimiter")) {
      auto d = j["delimiter"].get<std::string>();
      if (d.size() != 1)
        throw std::invalid_argument("config: delimiter must be one character");
      c.delimiter = d[0];
    }
    take("target", c.target);
    take("train_size", c.train_size);
    take("test_size", c.test_size);
    if (j.contains("estimator"))
      c.estimator = parse_estimator(j["estimator"].get<std::string>());
    take("widths", c.widths);
    take("lr", c.lr);
    take("batch_size", c.batch_size);
    take("epochs", c.epochs);
    take("clip", c.clip);
    if (j.contains("optimizer"))
      c.optimizer = parse_optimizer(j["optimizer"].get<std::string>());
    if (j.contains("bandwidth"))
      c.bandwidth = parse_bandwidth_rule(j["bandwidth"].get<std::string>());
    take("h", c.h);
    take("h0", c.h0);
    take("bandwidth_budget", c.bandwidth_budget);
    take("g", c.grid);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"])
        c.methods.push_back(parse_method(m.get<std::string>()));
    }
    take("alpha", c.alpha);
    take("seed", c.seed);
    take("threads", c.threads);
    take("out", c.out);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {})
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  merge_json(base, j);
  return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {})
{
  std::ifstream is(path);
  if (!is)
    throw std::invalid_argument("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

// ---------------------------------------------------------------------------
// Reports

struct ReportRow
{
  std::string model;
  std::string estimator;
  std::string method;
  std::string width;
  long n = 0;
  std::size_t g = 0;
  double cr = 0.0;
  double al = 0.0;
  int s = 0;
  double t_used = 0.0;
  long skipped = 0;
  double wall_seconds = 0.0;
};

inline const char* report_header()
{
  return "model,estimator,method,width,n,g,cr,al,s,t_used,skipped,wall_seconds";
}

inline std::string format_row(const ReportRow& r)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%ld,%zu,%.17g,%.17g,%d,%.17g,%ld,%.3f",
                r.model.c_str(), r.estimator.c_str(), r.method.c_str(), r.width.c_str(), r.n,
                r.g, r.cr, r.al, r.s, r.t_used, r.skipped, r.wall_seconds);
  return buf;
}

inline std::string width_label(const ExperimentConfig& c)
{
  if (c.estimator == EstimatorKind::kernel)
    return "-";
  std::string s;
  for (std::size_t i = 0; i < c.widths.size(); ++i)
    s += (i ? "x" : "") + std::to_string(c.widths[i]);
  return s;
}

struct RunResult
{
  std::vector<ReportRow> rows;
  int failed_replications = 0;
};

// ---------------------------------------------------------------------------
// Orchestration

namespace detail {

inline void log_stage(const std::string& what, std::chrono::steady_clock::time_point since)
{
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
  std::fprintf(stderr, "[cpi] %s: %.2f s\n", what.c_str(), s);
}

inline void write_atomically(const std::filesystem::path& target, const std::string& content)
{
  auto tmp = target;
  tmp += ".partial";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    os << content;
    if (!os)
      throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

} // namespace detail

//! Runs the experiment described by `c` and returns the report rows without
//! touching the filesystem.
inline RunResult run_experiment(const ExperimentConfig& c)
{
  c.validate();
  RunResult res;
  const std::string est = estimator_name(c.estimator);
  const std::string width = width_label(c);
  if (c.mode == RunMode::simulate) {
    SimModelSpec spec;
    spec.id = c.model;
    spec.n = c.n;
    spec.empirical_skew_scaling = c.empirical_skew_scaling;
    for (std::size_t g : c.grid) {
      auto t0 = std::chrono::steady_clock::now();
      EvalConfig ec;
      ec.replications = c.replications;
      ec.test_points = c.test_points;
      ec.draws = c.draws;
      ec.alpha = c.alpha;
      ec.grid_points = g;
      ec.estimator = c.estimator_config();
      ec.seed = c.seed;
      ec.threads = c.threads;
      EvalOutcome out = evaluate_methods(spec, c.methods, ec);
      if (out.reports.front().replications == 0)
        throw std::runtime_error("every replication failed (g=" + std::to_string(g) + ")");
      res.failed_replications += out.failed_replications;
      for (const auto& r : out.reports)
        res.rows.push_back({ "model" + std::to_string(c.model), est,
                             std::string(method_name(r.method)), width, c.n, g, r.cr, r.al,
                             r.replications, r.test_points_used, r.skipped_benchmark_points,
                             out.wall_seconds });
      detail::log_stage("simulate g=" + std::to_string(g), t0);
    }
    return res;
  }

  auto t0 = std::chrono::steady_clock::now();
  Dataset data = load_csv(c.input, c.delimiter, c.target);
  SplitResult parts = split(data, c.train_size, c.test_size, c.seed);
  detail::log_stage("load and split", t0);
  const std::string name = std::filesystem::path(c.input).stem().string();
  EstimatorConfig ec = c.estimator_config();
  std::shared_ptr<const KernelModel> kernel;
  if (c.estimator == EstimatorKind::kernel) {
    t0 = std::chrono::steady_clock::now();
    BandwidthChoice choice;
    kernel = std::make_shared<const KernelModel>(
      fit_kernel_model(parts.train, ec.bandwidth, ec.standardize_kernel, &choice));
    if (choice.fell_back_to_silverman)
      std::fprintf(stderr, "[cpi] warning: bandwidth search failed, using Silverman values\n");
    detail::log_stage("bandwidth selection", t0);
  }
  for (std::size_t g : c.grid) {
    t0 = std::chrono::steady_clock::now();
    Grid grid = build_grid(parts.train.y(), g);
    FittedEstimator fitted = kernel ? FittedEstimator::from_kernel(kernel, grid)
                                    : FittedEstimator::fit_network(
                                        parts.train, grid, ec.mlp, needs_mean(c.methods),
                                        needs_second_moment(c.methods), c.threads);
    auto reports = empirical_eval(fitted, c.methods, parts.test, c.alpha);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& r : reports)
      res.rows.push_back({ name, est, std::string(method_name(r.method)), width,
                           c.train_size, g, r.cr, r.al, 1, r.test_points_used,
                           r.skipped_benchmark_points, wall });
    detail::log_stage("eval g=" + std::to_string(g), t0);
  }
  return res;
}

//! Runs and writes report.csv and manifest.json under c.out; nothing is left
//! at the output paths when the run fails. Returns a process exit code.
inline int run(const ExperimentConfig& c, std::ostream& err = std::cerr)
{
  try {
    c.validate();
    auto t0 = std::chrono::steady_clock::now();
    RunResult res = run_experiment(c);
    std::ostringstream report;
    report << report_header() << '\n';
    for (const auto& r : res.rows)
      report << format_row(r) << '\n';
    nlohmann::json manifest;
    manifest["config"] = to_json(c);
    manifest["network_seed"] = c.mlp_config().seed;
    manifest["test_stream"] = test_stream;
    manifest["failed_replications"] = res.failed_replications;
    manifest["rows"] = res.rows.size();
    std::filesystem::path dir(c.out);
    std::filesystem::create_directories(dir);
    detail::write_atomically(dir / "report.csv", report.str());
    try {
      detail::write_atomically(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (...) {
      std::error_code ec;
      std::filesystem::remove(dir / "report.csv", ec);
      throw;
    }
    detail::log_stage("total", t0);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

} // namespace cpi
