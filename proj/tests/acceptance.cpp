// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.

#include "cpi/experiment.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <random>
#include <string>
#include <thread>

using namespace cpi;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& name, const std::string& detail)
{
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok)
    ++failures;
}

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned worker_count()
{
  unsigned t = std::thread::hardware_concurrency();
  return t ? t : 1;
}

std::size_t column(const std::vector<Method>& ms, Method m)
{
  return static_cast<std::size_t>(std::find(ms.begin(), ms.end(), m) - ms.begin());
}

// ---------------------------------------------------------------------------
// 1-3: desk-scale Model-1 run

void desk_criteria()
{
  const std::vector<Method> methods{ Method::b,  Method::m,  Method::sa, Method::st,
                                     Method::aa, Method::at, Method::aaa };
  ExperimentConfig base; // widths [10,10], lr 0.001, B 200, E 2000
  EvalConfig ec;
  ec.replications = 20;
  ec.test_points = 200;
  ec.draws = 1000;
  ec.grid_points = 200;
  ec.estimator = base.estimator_config();
  ec.seed = base.seed;
  ec.threads = worker_count();
  ec.keep_points = true;
  SimModelSpec spec; // Model-1, n = 2000
  auto t0 = std::chrono::steady_clock::now();
  EvalOutcome out;
  try {
    out = evaluate_methods(spec, methods, ec);
  } catch (const std::exception& e) {
    for (int id = 1; id <= 3; ++id)
      report(id, false, "desk run", std::string("exception: ") + e.what());
    return;
  }
  double wall = seconds_since(t0);
  const auto& b = out.reports[column(methods, Method::b)];
  const auto& m = out.reports[column(methods, Method::m)];
  const auto& aa = out.reports[column(methods, Method::aa)];
  for (const auto& r : out.reports)
    std::printf("  desk %-4s CR=%.4f AL=%.4f S=%d T~=%.1f skipped=%ld\n",
                std::string(method_name(r.method)).c_str(), r.cr, r.al, r.replications,
                r.test_points_used, r.skipped_benchmark_points);
  std::printf("  desk wall %.1f s on %u threads, %d failed replications\n", wall, ec.threads,
              out.failed_replications);

  bool c1 = aa.cr >= 0.92 && aa.cr <= 0.98 && aa.al >= 3.96 && aa.al <= 5.36 && m.cr < aa.cr &&
            m.al < aa.al && aa.replications == 20;
  report(1, c1, "desk Model-1 aa band and m ordering",
         fmt("aa CR=%.4f AL=%.4f, m CR=%.4f AL=%.4f, S=%d", aa.cr, aa.al, m.cr, m.al,
             aa.replications));

  bool c2 = b.cr <= 0.93 && b.cr < aa.cr;
  report(2, c2, "benchmark undercoverage", fmt("b CR=%.4f vs aa CR=%.4f", b.cr, aa.cr));

  const std::size_t isa = column(methods, Method::sa), ist = column(methods, Method::st),
                    iaa = column(methods, Method::aa), iat = column(methods, Method::at),
                    iaaa = column(methods, Method::aaa);
  long checked = 0, violations = 0;
  for (const auto& rec : out.records) {
    if (rec.failed)
      continue;
    for (const auto& p : rec.points) {
      const auto& iv = p.intervals;
      if (!iv[isa] || !iv[ist] || !iv[iaa] || !iv[iat] || !iv[iaaa]) {
        ++violations;
        continue;
      }
      ++checked;
      if (!iv[ist]->contains(*iv[isa]))
        ++violations;
      if (!iv[iat]->contains(*iv[iaa]))
        ++violations;
      if (!iv[iaaa]->contains(*iv[iaa]))
        ++violations;
    }
  }
  report(3, checked > 0 && violations == 0, "nesting st>=sa, at>=aa, aaa>=aa",
         fmt("%ld points, %ld violations", checked, violations));
}

// ---------------------------------------------------------------------------
// 4: monotone corrections

void monotone_criterion()
{
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> len(1, 200);
  std::uniform_real_distribution<double> u(-0.3, 1.3), unit(0.0, 1.0);
  auto valid = [](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] < 0.0 || v[i] > 1.0 || (i && v[i] < v[i - 1]))
        return false;
    return true;
  };
  long violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v)
      x = u(rng);
    auto l = correct_ltor(v), r = correct_rtol(v), a = correct_avg(v);
    if (!valid(l) || !valid(r) || !valid(a))
      ++violations;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (r[i] > a[i] || a[i] > l[i])
        ++violations;
    if (correct_ltor(l) != l || correct_rtol(r) != r || correct_avg(a) != a)
      ++violations;
    std::vector<double> s(v.size());
    for (auto& x : s)
      x = unit(rng);
    std::sort(s.begin(), s.end());
    if (correct_ltor(s) != s || correct_rtol(s) != s || correct_avg(s) != s)
      ++violations;
  }
  report(4, violations == 0, "monotone property suite", fmt("10000 vectors, %ld violations", violations));
}

// ---------------------------------------------------------------------------
// 5: pi_minimal against exhaustive search

void minimal_criterion()
{
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<std::size_t> gs(2, 60);
  std::uniform_real_distribution<double> centre(0.2, 0.8), steep(3.0, 25.0);
  std::normal_distribution<double> noise(0.0, 0.08);
  long violations = 0, feasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t g = gs(rng);
    double c = centre(rng), s = steep(rng);
    std::vector<double> raw(g), pts(g);
    for (std::size_t j = 0; j < g; ++j) {
      double t = static_cast<double>(j) / static_cast<double>(g - 1);
      raw[j] = 1.0 / (1.0 + std::exp(-s * (t - c))) + noise(rng);
      pts[j] = 0.25 * static_cast<double>(j);
    }
    CdfProfile prof(Grid(pts), correct_avg(raw), true);
    auto pi = pi_minimal(CalibrationRequest{ 0.05, prof });
    auto want = oracle::minimal_pair(prof.values, 0.95 - mass_tolerance);
    if (!want) {
      if (pi.feasible)
        ++violations;
      continue;
    }
    ++feasible;
    double want_len = pts[want->second] - pts[want->first];
    if (!pi.feasible || std::abs(pi.length() - want_len) > 1e-12)
      ++violations;
  }
  report(5, violations == 0, "pi_minimal minimality",
         fmt("1000 profiles (%ld feasible), %ld violations", feasible, violations));
}

// ---------------------------------------------------------------------------
// 6: gradients

void gradient_criterion()
{
  std::mt19937_64 rng(606);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto c = oracle::random_gradient_case(rng);
    worst = std::max(worst, oracle::max_relative_gradient_error(c.model, c.xb, c.zb));
  }
  report(6, worst <= 1e-4, "backprop vs finite differences", fmt("100 networks, max rel err %.3g", worst));
}

// ---------------------------------------------------------------------------
// 7: kernel consistency

double kernel_sup_error(Eigen::Index n, std::uint64_t seed)
{
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = z(rng);
    y(i) = x(i, 0) * x(i, 0) + z(rng);
  }
  Dataset data(x, y);
  BandwidthChoice bw = silverman_bandwidths(data);
  KernelModel model(data, bw.h, bw.h0);
  double sup = 0.0;
  for (int a = 0; a < 20; ++a) {
    Eigen::VectorXd xv(1);
    xv(0) = -1.5 + 3.0 * a / 19.0;
    for (int b = 0; b < 20; ++b) {
      double q = -2.0 + 6.5 * b / 19.0;
      double truth = normal::cdf(q - xv(0) * xv(0));
      sup = std::max(sup, std::abs(conditional_cdf(model, xv, q) - truth));
    }
  }
  return sup;
}

void kernel_consistency_criterion()
{
  auto t0 = std::chrono::steady_clock::now();
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    small += kernel_sup_error(200, s) / 5.0;
    large += kernel_sup_error(2000, s) / 5.0;
  }
  double wall = seconds_since(t0);
  report(7, large <= 0.5 * small && wall <= 120.0, "kernel consistency trend",
         fmt("sup err n=200 %.4f, n=2000 %.4f, ratio %.3f, %.1f s", small, large, large / small, wall));
}

// ---------------------------------------------------------------------------
// 8: closed forms vs Simpson

void quadrature_criterion()
{
  std::mt19937_64 rng(808);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> hs(0.2, 1.5), h0s(0.1, 1.0);
  std::uniform_int_distribution<int> ns(5, 40), ds(1, 3);
  double worst_cdf = 0.0, worst_conv = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = ns(rng), d = ds(rng);
    const double h = hs(rng), h0 = h0s(rng);
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c)
        x(i, c) = z(rng);
      y(i) = z(rng) * 2.0;
    }
    KernelModel model(Dataset(x, y), h, h0);
    Eigen::VectorXd xq(d);
    for (int c = 0; c < d; ++c)
      xq(c) = z(rng);
    const double q = 2.0 * z(rng);
    // weights straight from the product kernel
    std::vector<double> w(static_cast<std::size_t>(n));
    double tot = 0.0;
    for (int i = 0; i < n; ++i) {
      double k = 1.0;
      for (int c = 0; c < d; ++c)
        k *= std::exp(-0.5 * std::pow((xq(c) - x(i, c)) / h, 2)) / std::sqrt(2.0 * std::numbers::pi);
      w[static_cast<std::size_t>(i)] = k;
      tot += k;
    }
    auto dens = [&](double t) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        s += w[static_cast<std::size_t>(i)] / tot *
             std::exp(-0.5 * std::pow((t - y(i)) / h0, 2)) / (h0 * std::sqrt(2.0 * std::numbers::pi));
      return s;
    };
    const double lower = y.minCoeff() - 12.0 * h0;
    double oracle_cdf = q <= lower ? 0.0 : oracle::simpson(dens, lower, q, 20000);
    worst_cdf = std::max(worst_cdf, std::abs(conditional_cdf(model, xq, q) - oracle_cdf));

    const double a = y(0), b = y(n - 1);
    auto prod = [&](double t) {
      return std::exp(-0.5 * std::pow((t - a) / h0, 2)) * std::exp(-0.5 * std::pow((t - b) / h0, 2)) /
             (2.0 * std::numbers::pi);
    };
    double lo = std::min(a, b) - 12.0 * h0, hi = std::max(a, b) + 12.0 * h0;
    double conv = oracle::simpson(prod, lo, hi, 20000);
    worst_conv = std::max(worst_conv, std::abs(gaussian_pair_convolution(a, b, h0) - conv));
  }
  report(8, worst_cdf <= 1e-8 && worst_conv <= 1e-8, "kernel closed forms vs quadrature",
         fmt("50 configs, max |cdf err| %.3g, max |conv err| %.3g", worst_cdf, worst_conv));
}

// ---------------------------------------------------------------------------
// 9: true CDFs through pi_asymmetric

void oracle_calibration_criterion()
{
  const std::size_t g = 200;
  const double alpha = 0.05, need = 1.0 - alpha - 2.0 / static_cast<double>(g);
  long violations = 0;
  double worst = 1.0;
  for (int id : { 1, 4 }) {
    SimModelSpec spec;
    spec.id = id;
    spec.seed = 909;
    Grid grid = build_grid(simulate(spec).y(), g);
    Eigen::MatrixXd xt = test_predictors(909, 100);
    for (Eigen::Index i = 0; i < xt.rows(); ++i) {
      Eigen::VectorXd x = xt.row(i).transpose();
      std::vector<double> F(g);
      for (std::size_t j = 0; j < g; ++j)
        F[j] = closed_form_cdf(id, x, grid[j]);
      auto pi = pi_asymmetric(CalibrationRequest{ alpha, CdfProfile(grid, F, true) }, CalibrationMode::avg);
      double mass = closed_form_cdf(id, x, pi.hi) - closed_form_cdf(id, x, pi.lo);
      worst = std::min(worst, mass);
      if (mass < need)
        ++violations;
    }
  }
  report(9, violations == 0, "oracle calibration validity",
         fmt("200 points, min mass %.4f (need %.4f), %ld violations", worst, need, violations));
}

// ---------------------------------------------------------------------------
// 10: wine

void wine_criterion(const std::string& wine)
{
  ExperimentConfig c;
  c.mode = RunMode::csv;
  c.input = wine;
  c.methods = { Method::aa, Method::aaa };
  c.grid = { 200, 100, 50, 25, 12, 5 };
  c.threads = worker_count();
  RunResult res;
  try {
    res = run_experiment(c);
  } catch (const std::exception& e) {
    report(10, false, "wine run", std::string("exception: ") + e.what());
    return;
  }
  auto find = [&](const char* m, std::size_t g) -> const ReportRow& {
    for (const auto& r : res.rows)
      if (r.method == m && r.g == g)
        return r;
    throw std::logic_error("missing row");
  };
  for (const auto& r : res.rows)
    std::printf("  wine g=%-3zu %-4s CR=%.4f AL=%.4f\n", r.g, r.method.c_str(), r.cr, r.al);
  const auto& aa12 = find("aa", 12);
  bool ok = aa12.cr >= 0.90 && aa12.cr <= 0.99 && aa12.al >= 2.0 && aa12.al <= 3.5;
  bool nest = true;
  for (std::size_t g : c.grid)
    nest = nest && find("aaa", g).cr >= find("aa", g).cr;
  bool coarse = find("aaa", 5).cr >= find("aaa", 50).cr;
  report(10, ok && nest && coarse, "wine 199/1120 split",
         fmt("aa g=12 CR=%.4f AL=%.4f; aaa>=aa all g: %s; aaa CR g=5 %.4f vs g=50 %.4f", aa12.cr,
             aa12.al, nest ? "yes" : "no", find("aaa", 5).cr, find("aaa", 50).cr));
}

// ---------------------------------------------------------------------------
// 11: determinism

void determinism_criterion(const std::string& wine)
{
  std::vector<ExperimentConfig> cfgs(2);
  apply_profile(cfgs[0], "smoke");
  cfgs[0].threads = worker_count();
  cfgs[1].mode = RunMode::csv;
  cfgs[1].input = wine;
  cfgs[1].estimator = EstimatorKind::kernel;
  cfgs[1].methods = { Method::b, Method::m, Method::aak, Method::aaak };
  cfgs[1].grid = { 50, 12 };
  double worst = 0.0;
  std::size_t rows = 0;
  bool same_shape = true;
  for (const auto& c : cfgs) {
    RunResult a = run_experiment(c), b = run_experiment(c);
    same_shape = same_shape && a.rows.size() == b.rows.size();
    for (std::size_t i = 0; i < std::min(a.rows.size(), b.rows.size()); ++i) {
      worst = std::max({ worst, std::abs(a.rows[i].cr - b.rows[i].cr), std::abs(a.rows[i].al - b.rows[i].al) });
      ++rows;
    }
  }
  report(11, same_shape && worst <= 1e-12, "determinism",
         fmt("%zu rows compared, max diff %.3g", rows, worst));
}

} // namespace

int main(int argc, char** argv)
{
  std::string wine = std::string(CPI_DATA_DIR) + "/winequality-red.csv";
  bool skip_desk = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--skip-desk"))
      skip_desk = true;
    else
      wine = argv[i];
  }
  monotone_criterion();
  minimal_criterion();
  gradient_criterion();
  kernel_consistency_criterion();
  quadrature_criterion();
  oracle_calibration_criterion();
  wine_criterion(wine);
  determinism_criterion(wine);
  if (!skip_desk)
    desk_criteria();
  std::printf("%d criteria failed\n", failures);
  return failures;
}
