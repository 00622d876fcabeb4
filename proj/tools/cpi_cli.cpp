// Command-line runner: `cpi simulate` and `cpi eval-csv`.

#include "cpi/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

struct Common
{
  std::string config;
  std::string out;
  std::string profile;
  unsigned threads = 0;
  std::string methods;
  std::string grid;
  std::uint64_t seed = 0;
  bool print_config = false;
};

void add_common(CLI::App* sub, Common& c)
{
  sub->add_option("-c,--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("-o,--out", c.out, "output directory");
  sub->add_option("-j,--threads", c.threads, "worker threads");
  sub->add_option("-p,--profile", c.profile, "size preset")
    ->check(CLI::IsMember({ "smoke", "desk", "paper" }));
  sub->add_option("--methods", c.methods, "comma-separated PI methods");
  sub->add_option("--g", c.grid, "comma-separated grid sizes");
  sub->add_option("--seed", c.seed, "base seed");
  sub->add_flag("--print-config", c.print_config, "print the resolved config and exit");
}

std::vector<std::string> split_commas(const std::string& s)
{
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty())
        out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty())
    out.push_back(cur);
  return out;
}

// profile, then config file, then flags
cpi::ExperimentConfig resolve(cpi::ExperimentConfig c, const Common& o, const CLI::App* sub)
{
  if (!o.profile.empty())
    cpi::apply_profile(c, o.profile);
  if (!o.config.empty())
    c = cpi::load_config(o.config, std::move(c));
  if (!o.out.empty())
    c.out = o.out;
  if (o.threads > 0)
    c.threads = o.threads;
  if (sub->count("--seed"))
    c.seed = o.seed;
  if (!o.methods.empty()) {
    c.methods.clear();
    for (const auto& m : split_commas(o.methods))
      c.methods.push_back(cpi::parse_method(m));
  }
  if (!o.grid.empty()) {
    c.grid.clear();
    for (const auto& g : split_commas(o.grid))
      c.grid.push_back(static_cast<std::size_t>(std::stoul(g)));
  }
  return c;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Calibration prediction intervals: simulation benchmark and CSV evaluation" };
  app.require_subcommand(1);

  Common sim_opts;
  int model = 0;
  long n = 0;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo benchmark on simulation models 1-6");
  add_common(sim, sim_opts);
  sim->add_option("--model", model, "model id")->check(CLI::Range(1, 6));
  sim->add_option("-n", n, "training size");

  Common csv_opts;
  std::string input;
  std::string delimiter;
  std::string estimator;
  auto* csv = app.add_subcommand("eval-csv", "Single train/test split evaluation on a CSV file");
  add_common(csv, csv_opts);
  csv->add_option("input", input, "delimited data file with a header row");
  csv->add_option("-d,--delimiter", delimiter, "field delimiter");
  csv->add_option("--estimator", estimator, "network or kernel")
    ->check(CLI::IsMember({ "network", "kernel" }));

  CLI11_PARSE(app, argc, argv);

  try {
    cpi::ExperimentConfig cfg;
    const Common* opts = nullptr;
    if (*sim) {
      cfg.mode = cpi::RunMode::simulate;
      cfg = resolve(cfg, sim_opts, sim);
      if (sim->count("--model"))
        cfg.model = model;
      if (sim->count("-n"))
        cfg.n = n;
      cfg.mode = cpi::RunMode::simulate;
      opts = &sim_opts;
    } else {
      cfg.mode = cpi::RunMode::csv;
      cfg.methods = { cpi::Method::aa, cpi::Method::aaa };
      cfg.grid = { 200, 100, 50, 25, 12, 5 };
      cfg = resolve(cfg, csv_opts, csv);
      if (!input.empty())
        cfg.input = input;
      if (!delimiter.empty()) {
        if (delimiter.size() != 1)
          throw std::invalid_argument("delimiter must be one character");
        cfg.delimiter = delimiter[0];
      }
      if (!estimator.empty())
        cfg.estimator = cpi::parse_estimator(estimator);
      // the network defaults have kernel counterparts
      if (cfg.estimator == cpi::EstimatorKind::kernel &&
          cfg.methods == std::vector<cpi::Method>{ cpi::Method::aa, cpi::Method::aaa })
        cfg.methods = { cpi::Method::aak, cpi::Method::aaak };
      cfg.mode = cpi::RunMode::csv;
      opts = &csv_opts;
    }
    if (opts->print_config) {
      std::cout << cpi::to_json(cfg).dump(2) << '\n';
      return 0;
    }
    return cpi::run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
