#include <rareis/bench.hpp>
#include <rareis/parallel.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <ostream>

namespace rareis::bench {

namespace {

struct CliOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  std::string format = "csv";
  bool timing = false;

  std::string problem = "halfspace";
  std::int64_t d = 2;
  std::optional<double> q;
  std::optional<double> p;
  std::string direction = "e1";
  std::string g = "nominal";
  std::int64_t n_p = 10000;
  std::int64_t n_g = 1000;
  std::int64_t m = 1000;
  double rho = 0.1;
  int t_max = 50;
  std::string selector = "mean";
  std::int64_t r = 1;
  std::string plan_file;
  bool two_split = false;
  int reps = 100;
  std::string wishart_rows = "gaussian";
  std::string trace;
  std::string config;
};

void add_problem_flags(CLI::App& cmd, CliOptions& o) {
  cmd.add_option("--problem", o.problem, "halfspace, two-sided or whole-space");
  cmd.add_option("--d", o.d, "dimension");
  auto* q = cmd.add_option("--q", o.q, "threshold");
  auto* p = cmd.add_option("--p", o.p, "target probability (sets the threshold)");
  q->excludes(p);
  cmd.add_option("--direction", o.direction, "half-space normal: e1 or ones");
}

SweepConfig single_run_config(const CliOptions& o, Method method) {
  SweepConfig cfg;
  cfg.problem.name = o.problem;
  cfg.problem.q = o.q.value_or(0.0);
  cfg.problem.p = o.p;
  cfg.problem.direction = o.direction;
  cfg.method = method;
  cfg.g_spec = o.g;
  cfg.selector = o.selector;
  if (!o.plan_file.empty()) {
    cfg.plan_file = o.plan_file;
  }
  cfg.two_split = o.two_split;
  cfg.t_max = o.t_max;
  cfg.reps = o.reps;
  cfg.wishart_conditional = o.wishart_rows == "conditional";
  cfg.d = {o.d};
  cfg.n_g = {SizeSpec{static_cast<double>(o.n_g), 0}};
  cfg.n_p = {SizeSpec{static_cast<double>(o.n_p), 0}};
  cfg.m = {SizeSpec{static_cast<double>(o.m), 0}};
  cfg.r = {o.r};
  cfg.rho = {o.rho};
  cfg.master_seed = o.seed;
  cfg.seeds = {o.seed};
  cfg.format = parse_format(o.format);
  if (!o.out.empty()) {
    cfg.output_path = o.out;
  }
  cfg.timing = o.timing;
  return cfg;
}

void emit(const std::vector<SweepRecord>& records, const SweepConfig& cfg, std::ostream& out) {
  if (cfg.output_path) {
    write_records(records, cfg.format, *cfg.output_path);
  } else {
    write_records(records, cfg.format, out);
  }
}

int run_one(const CliOptions& o, Method method, std::ostream& out, std::ostream& err) {
  const auto cfg = single_run_config(o, method);
  cfg.validate();
  const auto points = expand_grid(cfg);
  std::vector<std::string> trace;
  const auto rec = run_single(cfg, points.front(), method == Method::ce ? &trace : nullptr);
  if (method == Method::ce) {
    if (!o.trace.empty()) {
      std::ofstream t{o.trace, std::ios::trunc};
      if (!t) {
        throw std::runtime_error("cannot write " + o.trace);
      }
      for (const auto& line : trace) {
        t << line << '\n';
      }
    } else {
      for (const auto& line : trace) {
        err << line << '\n';
      }
    }
  }
  emit({rec}, cfg, out);
  if (rec.status != "ok") {
    err << "run ended with status " << rec.status << '\n';
    return 1;
  }
  return 0;
}

int run_sweep_command(const CliOptions& o, const CLI::App& app, std::ostream& out) {
  auto cfg = load_sweep_config(o.config);
  if (app.count("--out") > 0) {
    cfg.output_path = o.out;
  }
  if (app.count("--format") > 0) {
    cfg.format = parse_format(o.format);
  }
  cfg.timing = cfg.timing || o.timing;
  const auto records = run_sweep(cfg);
  emit(records, cfg, out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliOptions o;
  CLI::App app{"Gaussian importance sampling and cross-entropy experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--threads", o.threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output path (default stdout)");
  app.add_option("--format", o.format, "csv or jsonl");
  app.add_flag("--timing", o.timing, "fill the wall_time_ms column");

  auto* estimate = app.add_subcommand("estimate", "one importance sampling run with a fixed auxiliary density");
  add_problem_flags(*estimate, o);
  estimate->add_option("--g", o.g, "nominal, optimal or iso:<variance>");
  estimate->add_option("--np", o.n_p, "estimation sample size");

  auto* ce = app.add_subcommand("ce", "one cross-entropy run; the iterate trace goes to --trace or stderr");
  add_problem_flags(*ce, o);
  ce->add_option("--rho", o.rho, "elite fraction");
  ce->add_option("--ng", o.n_g, "samples per moment update");
  ce->add_option("--m", o.m, "samples per quantile estimate");
  ce->add_option("--tmax", o.t_max, "iteration cap");
  ce->add_option("--np", o.n_p, "final estimation sample size");
  ce->add_option("--trace", o.trace, "write the trace (JSON lines) here");

  auto* proj = app.add_subcommand("proj", "build the projected auxiliary density and estimate");
  add_problem_flags(*proj, o);
  proj->add_option("--selector", o.selector, "mean, eigen-h or fixed");
  proj->add_option("--r", o.r, "number of directions");
  proj->add_option("--plan-file", o.plan_file, "directions for the fixed selector");
  proj->add_flag("--two-split", o.two_split, "select directions and fit moments on disjoint halves");
  proj->add_option("--ng", o.n_g, "conditional sample size");
  proj->add_option("--np", o.n_p, "estimation sample size");

  auto* wishart = app.add_subcommand("wishart", "expected KL of the fitted Gaussian");
  add_problem_flags(*wishart, o);
  wishart->add_option("--ng", o.n_g, "sample size per replicate");
  wishart->add_option("--reps", o.reps, "replicates");
  wishart->add_option("--rows", o.wishart_rows, "gaussian or conditional")
      ->check(CLI::IsMember({"gaussian", "conditional"}));

  auto* sweep = app.add_subcommand("sweep", "run a grid described by a config file");
  sweep->add_option("--config", o.config, "sweep config file")->required();

  auto* selftest = app.add_subcommand("selftest", "quick invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  parallel::set_max_threads(o.threads);
  try {
    if (estimate->parsed()) {
      return run_one(o, Method::is_fixed_g, out, err);
    }
    if (ce->parsed()) {
      return run_one(o, Method::ce, out, err);
    }
    if (proj->parsed()) {
      return run_one(o, Method::proj, out, err);
    }
    if (wishart->parsed()) {
      if (wishart->count("--problem") == 0) {
        o.problem = "whole-space";
      }
      return run_one(o, Method::wishart, out, err);
    }
    if (sweep->parsed()) {
      return run_sweep_command(o, app, out);
    }
    if (selftest->parsed()) {
      return run_selftest(out) == 0 ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace rareis::bench
