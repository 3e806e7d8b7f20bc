#include <rareis/bench.hpp>
#include <rareis/ce.hpp>
#include <rareis/is_engine.hpp>
#include <rareis/normal.hpp>
#include <rareis/parallel.hpp>
#include <rareis/proj.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace rareis::bench {

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string field(const std::optional<double>& x) { return x ? format_double(*x) : std::string{}; }

std::string field(const std::optional<std::int64_t>& x) { return x ? std::to_string(*x) : std::string{}; }

std::string json_number(const std::optional<double>& x) {
  return x && std::isfinite(*x) ? format_double(*x) : std::string{"null"};
}

std::string json_number(const std::optional<std::int64_t>& x) { return x ? std::to_string(*x) : std::string{"null"}; }

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{s};
  while (std::getline(in, item, sep)) {
    out.push_back(item);
  }
  if (!s.empty() && s.back() == sep) {
    out.emplace_back();
  }
  return out;
}

std::vector<std::string> list_items(const std::string& key, const std::string& value) {
  std::vector<std::string> out;
  for (const auto& item : split(value, ',')) {
    const auto t = trim(item);
    if (!t.empty()) {
      out.push_back(t);
    }
  }
  if (out.empty()) {
    throw ConfigError(key + ": empty");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& token) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) {
      throw std::invalid_argument(token);
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": invalid number '" + token + "'");
  }
}

std::int64_t parse_integer(const std::string& key, const std::string& token) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(token, &used);
    if (used != token.size()) {
      throw std::invalid_argument(token);
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": invalid integer '" + token + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& token) {
  if (token == "true" || token == "1" || token == "yes") {
    return true;
  }
  if (token == "false" || token == "0" || token == "no") {
    return false;
  }
  throw ConfigError(key + ": expected true or false, got '" + token + "'");
}

std::optional<double> parse_optional_real(const std::string& token) {
  if (token.empty()) {
    return std::nullopt;
  }
  return std::stod(token);
}

EventProblem make_problem_unchecked(const ProblemSpec& spec, std::int64_t d) {
  if (spec.name == "halfspace") {
    const double q = spec.p ? normal_sf_inverse(*spec.p) : spec.q;
    return halfspace_problem(d, named_direction(d, spec.direction), q);
  }
  if (spec.name == "two-sided") {
    const double q = spec.p ? normal_sf_inverse(*spec.p / 2.0) : spec.q;
    return two_sided_problem(d, q);
  }
  if (spec.name == "whole-space") {
    return halfspace_problem(d, named_direction(d, spec.direction), kWholeSpace);
  }
  throw ConfigError("problem: unknown problem '" + spec.name + "' (expected halfspace, two-sided or whole-space)");
}

void fill_density_metrics(SweepRecord& rec, const GaussianDist& g) {
  const auto stats = spectrum_stats(g.cov());
  rec.kl_f_to_g = kl_gaussian(GaussianDist::standard(g.dim()), g);
  rec.psi_sigma = stats.psi_value;
  rec.mu_norm = g.mean().norm();
  rec.lambda_min = stats.lambda_min;
}

void fill_is_metrics(SweepRecord& rec, const ISResult& result) {
  rec.p_hat = result.p_hat;
  rec.rel_error = result.rel_error_vs_truth;
  rec.max_weight_ratio = result.max_weight_ratio;
  rec.ess_fraction = result.ess_fraction;
}

ConditionalSampleSet draw_conditional(const EventProblem& problem, Eigen::Index n, Rng& rng) {
  const auto& truth = problem.analytic();
  if (truth && truth->exact_cond_sampler) {
    return exact_sample_conditional(problem, n, rng);
  }
  return rejection_sample_conditional(problem, n, rng);
}

void run_method(const SweepConfig& cfg, const GridPoint& point, SweepRecord& rec, Rng& rng,
                std::vector<std::string>* ce_trace) {
  const auto problem = make_problem(cfg.problem, point.d);
  switch (cfg.method) {
    case Method::mc: {
      const auto f = GaussianDist::standard(point.d);
      fill_is_metrics(rec, is_estimate(problem, f, point.n_p, rng));
      fill_density_metrics(rec, f);
      return;
    }
    case Method::is_fixed_g: {
      const auto g = make_fixed_g(cfg.g_spec, problem);
      fill_is_metrics(rec, is_estimate(problem, g, point.n_p, rng));
      fill_density_metrics(rec, g);
      return;
    }
    case Method::ce: {
      CEConfig ce_cfg;
      ce_cfg.rho = point.rho;
      ce_cfg.n_g = point.n_g;
      ce_cfg.m = point.m;
      ce_cfg.t_max = cfg.t_max;
      try {
        ce_cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      const auto trace = ce_run(problem, ce_cfg, point.n_p, rng);
      if (ce_trace) {
        for (const auto& it : trace.iterates) {
          ce_trace->push_back(iterate_to_json(it));
        }
      }
      if (trace.terminated_reason == Termination::covariance_degenerate ||
          trace.terminated_reason == Termination::elite_empty) {
        rec.status = to_string(trace.terminated_reason);
        return;
      }
      fill_is_metrics(rec, *trace.final_estimate);
      fill_density_metrics(rec, *trace.final_g);
      rec.iterations = static_cast<std::int64_t>(trace.iterates.size());
      return;
    }
    case Method::proj: {
      ProjOptions options;
      options.selector = parse_selector(cfg.selector);
      options.r = point.r;
      options.two_split = cfg.two_split;
      if (cfg.plan_file) {
        options.fixed_plan = load_plan_file(*cfg.plan_file, point.d);
      }
      const auto samples = draw_conditional(problem, point.n_g, rng);
      const auto g = build_g_proj(samples, options);
      fill_is_metrics(rec, is_estimate(problem, g, point.n_p, rng));
      fill_density_metrics(rec, g);
      return;
    }
    case Method::g_hat_a: {
      const auto samples = draw_conditional(problem, point.n_g, rng);
      const auto moments = conditional_moments_estimate(samples);
      const GaussianDist g{moments.mean, moments.cov};
      fill_is_metrics(rec, is_estimate(problem, g, point.n_p, rng));
      fill_density_metrics(rec, g);
      return;
    }
    case Method::wishart: {
      const auto& truth = problem.analytic();
      if (!truth) {
        throw ConfigError("method wishart requires a problem with analytic moments");
      }
      const auto report =
          cfg.wishart_conditional
              ? wishart_kl_experiment(problem, point.n_g, cfg.reps, rng)
              : wishart_kl_experiment(point.n_g, truth->cond_moments.mean, truth->cond_moments.cov, cfg.reps, rng);
      rec.kl_f_to_g = report.empirical_mean;
      if (report.closed_form && *report.closed_form != 0.0) {
        rec.rel_error = std::abs(report.empirical_mean - *report.closed_form) / std::abs(*report.closed_form);
      }
      return;
    }
  }
}

}  // namespace

EventProblem make_problem(const ProblemSpec& spec, std::int64_t d) {
  try {
    return make_problem_unchecked(spec, d);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string{"problem: "} + e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string{"problem: "} + e.what());
  }
}

GaussianDist make_fixed_g(const std::string& spec, const EventProblem& problem) {
  const auto d = problem.dim();
  if (spec == "nominal") {
    return GaussianDist::standard(d);
  }
  if (spec == "optimal") {
    const auto& truth = problem.analytic();
    if (!truth) {
      throw ConfigError("g: 'optimal' requires a problem with analytic truth");
    }
    return GaussianDist{truth->cond_moments.mean, truth->cond_moments.cov};
  }
  if (spec.rfind("iso:", 0) == 0) {
    const double s = parse_real("g", spec.substr(4));
    if (!(s > 0.0)) {
      throw ConfigError("g: isotropic variance must be positive");
    }
    return GaussianDist{Vector::Zero(d), s * Matrix::Identity(d, d)};
  }
  throw ConfigError("g: unknown auxiliary '" + spec + "' (expected nominal, optimal or iso:<variance>)");
}

Format parse_format(const std::string& name) {
  if (name == "csv") {
    return Format::csv;
  }
  if (name == "jsonl") {
    return Format::jsonl;
  }
  throw ConfigError("format: expected csv or jsonl, got '" + name + "'");
}

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::mc:
      return "mc";
    case Method::is_fixed_g:
      return "is_fixed_g";
    case Method::ce:
      return "ce";
    case Method::proj:
      return "proj";
    case Method::g_hat_a:
      return "g_hat_A";
    case Method::wishart:
      return "wishart";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (const auto m : {Method::mc, Method::is_fixed_g, Method::ce, Method::proj, Method::g_hat_a, Method::wishart}) {
    if (name == to_string(m)) {
      return m;
    }
  }
  throw ConfigError("method: unknown method '" + name + "'");
}

void SweepRecord::clear_metrics() {
  p_hat.reset();
  rel_error.reset();
  max_weight_ratio.reset();
  ess_fraction.reset();
  kl_f_to_g.reset();
  psi_sigma.reset();
  mu_norm.reset();
  lambda_min.reset();
  iterations.reset();
  wall_time_ms.reset();
}

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> columns{
      "d",       "n_g",        "n_p",       "m",         "r",      "rho",        "seed",
      "method",  "p_hat",      "rel_error", "max_weight_ratio", "ess_fraction", "kl_f_to_g", "psi_sigma",
      "mu_norm", "lambda_min", "iterations", "wall_time_ms", "status"};
  return columns;
}

std::string csv_header() {
  std::string out;
  for (const auto& c : record_columns()) {
    if (!out.empty()) {
      out += ',';
    }
    out += c;
  }
  return out;
}

std::string to_csv_row(const SweepRecord& rec) {
  std::ostringstream out;
  out << rec.d << ',' << rec.n_g << ',' << rec.n_p << ',' << rec.m << ',' << rec.r << ',' << format_double(rec.rho)
      << ',' << rec.seed << ',' << rec.method << ',' << field(rec.p_hat) << ',' << field(rec.rel_error) << ','
      << field(rec.max_weight_ratio) << ',' << field(rec.ess_fraction) << ',' << field(rec.kl_f_to_g) << ','
      << field(rec.psi_sigma) << ',' << field(rec.mu_norm) << ',' << field(rec.lambda_min) << ','
      << field(rec.iterations) << ',' << field(rec.wall_time_ms) << ',' << rec.status;
  return out.str();
}

std::string to_jsonl(const SweepRecord& rec) {
  std::ostringstream out;
  out << "{\"d\":" << rec.d << ",\"n_g\":" << rec.n_g << ",\"n_p\":" << rec.n_p << ",\"m\":" << rec.m
      << ",\"r\":" << rec.r << ",\"rho\":" << format_double(rec.rho) << ",\"seed\":" << rec.seed
      << ",\"method\":" << nlohmann::json(rec.method).dump() << ",\"p_hat\":" << json_number(rec.p_hat)
      << ",\"rel_error\":" << json_number(rec.rel_error) << ",\"max_weight_ratio\":" << json_number(rec.max_weight_ratio)
      << ",\"ess_fraction\":" << json_number(rec.ess_fraction) << ",\"kl_f_to_g\":" << json_number(rec.kl_f_to_g)
      << ",\"psi_sigma\":" << json_number(rec.psi_sigma) << ",\"mu_norm\":" << json_number(rec.mu_norm)
      << ",\"lambda_min\":" << json_number(rec.lambda_min) << ",\"iterations\":" << json_number(rec.iterations)
      << ",\"wall_time_ms\":" << json_number(rec.wall_time_ms) << ",\"status\":" << nlohmann::json(rec.status).dump()
      << '}';
  return out.str();
}

SweepRecord parse_csv_row(const std::string& line) {
  const auto cells = split(line, ',');
  if (cells.size() != record_columns().size()) {
    throw std::invalid_argument("csv row: expected " + std::to_string(record_columns().size()) + " fields");
  }
  SweepRecord rec;
  rec.d = std::stoll(cells[0]);
  rec.n_g = std::stoll(cells[1]);
  rec.n_p = std::stoll(cells[2]);
  rec.m = std::stoll(cells[3]);
  rec.r = std::stoll(cells[4]);
  rec.rho = std::stod(cells[5]);
  rec.seed = std::stoull(cells[6]);
  rec.method = cells[7];
  rec.p_hat = parse_optional_real(cells[8]);
  rec.rel_error = parse_optional_real(cells[9]);
  rec.max_weight_ratio = parse_optional_real(cells[10]);
  rec.ess_fraction = parse_optional_real(cells[11]);
  rec.kl_f_to_g = parse_optional_real(cells[12]);
  rec.psi_sigma = parse_optional_real(cells[13]);
  rec.mu_norm = parse_optional_real(cells[14]);
  rec.lambda_min = parse_optional_real(cells[15]);
  if (!cells[16].empty()) {
    rec.iterations = std::stoll(cells[16]);
  }
  rec.wall_time_ms = parse_optional_real(cells[17]);
  rec.status = cells[18];
  return rec;
}

void write_records(const std::vector<SweepRecord>& records, Format format, std::ostream& out) {
  if (format == Format::csv) {
    out << csv_header() << '\n';
    for (const auto& rec : records) {
      out << to_csv_row(rec) << '\n';
    }
  } else {
    for (const auto& rec : records) {
      out << to_jsonl(rec) << '\n';
    }
  }
}

void write_records(const std::vector<SweepRecord>& records, Format format, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out{tmp, std::ios::trunc};
    if (!out) {
      throw std::runtime_error("cannot write " + path.string());
    }
    write_records(records, format, out);
    out.flush();
    if (!out) {
      throw std::runtime_error("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot write " + path.string());
  }
}

std::vector<SweepRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in{path};
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) {
    throw std::runtime_error(path.string() + ": missing or unexpected CSV header");
  }
  std::vector<SweepRecord> out;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      out.push_back(parse_csv_row(line));
    }
  }
  return out;
}

Rng seed_derivation(std::uint64_t master_seed, std::initializer_list<std::uint64_t> coordinates) {
  return Rng{mix_words(master_seed, coordinates)};
}

std::int64_t SizeSpec::resolve(std::int64_t d) const {
  const double scale = std::pow(static_cast<double>(d), power_of_d);
  return static_cast<std::int64_t>(std::llround(factor * scale));
}

SizeSpec SizeSpec::parse(const std::string& token) {
  SizeSpec spec;
  std::string number = token;
  if (token.size() >= 2 && token.substr(token.size() - 2) == "d2") {
    spec.power_of_d = 2;
    number = token.substr(0, token.size() - 2);
  } else if (!token.empty() && token.back() == 'd') {
    spec.power_of_d = 1;
    number = token.substr(0, token.size() - 1);
  }
  spec.factor = number.empty() ? 1.0 : std::stod(number);
  return spec;
}

void SweepConfig::validate() const {
  if (d.empty()) {
    throw ConfigError("grids.d: empty");
  }
  const auto require_nonempty = [](const auto& grid, const char* name) {
    if (grid.empty()) {
      throw ConfigError(std::string{name} + ": empty");
    }
  };
  require_nonempty(n_g, "grids.n_g");
  require_nonempty(n_p, "grids.n_p");
  require_nonempty(m, "grids.m");
  require_nonempty(r, "grids.r");
  require_nonempty(rho, "grids.rho");
  require_nonempty(seeds, "seeds");
  for (const auto v : d) {
    if (v < 1) {
      throw ConfigError("grids.d: values must be positive");
    }
    const auto positive = [v](const std::vector<SizeSpec>& grid, const char* name) {
      for (const auto& s : grid) {
        if (s.resolve(v) < 1) {
          throw ConfigError(std::string{name} + ": values must be positive");
        }
      }
    };
    positive(n_g, "grids.n_g");
    positive(n_p, "grids.n_p");
    positive(m, "grids.m");
    for (const auto rv : r) {
      if (rv < 1 || rv > v) {
        throw ConfigError("grids.r: values must lie in [1, d]");
      }
    }
  }
  for (const auto v : rho) {
    if (!(v > 0.0 && v < 1.0)) {
      throw ConfigError("grids.rho: values must lie in (0, 1)");
    }
  }
  if (problem.p && !(*problem.p > 0.0 && *problem.p < 1.0)) {
    throw ConfigError("p: must lie in (0, 1)");
  }
  if (reps < 2 && method == Method::wishart) {
    throw ConfigError("reps: must be >= 2 for the wishart method");
  }
  if (t_max < 0) {
    throw ConfigError("t_max: must be >= 0");
  }
  if (method == Method::ce) {
    for (const auto dv : d) {
      for (const auto& ms : m) {
        for (const auto rv : rho) {
          const auto mv = ms.resolve(dv);
          if (static_cast<double>(mv) < std::ceil(1.0 / rv) ||
              std::floor((1.0 - rv) * static_cast<double>(mv)) < 1.0) {
            throw ConfigError("grids.m: must be >= ceil(1/rho)");
          }
        }
      }
      for (const auto& ng : n_g) {
        if (ng.resolve(dv) < 2) {
          throw ConfigError("grids.n_g: must be >= 2");
        }
      }
    }
  }
  if (method == Method::proj) {
    (void)parse_selector(selector);
    if (selector == "fixed" && !plan_file) {
      throw ConfigError("plan_file: required by the fixed selector");
    }
  }
}

SweepConfig parse_sweep_config(const std::string& text) {
  SweepConfig cfg;
  std::istringstream in{text};
  std::string line;
  int line_no = 0;
  bool have_count = false;
  std::uint64_t count = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));

    const auto sizes = [&] {
      std::vector<SizeSpec> out;
      for (const auto& item : list_items(key, value)) {
        try {
          out.push_back(SizeSpec::parse(item));
        } catch (const std::exception&) {
          throw ConfigError(key + ": invalid size '" + item + "'");
        }
      }
      return out;
    };

    if (key == "problem") {
      cfg.problem.name = value;
    } else if (key == "q") {
      cfg.problem.q = parse_real(key, value);
    } else if (key == "p") {
      cfg.problem.p = parse_real(key, value);
    } else if (key == "direction") {
      cfg.problem.direction = value;
    } else if (key == "method") {
      cfg.method = parse_method(value);
    } else if (key == "g") {
      cfg.g_spec = value;
    } else if (key == "selector") {
      cfg.selector = value;
    } else if (key == "plan_file") {
      cfg.plan_file = value;
    } else if (key == "two_split") {
      cfg.two_split = parse_bool(key, value);
    } else if (key == "t_max") {
      cfg.t_max = static_cast<int>(parse_integer(key, value));
    } else if (key == "reps") {
      cfg.reps = static_cast<int>(parse_integer(key, value));
    } else if (key == "wishart_rows") {
      if (value != "gaussian" && value != "conditional") {
        throw ConfigError("wishart_rows: expected gaussian or conditional, got '" + value + "'");
      }
      cfg.wishart_conditional = value == "conditional";
    } else if (key == "grids.d") {
      cfg.d.clear();
      if (value.empty()) {
        throw ConfigError("grids.d: empty");
      }
      for (const auto& item : list_items(key, value)) {
        cfg.d.push_back(parse_integer(key, item));
      }
    } else if (key == "grids.n_g") {
      cfg.n_g = sizes();
    } else if (key == "grids.n_p") {
      cfg.n_p = sizes();
    } else if (key == "grids.m") {
      cfg.m = sizes();
    } else if (key == "grids.r") {
      cfg.r.clear();
      for (const auto& item : list_items(key, value)) {
        cfg.r.push_back(parse_integer(key, item));
      }
    } else if (key == "grids.rho") {
      cfg.rho.clear();
      for (const auto& item : list_items(key, value)) {
        cfg.rho.push_back(parse_real(key, item));
      }
    } else if (key == "seeds.master") {
      cfg.master_seed = static_cast<std::uint64_t>(parse_integer(key, value));
    } else if (key == "seeds.count") {
      const auto c = parse_integer(key, value);
      if (c < 1) {
        throw ConfigError("seeds.count: must be >= 1");
      }
      count = static_cast<std::uint64_t>(c);
      have_count = true;
    } else if (key == "seeds.list") {
      cfg.seeds.clear();
      for (const auto& item : list_items(key, value)) {
        cfg.seeds.push_back(static_cast<std::uint64_t>(parse_integer(key, item)));
      }
    } else if (key == "format") {
      cfg.format = parse_format(value);
    } else if (key == "output") {
      cfg.output_path = value;
    } else if (key == "timing") {
      cfg.timing = parse_bool(key, value);
    } else {
      throw ConfigError("unknown key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  if (have_count) {
    cfg.seeds.clear();
    for (std::uint64_t s = 0; s < count; ++s) {
      cfg.seeds.push_back(s);
    }
  }
  return cfg;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in{path};
  if (!in) {
    throw ConfigError("config: cannot open " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_sweep_config(buffer.str());
}

std::vector<GridPoint> expand_grid(const SweepConfig& cfg) {
  std::vector<GridPoint> points;
  for (const auto d : cfg.d) {
    for (const auto& ng : cfg.n_g) {
      for (const auto& np : cfg.n_p) {
        for (const auto& m : cfg.m) {
          for (const auto r : cfg.r) {
            for (const auto rho : cfg.rho) {
              for (const auto seed : cfg.seeds) {
                points.push_back({d, ng.resolve(d), np.resolve(d), m.resolve(d), r, rho, seed});
              }
            }
          }
        }
      }
    }
  }
  return points;
}

namespace {

SweepRecord blank_record(const SweepConfig& cfg, const GridPoint& point) {
  SweepRecord rec;
  rec.d = point.d;
  rec.n_g = point.n_g;
  rec.n_p = point.n_p;
  rec.m = point.m;
  rec.r = point.r;
  rec.rho = point.rho;
  rec.seed = point.seed;
  rec.method = to_string(cfg.method);
  return rec;
}

Rng point_stream(const SweepConfig& cfg, const GridPoint& point) {
  return seed_derivation(cfg.master_seed,
                         {static_cast<std::uint64_t>(point.d), static_cast<std::uint64_t>(point.n_g),
                          static_cast<std::uint64_t>(point.n_p), static_cast<std::uint64_t>(point.m),
                          static_cast<std::uint64_t>(point.r), word_of(point.rho),
                          static_cast<std::uint64_t>(cfg.method), point.seed});
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

SweepRecord run_single(const SweepConfig& cfg, const GridPoint& point, std::vector<std::string>* ce_trace) {
  auto rec = blank_record(cfg, point);
  const auto start = std::chrono::steady_clock::now();
  auto rng = point_stream(cfg, point);
  run_method(cfg, point, rec, rng, ce_trace);
  if (rec.status != "ok") {
    rec.clear_metrics();
  }
  if (cfg.timing) {
    rec.wall_time_ms = elapsed_ms(start);
  }
  return rec;
}

SweepRecord run_point(const SweepConfig& cfg, const GridPoint& point) {
  auto rec = blank_record(cfg, point);
  const auto start = std::chrono::steady_clock::now();
  auto rng = point_stream(cfg, point);
  try {
    run_method(cfg, point, rec, rng, nullptr);
  } catch (const ConfigError&) {
    throw;
  } catch (const EventTooRare&) {
    rec.status = "too_rare";
  } catch (const DegenerateProjection&) {
    rec.status = "degenerate_projection";
  } catch (const FactorizationError&) {
    rec.status = "covariance_degenerate";
  } catch (const EliteSetEmpty&) {
    rec.status = "elite_empty";
  } catch (const std::exception&) {
    rec.status = "failed";
  }
  if (rec.status != "ok") {
    rec.clear_metrics();
  }
  if (cfg.timing) {
    rec.wall_time_ms = elapsed_ms(start);
  }
  return rec;
}

std::vector<SweepRecord> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const auto points = expand_grid(cfg);
  std::vector<SweepRecord> records(points.size());
  parallel::for_each_index(points.size(), [&](std::size_t i) { records[i] = run_point(cfg, points[i]); });
  return records;
}

}  // namespace rareis::bench
