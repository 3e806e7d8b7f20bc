#ifndef RAREIS_BENCH_HPP
#define RAREIS_BENCH_HPP

#include <rareis/gauss_core.hpp>
#include <rareis/rare_event.hpp>
#include <rareis/rng.hpp>

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

/**
 * \file
 * \brief Experiment harness: sweep configuration, per-point seeding, record
 * output and the command-line entry point.
 */

namespace rareis::bench {

/// Invalid user configuration; the CLI maps it to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Format { csv, jsonl };

[[nodiscard]] Format parse_format(const std::string& name);

enum class Method { mc, is_fixed_g, ce, proj, g_hat_a, wishart };

[[nodiscard]] const char* to_string(Method m) noexcept;
[[nodiscard]] Method parse_method(const std::string& name);

struct SweepRecord {
  std::int64_t d = 0;
  std::int64_t n_g = 0;
  std::int64_t n_p = 0;
  std::int64_t m = 0;
  std::int64_t r = 0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::string method;
  std::optional<double> p_hat;
  std::optional<double> rel_error;
  std::optional<double> max_weight_ratio;
  std::optional<double> ess_fraction;
  std::optional<double> kl_f_to_g;
  std::optional<double> psi_sigma;
  std::optional<double> mu_norm;
  std::optional<double> lambda_min;
  std::optional<std::int64_t> iterations;
  std::optional<double> wall_time_ms;
  std::string status = "ok";

  /// Drops every metric, keeping grid coordinates and status.
  void clear_metrics();
};

/// Column names in output order.
[[nodiscard]] const std::vector<std::string>& record_columns();

[[nodiscard]] std::string csv_header();
[[nodiscard]] std::string to_csv_row(const SweepRecord& rec);
[[nodiscard]] std::string to_jsonl(const SweepRecord& rec);
[[nodiscard]] SweepRecord parse_csv_row(const std::string& line);

void write_records(const std::vector<SweepRecord>& records, Format format, std::ostream& out);
/// Writes to a sibling temporary file, then renames over `path`.
void write_records(const std::vector<SweepRecord>& records, Format format, const std::filesystem::path& path);

[[nodiscard]] std::vector<SweepRecord> read_records_csv(const std::filesystem::path& path);

/// Per-point stream: a 64-bit multiply-xor avalanche over the master seed and
/// the coordinate tuple. Stable across versions.
[[nodiscard]] Rng seed_derivation(std::uint64_t master_seed, std::initializer_list<std::uint64_t> coordinates);

struct ProblemSpec {
  std::string name = "halfspace";
  double q = 0.0;
  std::optional<double> p;  ///< if set, q = Phi^{-1}(1 - p) (half-space) or its two-sided analogue
  std::string direction = "e1";
};

/// "halfspace", "two-sided" or "whole-space" (half-space with q = -inf, so f|_A = f).
[[nodiscard]] EventProblem make_problem(const ProblemSpec& spec, std::int64_t d);

/// "nominal", "optimal" (the exact N(mu_A, Sigma_A)) or "iso:<variance>".
[[nodiscard]] GaussianDist make_fixed_g(const std::string& spec, const EventProblem& problem);

/// Grid values may be plain integers or multiples of d ("20d") or d^2 ("5d2").
struct SizeSpec {
  double factor = 0.0;
  int power_of_d = 0;

  [[nodiscard]] std::int64_t resolve(std::int64_t d) const;
  [[nodiscard]] static SizeSpec parse(const std::string& token);
};

struct SweepConfig {
  ProblemSpec problem;
  Method method = Method::mc;
  std::string g_spec = "nominal";
  std::string selector = "mean";
  std::optional<std::filesystem::path> plan_file;
  bool two_split = false;
  int t_max = 50;
  int reps = 1;
  /// wishart only: draw rows from f|_A instead of N(mu_A, Sigma_A).
  bool wishart_conditional = false;

  std::vector<std::int64_t> d;
  std::vector<SizeSpec> n_g{SizeSpec{1000, 0}};
  std::vector<SizeSpec> n_p{SizeSpec{10000, 0}};
  std::vector<SizeSpec> m{SizeSpec{1000, 0}};
  std::vector<std::int64_t> r{1};
  std::vector<double> rho{0.1};

  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds{0};

  Format format = Format::csv;
  std::optional<std::filesystem::path> output_path;
  bool timing = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment. Lists are comma-separated.
[[nodiscard]] SweepConfig parse_sweep_config(const std::string& text);
[[nodiscard]] SweepConfig load_sweep_config(const std::filesystem::path& path);

struct GridPoint {
  std::int64_t d = 0;
  std::int64_t n_g = 0;
  std::int64_t n_p = 0;
  std::int64_t m = 0;
  std::int64_t r = 0;
  double rho = 0.0;
  std::uint64_t seed = 0;
};

[[nodiscard]] std::vector<GridPoint> expand_grid(const SweepConfig& cfg);

/// Runs one grid point; failures are recorded in `status`, never thrown.
[[nodiscard]] SweepRecord run_point(const SweepConfig& cfg, const GridPoint& point);

/// Same as run_point but lets failures propagate. When `ce_trace` is given
/// and the method is CE, one JSON object per iterate is appended to it.
[[nodiscard]] SweepRecord run_single(const SweepConfig& cfg, const GridPoint& point,
                                     std::vector<std::string>* ce_trace = nullptr);

/// Runs every point concurrently (up to the configured thread count) and
/// returns records in grid order.
[[nodiscard]] std::vector<SweepRecord> run_sweep(const SweepConfig& cfg);

/// Command-line entry point. Exit codes: 0 ok, 1 runtime failure, 2 config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Quick invariant checks across every module. Returns the failure count.
int run_selftest(std::ostream& out);

}  // namespace rareis::bench

#endif
