#ifndef RAREIS_CE_HPP
#define RAREIS_CE_HPP

#include <rareis/gauss_core.hpp>
#include <rareis/is_engine.hpp>
#include <rareis/rare_event.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

/**
 * \file
 * \brief The cross-entropy method with Gaussian auxiliary densities.
 *
 * Each iteration estimates the (1 - rho)-quantile q_t of phi under the current
 * density g_t, then refits g_{t+1} to the likelihood-weighted moments of the
 * elite set {phi > q_t}. The stochastic loop starts from g_0 = f. A closed-form
 * version of the same recursion on half-space problems serves as oracle.
 *
 * The run also reports kappa_hat = 8 max(1, 1/lambda_* - 1), lambda_* the
 * smallest eigenvalue seen so far. It is a heuristic sample-size exponent,
 * never used for control. At t = 0 the exponent is 1.
 */

namespace rareis {

enum class SampleSharing { independent, shared };

struct CEConfig {
  double rho = 0.1;
  Eigen::Index n_g = 1000;
  Eigen::Index m = 1000;
  int t_max = 50;
  SampleSharing sample_sharing = SampleSharing::independent;
  bool stop_at_target = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct CEDiagnostics {
  double psi_sigma = 0.0;
  double mu_norm = 0.0;
  double lambda_min = 0.0;
  double kl_f_to_g = 0.0;
  double max_weight_ratio = 0.0;
  double kappa_hat = 0.0;
};

struct CEIterate {
  int t = 0;
  double q_hat = 0.0;
  double working_threshold = 0.0;  ///< q_hat, or the target q once reached
  double p_hat_t = 0.0;
  Vector mu;
  Matrix sigma;
  CEDiagnostics diagnostics;
};

enum class Termination { target_reached, t_max, covariance_degenerate, elite_empty };

[[nodiscard]] const char* to_string(Termination reason) noexcept;

struct CETrace {
  std::vector<CEIterate> iterates;
  std::optional<ISResult> final_estimate;
  std::optional<GaussianDist> final_g;
  Termination terminated_reason = Termination::t_max;
};

class EliteSetEmpty : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Result of one weighted-moment step.
struct CEMomentStep {
  double p_hat = 0.0;
  Vector mu;
  Matrix sigma;
  double asymmetry = 0.0;
  double max_weight_ratio = 0.0;
  Eigen::Index elite_count = 0;
  std::optional<GaussianDist> next;  ///< empty when sigma cannot be factorized
};

/// The order statistic of rank floor((1 - rho) m) (1-based) among `values`.
[[nodiscard]] double empirical_quantile(Vector values, double rho);

/// Draws m rows from g and returns phi of the floor((1 - rho) m)-th smallest.
[[nodiscard]] double ce_quantile(const GaussianDist& g, const EventProblem& problem, Eigen::Index m, double rho,
                                 Rng& rng);

/// Weighted moments of a given batch. Elite rows (phi > threshold) are
/// extracted first, then reduced with weights exp(log l - max log l).
[[nodiscard]] CEMomentStep ce_moments_from_batch(const SampleMatrix& rows, const Vector& log_weights,
                                                 const Vector& phi, double threshold);

/// Draws n_g fresh rows from g_t and fits the next Gaussian.
/// Throws EliteSetEmpty if no row exceeds q_hat.
[[nodiscard]] CEMomentStep ce_weighted_moments(const GaussianDist& g_t, double q_hat, const EventProblem& problem,
                                               Eigen::Index n_g, Rng& rng);

/// Runs the stochastic loop from g_0 = f, then estimates p_f(A) with n_p
/// fresh samples from the last density (skipped when n_p == 0).
[[nodiscard]] CETrace ce_run(const EventProblem& problem, const CEConfig& cfg, Eigen::Index n_p, Rng& rng);

/// One step of the exact recursion on a half-space {v^T x > q}: the density
/// g_t = N(a_t v, c_t v v^T + I - v v^T) yields threshold q_t and the moments
/// (a_{t+1}, c_{t+1}) of f conditioned on {v^T x > q_t}.
struct DeterministicStep {
  int t = 0;
  double q = 0.0;
  double a_next = 0.0;
  double c_next = 1.0;
  bool clamped = false;
};

/// Exact recursion on a half-space. Stops after t_max steps or once q_t
/// reaches q_target (which is then used in place of q_t).
[[nodiscard]] std::vector<DeterministicStep> ce_deterministic_halfspace(double q_target, double rho, int t_max);

/// One JSON object per iterate: t, q_hat, p_hat_t, psi_sigma, mu_norm,
/// lambda_min, kl_f_to_g, ratio.
[[nodiscard]] std::string iterate_to_json(const CEIterate& it);

}  // namespace rareis

#endif
