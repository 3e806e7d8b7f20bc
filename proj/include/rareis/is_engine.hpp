#ifndef RAREIS_IS_ENGINE_HPP
#define RAREIS_IS_ENGINE_HPP

#include <rareis/gauss_core.hpp>
#include <rareis/rare_event.hpp>

#include <limits>
#include <optional>
#include <vector>

/**
 * \file
 * \brief Importance-sampling estimation of p_f(A) and its diagnostics.
 *
 * Every reduction over likelihood ratios is carried out in log space with a
 * max shift: in the weight-degeneracy regime log l spans hundreds of units.
 */

namespace rareis {

/// Likelihood ratios l(Y_i) = f(Y_i) / g(Y_i) and indicators xi_A(Y_i).
struct WeightedBatch {
  Vector log_weights;
  Vector weights;  ///< exp(log_weights); may underflow to 0 or overflow to inf
  std::vector<unsigned char> indicators;

  [[nodiscard]] Eigen::Index size() const noexcept { return log_weights.size(); }
};

struct ISResult {
  double p_hat = 0.0;
  double max_weight_ratio = 0.0;  ///< max l / sum l
  double ess_fraction = 0.0;      ///< (sum l)^2 / (n sum l^2)
  std::optional<double> rel_error_vs_truth;
  /// Set when lambda_1(Sigma) <= 1/2, i.e. E_g[l^2] is infinite.
  bool second_moment_infinite = false;
  Eigen::Index n = 0;
};

struct BoundReport {
  double kl = 0.0;
  double cd_rhs = 0.0;
  double tail_rhs = 0.0;
  double moment_bound = 0.0;
  double alpha_used = 0.0;
};

/// Tag for the event threshold meaning "A is the whole space".
inline constexpr double kWholeSpace = -std::numeric_limits<double>::infinity();

/// log l(y) = log f(y) - log g(y) for every row; exactly zero when g is f.
[[nodiscard]] Vector log_likelihood_ratio(const GaussianDist& g, const SampleMatrix& rows);

[[nodiscard]] WeightedBatch make_weighted_batch(const EventProblem& problem, const GaussianDist& g,
                                                const SampleMatrix& rows);

/// log(sum_i exp(x_i)); -inf for an empty or all -inf input.
[[nodiscard]] double log_sum_exp(const Vector& x);

[[nodiscard]] double max_weight_ratio(const WeightedBatch& batch);
[[nodiscard]] double max_weight_ratio(const Vector& weights);
[[nodiscard]] double ess_fraction(const WeightedBatch& batch);

/// (1/n) sum_i l(Y_i) xi_A(Y_i) and the diagnostics of the batch.
[[nodiscard]] ISResult summarize_batch(const WeightedBatch& batch, const EventProblem& problem,
                                       const GaussianDist& g);

/// Draws n_p rows from g and estimates p_f(A). Throws if some log-ratio is
/// not finite, naming the offending sample.
[[nodiscard]] ISResult is_estimate(const EventProblem& problem, const GaussianDist& g, Eigen::Index n_p, Rng& rng);

/// Conditional Chatterjee-Diaconis bound (e^kl / n)^{1/4} + 2 sqrt(tail_prob).
/// Requires n >= e^kl.
[[nodiscard]] double cd_bound_conditional(double kl_cond, double n, double tail_prob);

/// The general CD bound: sqrt(E_f phi^2) times the conditional form.
[[nodiscard]] double cd_bound(double kl, double n, double tail_prob, double phi_second_moment = 1.0);

/// Chebyshev-type tail bound on L = log(f|_B / g) at deviation t.
[[nodiscard]] double tail_bound_quadratic(const GaussianDist& g, double b_prob, const Matrix& sigma_b, double t);

/// Bound on E_f[(f/g)^alpha] valid for 0 < alpha < alpha_prime < alpha_*(Sigma).
[[nodiscard]] double moment_bound(const GaussianDist& g, double alpha, double alpha_prime);

/// p_g(B) exp(-Psi(Sigma^g_B) - ||mu^g_B||^2 / 2), a lower bound on p_f(B).
[[nodiscard]] double jensen_lower_bound(double p_gb, const ConditionalMoments& cond_g);

struct KLEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo mean and standard error of log(g / g2) under g.
[[nodiscard]] KLEstimate kl_empirical(const GaussianDist& g, const GaussianDist& g2, Eigen::Index n, Rng& rng);

}  // namespace rareis

#endif
