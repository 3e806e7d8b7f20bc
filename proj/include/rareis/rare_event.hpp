#ifndef RAREIS_RARE_EVENT_HPP
#define RAREIS_RARE_EVENT_HPP

#include <rareis/gauss_core.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

/**
 * \file
 * \brief Rare events A = {x : phi(x) > q} under the nominal density f = N(0, I),
 * analytic ground truth for the built-in problems and samplers from f|_A.
 */

namespace rareis {

/// Performance function phi. Must be deterministic.
using PerfFn = std::function<double(std::span<const double>)>;

/// Draws n i.i.d. rows from some fixed density.
using RowSampler = std::function<SampleMatrix(Eigen::Index, Rng&)>;

/// Closed-form facts about a problem.
struct AnalyticTruth {
  double prob = 0.0;                  ///< p_f(A)
  std::function<double(double)> cdf;  ///< F(u) = P_f(phi(X) <= u)
  ConditionalMoments cond_moments;    ///< (p_f(A), mu_A, Sigma_A)
  RowSampler exact_cond_sampler;      ///< optional exact sampler from f|_A
};

/// Thrown when rejection sampling exhausts its draw budget.
class EventTooRare : public std::runtime_error {
 public:
  EventTooRare(double observed_rate, std::int64_t draws);
  [[nodiscard]] double observed_rate() const noexcept { return rate_; }

 private:
  double rate_;
};

/// The event A = {x : phi(x) > q}. The inequality is strict everywhere.
class EventProblem {
 public:
  EventProblem(std::string name, Eigen::Index dim, PerfFn perf, double threshold,
               std::optional<AnalyticTruth> analytic = std::nullopt);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
  [[nodiscard]] double threshold() const noexcept { return threshold_; }
  [[nodiscard]] const PerfFn& perf() const noexcept { return perf_; }
  [[nodiscard]] const std::optional<AnalyticTruth>& analytic() const noexcept { return analytic_; }

  [[nodiscard]] double evaluate(std::span<const double> x) const { return perf_(x); }
  /// phi evaluated on every row.
  [[nodiscard]] Vector evaluate(const SampleMatrix& rows) const;

  [[nodiscard]] bool contains(std::span<const double> x) const { return perf_(x) > threshold_; }

 private:
  std::string name_;
  Eigen::Index dim_;
  PerfFn perf_;
  double threshold_;
  std::optional<AnalyticTruth> analytic_;
};

/// Rows of f|_A together with how they were produced.
struct ConditionalSampleSet {
  SampleMatrix samples;
  double acceptance_rate = 1.0;
  std::uint64_t seed = 0;
};

/// Weighted mean and covariance (second moment minus mean mean^T).
struct WeightedMoments {
  Vector mean;
  Matrix cov;
  double asymmetry = 0.0;  ///< max |C - C^T| before symmetrization
};

inline std::span<const double> row_span(const SampleMatrix& rows, Eigen::Index i) {
  return {rows.data() + i * rows.cols(), static_cast<std::size_t>(rows.cols())};
}

/// Unit vector by name: "e1" (first axis) or "ones" (normalized all-ones).
[[nodiscard]] Vector named_direction(Eigen::Index dim, const std::string& name);

/// phi(x) = v^T x with the closed-form truth of a Gaussian half-space.
[[nodiscard]] EventProblem halfspace_problem(Eigen::Index dim, const Vector& direction, double q);

/// phi(x) = |x(1)|; mu_A = 0 and Sigma_A inflates the first axis.
[[nodiscard]] EventProblem two_sided_problem(Eigen::Index dim, double q);

inline constexpr std::int64_t kDefaultMaxDraws = 100'000'000;

/// Exact i.i.d. sampling from f|_A by rejection from f.
[[nodiscard]] ConditionalSampleSet rejection_sample_conditional(const EventProblem& problem, Eigen::Index n,
                                                                Rng& rng,
                                                                std::int64_t max_draws = kDefaultMaxDraws);

/// Uses the problem's closed-form conditional sampler.
[[nodiscard]] ConditionalSampleSet exact_sample_conditional(const EventProblem& problem, Eigen::Index n, Rng& rng);

/// Sum_i w_i y_i / Sum_i w_i and Sum_i w_i y_i y_i^T / Sum_i w_i - mean mean^T.
[[nodiscard]] WeightedMoments weighted_moments(const SampleMatrix& rows, const Vector& weights);

/// (mu_hat_A, Sigma_hat_A) with the biased 1/n normalization.
[[nodiscard]] WeightedMoments conditional_moments_estimate(const SampleMatrix& rows);
[[nodiscard]] WeightedMoments conditional_moments_estimate(const ConditionalSampleSet& set);

}  // namespace rareis

#endif
