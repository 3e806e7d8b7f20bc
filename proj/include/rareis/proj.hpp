#ifndef RAREIS_PROJ_HPP
#define RAREIS_PROJ_HPP

#include <rareis/gauss_core.hpp>
#include <rareis/rare_event.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

/**
 * \file
 * \brief Projection-based auxiliary densities.
 *
 * Given conditional samples of f|_A with moments (mu_hat_A, Sigma_hat_A) and
 * orthonormal directions d_1..d_r, the projected covariance
 *
 *   Sigma_proj = I + sum_k (v_k - 1) d_k d_k^T,   v_k = d_k^T Sigma_hat_A d_k
 *
 * only departs from the identity on span(d_k). The auxiliary density is
 * N(mu_hat_A, Sigma_proj). With r = d and the eigenbasis of Sigma_hat_A this
 * is the full-covariance fit N(mu_hat_A, Sigma_hat_A).
 */

namespace rareis {

enum class Selector { mean_direction, eigen_h, fixed };

[[nodiscard]] const char* to_string(Selector s) noexcept;
/// "mean", "eigen-h" or "fixed".
[[nodiscard]] Selector parse_selector(const std::string& name);

inline constexpr double kOrthonormalTolerance = 1e-10;
inline constexpr double kProjectedVarianceFloor = 1e-12;

struct ProjectionPlan {
  Matrix directions;  ///< r x d, orthonormal rows
  Selector selector = Selector::fixed;

  [[nodiscard]] Eigen::Index rank() const noexcept { return directions.rows(); }
  /// Throws std::invalid_argument unless rows are orthonormal.
  void validate() const;
};

class DegenerateProjection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[nodiscard]] Matrix project_covariance(const Matrix& sigma_hat_a, const ProjectionPlan& plan);

[[nodiscard]] ProjectionPlan select_mean_direction(const Vector& mu_hat_a);

/// Top-r eigenvectors ranked by h(lambda) = lambda - 1 - log(lambda), ties
/// broken by larger eigenvalue, then by smaller eigenvector index.
[[nodiscard]] ProjectionPlan select_eigen_h(const Matrix& sigma_hat_a, Eigen::Index r);

/// Reads one direction per line, whitespace-separated decimals.
[[nodiscard]] ProjectionPlan load_plan_file(const std::filesystem::path& path, Eigen::Index dim);

struct ProjOptions {
  Selector selector = Selector::mean_direction;
  Eigen::Index r = 1;
  std::optional<ProjectionPlan> fixed_plan;
  /// Select directions on the first half of the sample and estimate the
  /// moments on the second half, so the plan is independent of the moments.
  bool two_split = false;
};

struct ProjBuild {
  GaussianDist g;
  ProjectionPlan plan;
  Vector mu_hat;
  Matrix sigma_hat;
};

[[nodiscard]] ProjBuild build_g_proj_detailed(const ConditionalSampleSet& samples, const ProjOptions& options);
[[nodiscard]] GaussianDist build_g_proj(const ConditionalSampleSet& samples, const ProjOptions& options);

/// Digamma by upward recurrence to x >= 10 and the asymptotic series.
[[nodiscard]] double digamma(double x);

/// E[D(f || N(mu_hat, Sigma_hat))] when the n_g rows are drawn from
/// N(mu_A, Sigma_A). Requires n_g > d + 2.
[[nodiscard]] double expected_kl_wishart_closed_form(Eigen::Index n_g, const Vector& mu_a, const Matrix& sigma_a);

struct WishartKLReport {
  Eigen::Index d = 0;
  Eigen::Index n_g = 0;
  std::optional<double> closed_form;  ///< only for Gaussian rows
  double empirical_mean = 0.0;
  double empirical_se = 0.0;
  int reps = 0;
  int failed_reps = 0;
};

/// Replicates D(f || N(mu_hat, Sigma_hat)) with rows drawn from N(mu_A, Sigma_A).
[[nodiscard]] WishartKLReport wishart_kl_experiment(Eigen::Index n_g, const Vector& mu_a, const Matrix& sigma_a,
                                                    int reps, Rng& rng);

/// Same statistic with rows drawn from f|_A; no reference value.
[[nodiscard]] WishartKLReport wishart_kl_experiment(const EventProblem& problem, Eigen::Index n_g, int reps, Rng& rng);

struct SConcentrationReport {
  std::vector<double> deltas;     ///< max(|lambda_1(S) - 1|, |lambda_d(S) - 1|) per rep
  double quantile95_scaled = 0.0;  ///< 0.95-quantile of delta sqrt(n/d)
  double max_identity_residual = 0.0;
};

/// Symmetric square root of an SPD matrix.
[[nodiscard]] Matrix spd_sqrt(const Matrix& spd);

/// S = Sigma_A^{-1/2} (Sigma_hat_A + (mu_hat - mu_A)(mu_hat - mu_A)^T) Sigma_A^{-1/2}.
[[nodiscard]] Matrix normalized_scatter(const Matrix& sigma_hat, const Vector& mu_hat, const Vector& mu_a,
                                        const Matrix& sigma_a);

[[nodiscard]] SConcentrationReport concentration_check_s(const EventProblem& problem, Eigen::Index n, int reps,
                                                         Rng& rng);

}  // namespace rareis

#endif
