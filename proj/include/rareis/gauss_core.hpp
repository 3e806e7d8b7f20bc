#ifndef RAREIS_GAUSS_CORE_HPP
#define RAREIS_GAUSS_CORE_HPP

#include <rareis/rng.hpp>

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>

/**
 * \file
 * \brief Multivariate Gaussian algebra: densities, sampling, spectra, the
 * Psi functional and closed-form KL divergences.
 *
 * Notation follows the usual rare-event setting: f = N(0, I) is the nominal
 * density and g = N(mu, Sigma) an auxiliary density.
 */

namespace rareis {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// One sample per row.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPivotRelativeFloor = 1e-12;

/// Raised when a covariance cannot be factorized (not SPD to working precision).
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable Gaussian N(mean, cov) with a cached lower Cholesky factor.
/// The inverse is computed on first use and shared between copies.
class GaussianDist {
 public:
  GaussianDist(Vector mean, Matrix cov);

  /// The nominal density f = N(0, I_d).
  static GaussianDist standard(Eigen::Index dim);

  [[nodiscard]] Eigen::Index dim() const noexcept { return mean_.size(); }
  [[nodiscard]] const Vector& mean() const noexcept { return mean_; }
  [[nodiscard]] const Matrix& cov() const noexcept { return cov_; }
  [[nodiscard]] const Matrix& factor() const noexcept { return factor_; }
  [[nodiscard]] double log_det() const noexcept { return log_det_; }
  [[nodiscard]] const Matrix& inverse() const;

  /// True when mean is exactly zero and cov exactly the identity.
  [[nodiscard]] bool is_standard() const noexcept { return standard_; }

  [[nodiscard]] double log_pdf_point(const Eigen::Ref<const Vector>& x) const;
  /// Log-density of every row.
  [[nodiscard]] Vector log_pdf(const SampleMatrix& rows) const;

  /// (x - mean)^T cov^{-1} (x - mean).
  [[nodiscard]] double mahalanobis_squared(const Eigen::Ref<const Vector>& x) const;

  /// n i.i.d. rows mean + L z. Generated in fixed-size chunks on derived
  /// streams; consumes exactly one value from `rng`.
  [[nodiscard]] SampleMatrix sample(Eigen::Index n, Rng& rng) const;

  /// Maps standard-normal rows z to mean + L z in place.
  void transform_standard(SampleMatrix& z) const;

 private:
  struct InverseCache;

  Vector mean_;
  Matrix cov_;
  Matrix factor_;
  double log_det_ = 0.0;
  bool standard_ = false;
  std::shared_ptr<InverseCache> inverse_;
};

/// lambda_1 (smallest), lambda_d (largest), ||Sigma - I||_F and Psi(Sigma).
struct SpectrumStats {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double frob_dist_identity = 0.0;
  double psi_value = 0.0;
};

/// Probability, mean and covariance of a density restricted to a set B.
struct ConditionalMoments {
  double prob = 1.0;
  Vector mean;
  Matrix cov;
};

/// Eigenvalues in ascending order with matching eigenvector columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

/// Throws std::invalid_argument if `m` is not square or its maximum absolute
/// asymmetry exceeds kSymmetryTolerance.
void require_symmetric(const Matrix& m, const char* what);

[[nodiscard]] SymmetricEigen symmetric_eigen(const Matrix& sym);
[[nodiscard]] double lambda_min(const Matrix& sym);
[[nodiscard]] double lambda_max(const Matrix& sym);

/// Lower Cholesky factor; throws FactorizationError if some pivot is below
/// kPivotRelativeFloor times the largest diagonal entry.
[[nodiscard]] Matrix cholesky_lower(const Matrix& spd);

/// psi(x) = x - log x - 1.
[[nodiscard]] double psi_scalar(double x);

/// Psi(Sigma) = (tr Sigma - log det Sigma - d) / 2 from the Cholesky log-determinant.
[[nodiscard]] double psi_matrix(const Matrix& sigma);

/// min(1, lambda_1 / (1 - lambda_1)), equal to 1 when lambda_1 >= 1/2.
[[nodiscard]] double alpha_star(const Matrix& sigma);

/// D(g || g2).
[[nodiscard]] double kl_gaussian(const GaussianDist& g, const GaussianDist& g2);

/// D(g_base|_B || g2) from the moments of g_base restricted to B.
[[nodiscard]] double kl_conditional(const ConditionalMoments& cond, const GaussianDist& g_base,
                                    const GaussianDist& g2);

[[nodiscard]] inline SampleMatrix sample(const GaussianDist& g, Eigen::Index n, Rng& rng) {
  return g.sample(n, rng);
}

[[nodiscard]] SpectrumStats spectrum_stats(const Matrix& sigma);

/// Log-density of N(0, I) at every row.
[[nodiscard]] Vector standard_log_pdf(const SampleMatrix& rows);

/// Fills `z` with i.i.d. standard normals, chunk by chunk on streams derived
/// from `base_seed`. The chunk layout matches GaussianDist::sample.
void fill_standard_normal(SampleMatrix& z, std::uint64_t base_seed);

}  // namespace rareis

#endif
