#include <rareis/gauss_core.hpp>
#include <rareis/parallel.hpp>

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

namespace rareis {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

bool exactly_standard(const Vector& mean, const Matrix& cov) {
  return (mean.array() == 0.0).all() && cov == Matrix::Identity(cov.rows(), cov.cols());
}

}  // namespace

struct GaussianDist::InverseCache {
  std::once_flag once;
  Matrix value;
};

void require_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string{what} + ": matrix is not square");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTolerance)) {
    throw std::invalid_argument(std::string{what} + ": matrix is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
  }
}

Matrix cholesky_lower(const Matrix& spd) {
  const Eigen::LLT<Matrix> llt{spd};
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("Cholesky factorization failed: matrix is not positive definite");
  }
  Matrix lower = llt.matrixL();
  const double max_diag = spd.diagonal().cwiseAbs().maxCoeff();
  const double min_pivot = lower.diagonal().array().square().minCoeff();
  if (!(min_pivot > kPivotRelativeFloor * max_diag)) {
    throw FactorizationError("Cholesky factorization failed: pivot " + std::to_string(min_pivot) +
                             " below relative floor");
  }
  return lower;
}

GaussianDist::GaussianDist(Vector mean, Matrix cov)
    : mean_{std::move(mean)}, cov_{std::move(cov)}, inverse_{std::make_shared<InverseCache>()} {
  if (mean_.size() == 0) {
    throw std::invalid_argument("GaussianDist: dimension must be positive");
  }
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw std::invalid_argument("GaussianDist: mean and covariance dimensions differ");
  }
  require_symmetric(cov_, "GaussianDist covariance");
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  factor_ = cholesky_lower(cov_);
  log_det_ = 2.0 * factor_.diagonal().array().log().sum();
  standard_ = exactly_standard(mean_, cov_);
}

GaussianDist GaussianDist::standard(Eigen::Index dim) {
  return GaussianDist{Vector::Zero(dim), Matrix::Identity(dim, dim)};
}

const Matrix& GaussianDist::inverse() const {
  std::call_once(inverse_->once, [this] {
    const Matrix identity = Matrix::Identity(dim(), dim());
    Matrix inv = factor_.triangularView<Eigen::Lower>().solve(identity);
    inv = (inv.transpose() * inv).eval();
    inverse_->value = 0.5 * (inv + inv.transpose());
  });
  return inverse_->value;
}

double GaussianDist::mahalanobis_squared(const Eigen::Ref<const Vector>& x) const {
  const Vector u = factor_.triangularView<Eigen::Lower>().solve(x - mean_);
  return u.squaredNorm();
}

double GaussianDist::log_pdf_point(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("GaussianDist::log_pdf: dimension mismatch");
  }
  return -0.5 * (static_cast<double>(dim()) * kLogTwoPi + log_det_ + mahalanobis_squared(x));
}

Vector GaussianDist::log_pdf(const SampleMatrix& rows) const {
  if (rows.cols() != dim()) {
    throw std::invalid_argument("GaussianDist::log_pdf: dimension mismatch");
  }
  const double constant = static_cast<double>(dim()) * kLogTwoPi + log_det_;
  Vector out(rows.rows());
  const auto chunks = parallel::chunk_count(rows.rows());
  parallel::for_each_index(chunks, [&](std::size_t k) {
    const auto begin = static_cast<Eigen::Index>(k) * parallel::kChunkRows;
    const auto count = std::min<Eigen::Index>(parallel::kChunkRows, rows.rows() - begin);
    Matrix centered = (rows.middleRows(begin, count).rowwise() - mean_.transpose()).transpose();
    factor_.triangularView<Eigen::Lower>().solveInPlace(centered);
    out.segment(begin, count) = -0.5 * (centered.colwise().squaredNorm().transpose().array() + constant);
  });
  return out;
}

void GaussianDist::transform_standard(SampleMatrix& z) const {
  if (standard_) {
    return;
  }
  SampleMatrix y = z * factor_.transpose().triangularView<Eigen::Upper>();
  y.rowwise() += mean_.transpose();
  z = std::move(y);
}

void fill_standard_normal(SampleMatrix& z, std::uint64_t base_seed) {
  const auto chunks = parallel::chunk_count(z.rows());
  parallel::for_each_index(chunks, [&](std::size_t k) {
    Rng stream{mix_words(base_seed, {k})};
    const auto begin = static_cast<Eigen::Index>(k) * parallel::kChunkRows;
    const auto end = std::min<Eigen::Index>(begin + parallel::kChunkRows, z.rows());
    for (Eigen::Index i = begin; i < end; ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        z(i, j) = stream.normal();
      }
    }
  });
}

SampleMatrix GaussianDist::sample(Eigen::Index n, Rng& rng) const {
  if (n < 1) {
    throw std::invalid_argument("sample: n must be >= 1");
  }
  SampleMatrix out(n, dim());
  fill_standard_normal(out, rng.next_seed());
  if (standard_) {
    return out;
  }
  const auto chunks = parallel::chunk_count(n);
  parallel::for_each_index(chunks, [&](std::size_t k) {
    const auto begin = static_cast<Eigen::Index>(k) * parallel::kChunkRows;
    const auto count = std::min<Eigen::Index>(parallel::kChunkRows, n - begin);
    SampleMatrix block = out.middleRows(begin, count);
    transform_standard(block);
    out.middleRows(begin, count) = block;
  });
  return out;
}

Vector standard_log_pdf(const SampleMatrix& rows) {
  const double constant = static_cast<double>(rows.cols()) * kLogTwoPi;
  return -0.5 * (rows.rowwise().squaredNorm().array() + constant);
}

SymmetricEigen symmetric_eigen(const Matrix& sym) {
  require_symmetric(sym, "symmetric_eigen");
  const Eigen::SelfAdjointEigenSolver<Matrix> solver{sym};
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_eigen: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double lambda_min(const Matrix& sym) { return symmetric_eigen(sym).values(0); }

double lambda_max(const Matrix& sym) {
  const auto eig = symmetric_eigen(sym);
  return eig.values(eig.values.size() - 1);
}

double psi_scalar(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("psi_scalar: argument must be positive");
  }
  return x - std::log(x) - 1.0;
}

double psi_matrix(const Matrix& sigma) {
  require_symmetric(sigma, "psi_matrix");
  const Matrix lower = cholesky_lower(sigma);
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  return 0.5 * (sigma.trace() - log_det - static_cast<double>(sigma.rows()));
}

double alpha_star(const Matrix& sigma) {
  (void)cholesky_lower(sigma);
  const double l1 = lambda_min(sigma);
  if (l1 >= 0.5) {
    return 1.0;
  }
  return l1 / (1.0 - l1);
}

double kl_gaussian(const GaussianDist& g, const GaussianDist& g2) {
  if (g.dim() != g2.dim()) {
    throw std::invalid_argument("kl_gaussian: dimension mismatch");
  }
  // tr(Sigma2^{-1} Sigma) = ||L2^{-1} L||_F^2
  const Matrix scaled = g2.factor().triangularView<Eigen::Lower>().solve(g.factor());
  const double trace = scaled.squaredNorm();
  const double psi = 0.5 * (trace - g.log_det() + g2.log_det() - static_cast<double>(g.dim()));
  return psi + 0.5 * g2.mahalanobis_squared(g.mean());
}

double kl_conditional(const ConditionalMoments& cond, const GaussianDist& g_base, const GaussianDist& g2) {
  if (!(cond.prob > 0.0)) {
    throw std::domain_error("kl_conditional: conditional probability must be positive");
  }
  const auto d = g_base.dim();
  if (g2.dim() != d || cond.mean.size() != d || cond.cov.rows() != d || cond.cov.cols() != d) {
    throw std::invalid_argument("kl_conditional: dimension mismatch");
  }
  // log det Sigma_B appears in both Psi terms and cancels, so a singular
  // conditional covariance is fine here.
  const double trace_base = (g_base.inverse().array() * cond.cov.array()).sum();
  const double trace_other = (g2.inverse().array() * cond.cov.array()).sum();
  const double psi_diff = 0.5 * (trace_other - trace_base + g2.log_det() - g_base.log_det());
  return -std::log(cond.prob) + psi_diff + 0.5 * g2.mahalanobis_squared(cond.mean) -
         0.5 * g_base.mahalanobis_squared(cond.mean);
}

SpectrumStats spectrum_stats(const Matrix& sigma) {
  const auto eig = symmetric_eigen(sigma);
  const auto d = sigma.rows();
  SpectrumStats stats;
  stats.lambda_min = eig.values(0);
  stats.lambda_max = eig.values(d - 1);
  stats.frob_dist_identity = (sigma - Matrix::Identity(d, d)).norm();
  stats.psi_value = stats.lambda_min > 0.0 ? psi_matrix(sigma) : std::numeric_limits<double>::infinity();
  return stats;
}

}  // namespace rareis
