#include <rareis/is_engine.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace rareis {

Vector log_likelihood_ratio(const GaussianDist& g, const SampleMatrix& rows) {
  if (g.is_standard()) {
    return Vector::Zero(rows.rows());
  }
  return standard_log_pdf(rows) - g.log_pdf(rows);
}

WeightedBatch make_weighted_batch(const EventProblem& problem, const GaussianDist& g, const SampleMatrix& rows) {
  if (g.dim() != problem.dim() || rows.cols() != problem.dim()) {
    throw std::invalid_argument("make_weighted_batch: dimension mismatch");
  }
  WeightedBatch batch;
  batch.log_weights = log_likelihood_ratio(g, rows);
  for (Eigen::Index i = 0; i < batch.log_weights.size(); ++i) {
    if (!std::isfinite(batch.log_weights(i))) {
      throw std::runtime_error("non-finite likelihood ratio at sample " + std::to_string(i));
    }
  }
  batch.weights = batch.log_weights.array().exp();
  const Vector phi = problem.evaluate(rows);
  batch.indicators.resize(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    batch.indicators[static_cast<std::size_t>(i)] = phi(i) > problem.threshold() ? 1 : 0;
  }
  return batch;
}

double log_sum_exp(const Vector& x) {
  if (x.size() == 0) {
    return -std::numeric_limits<double>::infinity();
  }
  const double top = x.maxCoeff();
  if (!std::isfinite(top)) {
    return top;
  }
  return top + std::log((x.array() - top).exp().sum());
}

double max_weight_ratio(const WeightedBatch& batch) {
  if (batch.size() == 0) {
    throw std::invalid_argument("max_weight_ratio: empty batch");
  }
  const double total = log_sum_exp(batch.log_weights);
  if (total == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("max_weight_ratio: all weights are zero");
  }
  return std::exp(batch.log_weights.maxCoeff() - total);
}

double max_weight_ratio(const Vector& weights) {
  if (weights.size() == 0 || (weights.array() < 0.0).any()) {
    throw std::invalid_argument("max_weight_ratio: weights must be nonnegative and nonempty");
  }
  WeightedBatch batch;
  batch.log_weights = weights.array().log();
  batch.weights = weights;
  return max_weight_ratio(batch);
}

double ess_fraction(const WeightedBatch& batch) {
  const double n = static_cast<double>(batch.size());
  const double log_sum = log_sum_exp(batch.log_weights);
  const Vector doubled = 2.0 * batch.log_weights;
  const double log_sum_sq = log_sum_exp(doubled);
  return std::exp(2.0 * log_sum - std::log(n) - log_sum_sq);
}

ISResult summarize_batch(const WeightedBatch& batch, const EventProblem& problem, const GaussianDist& g) {
  ISResult out;
  out.n = batch.size();
  const double log_n = std::log(static_cast<double>(out.n));

  Vector elite(out.n);
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < out.n; ++i) {
    if (batch.indicators[static_cast<std::size_t>(i)] != 0) {
      elite(count++) = batch.log_weights(i);
    }
  }
  // Diagnostics are over l * xi_A; samples outside A carry zero weight.
  if (count == 0) {
    out.p_hat = 0.0;
    out.max_weight_ratio = 1.0;
    out.ess_fraction = 1.0 / static_cast<double>(out.n);
  } else {
    const Vector hit = elite.head(count);
    const double log_total = log_sum_exp(hit);
    const Vector doubled = 2.0 * hit;
    out.p_hat = std::exp(log_total - log_n);
    out.max_weight_ratio = std::exp(hit.maxCoeff() - log_total);
    out.ess_fraction = std::exp(2.0 * log_total - log_n - log_sum_exp(doubled));
  }
  out.second_moment_infinite = !g.is_standard() && lambda_min(g.cov()) <= 0.5;
  if (const auto& truth = problem.analytic(); truth && truth->prob > 0.0) {
    out.rel_error_vs_truth = std::abs(out.p_hat - truth->prob) / truth->prob;
  }
  return out;
}

ISResult is_estimate(const EventProblem& problem, const GaussianDist& g, Eigen::Index n_p, Rng& rng) {
  if (n_p < 1) {
    throw std::invalid_argument("is_estimate: n_p must be >= 1");
  }
  if (g.dim() != problem.dim()) {
    throw std::invalid_argument("is_estimate: dimension mismatch");
  }
  const SampleMatrix rows = g.sample(n_p, rng);
  return summarize_batch(make_weighted_batch(problem, g, rows), problem, g);
}

double cd_bound(double kl, double n, double tail_prob, double phi_second_moment) {
  if (!(n >= std::exp(kl))) {
    throw std::invalid_argument("cd bound requires n >= exp(KL)");
  }
  if (!(tail_prob >= 0.0 && tail_prob <= 1.0)) {
    throw std::invalid_argument("cd bound: tail probability must lie in [0, 1]");
  }
  if (!(phi_second_moment >= 0.0)) {
    throw std::invalid_argument("cd bound: second moment must be nonnegative");
  }
  return std::sqrt(phi_second_moment) * (std::pow(std::exp(kl) / n, 0.25) + 2.0 * std::sqrt(tail_prob));
}

double cd_bound_conditional(double kl_cond, double n, double tail_prob) { return cd_bound(kl_cond, n, tail_prob); }

double tail_bound_quadratic(const GaussianDist& g, double b_prob, const Matrix& sigma_b, double t) {
  if (!(t > 0.0)) {
    throw std::invalid_argument("tail_bound_quadratic: t must be positive");
  }
  if (!(b_prob > 0.0 && b_prob <= 1.0)) {
    throw std::invalid_argument("tail_bound_quadratic: p_f(B) must lie in (0, 1]");
  }
  const auto d = g.dim();
  const double frob = (g.inverse() - Matrix::Identity(d, d)).squaredNorm();
  const double l1 = lambda_min(g.cov());
  const double ld_b = lambda_max(sigma_b);
  return 4.0 / (t * t) * (2.0 * frob / b_prob + ld_b / (l1 * l1) * g.mean().squaredNorm());
}

double moment_bound(const GaussianDist& g, double alpha, double alpha_prime) {
  const double cap = alpha_star(g.cov());
  if (!(alpha > 0.0 && alpha < alpha_prime && alpha_prime < cap)) {
    throw std::invalid_argument("moment_bound: requires 0 < alpha < alpha' < alpha_*(Sigma)");
  }
  const auto d = g.dim();
  const Matrix w = (alpha_prime + 1.0) * Matrix::Identity(d, d) - alpha_prime * g.inverse();
  double psi_w = 0.0;
  try {
    psi_w = psi_matrix(0.5 * (w + w.transpose()));
  } catch (const FactorizationError&) {
    throw std::logic_error("moment_bound: (a'+1)I - a' Sigma^{-1} is not positive definite");
  }
  const double kl = kl_gaussian(GaussianDist::standard(d), g);
  const double q = alpha_prime / (alpha_prime - alpha);
  const double shift = (g.inverse() * g.mean()).squaredNorm();
  return std::exp(alpha * kl + 0.5 * q * alpha * alpha * shift + alpha / (2.0 * alpha_prime) * psi_w);
}

double jensen_lower_bound(double p_gb, const ConditionalMoments& cond_g) {
  if (!(p_gb > 0.0 && p_gb <= 1.0)) {
    throw std::invalid_argument("jensen_lower_bound: p_g(B) must lie in (0, 1]");
  }
  return p_gb * std::exp(-psi_matrix(cond_g.cov) - 0.5 * cond_g.mean.squaredNorm());
}

KLEstimate kl_empirical(const GaussianDist& g, const GaussianDist& g2, Eigen::Index n, Rng& rng) {
  if (n < 100) {
    throw std::invalid_argument("kl_empirical: n must be >= 100");
  }
  if (g.dim() != g2.dim()) {
    throw std::invalid_argument("kl_empirical: dimension mismatch");
  }
  const SampleMatrix rows = g.sample(n, rng);
  const Vector diff = g.log_pdf(rows) - g2.log_pdf(rows);
  const double mean = diff.mean();
  const double var = (diff.array() - mean).square().sum() / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace rareis
