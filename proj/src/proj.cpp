#include <rareis/parallel.hpp>
#include <rareis/proj.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace rareis {

namespace {

double h_rank(double lambda) { return lambda - 1.0 - std::log(lambda); }

ConditionalSampleSet draw_conditional(const EventProblem& problem, Eigen::Index n, Rng& rng) {
  const auto& truth = problem.analytic();
  if (truth && truth->exact_cond_sampler) {
    return exact_sample_conditional(problem, n, rng);
  }
  return rejection_sample_conditional(problem, n, rng);
}

ProjectionPlan plan_for(const WeightedMoments& moments, const ProjOptions& options) {
  switch (options.selector) {
    case Selector::mean_direction:
      return select_mean_direction(moments.mean);
    case Selector::eigen_h:
      return select_eigen_h(moments.cov, options.r);
    case Selector::fixed:
      break;
  }
  if (!options.fixed_plan) {
    throw std::invalid_argument("fixed selector requires a plan");
  }
  return *options.fixed_plan;
}

struct KLSummary {
  double mean = 0.0;
  double se = 0.0;
  int failed = 0;
};

template <class DrawRows>
KLSummary replicate_kl(Eigen::Index d, int reps, Rng& rng, DrawRows draw_rows) {
  if (reps < 2) {
    throw std::invalid_argument("wishart_kl_experiment: reps must be >= 2");
  }
  const auto base = rng.next_seed();
  const auto f = GaussianDist::standard(d);
  std::vector<double> values(static_cast<std::size_t>(reps), std::numeric_limits<double>::quiet_NaN());
  parallel::for_each_index(values.size(), [&](std::size_t k) {
    Rng stream{mix_words(base, {k})};
    const SampleMatrix rows = draw_rows(stream);
    const auto moments = conditional_moments_estimate(rows);
    try {
      values[k] = kl_gaussian(f, GaussianDist{moments.mean, moments.cov});
    } catch (const FactorizationError&) {
    }
  });

  KLSummary out;
  double sum = 0.0;
  int ok = 0;
  for (const double v : values) {
    if (std::isnan(v)) {
      ++out.failed;
    } else {
      sum += v;
      ++ok;
    }
  }
  if (out.failed * 100 > reps || ok < 2) {
    throw std::runtime_error("wishart_kl_experiment: " + std::to_string(out.failed) + " of " + std::to_string(reps) +
                             " replications had a singular covariance estimate");
  }
  out.mean = sum / ok;
  double ss = 0.0;
  for (const double v : values) {
    if (!std::isnan(v)) {
      ss += (v - out.mean) * (v - out.mean);
    }
  }
  out.se = std::sqrt(ss / (ok - 1) / ok);
  return out;
}

}  // namespace

const char* to_string(Selector s) noexcept {
  switch (s) {
    case Selector::mean_direction:
      return "mean";
    case Selector::eigen_h:
      return "eigen-h";
    case Selector::fixed:
      return "fixed";
  }
  return "unknown";
}

Selector parse_selector(const std::string& name) {
  if (name == "mean") {
    return Selector::mean_direction;
  }
  if (name == "eigen-h") {
    return Selector::eigen_h;
  }
  if (name == "fixed") {
    return Selector::fixed;
  }
  throw std::invalid_argument("unknown selector '" + name + "' (expected mean, eigen-h or fixed)");
}

void ProjectionPlan::validate() const {
  if (directions.rows() < 1 || directions.rows() > directions.cols()) {
    throw std::invalid_argument("projection plan: need 1 <= r <= d directions");
  }
  const auto r = directions.rows();
  const Matrix gram = directions * directions.transpose();
  const double err = (gram - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
  if (!(err < kOrthonormalTolerance)) {
    throw std::invalid_argument("projection plan: directions are not orthonormal (error " + std::to_string(err) + ")");
  }
}

Matrix project_covariance(const Matrix& sigma_hat_a, const ProjectionPlan& plan) {
  plan.validate();
  const auto d = sigma_hat_a.rows();
  if (sigma_hat_a.cols() != d || plan.directions.cols() != d) {
    throw std::invalid_argument("project_covariance: dimension mismatch");
  }
  Matrix out = Matrix::Identity(d, d);
  for (Eigen::Index k = 0; k < plan.rank(); ++k) {
    const Vector dir = plan.directions.row(k).transpose();
    const double v = dir.dot(sigma_hat_a * dir);
    if (!(v > kProjectedVarianceFloor)) {
      throw DegenerateProjection("degenerate projection: variance " + std::to_string(v) + " along direction " +
                                 std::to_string(k));
    }
    out.noalias() += (v - 1.0) * dir * dir.transpose();
  }
  return 0.5 * (out + out.transpose());
}

ProjectionPlan select_mean_direction(const Vector& mu_hat_a) {
  const double norm = mu_hat_a.norm();
  if (!(norm > 1e-10)) {
    throw std::invalid_argument("mean direction undefined for a near-zero mean; use the eigen-h selector");
  }
  return {(mu_hat_a / norm).transpose(), Selector::mean_direction};
}

ProjectionPlan select_eigen_h(const Matrix& sigma_hat_a, Eigen::Index r) {
  const auto d = sigma_hat_a.rows();
  if (r < 1 || r > d) {
    throw std::invalid_argument("select_eigen_h: r must lie in [1, d]");
  }
  const auto eig = symmetric_eigen(sigma_hat_a);
  if (!(eig.values(0) > 0.0)) {
    throw FactorizationError("select_eigen_h: covariance is not positive definite");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ha = h_rank(eig.values(a));
    const double hb = h_rank(eig.values(b));
    if (ha != hb) {
      return ha > hb;
    }
    if (eig.values(a) != eig.values(b)) {
      return eig.values(a) > eig.values(b);
    }
    return a < b;
  });
  ProjectionPlan plan;
  plan.selector = Selector::eigen_h;
  plan.directions.resize(r, d);
  for (Eigen::Index k = 0; k < r; ++k) {
    plan.directions.row(k) = eig.vectors.col(order[static_cast<std::size_t>(k)]).transpose();
  }
  return plan;
}

ProjectionPlan load_plan_file(const std::filesystem::path& path, Eigen::Index dim) {
  std::ifstream in{path};
  if (!in) {
    throw std::invalid_argument("cannot open plan file " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields{line};
    std::vector<double> row;
    double value = 0.0;
    while (fields >> value) {
      row.push_back(value);
    }
    if (!fields.eof()) {
      throw std::invalid_argument("plan file " + path.string() + ": malformed number on line " +
                                  std::to_string(rows.size() + 1));
    }
    if (row.empty()) {
      continue;
    }
    if (static_cast<Eigen::Index>(row.size()) != dim) {
      throw std::invalid_argument("plan file " + path.string() + ": expected " + std::to_string(dim) +
                                  " values per line");
    }
    rows.push_back(std::move(row));
  }
  ProjectionPlan plan;
  plan.selector = Selector::fixed;
  plan.directions.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    plan.directions.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), dim);
  }
  plan.validate();
  return plan;
}

ProjBuild build_g_proj_detailed(const ConditionalSampleSet& samples, const ProjOptions& options) {
  const auto& rows = samples.samples;
  const auto n = rows.rows();
  const bool split = options.two_split && options.selector != Selector::fixed;
  if (n < (split ? 4 : 2)) {
    throw std::invalid_argument("build_g_proj: not enough samples");
  }

  WeightedMoments moments;
  ProjectionPlan plan;
  if (split) {
    const auto half = n / 2;
    plan = plan_for(conditional_moments_estimate(SampleMatrix{rows.topRows(half)}), options);
    moments = conditional_moments_estimate(SampleMatrix{rows.bottomRows(n - half)});
  } else {
    moments = conditional_moments_estimate(rows);
    plan = plan_for(moments, options);
  }
  Matrix sigma = project_covariance(moments.cov, plan);
  return {GaussianDist{moments.mean, std::move(sigma)}, std::move(plan), moments.mean, moments.cov};
}

GaussianDist build_g_proj(const ConditionalSampleSet& samples, const ProjOptions& options) {
  return build_g_proj_detailed(samples, options).g;
}

double digamma(double x) {
  if (!(x > 0.0) || std::isinf(x)) {
    throw std::domain_error("digamma: argument must be positive and finite");
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // -1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6) + 1/(240x^8) - 1/(132x^10)
  const double series =
      inv2 * (-1.0 / 12.0 + inv2 * (1.0 / 120.0 + inv2 * (-1.0 / 252.0 + inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return shift + std::log(x) - 0.5 * inv + series;
}

double expected_kl_wishart_closed_form(Eigen::Index n_g, const Vector& mu_a, const Matrix& sigma_a) {
  const auto d = mu_a.size();
  if (sigma_a.rows() != d || sigma_a.cols() != d) {
    throw std::invalid_argument("expected_kl_wishart_closed_form: dimension mismatch");
  }
  if (n_g <= d + 2) {
    throw std::domain_error("expected_kl_wishart_closed_form: requires n_g > d + 2");
  }
  const GaussianDist g_a{mu_a, sigma_a};
  const double n = static_cast<double>(n_g);
  const double dd = static_cast<double>(d);
  double digamma_sum = 0.0;
  for (Eigen::Index i = 1; i <= d; ++i) {
    digamma_sum += digamma((n - static_cast<double>(i)) / 2.0) + std::log(2.0 / n);
  }
  const double denom = n - dd - 2.0;
  const double trace_inv = g_a.inverse().trace();
  const double quad = mu_a.dot(g_a.inverse() * mu_a);
  const double base = kl_gaussian(GaussianDist::standard(d), g_a);
  return base + 0.5 * (digamma_sum + (dd + 2.0) / denom * trace_inv + dd / denom + (dd + 2.0) / denom * quad);
}

WishartKLReport wishart_kl_experiment(Eigen::Index n_g, const Vector& mu_a, const Matrix& sigma_a, int reps,
                                      Rng& rng) {
  const auto d = mu_a.size();
  WishartKLReport report;
  report.d = d;
  report.n_g = n_g;
  report.reps = reps;
  report.closed_form = expected_kl_wishart_closed_form(n_g, mu_a, sigma_a);
  const GaussianDist g_a{mu_a, sigma_a};
  const auto summary = replicate_kl(d, reps, rng, [&](Rng& stream) { return g_a.sample(n_g, stream); });
  report.empirical_mean = summary.mean;
  report.empirical_se = summary.se;
  report.failed_reps = summary.failed;
  return report;
}

WishartKLReport wishart_kl_experiment(const EventProblem& problem, Eigen::Index n_g, int reps, Rng& rng) {
  const auto d = problem.dim();
  if (n_g <= d + 2) {
    throw std::domain_error("wishart_kl_experiment: requires n_g > d + 2");
  }
  WishartKLReport report;
  report.d = d;
  report.n_g = n_g;
  report.reps = reps;
  const auto summary =
      replicate_kl(d, reps, rng, [&](Rng& stream) { return draw_conditional(problem, n_g, stream).samples; });
  report.empirical_mean = summary.mean;
  report.empirical_se = summary.se;
  report.failed_reps = summary.failed;
  return report;
}

Matrix spd_sqrt(const Matrix& spd) {
  const auto eig = symmetric_eigen(spd);
  if (!(eig.values(0) > 0.0)) {
    throw FactorizationError("spd_sqrt: matrix is not positive definite");
  }
  return eig.vectors * eig.values.cwiseSqrt().asDiagonal() * eig.vectors.transpose();
}

Matrix normalized_scatter(const Matrix& sigma_hat, const Vector& mu_hat, const Vector& mu_a, const Matrix& sigma_a) {
  const auto eig = symmetric_eigen(sigma_a);
  if (!(eig.values(0) > 0.0)) {
    throw FactorizationError("normalized_scatter: Sigma_A is not positive definite");
  }
  const Matrix inv_sqrt = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.vectors.transpose();
  const Vector delta = mu_hat - mu_a;
  const Matrix s = inv_sqrt * (sigma_hat + delta * delta.transpose()) * inv_sqrt;
  return 0.5 * (s + s.transpose());
}

SConcentrationReport concentration_check_s(const EventProblem& problem, Eigen::Index n, int reps, Rng& rng) {
  const auto& truth = problem.analytic();
  if (!truth) {
    throw std::invalid_argument("concentration_check_s: problem has no analytic Sigma_A");
  }
  const auto d = problem.dim();
  if (n <= d) {
    throw std::invalid_argument("concentration_check_s: requires n > d");
  }
  if (reps < 1) {
    throw std::invalid_argument("concentration_check_s: reps must be >= 1");
  }
  const Vector& mu_a = truth->cond_moments.mean;
  const Matrix& sigma_a = truth->cond_moments.cov;
  const Matrix root = spd_sqrt(sigma_a);

  SConcentrationReport report;
  report.deltas.assign(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> residuals(static_cast<std::size_t>(reps), 0.0);
  const auto base = rng.next_seed();
  parallel::for_each_index(report.deltas.size(), [&](std::size_t k) {
    Rng stream{mix_words(base, {k})};
    const auto set = draw_conditional(problem, n, stream);
    const auto moments = conditional_moments_estimate(set);
    const Matrix s = normalized_scatter(moments.cov, moments.mean, mu_a, sigma_a);
    const Vector delta = moments.mean - mu_a;
    const Matrix rebuilt = root * s * root - delta * delta.transpose();
    residuals[k] = (rebuilt - moments.cov).cwiseAbs().maxCoeff();
    const auto eig = symmetric_eigen(s);
    report.deltas[k] = std::max(std::abs(eig.values(0) - 1.0), std::abs(eig.values(d - 1) - 1.0));
  });

  report.max_identity_residual = *std::max_element(residuals.begin(), residuals.end());
  std::vector<double> scaled = report.deltas;
  const double factor = std::sqrt(static_cast<double>(n) / static_cast<double>(d));
  for (auto& v : scaled) {
    v *= factor;
  }
  std::sort(scaled.begin(), scaled.end());
  const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(scaled.size()))) - 1;
  report.quantile95_scaled = scaled[idx];
  return report;
}

}  // namespace rareis
