#include <rareis/ce.hpp>
#include <rareis/normal.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rareis {

namespace {

Eigen::Index order_index(Eigen::Index m, double rho) {
  return static_cast<Eigen::Index>(std::floor((1.0 - rho) * static_cast<double>(m)));
}

CEDiagnostics diagnose(const CEMomentStep& step, double& lambda_star) {
  CEDiagnostics diag;
  diag.mu_norm = step.mu.norm();
  diag.max_weight_ratio = step.max_weight_ratio;
  diag.lambda_min = lambda_min(step.sigma);
  lambda_star = std::min(lambda_star, diag.lambda_min);
  diag.kappa_hat = lambda_star > 0.0 ? 8.0 * std::max(1.0, 1.0 / lambda_star - 1.0)
                                     : std::numeric_limits<double>::infinity();
  if (step.next) {
    diag.psi_sigma = psi_matrix(step.sigma);
    diag.kl_f_to_g = kl_gaussian(GaussianDist::standard(step.mu.size()), *step.next);
  } else {
    diag.psi_sigma = std::numeric_limits<double>::infinity();
    diag.kl_f_to_g = std::numeric_limits<double>::infinity();
  }
  return diag;
}

}  // namespace

const char* to_string(Termination reason) noexcept {
  switch (reason) {
    case Termination::target_reached:
      return "target_reached";
    case Termination::t_max:
      return "t_max";
    case Termination::covariance_degenerate:
      return "covariance_degenerate";
    case Termination::elite_empty:
      return "elite_empty";
  }
  return "unknown";
}

void CEConfig::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("rho: must lie in (0, 1)");
  }
  if (n_g < 2) {
    throw std::invalid_argument("n_g: must be >= 2");
  }
  if (static_cast<double>(m) < std::ceil(1.0 / rho) || order_index(m, rho) < 1) {
    throw std::invalid_argument("m: must be >= ceil(1/rho)");
  }
  if (t_max < 0) {
    throw std::invalid_argument("t_max: must be >= 0");
  }
}

double empirical_quantile(Vector values, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("empirical_quantile: rho must lie in (0, 1)");
  }
  const auto m = values.size();
  const auto k = std::min(order_index(m, rho), m);
  if (k < 1) {
    throw std::invalid_argument("empirical_quantile: floor((1 - rho) m) is 0; m is too small for rho");
  }
  auto* first = values.data();
  std::nth_element(first, first + (k - 1), first + m);
  return first[k - 1];
}

double ce_quantile(const GaussianDist& g, const EventProblem& problem, Eigen::Index m, double rho, Rng& rng) {
  if (order_index(m, rho) < 1) {
    throw std::invalid_argument("ce_quantile: floor((1 - rho) m) is 0; m is too small for rho");
  }
  const SampleMatrix rows = g.sample(m, rng);
  return empirical_quantile(problem.evaluate(rows), rho);
}

CEMomentStep ce_moments_from_batch(const SampleMatrix& rows, const Vector& log_weights, const Vector& phi,
                                   double threshold) {
  const auto n = rows.rows();
  std::vector<Eigen::Index> elite;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (phi(i) > threshold) {
      elite.push_back(i);
    }
  }
  if (elite.empty()) {
    throw EliteSetEmpty("elite set empty: no sample exceeds the threshold " + std::to_string(threshold));
  }

  const auto count = static_cast<Eigen::Index>(elite.size());
  SampleMatrix elite_rows(count, rows.cols());
  Vector elite_log(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    elite_rows.row(k) = rows.row(elite[static_cast<std::size_t>(k)]);
    elite_log(k) = log_weights(elite[static_cast<std::size_t>(k)]);
  }
  const double shift = elite_log.maxCoeff();
  const Vector scaled = (elite_log.array() - shift).exp();

  CEMomentStep step;
  step.elite_count = count;
  step.p_hat = std::exp(shift + std::log(scaled.sum()) - std::log(static_cast<double>(n)));
  const auto moments = weighted_moments(elite_rows, scaled);
  step.mu = moments.mean;
  step.sigma = moments.cov;
  step.asymmetry = moments.asymmetry;
  step.max_weight_ratio = std::exp(log_weights.maxCoeff() - log_sum_exp(log_weights));
  try {
    step.next.emplace(step.mu, step.sigma);
  } catch (const FactorizationError&) {
    step.next.reset();
  }
  return step;
}

CEMomentStep ce_weighted_moments(const GaussianDist& g_t, double q_hat, const EventProblem& problem, Eigen::Index n_g,
                                 Rng& rng) {
  if (n_g < 2) {
    throw std::invalid_argument("ce_weighted_moments: n_g must be >= 2");
  }
  const SampleMatrix rows = g_t.sample(n_g, rng);
  return ce_moments_from_batch(rows, log_likelihood_ratio(g_t, rows), problem.evaluate(rows), q_hat);
}

CETrace ce_run(const EventProblem& problem, const CEConfig& cfg, Eigen::Index n_p, Rng& rng) {
  cfg.validate();
  const auto d = problem.dim();
  CETrace trace;
  GaussianDist g = GaussianDist::standard(d);
  double lambda_star = std::numeric_limits<double>::infinity();
  trace.terminated_reason = Termination::t_max;

  for (int t = 0; t < cfg.t_max; ++t) {
    double q_hat = 0.0;
    SampleMatrix shared_rows;
    Vector shared_phi;
    if (cfg.sample_sharing == SampleSharing::shared) {
      shared_rows = g.sample(std::max(cfg.m, cfg.n_g), rng);
      shared_phi = problem.evaluate(shared_rows);
      q_hat = empirical_quantile(shared_phi, cfg.rho);
    } else {
      q_hat = ce_quantile(g, problem, cfg.m, cfg.rho, rng);
    }

    const bool reached = cfg.stop_at_target && q_hat >= problem.threshold();
    const double working = reached ? problem.threshold() : q_hat;

    CEMomentStep step;
    try {
      if (cfg.sample_sharing == SampleSharing::shared) {
        step = ce_moments_from_batch(shared_rows, log_likelihood_ratio(g, shared_rows), shared_phi, working);
      } else {
        step = ce_weighted_moments(g, working, problem, cfg.n_g, rng);
      }
    } catch (const EliteSetEmpty&) {
      trace.terminated_reason = Termination::elite_empty;
      break;
    }

    CEIterate it;
    it.t = t;
    it.q_hat = q_hat;
    it.working_threshold = working;
    it.p_hat_t = step.p_hat;
    it.mu = step.mu;
    it.sigma = step.sigma;
    it.diagnostics = diagnose(step, lambda_star);
    trace.iterates.push_back(std::move(it));

    if (!step.next) {
      trace.terminated_reason = Termination::covariance_degenerate;
      break;
    }
    g = *step.next;
    if (reached) {
      trace.terminated_reason = Termination::target_reached;
      break;
    }
  }

  if (n_p > 0) {
    trace.final_estimate = is_estimate(problem, g, n_p, rng);
  }
  trace.final_g = g;
  return trace;
}

std::vector<DeterministicStep> ce_deterministic_halfspace(double q_target, double rho, int t_max) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("ce_deterministic_halfspace: rho must lie in (0, 1)");
  }
  const double z = normal_sf_inverse(rho);
  double a = 0.0;
  double c = 1.0;
  std::vector<DeterministicStep> out;
  for (int t = 0; t < t_max; ++t) {
    DeterministicStep step;
    step.t = t;
    step.q = a + z * std::sqrt(c);
    if (step.q >= q_target) {
      step.q = q_target;
      step.clamped = true;
    }
    step.a_next = mills_ratio(step.q);
    step.c_next = truncated_variance(step.q);
    out.push_back(step);
    a = step.a_next;
    c = step.c_next;
    if (step.clamped) {
      break;
    }
  }
  return out;
}

std::string iterate_to_json(const CEIterate& it) {
  const nlohmann::json j = {
      {"t", it.t},
      {"q_hat", it.q_hat},
      {"p_hat_t", it.p_hat_t},
      {"psi_sigma", it.diagnostics.psi_sigma},
      {"mu_norm", it.diagnostics.mu_norm},
      {"lambda_min", it.diagnostics.lambda_min},
      {"kl_f_to_g", it.diagnostics.kl_f_to_g},
      {"ratio", it.diagnostics.max_weight_ratio},
  };
  return j.dump();
}

}  // namespace rareis
