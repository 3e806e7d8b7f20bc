#include <doctest.h>

#include "oracles.hpp"

#include <rareis/ce.hpp>
#include <rareis/normal.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>

using namespace rareis;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vector e1(Eigen::Index d) { return named_direction(d, "e1"); }

}  // namespace

TEST_CASE("CEConfig validation names the field") {
  CEConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  const auto message = [](const CEConfig& c) {
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      return std::string{e.what()};
    }
    return std::string{};
  };
  cfg.rho = 1.0;
  CHECK(message(cfg).rfind("rho:", 0) == 0);
  cfg = CEConfig{};
  cfg.n_g = 1;
  CHECK(message(cfg).rfind("n_g:", 0) == 0);
  cfg = CEConfig{};
  cfg.m = 9;
  CHECK(message(cfg).rfind("m:", 0) == 0);
  cfg.m = 10;
  CHECK(message(cfg).empty());
  cfg = CEConfig{};
  cfg.t_max = -1;
  CHECK(message(cfg).rfind("t_max:", 0) == 0);
}

TEST_CASE("ce_quantile on the standard normal") {
  const auto p = halfspace_problem(2, e1(2), 5.0);
  const auto f = GaussianDist::standard(2);
  Rng rng{1};
  CHECK(std::abs(ce_quantile(f, p, 100000, 0.5, rng)) < 0.02);
  CHECK(std::abs(ce_quantile(f, p, 100000, 0.1, rng) - normal_quantile(0.9)) < 0.03);
  CHECK(normal_quantile(0.9) == doctest::Approx(1.2816).epsilon(1e-4));
  CHECK_THROWS_AS((void)ce_quantile(f, p, 1, 0.5, rng), std::invalid_argument);
}

TEST_CASE("empirical_quantile uses the floor((1 - rho) m) order statistic") {
  CHECK(empirical_quantile(Vector{{5.0, 2.0}}, 0.5) == 2.0);
  CHECK(empirical_quantile(Vector{{4.0, 1.0, 3.0, 2.0, 5.0}}, 0.5) == 2.0);
  CHECK(empirical_quantile(Vector{{4.0, 1.0, 3.0, 2.0, 5.0, 0.0, 9.0, 8.0, 7.0, 6.0}}, 0.1) == 8.0);
  CHECK_THROWS_AS((void)empirical_quantile(Vector{{1.0}}, 0.5), std::invalid_argument);
}

TEST_CASE("unweighted moment step on the whole space") {
  const auto p = halfspace_problem(3, e1(3), 2.0);
  const auto f = GaussianDist::standard(3);
  Rng rng{2};
  Rng copy{2};
  const auto step = ce_weighted_moments(f, -std::numeric_limits<double>::infinity(), p, 5000, rng);
  const auto rows = f.sample(5000, copy);
  const auto plain = conditional_moments_estimate(rows);
  CHECK(step.p_hat == 1.0);
  CHECK((step.mu - plain.mean).norm() < 1e-13);
  CHECK((step.sigma - plain.cov).norm() < 1e-13);
  CHECK(step.elite_count == 5000);
}

TEST_CASE("a single elite sample gives a degenerate covariance") {
  SampleMatrix rows(3, 2);
  rows << 0.0, 0.0, 1.0, 1.0, 3.0, -1.0;
  const Vector phi = rows.col(0);
  const auto step = ce_moments_from_batch(rows, Vector::Zero(3), phi, 2.0);
  CHECK(step.elite_count == 1);
  CHECK(step.sigma.norm() == 0.0);
  CHECK_FALSE(step.next.has_value());
}

TEST_CASE("an empty elite set is an error") {
  SampleMatrix rows(2, 2);
  rows << 0.0, 0.0, 1.0, 1.0;
  const Vector phi = rows.col(0);
  CHECK_THROWS_AS((void)ce_moments_from_batch(rows, Vector::Zero(2), phi, 5.0), EliteSetEmpty);
}

TEST_CASE("moment step at q = 0 recovers the truncated mean") {
  const auto p = halfspace_problem(3, e1(3), 10.0);
  Rng rng{3};
  const Eigen::Index n = 100000;
  const auto step = ce_weighted_moments(GaussianDist::standard(3), 0.0, p, n, rng);
  const auto t = oracle::truncated(0.0);
  // Roughly n/2 elite samples.
  CHECK(std::abs(step.mu(0) - t.mean) < 4.0 * std::sqrt(t.variance / (0.5 * n)));
  CHECK(std::abs(step.mu(1)) < 4.0 / std::sqrt(0.5 * n));
  CHECK(std::abs(step.p_hat - 0.5) < 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("weighted moments with unit weights match the plain estimate bit for bit" * doctest::test_suite("properties")) {
  const auto f = GaussianDist::standard(4);
  Rng rng{4};
  const auto rows = f.sample(3000, rng);
  const Vector phi = rows.col(0);
  const double threshold = 0.3;
  const auto step = ce_moments_from_batch(rows, Vector::Zero(rows.rows()), phi, threshold);

  std::vector<Eigen::Index> elite;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (phi(i) > threshold) {
      elite.push_back(i);
    }
  }
  SampleMatrix sub(static_cast<Eigen::Index>(elite.size()), 4);
  for (std::size_t k = 0; k < elite.size(); ++k) {
    sub.row(static_cast<Eigen::Index>(k)) = rows.row(elite[k]);
  }
  const auto plain = conditional_moments_estimate(sub);
  CHECK(step.mu == plain.mean);
  CHECK(step.sigma == plain.cov);
}

TEST_CASE("the CE covariance is symmetric" * doctest::test_suite("properties")) {
  const auto p = halfspace_problem(10, named_direction(10, "ones"), 2.0);
  const GaussianDist g{Vector::Constant(10, 0.2), 1.3 * Matrix::Identity(10, 10)};
  Rng rng{5};
  const auto step = ce_weighted_moments(g, 1.0, p, 4000, rng);
  CHECK(step.asymmetry < 1e-10);
  CHECK(step.sigma == step.sigma.transpose());
}

TEST_CASE("deterministic recursion first step") {
  const auto steps = ce_deterministic_halfspace(10.0, 0.5, 1);
  REQUIRE(steps.size() == 1);
  const auto t = oracle::truncated(0.0);
  CHECK(steps[0].q == doctest::Approx(0.0));
  CHECK(steps[0].a_next == doctest::Approx(t.mean).epsilon(1e-9));
  CHECK(steps[0].c_next == doctest::Approx(t.variance).epsilon(1e-8));
  CHECK(steps[0].a_next == doctest::Approx(0.79788).epsilon(1e-5));
  CHECK(steps[0].c_next == doctest::Approx(0.36338).epsilon(1e-5));

  for (const double rho : {0.05, 0.1, 0.3}) {
    const auto s = ce_deterministic_halfspace(10.0, rho, 1).front();
    const auto tq = oracle::truncated(s.q);
    CHECK(s.q == doctest::Approx(normal_quantile(1.0 - rho)).epsilon(1e-12));
    CHECK(s.a_next == doctest::Approx(tq.mean).epsilon(1e-9));
    CHECK(s.c_next == doctest::Approx(1.0 - s.a_next * (s.a_next - s.q)).epsilon(1e-12));
  }
}

TEST_CASE("deterministic recursion as rho tends to one") {
  const auto s = ce_deterministic_halfspace(10.0, 1.0 - 1e-12, 1).front();
  CHECK(s.q < -6.0);
  CHECK(s.a_next < 1e-8);
  CHECK(s.c_next == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("deterministic recursion clamps at the target") {
  const auto steps = ce_deterministic_halfspace(3.0, 0.1, 50);
  REQUIRE(!steps.empty());
  CHECK(steps.back().clamped);
  CHECK(steps.back().q == 3.0);
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    CHECK_FALSE(steps[i].clamped);
    CHECK(steps[i].q < steps[i + 1].q);
  }
}

TEST_CASE("the first CE level has probability rho exactly" * doctest::test_suite("properties")) {
  for (const double rho : {0.01, 0.1, 0.5, 0.8}) {
    const auto p = halfspace_problem(2, e1(2), 0.0);
    const double q0 = normal_quantile(1.0 - rho);
    CHECK(std::abs(1.0 - p.analytic()->cdf(q0) - rho) < 1e-12);
  }
}

TEST_CASE("CE on a moderate half-space") {
  const Eigen::Index d = 20;
  const auto p = halfspace_problem(d, e1(d), 1.2816);
  CEConfig cfg;
  cfg.rho = 0.2;
  cfg.n_g = 2000;
  cfg.m = 2000;
  int quick = 0;
  int accurate = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng{500 + s};
    const auto trace = ce_run(p, cfg, 10000, rng);
    quick += (trace.terminated_reason == Termination::target_reached && trace.iterates.size() <= 3) ? 1 : 0;
    accurate += *trace.final_estimate->rel_error_vs_truth < 0.10 ? 1 : 0;
  }
  CHECK(quick >= 18);
  CHECK(accurate >= 18);
}

TEST_CASE("t_max = 0 degenerates to plain Monte Carlo") {
  const auto p = halfspace_problem(3, e1(3), 0.0);
  CEConfig cfg;
  cfg.t_max = 0;
  Rng rng{6};
  const auto trace = ce_run(p, cfg, 100000, rng);
  CHECK(trace.iterates.empty());
  CHECK(trace.terminated_reason == Termination::t_max);
  REQUIRE(trace.final_g.has_value());
  CHECK(trace.final_g->is_standard());
  CHECK(std::abs(trace.final_estimate->p_hat - 0.5) < 4.0 * std::sqrt(0.25 / 1e5));
  CHECK(trace.final_estimate->max_weight_ratio == doctest::Approx(1e-5));
}

TEST_CASE("shared-sample mode runs") {
  const auto p = halfspace_problem(5, e1(5), 2.5);
  CEConfig cfg;
  cfg.sample_sharing = SampleSharing::shared;
  std::vector<double> errors;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng{7 + s};
    const auto trace = ce_run(p, cfg, 10000, rng);
    CHECK(trace.terminated_reason == Termination::target_reached);
    errors.push_back(*trace.final_estimate->rel_error_vs_truth);
  }
  CHECK(median(errors) < 0.2);
}

TEST_CASE("clamping at the target and trace diagnostics") {
  const auto p = halfspace_problem(5, e1(5), 2.0);
  CEConfig cfg;
  Rng rng{8};
  const auto trace = ce_run(p, cfg, 1000, rng);
  REQUIRE(trace.terminated_reason == Termination::target_reached);
  const auto& last = trace.iterates.back();
  CHECK(last.q_hat >= 2.0);
  CHECK(last.working_threshold == 2.0);
  for (const auto& it : trace.iterates) {
    CHECK(it.p_hat_t >= 0.0);
    CHECK(it.diagnostics.lambda_min > 0.0);
    CHECK(it.diagnostics.psi_sigma >= 0.0);
    CHECK(it.diagnostics.kl_f_to_g >= 0.0);
    CHECK(it.diagnostics.kappa_hat >= 8.0);
    CHECK(it.diagnostics.mu_norm == doctest::Approx(it.mu.norm()));
    CHECK(it.sigma == it.sigma.transpose());
  }
  CHECK(trace.final_estimate.has_value());
}

TEST_CASE("trace serialization") {
  const auto p = halfspace_problem(3, e1(3), 1.5);
  CEConfig cfg;
  Rng rng{9};
  const auto trace = ce_run(p, cfg, 0, rng);
  CHECK_FALSE(trace.final_estimate.has_value());
  const auto j = nlohmann::json::parse(iterate_to_json(trace.iterates.front()));
  for (const char* key : {"t", "q_hat", "p_hat_t", "psi_sigma", "mu_norm", "lambda_min", "kl_f_to_g", "ratio"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["t"] == 0);
}

TEST_CASE("stochastic trace converges to the deterministic recursion" * doctest::test_suite("properties")) {
  const Eigen::Index d = 2;
  const auto p = halfspace_problem(d, e1(d), 10.0);
  const auto exact = ce_deterministic_halfspace(10.0, 0.5, 3);
  CEConfig cfg;
  cfg.rho = 0.5;
  cfg.t_max = 3;
  std::vector<double> mads;
  for (const Eigen::Index n : {1000, 4000, 16000}) {
    cfg.n_g = n;
    cfg.m = n;
    std::vector<double> dev;
    for (std::uint64_t s = 0; s < 50; ++s) {
      Rng rng{700 + s};
      const auto trace = ce_run(p, cfg, 0, rng);
      REQUIRE(trace.iterates.size() == 3);
      double worst = 0.0;
      for (std::size_t t = 0; t < 3; ++t) {
        const auto& it = trace.iterates[t];
        worst = std::max(worst, std::abs(it.q_hat - exact[t].q));
        worst = std::max(worst, std::abs(it.mu(0) - exact[t].a_next));
        worst = std::max(worst, std::abs(it.sigma(0, 0) - exact[t].c_next));
      }
      dev.push_back(worst);
    }
    mads.push_back(median(dev));
  }
  CHECK(mads[1] < mads[0]);
  CHECK(mads[2] < mads[1]);
}

// Known failure: with n_g = 50d the covariance comes from about 5d elite rows,
// so Psi grows roughly like d / 20 and the spread over d exceeds 2.
TEST_CASE("CE diagnostics stay bounded across dimension" * doctest::test_suite("properties")) {
  const double q = normal_quantile(0.9);
  std::vector<double> psi;
  std::vector<double> mu;
  for (const Eigen::Index d : {25, 50, 100}) {
    const auto p = halfspace_problem(d, e1(d), q);
    CEConfig cfg;
    cfg.n_g = 50 * d;
    cfg.m = 50 * d;
    std::vector<double> psi_d;
    std::vector<double> mu_d;
    std::vector<double> ratio_d;
    for (std::uint64_t s = 0; s < 3; ++s) {
      Rng rng{900 + s};
      const auto trace = ce_run(p, cfg, 10000, rng);
      REQUIRE(trace.final_estimate.has_value());
      double psi_max = 0.0;
      double mu_max = 0.0;
      for (const auto& it : trace.iterates) {
        psi_max = std::max(psi_max, it.diagnostics.psi_sigma);
        mu_max = std::max(mu_max, it.diagnostics.mu_norm);
      }
      psi_d.push_back(psi_max);
      mu_d.push_back(mu_max);
      ratio_d.push_back(trace.final_estimate->max_weight_ratio);
    }
    psi.push_back(median(psi_d));
    mu.push_back(median(mu_d));
    CHECK(median(ratio_d) < 0.05);
  }
  CHECK(*std::max_element(psi.begin(), psi.end()) <= 2.0 * *std::min_element(psi.begin(), psi.end()));
  CHECK(*std::max_element(mu.begin(), mu.end()) <= 2.0 * *std::min_element(mu.begin(), mu.end()));
}
