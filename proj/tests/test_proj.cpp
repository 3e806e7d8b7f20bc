#include <doctest.h>

#include "oracles.hpp"

#include <rareis/is_engine.hpp>
#include <rareis/proj.hpp>

#include <cstdio>
#include <fstream>

using namespace rareis;

namespace {

Vector e1(Eigen::Index d) { return named_direction(d, "e1"); }

ProjectionPlan plan_of(Matrix rows) {
  ProjectionPlan plan;
  plan.directions = std::move(rows);
  return plan;
}

}  // namespace

TEST_CASE("project_covariance examples") {
  std::mt19937_64 gen{1};
  const auto plan = plan_of(oracle::random_orthonormal_rows(2, 4, gen));
  CHECK((project_covariance(Matrix::Identity(4, 4), plan) - Matrix::Identity(4, 4)).norm() < 1e-14);

  Matrix s = Matrix::Zero(2, 2);
  s.diagonal() << 0.3, 2.5;
  Matrix row(1, 2);
  row << 1.0, 0.0;
  const Matrix proj = project_covariance(s, plan_of(row));
  CHECK(proj(0, 0) == doctest::Approx(0.3));
  CHECK(proj(1, 1) == doctest::Approx(1.0));
  CHECK(proj(0, 1) == 0.0);

  const Matrix spd = oracle::random_spd(5, 0.2, 3.0, gen);
  const auto full = select_eigen_h(spd, 5);
  CHECK((project_covariance(spd, full) - spd).norm() < 1e-8);
}

TEST_CASE("project_covariance rejects degenerate and malformed plans") {
  Matrix s = Matrix::Identity(2, 2);
  s(0, 0) = 0.0;
  Matrix row(1, 2);
  row << 1.0, 0.0;
  CHECK_THROWS_AS((void)project_covariance(s, plan_of(row)), DegenerateProjection);

  Matrix skew(2, 2);
  skew << 1.0, 0.0, 0.1, 1.0;
  CHECK_THROWS_AS(plan_of(skew).validate(), std::invalid_argument);
  CHECK_THROWS_AS((void)project_covariance(Matrix::Identity(2, 2), plan_of(skew)), std::invalid_argument);
}

TEST_CASE("select_mean_direction") {
  const auto plan = select_mean_direction(Vector{{3.0, 4.0}});
  CHECK(plan.rank() == 1);
  CHECK(plan.directions(0, 0) == doctest::Approx(0.6));
  CHECK(plan.directions(0, 1) == doctest::Approx(0.8));
  CHECK(select_mean_direction(e1(3)).directions == e1(3).transpose());
  try {
    (void)select_mean_direction(Vector::Zero(3));
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string{e.what()}.find("eigen-h") != std::string::npos);
  }
}

TEST_CASE("select_eigen_h ranks by h") {
  Matrix s = Matrix::Zero(3, 3);
  s.diagonal() << 0.2, 1.0, 3.0;
  const auto plan = select_eigen_h(s, 2);
  CHECK(plan.rank() == 2);
  CHECK(std::abs(plan.directions(0, 2)) == doctest::Approx(1.0));
  CHECK(std::abs(plan.directions(1, 0)) == doctest::Approx(1.0));
  CHECK(3.0 - 1.0 - std::log(3.0) == doctest::Approx(0.9014).epsilon(1e-4));
  CHECK(0.2 - 1.0 - std::log(0.2) == doctest::Approx(0.8094).epsilon(1e-4));

  const auto id = select_eigen_h(Matrix::Identity(4, 4), 2);
  CHECK(id.rank() == 2);
  CHECK(id.directions.cwiseAbs() == Matrix::Identity(4, 4).topRows(2));

  CHECK_THROWS_AS((void)select_eigen_h(s, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)select_eigen_h(s, 4), std::invalid_argument);
  Matrix bad = s;
  bad(0, 0) = -0.2;
  CHECK_THROWS((void)select_eigen_h(bad, 1));
}

TEST_CASE("selector names") {
  CHECK(parse_selector("mean") == Selector::mean_direction);
  CHECK(parse_selector("eigen-h") == Selector::eigen_h);
  CHECK(parse_selector("fixed") == Selector::fixed);
  CHECK_THROWS_AS((void)parse_selector("uribe"), std::invalid_argument);
}

TEST_CASE("plan files") {
  const auto path = std::filesystem::temp_directory_path() / "rareis_plan_test.txt";
  {
    std::ofstream out{path};
    out << "0 1 0\n\n1 0 0\n";
  }
  const auto plan = load_plan_file(path, 3);
  CHECK(plan.rank() == 2);
  CHECK(plan.directions(0, 1) == 1.0);
  CHECK_THROWS_AS((void)load_plan_file(path, 4), std::invalid_argument);
  {
    std::ofstream out{path};
    out << "1 1 0\n";
  }
  CHECK_THROWS_AS((void)load_plan_file(path, 3), std::invalid_argument);
  std::filesystem::remove(path);
  CHECK_THROWS_AS((void)load_plan_file(path, 3), std::invalid_argument);
}

TEST_CASE("build_g_proj on the half-space q = 0") {
  const Eigen::Index d = 4;
  const auto p = halfspace_problem(d, e1(d), 0.0);
  Rng rng{2};
  const Eigen::Index n = 100000;
  const auto samples = exact_sample_conditional(p, n, rng);
  const auto t = oracle::truncated(0.0);

  ProjOptions options;
  const auto g = build_g_proj(samples, options);
  CHECK(std::abs(g.mean()(0) - t.mean) < 4.0 * std::sqrt(t.variance / n));
  CHECK(std::abs(g.cov()(0, 0) - t.variance) < 0.01);
  for (Eigen::Index i = 1; i < d; ++i) {
    CHECK(std::abs(g.cov()(i, i) - 1.0) < 0.01);
  }

  options.selector = Selector::eigen_h;
  options.r = d;
  const auto full = build_g_proj(samples, options);
  const auto moments = conditional_moments_estimate(samples);
  CHECK(kl_gaussian(full, GaussianDist{moments.mean, moments.cov}) < 1e-8);
}

TEST_CASE("build_g_proj with identical rows is degenerate") {
  ConditionalSampleSet set;
  set.samples = SampleMatrix::Ones(2, 3);
  ProjOptions options;
  CHECK_THROWS_AS((void)build_g_proj(set, options), DegenerateProjection);
}

TEST_CASE("two-split mode and fixed plans") {
  const Eigen::Index d = 6;
  const auto p = halfspace_problem(d, named_direction(d, "ones"), 1.0);
  Rng rng{3};
  const auto samples = exact_sample_conditional(p, 20000, rng);

  ProjOptions split;
  split.two_split = true;
  const auto built = build_g_proj_detailed(samples, split);
  const auto second_half = conditional_moments_estimate(SampleMatrix{samples.samples.bottomRows(10000)});
  CHECK(built.mu_hat == second_half.mean);
  CHECK(std::abs(built.plan.directions.row(0).dot(named_direction(d, "ones").transpose())) > 0.99);

  ProjOptions fixed;
  fixed.selector = Selector::fixed;
  fixed.fixed_plan = plan_of(e1(d).transpose());
  const auto g = build_g_proj(samples, fixed);
  CHECK(g.cov()(1, 1) == doctest::Approx(1.0));
  fixed.fixed_plan.reset();
  CHECK_THROWS_AS((void)build_g_proj(samples, fixed), std::invalid_argument);
}

TEST_CASE("projected spectra stay between the identity and Sigma" * doctest::test_suite("properties")) {
  std::mt19937_64 gen{4};
  std::uniform_int_distribution<int> pick_r(1, 6);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index d = 6;
    const Matrix s = oracle::random_spd(d, 0.05, 5.0, gen);
    const auto plan = plan_of(oracle::random_orthonormal_rows(pick_r(gen), d, gen));
    const Matrix proj = project_covariance(s, plan);
    const auto ev = oracle::eigenvalues(proj);
    const auto ev_s = oracle::eigenvalues(s);
    CHECK(ev.front() >= std::min(1.0, ev_s.front()) - 1e-10);
    CHECK(ev.back() <= std::max(1.0, ev_s.back()) + 1e-10);
    const Matrix id = Matrix::Identity(d, d);
    CHECK((proj - id).norm() <= (s - id).norm() + 1e-10);
  }
}

TEST_CASE("KL identities for the optimal Gaussian on analytic problems" * doctest::test_suite("properties")) {
  std::vector<EventProblem> problems;
  for (const double q : {-1.0, 0.0, 1.2816, 3.0}) {
    problems.push_back(halfspace_problem(5, e1(5), q));
    problems.push_back(halfspace_problem(5, named_direction(5, "ones"), q));
  }
  for (const double q : {0.5, 1.0, 2.0}) {
    problems.push_back(two_sided_problem(5, q));
  }
  const auto f = GaussianDist::standard(5);
  for (const auto& p : problems) {
    const auto& cm = p.analytic()->cond_moments;
    const GaussianDist g_a{cm.mean, cm.cov};
    const double cond = -std::log(cm.prob) - psi_matrix(cm.cov) - 0.5 * cm.mean.squaredNorm();
    CHECK(oracle::rel_close(kl_conditional(cm, f, g_a), cond, 1e-8, 1e-12));
    const Matrix inv = cm.cov.inverse();
    const double full = psi_matrix(0.5 * (inv + inv.transpose())) + 0.5 * cm.mean.dot(inv * cm.mean);
    CHECK(oracle::rel_close(kl_gaussian(f, g_a), full, 1e-8, 1e-12));
  }
}

TEST_CASE("digamma") {
  for (const double x : {1.0, 5.0, 50.0}) {
    const double v = digamma(x);
    CHECK(std::log(x) - 1.0 / x <= v + 1e-12);
    CHECK(v <= std::log(x) - 1.0 / (2.0 * x) + 1e-12);
  }
  for (const double x : {0.1, 0.5, 1.0, 2.5, 9.99, 10.0, 17.3, 250.0, 1e5}) {
    CHECK(std::abs(digamma(x) - oracle::digamma(x)) < 1e-10);
  }
  CHECK_THROWS_AS((void)digamma(0.0), std::domain_error);
}

TEST_CASE("closed-form expected KL") {
  const Eigen::Index d = 20;
  const double value = expected_kl_wishart_closed_form(2000, Vector::Zero(d), Matrix::Identity(d, d));
  CHECK(std::abs(value / 0.05 - 1.0) < 0.2);
  CHECK_THROWS_AS((void)expected_kl_wishart_closed_form(22, Vector::Zero(d), Matrix::Identity(d, d)),
                  std::domain_error);

  // Term by term with boost's digamma.
  std::mt19937_64 gen{5};
  const Eigen::Index k = 4;
  const Eigen::Index n = 40;
  const Matrix s = oracle::random_spd(k, 0.5, 2.0, gen);
  const Vector mu = oracle::random_vector(k, 0.5, gen);
  const Matrix inv = s.inverse();
  double digammas = 0.0;
  for (Eigen::Index i = 1; i <= k; ++i) {
    digammas += oracle::digamma(0.5 * static_cast<double>(n - i)) + std::log(2.0 / static_cast<double>(n));
  }
  const double denom = static_cast<double>(n - k - 2);
  const double expected = oracle::kl_direct(Vector::Zero(k), Matrix::Identity(k, k), mu, s) +
                          0.5 * (digammas + static_cast<double>(k + 2) / denom * inv.trace() +
                                 static_cast<double>(k) / denom + static_cast<double>(k + 2) / denom * mu.dot(inv * mu));
  CHECK(expected_kl_wishart_closed_form(n, mu, s) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("Wishart experiment matches the closed form") {
  const Eigen::Index d = 10;
  Rng rng{6};
  const auto report = wishart_kl_experiment(200, Vector::Zero(d), Matrix::Identity(d, d), 400, rng);
  REQUIRE(report.closed_form.has_value());
  CHECK(report.failed_reps == 0);
  CHECK(std::abs(report.empirical_mean - *report.closed_form) < 3.0 * report.empirical_se);

  const auto p = halfspace_problem(4, e1(4), 0.5);
  const auto cond = wishart_kl_experiment(p, 100, 50, rng);
  CHECK_FALSE(cond.closed_form.has_value());
  CHECK(cond.empirical_mean > 0.0);
  CHECK_THROWS_AS((void)wishart_kl_experiment(5, Vector::Zero(d), Matrix::Identity(d, d), 10, rng),
                  std::domain_error);
}

TEST_CASE("normalized scatter identity and concentration" * doctest::test_suite("properties")) {
  const auto p = halfspace_problem(5, e1(5), 0.0);
  Rng rng{7};
  const auto small = concentration_check_s(p, 200, 20, rng);
  CHECK(small.max_identity_residual < 1e-10);

  const auto tiny = halfspace_problem(2, e1(2), 0.0);
  const auto report = concentration_check_s(tiny, 1000000, 20, rng);
  const auto within = std::count_if(report.deltas.begin(), report.deltas.end(), [](double x) { return x < 0.01; });
  CHECK(within >= 19);
}

TEST_CASE("scaled concentration constant is stable in n" * doctest::test_suite("properties")) {
  const Eigen::Index d = 50;
  const auto p = halfspace_problem(d, e1(d), 0.0);
  Rng rng{8};
  const auto a = concentration_check_s(p, 5000, 200, rng);
  const auto b = concentration_check_s(p, 20000, 200, rng);
  const double ratio = a.quantile95_scaled / b.quantile95_scaled;
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 2.0);
}
