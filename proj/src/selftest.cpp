#include <rareis/bench.hpp>
#include <rareis/ce.hpp>
#include <rareis/is_engine.hpp>
#include <rareis/normal.hpp>
#include <rareis/proj.hpp>

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

namespace rareis::bench {

namespace {

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

int run_selftest(std::ostream& out) {
  int failures = 0;
  const auto check = [&](const char* name, const std::function<bool()>& body) {
    bool ok = false;
    try {
      ok = body();
    } catch (const std::exception& e) {
      out << "  exception: " << e.what() << '\n';
    }
    out << (ok ? "PASS " : "FAIL ") << name << '\n';
    failures += ok ? 0 : 1;
  };

  check("gauss_core: psi(diag(2, 1/2))", [] {
    Matrix s = Matrix::Zero(2, 2);
    s(0, 0) = 2.0;
    s(1, 1) = 0.5;
    return near(psi_matrix(s), 0.5 * (psi_scalar(2.0) + psi_scalar(0.5)), 1e-12);
  });

  check("gauss_core: D(N(0,I) || N(e1, I)) = 1/2", [] {
    Vector mu = Vector::Zero(3);
    mu(0) = 1.0;
    return near(kl_gaussian(GaussianDist::standard(3), GaussianDist{mu, Matrix::Identity(3, 3)}), 0.5, 1e-12);
  });

  check("rare_event: half-space conditional mean", [] {
    const auto problem = halfspace_problem(3, named_direction(3, "e1"), 0.0);
    return near(problem.analytic()->cond_moments.mean(0), std::sqrt(2.0 / std::acos(-1.0)), 1e-12);
  });

  check("rare_event: rejection samples lie in A", [] {
    const auto problem = halfspace_problem(2, named_direction(2, "e1"), 1.0);
    Rng rng{7};
    const auto set = rejection_sample_conditional(problem, 500, rng);
    return (set.samples.col(0).array() > 1.0).all();
  });

  check("is_engine: plain Monte Carlo on p = 1/2", [] {
    const auto problem = halfspace_problem(2, named_direction(2, "e1"), 0.0);
    Rng rng{1};
    const auto result = is_estimate(problem, GaussianDist::standard(2), 100000, rng);
    return std::abs(result.p_hat - 0.5) <= 3.0 * std::sqrt(0.25 / 1e5);
  });

  check("is_engine: optimal g gives zero-variance weights", [] {
    const auto problem = halfspace_problem(3, named_direction(3, "e1"), 2.0);
    const auto& cm = problem.analytic()->cond_moments;
    Rng rng{3};
    const auto result = is_estimate(problem, GaussianDist{cm.mean, cm.cov}, 20000, rng);
    return std::abs(result.p_hat / normal_sf(2.0) - 1.0) < 0.05;
  });

  check("ce: deterministic half-space first step at rho = 1/2", [] {
    const auto steps = ce_deterministic_halfspace(3.0, 0.5, 1);
    return near(steps.front().q, 0.0, 1e-12) && near(steps.front().a_next, std::sqrt(2.0 / std::acos(-1.0)), 1e-12);
  });

  check("ce: reaches the target on a small half-space", [] {
    const auto problem = halfspace_problem(5, named_direction(5, "e1"), 3.0);
    CEConfig cfg;
    Rng rng{11};
    const auto trace = ce_run(problem, cfg, 20000, rng);
    return trace.terminated_reason == Termination::target_reached &&
           std::abs(trace.final_estimate->p_hat / normal_sf(3.0) - 1.0) < 0.2;
  });

  check("proj: r = d eigenbasis recovers the covariance", [] {
    Matrix a = Matrix::Random(4, 4);
    const Matrix sigma = a * a.transpose() + Matrix::Identity(4, 4);
    const auto plan = select_eigen_h(sigma, 4);
    return (project_covariance(sigma, plan) - sigma).cwiseAbs().maxCoeff() < 1e-10;
  });

  check("proj: digamma lower bracket", [] {
    for (const double x : {0.5, 1.0, 3.0, 10.0, 250.0}) {
      if (digamma(x) < std::log(x) - 1.0 / x - 1e-12) {
        return false;
      }
    }
    return near(digamma(1.0), -0.57721566490153286, 1e-12);
  });

  check("bench: CSV round trip", [] {
    SweepRecord rec;
    rec.d = 10;
    rec.rho = 0.1;
    rec.method = "ce";
    rec.p_hat = 1.0 / 3.0;
    rec.iterations = 4;
    const auto back = parse_csv_row(to_csv_row(rec));
    return back.p_hat == rec.p_hat && back.rho == rec.rho && back.iterations == rec.iterations && !back.rel_error;
  });

  check("bench: seed derivation separates coordinates", [] {
    auto a = seed_derivation(0, {10, 200});
    auto b = seed_derivation(0, {10, 201});
    auto c = seed_derivation(0, {10, 200});
    return a.seed() != b.seed() && a.seed() == c.seed();
  });

  out << (failures == 0 ? "selftest passed" : "selftest FAILED") << '\n';
  return failures;
}

}  // namespace rareis::bench
