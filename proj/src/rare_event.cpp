#include <rareis/normal.hpp>
#include <rareis/parallel.hpp>
#include <rareis/rare_event.hpp>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace rareis {

namespace {

constexpr double kUnitTolerance = 1e-12;

std::string too_rare_message(double rate, std::int64_t draws) {
  std::ostringstream out;
  out << "event too rare for rejection: observed acceptance rate " << rate << " after " << draws << " draws";
  return out.str();
}

/// Standard normals truncated to (q, inf), by inversion of the upper tail.
double truncated_tail_draw(double q_tail, Rng& stream) {
  // q_tail = 1 - Phi(q); u * q_tail lies in (0, q_tail].
  return normal_sf_inverse(q_tail * stream.uniform_open());
}

/// Rows z - (z.v) v^T + t v^T with z ~ N(0, I) and t drawn by `along`.
template <class AxisDraw>
SampleMatrix sample_with_axis(Eigen::Index n, const Vector& v, Rng& rng, AxisDraw along) {
  if (n < 1) {
    throw std::invalid_argument("conditional sampler: n must be >= 1");
  }
  SampleMatrix out(n, v.size());
  fill_standard_normal(out, rng.next_seed());
  const auto axis_seed = rng.next_seed();
  const auto chunks = parallel::chunk_count(n);
  parallel::for_each_index(chunks, [&](std::size_t k) {
    Rng stream{mix_words(axis_seed, {k})};
    const auto begin = static_cast<Eigen::Index>(k) * parallel::kChunkRows;
    const auto end = std::min<Eigen::Index>(begin + parallel::kChunkRows, n);
    for (Eigen::Index i = begin; i < end; ++i) {
      const double t = along(stream);
      const double proj = out.row(i).dot(v.transpose());
      out.row(i) += (t - proj) * v.transpose();
    }
  });
  return out;
}

}  // namespace

EventTooRare::EventTooRare(double observed_rate, std::int64_t draws)
    : std::runtime_error(too_rare_message(observed_rate, draws)), rate_{observed_rate} {}

EventProblem::EventProblem(std::string name, Eigen::Index dim, PerfFn perf, double threshold,
                           std::optional<AnalyticTruth> analytic)
    : name_{std::move(name)}, dim_{dim}, perf_{std::move(perf)}, threshold_{threshold}, analytic_{std::move(analytic)} {
  if (dim_ < 1) {
    throw std::invalid_argument("EventProblem: dimension must be positive");
  }
  if (!perf_) {
    throw std::invalid_argument("EventProblem: performance function is empty");
  }
}

Vector EventProblem::evaluate(const SampleMatrix& rows) const {
  if (rows.cols() != dim_) {
    throw std::invalid_argument("EventProblem::evaluate: dimension mismatch");
  }
  Vector out(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out(i) = perf_(row_span(rows, i));
  }
  return out;
}

Vector named_direction(Eigen::Index dim, const std::string& name) {
  if (dim < 1) {
    throw std::invalid_argument("named_direction: dimension must be positive");
  }
  if (name == "e1") {
    return Vector::Unit(dim, 0);
  }
  if (name == "ones") {
    return Vector::Ones(dim) / std::sqrt(static_cast<double>(dim));
  }
  throw std::invalid_argument("unknown direction '" + name + "' (expected e1 or ones)");
}

EventProblem halfspace_problem(Eigen::Index dim, const Vector& direction, double q) {
  if (direction.size() != dim) {
    throw std::invalid_argument("halfspace_problem: direction has wrong dimension");
  }
  if (std::abs(direction.norm() - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("halfspace_problem: direction must be a unit vector");
  }
  if (std::isnan(q) || q == std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("halfspace_problem: threshold must be finite or -inf");
  }
  const Vector v = direction;
  PerfFn perf = [v](std::span<const double> x) {
    return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())).dot(v);
  };

  AnalyticTruth truth;
  truth.prob = normal_sf(q);
  truth.cdf = [](double u) { return normal_cdf(u); };
  const double r = mills_ratio(q);
  const double s = 1.0 - truncated_variance(q);
  truth.cond_moments.prob = truth.prob;
  truth.cond_moments.mean = r * v;
  truth.cond_moments.cov = Matrix::Identity(dim, dim) - s * v * v.transpose();
  if (q == -std::numeric_limits<double>::infinity()) {
    truth.exact_cond_sampler = [dim](Eigen::Index n, Rng& rng) { return GaussianDist::standard(dim).sample(n, rng); };
  } else {
    const double q_tail = truth.prob;
    truth.exact_cond_sampler = [v, q_tail](Eigen::Index n, Rng& rng) {
      return sample_with_axis(n, v, rng, [q_tail](Rng& s) { return truncated_tail_draw(q_tail, s); });
    };
  }
  return EventProblem{"halfspace", dim, std::move(perf), q, std::move(truth)};
}

EventProblem two_sided_problem(Eigen::Index dim, double q) {
  if (!(q >= 0.0) || std::isinf(q)) {
    throw std::invalid_argument("two_sided_problem: threshold must be finite and >= 0");
  }
  PerfFn perf = [](std::span<const double> x) { return std::abs(x[0]); };

  AnalyticTruth truth;
  truth.prob = 2.0 * normal_sf(q);
  truth.cdf = [](double u) { return u <= 0.0 ? 0.0 : 1.0 - 2.0 * normal_sf(u); };
  truth.cond_moments.prob = truth.prob;
  truth.cond_moments.mean = Vector::Zero(dim);
  truth.cond_moments.cov = Matrix::Identity(dim, dim);
  truth.cond_moments.cov(0, 0) = truncated_second_moment(q);
  const double q_tail = normal_sf(q);
  const Vector axis = Vector::Unit(dim, 0);
  truth.exact_cond_sampler = [axis, q_tail](Eigen::Index n, Rng& rng) {
    return sample_with_axis(n, axis, rng, [q_tail](Rng& s) {
      const double t = truncated_tail_draw(q_tail, s);
      return s.uniform_open() < 0.5 ? -t : t;
    });
  };
  return EventProblem{"two-sided", dim, std::move(perf), q, std::move(truth)};
}

ConditionalSampleSet rejection_sample_conditional(const EventProblem& problem, Eigen::Index n, Rng& rng,
                                                  std::int64_t max_draws) {
  if (n < 1) {
    throw std::invalid_argument("rejection_sample_conditional: n must be >= 1");
  }
  const auto d = problem.dim();
  const auto base_seed = rng.next_seed();
  ConditionalSampleSet out;
  out.seed = base_seed;
  out.samples.resize(n, d);

  Eigen::Index accepted = 0;
  std::int64_t draws = 0;
  std::uint64_t next_batch = 0;
  // Batches are generated a round at a time but consumed strictly in order,
  // so the result does not depend on the round width.
  while (accepted < n) {
    const std::size_t round = parallel::max_threads();
    std::vector<SampleMatrix> batches(round);
    std::vector<std::vector<Eigen::Index>> hits(round);
    parallel::for_each_index(round, [&](std::size_t b) {
      SampleMatrix batch(parallel::kChunkRows, d);
      fill_standard_normal(batch, mix_words(base_seed, {next_batch + b}));
      for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        if (problem.contains(row_span(batch, i))) {
          hits[b].push_back(i);
        }
      }
      batches[b] = std::move(batch);
    });
    next_batch += round;

    for (std::size_t b = 0; b < round && accepted < n; ++b) {
      for (const auto i : hits[b]) {
        out.samples.row(accepted++) = batches[b].row(i);
        if (accepted == n) {
          draws += i + 1;
          break;
        }
      }
      if (accepted < n) {
        draws += parallel::kChunkRows;
      }
      if (accepted < n && draws >= max_draws) {
        const double rate = static_cast<double>(accepted) / static_cast<double>(draws);
        throw EventTooRare(rate, draws);
      }
    }
  }
  out.acceptance_rate = static_cast<double>(n) / static_cast<double>(draws);
  return out;
}

ConditionalSampleSet exact_sample_conditional(const EventProblem& problem, Eigen::Index n, Rng& rng) {
  const auto& truth = problem.analytic();
  if (!truth || !truth->exact_cond_sampler) {
    throw std::invalid_argument("problem '" + problem.name() + "' has no exact conditional sampler");
  }
  ConditionalSampleSet out;
  out.seed = rng.seed();
  out.samples = truth->exact_cond_sampler(n, rng);
  out.acceptance_rate = 1.0;
  return out;
}

WeightedMoments weighted_moments(const SampleMatrix& rows, const Vector& weights) {
  if (weights.size() != rows.rows()) {
    throw std::invalid_argument("weighted_moments: one weight per row required");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) {
    throw std::invalid_argument("weighted_moments: weights must have positive sum");
  }
  WeightedMoments out;
  out.mean = rows.transpose() * weights / total;
  const SampleMatrix scaled = rows.array().colwise() * weights.array();
  Matrix cov = rows.transpose() * scaled / total;
  cov -= out.mean * out.mean.transpose();
  out.asymmetry = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

WeightedMoments conditional_moments_estimate(const SampleMatrix& rows) {
  if (rows.rows() < 2) {
    throw std::invalid_argument("conditional_moments_estimate: need at least two samples");
  }
  return weighted_moments(rows, Vector::Ones(rows.rows()));
}

WeightedMoments conditional_moments_estimate(const ConditionalSampleSet& set) {
  return conditional_moments_estimate(set.samples);
}

}  // namespace rareis
