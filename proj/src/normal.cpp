#include <rareis/normal.hpp>

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rareis {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;
}  // namespace

double normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x * kInvSqrt2); }

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::domain_error("normal_quantile: argument must lie in (0, 1)");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

double normal_sf_inverse(double tail) {
  if (!(tail > 0.0 && tail < 1.0)) {
    throw std::domain_error("normal_sf_inverse: argument must lie in (0, 1)");
  }
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * tail);
}

double mills_ratio(double q) noexcept {
  if (q == -std::numeric_limits<double>::infinity()) {
    return 0.0;
  }
  return normal_pdf(q) / normal_sf(q);
}

double truncated_variance(double q) noexcept {
  if (q == -std::numeric_limits<double>::infinity()) {
    return 1.0;
  }
  const double r = mills_ratio(q);
  return 1.0 - r * (r - q);
}

double truncated_second_moment(double q) noexcept {
  if (q == -std::numeric_limits<double>::infinity()) {
    return 1.0;
  }
  return 1.0 + q * mills_ratio(q);
}

}  // namespace rareis
