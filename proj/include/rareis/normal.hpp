#ifndef RAREIS_NORMAL_HPP
#define RAREIS_NORMAL_HPP

namespace rareis {

[[nodiscard]] double normal_pdf(double x) noexcept;

/// Phi(x), accurate to ~1e-16 relative in both tails.
[[nodiscard]] double normal_cdf(double x) noexcept;

/// 1 - Phi(x) without cancellation.
[[nodiscard]] double normal_sf(double x) noexcept;

/// Phi^{-1}(u); throws std::domain_error unless 0 < u < 1.
[[nodiscard]] double normal_quantile(double u);

/// Upper-tail inverse: returns x with 1 - Phi(x) = tail.
[[nodiscard]] double normal_sf_inverse(double tail);

/// phi(q) / (1 - Phi(q)), the mean of a standard normal truncated to (q, inf).
/// Returns 0 at q = -inf.
[[nodiscard]] double mills_ratio(double q) noexcept;

/// Variance of a standard normal truncated to (q, inf): 1 - r (r - q).
[[nodiscard]] double truncated_variance(double q) noexcept;

/// E[Z^2 | Z > q] = 1 + q r.
[[nodiscard]] double truncated_second_moment(double q) noexcept;

}  // namespace rareis

#endif
