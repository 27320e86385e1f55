#pragma once

namespace hetmed {

/// Standard normal CDF, erfc-based; absolute error below 1e-12.
double normal_cdf(double z);

/// Standard normal quantile for p strictly inside (0,1): rational
/// approximation polished by one Newton step, so |Phi(q(p)) - p| < 1e-12.
/// Throws NumericError ("infinite quantile") at p <= 0 or p >= 1.
double normal_quantile(double p);

/// Two-sided normal p-value for estimate/se. A zero SE with a nonzero
/// estimate is a degenerate test and throws NumericError; a zero estimate
/// with zero SE gives p = 1.
double two_sided_p(double estimate, double se);

/// Chi-square upper tail P(X > x) with df degrees of freedom, evaluated
/// through the regularized incomplete gamma function (series for small x,
/// continued fraction otherwise); absolute error below 1e-10.
double chi2_sf(double x, double df);

/// Student-t CDF through the regularized incomplete beta function.
double student_t_cdf(double t, double df);

/// Student-t quantile (bisection on the CDF); p strictly inside (0,1).
double student_t_quantile(double p, double df);

namespace detail {

/// Unpolished rational approximation (relative error ~1e-9). Sampling hot
/// paths use this directly; the Newton-step accuracy of normal_quantile is
/// not worth its erfc call when the target is Monte Carlo noise.
double normal_quantile_fast(double p);

}  // namespace detail

}  // namespace hetmed
