#pragma once

#include <span>

#include "hetmed/types.hpp"

namespace hetmed {

/// Centered cross-moments shared by the naive and measurement-corrected
/// slope estimators. sxy = sum (x_k - xbar) * y_k, sxx = sum (x_k - xbar)^2.
/// Keeping one accumulation routine is what makes the BCES estimator
/// reduce to the naive slope bit-for-bit when all corrections are zero.
struct CenteredMoments {
  double xbar = 0.0;
  double ybar = 0.0;
  double sxy = 0.0;
  double sxx = 0.0;
};

CenteredMoments centered_moments(std::span<const double> x,
                                 std::span<const double> y);

/// Slope and intercept only, no standard error. Hot path for the SIMEX and
/// bootstrap inner loops.
struct SlopeOnly {
  double beta = 0.0;
  double intercept = 0.0;
};

SlopeOnly slope_only(std::span<const double> x, std::span<const double> y);

/// Simple least squares of y on x: beta = sum(x - xbar) y / sum(x - xbar)^2,
/// intercept = ybar - beta * xbar, HC1 heteroskedasticity-robust standard
/// error. Requires equal lengths, K >= 3, and Var(x) > 0 ("degenerate
/// regressor" otherwise).
SlopeFit ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace hetmed
