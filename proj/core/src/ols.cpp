#include "hetmed/ols.hpp"

#include <cmath>

#include "hetmed/errors.hpp"

namespace hetmed {

CenteredMoments centered_moments(std::span<const double> x,
                                 std::span<const double> y) {
  CenteredMoments m;
  const std::size_t n = x.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  m.xbar = sx / static_cast<double>(n);
  m.ybar = sy / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - m.xbar;
    m.sxy += dx * y[i];
    m.sxx += dx * dx;
  }
  return m;
}

SlopeOnly slope_only(std::span<const double> x, std::span<const double> y) {
  const CenteredMoments m = centered_moments(x, y);
  if (m.sxx <= 0.0) throw NumericError("degenerate regressor");
  SlopeOnly s;
  s.beta = m.sxy / m.sxx;
  s.intercept = m.ybar - s.beta * m.xbar;
  return s;
}

SlopeFit ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw InputError("insufficient subgroups");

  const CenteredMoments m = centered_moments(x, y);
  if (m.sxx <= 0.0) throw NumericError("degenerate regressor");

  SlopeFit fit;
  fit.method = FitMethod::naive_ols;
  fit.beta_hat = m.sxy / m.sxx;
  fit.intercept_hat = m.ybar - fit.beta_hat * m.xbar;

  // HC1: n/(n-2) * sum (x-xbar)^2 e^2 / sxx^2.
  double meat = 0.0;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - m.xbar;
    const double e = y[i] - fit.intercept_hat - fit.beta_hat * x[i];
    meat += dx * dx * e * e;
    rss += e * e;
  }
  const double dn = static_cast<double>(n);
  fit.se_beta = std::sqrt(dn / (dn - 2.0) * meat / (m.sxx * m.sxx));
  fit.diagnostics["residual_var"] = rss / (dn - 2.0);
  return fit;
}

}  // namespace hetmed
