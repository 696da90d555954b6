#pragma once

namespace safer::stats {

/// Standard normal CDF. Absolute error below 1e-14 over the full double range.
double normal_cdf(double x);

/// Standard normal quantile for p in (0,1). Inverse of normal_cdf to ~1e-13.
double normal_quantile(double p);

/// P(X <= a, Y <= b) for standard bivariate normal with correlation rho,
/// |rho| < 1. Gauss-Legendre evaluation of the Drezner-Wesolowsky integral;
/// absolute error below 1e-12. a and b may be +/-infinity.
double bivariate_normal_cdf(double a, double b, double rho);

}  // namespace safer::stats
