#pragma once

namespace jkiv {

/// Inverse CDF of chi^2_k, absolute error below 1e-8.
double chi2_quantile(double p, double k);

/// P(chi^2_k > x).
double chi2_sf(double x, double k);

double chi2_cdf(double x, double k);

/// Inverse CDF and survival function of F(d1, d2).
double f_quantile(double p, double d1, double d2);
double f_sf(double x, double d1, double d2);

}  // namespace jkiv
