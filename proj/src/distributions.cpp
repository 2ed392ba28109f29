#include "jkiv/distributions.hpp"

#include "jkiv/common.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

namespace jkiv {

double chi2_cdf(double x, double k) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * k, 0.5 * x);
}

double chi2_sf(double x, double k) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * k, 0.5 * x);
}

double chi2_quantile(double p, double k) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("chi2_quantile: p must lie in (0, 1)");
  if (!(k >= 1.0)) throw InputError("chi2_quantile: degrees of freedom must be >= 1");
  const double a = 0.5 * k;
  double lo = 0.0;
  double hi = k + 10.0 * std::sqrt(2.0 * k) + 10.0;
  while (chi2_cdf(hi, k) < p) {
    lo = hi;
    hi *= 2.0;
  }
  // Newton on the incomplete-gamma equation, falling back to bisection when a
  // step leaves the bracket.
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(x, k) - p;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double density = 0.5 * boost::math::gamma_p_derivative(a, 0.5 * x);
    double next = density > 0.0 ? x - f / density : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, x) || hi - lo <= 1e-14 * std::max(1.0, x)) {
      return next;
    }
    x = next;
  }
  return x;
}

double f_quantile(double p, double d1, double d2) {
  return boost::math::quantile(boost::math::fisher_f(d1, d2), p);
}

double f_sf(double x, double d1, double d2) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), x));
}

}  // namespace jkiv
