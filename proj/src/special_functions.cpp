#include "fads/special_functions.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fads {

double chi_square_sf(double x, int k) {
  if (k < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (x < 0.0) throw std::invalid_argument("chi_square_sf requires x >= 0");
  if (x == 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * k, 0.5 * x);
}

double chi_square_sf_nc(double x, int k, double h) {
  if (k < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (x < 0.0 || h < 0.0) throw std::invalid_argument("chi_square_sf_nc requires x >= 0, h >= 0");
  if (h == 0.0) return chi_square_sf(x, k);

  const double r = 0.5 * h;  // Poisson rate of the mixture index
  const long j0 = static_cast<long>(r);
  // Modal weight in log space, then two-sided recurrence; this stays finite
  // for any h instead of underflowing at exp(-h/2).
  const double log_w0 = -r + j0 * std::log(r) - std::lgamma(static_cast<double>(j0) + 1.0);
  const double w0 = std::exp(log_w0);

  double total = w0 * boost::math::gamma_q(0.5 * k + j0, 0.5 * x);
  double weight_seen = w0;

  double w_up = w0;
  long j_up = j0;
  double w_dn = w0;
  long j_dn = j0;
  const long j_cap = j0 + 100000;
  while (weight_seen < 1.0 - 1e-14 && (j_up < j_cap || j_dn > 0)) {
    if (j_up < j_cap) {
      ++j_up;
      w_up *= r / static_cast<double>(j_up);
      total += w_up * boost::math::gamma_q(0.5 * k + j_up, 0.5 * x);
      weight_seen += w_up;
    }
    if (j_dn > 0) {
      w_dn *= static_cast<double>(j_dn) / r;
      --j_dn;
      total += w_dn * boost::math::gamma_q(0.5 * k + j_dn, 0.5 * x);
      weight_seen += w_dn;
    }
  }
  return std::min(1.0, total);
}

double chi_square_upper_quantile(int k, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");

  double lo = 0.0, hi = 1.0;
  while (chi_square_sf(hi, k) > alpha) {
    hi *= 2.0;
    if (hi > 1e9) throw std::runtime_error("quantile bracket failed");
  }
  // Bisect to the last representable interval; sf is monotone decreasing.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (chi_square_sf(mid, k) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  return (std::abs(chi_square_sf(lo, k) - alpha) < std::abs(chi_square_sf(hi, k) - alpha)) ? lo : hi;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;  // tail of the complementary series is < 1e-12 here
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16 * std::max(sum, 1e-300)) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  const int n = static_cast<int>(sample.size());
  if (n < 1) throw std::invalid_argument("ks_test requires a non-empty sample");
  std::sort(sample.begin(), sample.end());

  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, (i + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;  // Stephens' finite-n correction
  return KsResult{d, kolmogorov_sf(lambda)};
}

}  // namespace fads
