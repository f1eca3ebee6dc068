/**
 * Distribution utilities for the test pipeline: central and noncentral
 * chi-squared survival functions, the matching upper quantile, the standard
 * normal CDF, and a one-sample Kolmogorov-Smirnov test.
 */
#pragma once

#include <functional>
#include <vector>

namespace fads {

/** P{chi2_k > x} via the regularized incomplete gamma Q(k/2, x/2). */
double chi_square_sf(double x, int k);

/**
 * Noncentral variant with noncentrality h >= 0: Poisson mixture
 * sum_j w_j(h/2) * chi_square_sf(x, k + 2j), accumulated outward from the
 * modal Poisson weight until the unaccounted weight drops below 1e-14.
 */
double chi_square_sf_nc(double x, int k, double h);

/**
 * Upper quantile q with chi_square_sf(q, k) = alpha, found by bisection on
 * this module's own sf so the round trip sf(quantile(alpha)) = alpha holds to
 * floating-point accuracy. Requires alpha in (0, 1).
 */
double chi_square_upper_quantile(int k, double alpha);

/** Standard normal CDF. */
double normal_cdf(double x);

/** Kolmogorov statistic tail P{K > lambda} = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}. */
double kolmogorov_sf(double lambda);

struct KsResult {
  double statistic = 0.0;  // sup |F_emp - F|
  double p_value = 1.0;    // via the Stephens-corrected Kolmogorov tail
};

/** One-sample Kolmogorov-Smirnov test of the sample against a continuous CDF. */
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

}  // namespace fads
