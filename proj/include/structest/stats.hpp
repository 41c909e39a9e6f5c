#pragma once

#include <utility>
#include <vector>

namespace structest {

// Standard normal CDF and quantile (quantile accurate to ~1e-15).
double normal_cdf(double x);
double normal_quantile(double p);

// Empirical KS distance of a sample to the standard normal: the exact sup
// over the sample's step CDF, plus an evaluation grid for reporting parity.
// Sorts a copy of the input.
double ks_to_standard_normal(std::vector<double> sample, int grid_points = 512);

// Pearson chi-square goodness-of-fit p-value for observed counts against
// expected counts (same length); bins with expected < min_expected are pooled
// left-to-right. Degrees of freedom = bins_after_pooling - 1.
double chi_square_gof_pvalue(const std::vector<double>& observed,
                             const std::vector<double>& expected,
                             double min_expected = 5.0);

// Wilson score interval for a binomial proportion at the given confidence.
std::pair<double, double> wilson_interval(long successes, long trials, double confidence = 0.95);

}  // namespace structest
