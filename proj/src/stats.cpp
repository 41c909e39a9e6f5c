#include "structest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace structest {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    static const boost::math::normal_distribution<double> unit{};
    return boost::math::quantile(unit, p);
}

double ks_to_standard_normal(std::vector<double> sample, int grid_points) {
    if (sample.empty()) throw std::invalid_argument("ks: empty sample");
    std::sort(sample.begin(), sample.end());
    const double inv_n = 1.0 / static_cast<double>(sample.size());
    double sup = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
        const double F = normal_cdf(sample[i]);
        sup = std::max(sup, std::abs(static_cast<double>(i + 1) * inv_n - F));
        sup = std::max(sup, std::abs(static_cast<double>(i) * inv_n - F));
    }
    // The step-CDF sup above is already exact; the fixed grid cannot exceed
    // it but is evaluated anyway so reported values match the declared method.
    for (int k = 0; k < grid_points; ++k) {
        const double x = -6.0 + 12.0 * (k + 0.5) / grid_points;
        const auto it = std::upper_bound(sample.begin(), sample.end(), x);
        const double emp = static_cast<double>(it - sample.begin()) * inv_n;
        sup = std::max(sup, std::abs(emp - normal_cdf(x)));
    }
    return sup;
}

double chi_square_gof_pvalue(const std::vector<double>& observed,
                             const std::vector<double>& expected,
                             double min_expected) {
    if (observed.size() != expected.size() || observed.empty())
        throw std::invalid_argument("chi_square_gof: size mismatch");
    std::vector<double> obs_pooled, exp_pooled;
    double o_acc = 0.0, e_acc = 0.0;
    for (size_t i = 0; i < observed.size(); ++i) {
        o_acc += observed[i];
        e_acc += expected[i];
        if (e_acc >= min_expected) {
            obs_pooled.push_back(o_acc);
            exp_pooled.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (exp_pooled.empty()) {
            obs_pooled.push_back(o_acc);
            exp_pooled.push_back(e_acc);
        } else {
            obs_pooled.back() += o_acc;
            exp_pooled.back() += e_acc;
        }
    }
    if (exp_pooled.size() < 2) throw std::invalid_argument("chi_square_gof: fewer than 2 bins after pooling");
    double stat = 0.0;
    for (size_t i = 0; i < exp_pooled.size(); ++i) {
        const double diff = obs_pooled[i] - exp_pooled[i];
        stat += diff * diff / exp_pooled[i];
    }
    boost::math::chi_squared_distribution<double> dist(static_cast<double>(exp_pooled.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

std::pair<double, double> wilson_interval(long successes, long trials, double confidence) {
    if (trials <= 0 || successes < 0 || successes > trials)
        throw std::invalid_argument("wilson_interval: bad counts");
    const double z = normal_quantile(0.5 + confidence / 2.0);
    const double nt = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / nt;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nt;
    const double center = (phat + z2 / (2.0 * nt)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / nt + z2 / (4.0 * nt * nt)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace structest
