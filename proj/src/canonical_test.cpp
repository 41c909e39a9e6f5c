#include "structest/canonical_test.hpp"

#include <cmath>
#include <stdexcept>

#include "structest/stats.hpp"

namespace structest {

namespace {

Decision ising_decide(const SpinConfig& x, const IsingTestConfig& cfg,
                      const ConditionalMoments& mom) {
    Decision dec;
    dec.threshold_used = cfg.threshold;
    dec.sphere_label = x.magnetization();
    // kappa = x^T A x = 2 * quadratic_form, so both conditional moments scale
    const double kappa = 2.0 * static_cast<double>(quadratic_form(*cfg.graph, x));
    const double mean_kappa = 2.0 * mom.mean;
    const double sd_kappa = 2.0 * std::sqrt(mom.variance);
    if (!(sd_kappa > 0.0))
        throw std::invalid_argument("ising_test: degenerate sphere variance inside the band");
    dec.standardized = (kappa - mean_kappa) / sd_kappa;
    dec.verdict = (*dec.standardized >= cfg.threshold) ? Verdict::H1 : Verdict::H0;
    return dec;
}

// Returns a band-miss decision, or nullopt when the sphere branch must run.
std::optional<Decision> ising_band_check(const SpinConfig& x, const IsingTestConfig& cfg) {
    if (cfg.graph == nullptr) throw std::invalid_argument("ising_test: null graph");
    if (x.n() != cfg.graph->n)
        throw std::invalid_argument("ising_test: sample size != graph size");
    if (cfg.epsilon <= 0.0 || cfg.epsilon >= 1.0)
        throw std::invalid_argument("ising_test: epsilon must be in (0,1)");
    const double m = x.magnetization();
    if (m < -1.0 + cfg.epsilon || m > 1.0 - cfg.epsilon) {
        Decision dec;
        dec.threshold_used = cfg.threshold;
        dec.sphere_label = m;
        dec.verdict = Verdict::H1;
        return dec;
    }
    return std::nullopt;
}

Decision ergm_decide(const GraphSample& s, const ErgmTestConfig& cfg,
                     const ConditionalMoments& mom) {
    Decision dec;
    dec.threshold_used = cfg.threshold;
    dec.sphere_label = static_cast<double>(s.edge_count);
    const double sd = std::sqrt(mom.variance);
    if (!(sd > 0.0))
        throw std::invalid_argument("ergm_test: degenerate sphere variance inside the band");
    dec.standardized = (static_cast<double>(wedge_count(s)) - mom.mean) / sd;
    dec.verdict = (*dec.standardized >= cfg.threshold) ? Verdict::H1 : Verdict::H0;
    return dec;
}

std::optional<Decision> ergm_band_check(const GraphSample& s, const ErgmTestConfig& cfg) {
    if (s.n != cfg.n) throw std::invalid_argument("ergm_test: sample size != config size");
    if (cfg.delta <= 0.0 || cfg.delta >= 0.5)
        throw std::invalid_argument("ergm_test: delta must be in (0, 1/2)");
    const double N = static_cast<double>(GraphSample::pair_count(cfg.n));
    const double e = static_cast<double>(s.edge_count);
    if (e < cfg.delta * N / 2.0 || e > (1.0 - cfg.delta / 2.0) * N) {
        Decision dec;
        dec.threshold_used = cfg.threshold;
        dec.sphere_label = e;
        dec.verdict = Verdict::H1;
        return dec;
    }
    return std::nullopt;
}

}  // namespace

Decision ising_test(const SpinConfig& x, const IsingTestConfig& cfg) {
    if (auto miss = ising_band_check(x, cfg)) return *miss;
    return ising_decide(x, cfg, quad_form_moments(cfg.graph->n, cfg.graph->d, x.plus_count));
}

Decision ising_test(const SpinConfig& x, const IsingTestConfig& cfg,
                    const std::vector<ConditionalMoments>& moments_by_l) {
    if (auto miss = ising_band_check(x, cfg)) return *miss;
    if (moments_by_l.size() != static_cast<std::size_t>(cfg.graph->n) + 1)
        throw std::invalid_argument("ising_test: moments table size != n+1");
    return ising_decide(x, cfg, moments_by_l[x.plus_count]);
}

std::vector<ConditionalMoments> ising_moments_table(int n, int d) {
    std::vector<ConditionalMoments> table;
    table.reserve(n + 1);
    for (int l = 0; l <= n; ++l) table.push_back(quad_form_moments(n, d, l));
    return table;
}

std::vector<ConditionalMoments> ergm_moments_table(int n) {
    const long long N = GraphSample::pair_count(n);
    std::vector<ConditionalMoments> table;
    table.reserve(N + 1);
    for (long long m = 0; m <= N; ++m) table.push_back(wedge_moments(n, m));
    return table;
}

Decision ergm_test(const GraphSample& s, const ErgmTestConfig& cfg) {
    if (auto miss = ergm_band_check(s, cfg)) return *miss;
    return ergm_decide(s, cfg, wedge_moments(cfg.n, s.edge_count));
}

Decision ergm_test(const GraphSample& s, const ErgmTestConfig& cfg,
                   const std::vector<ConditionalMoments>& moments_by_edges) {
    if (auto miss = ergm_band_check(s, cfg)) return *miss;
    if (moments_by_edges.size() != static_cast<std::size_t>(GraphSample::pair_count(cfg.n)) + 1)
        throw std::invalid_argument("ergm_test: moments table size != N+1");
    return ergm_decide(s, cfg, moments_by_edges[s.edge_count]);
}

double threshold_from_rule(double tau_n, double L_n, double c) {
    if (tau_n < 0.0) throw std::invalid_argument("threshold_from_rule: tau must be >= 0");
    const double sum = tau_n + std::exp(-c * L_n);
    if (sum >= 0.5)
        throw std::invalid_argument(
            "threshold_from_rule: tau + e^{-cL} >= 1/2; increase n or L");
    return 0.5 * normal_quantile(1.0 - sum);
}

double error_bound(double alpha_n, double tau_n, double T, double L_n, double c) {
    const double denom = 1.0 - normal_cdf(2.0 * T) - tau_n;
    if (denom <= 0.0)
        throw std::invalid_argument("error_bound: requires 1 - Phi(2T) > tau");
    return alpha_n + (1.0 - normal_cdf(T)) + tau_n + std::exp(-c * T * L_n) / denom;
}

}  // namespace structest
