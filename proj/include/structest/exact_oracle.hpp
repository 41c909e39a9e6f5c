#pragma once

#include <cstdint>
#include <vector>

#include "structest/graph.hpp"
#include "structest/moments.hpp"
#include "structest/samplers.hpp"

namespace structest {

// Enumeration refusal caps for the exact distributions below.
constexpr int kMaxSpinSites = 20;     // 2^20 states
constexpr int kMaxGraphVertices = 5;  // 2^10 graphs

// Full probability table over a small state space, kept in log space with a
// single log-sum-exp normalization. Spin spaces enumerate 2^n states (n <= 20);
// graph spaces enumerate 2^N labeled graphs (n <= 5 vertices).
struct ExactDistribution {
    enum class Space { Spins, Graphs };
    Space space = Space::Spins;
    int n = 0;
    std::vector<double> log_prob;

    std::size_t states() const { return log_prob.size(); }
};

ExactDistribution exact_ising_distribution(const CurieWeissParams& p);
ExactDistribution exact_ising_distribution(const DRegIsingParams& p);
ExactDistribution exact_ergm_distribution(const ErgmParams& p);
ExactDistribution exact_er_distribution(int n, double p);

// (1/2) sum |a - b| over the shared state space.
double tv_distance(const ExactDistribution& a, const ExactDistribution& b);

// Curie-Weiss parameters the lower-bound pairing attaches to a d-regular
// Ising model: beta_cw = n d beta / (n-1), same field.
CurieWeissParams matched_null_ising(double beta_dreg, double h, int n, int d);

// beta1 = (1/2) log(p/(1-p)) - 2 p (n-2) beta2 / n, the coefficient choice
// that cancels the conditional mean of the tilting statistic under G(n,p).
double matched_null_ergm(double beta2, double p, int n);

// Exhaustive conditional moments of the cut statistic over size-l subsets;
// refuses when C(n,l) exceeds the enumeration cap.
ConditionalMoments conditional_cut_moments_oracle(const RegularGraph& g, int l,
                                                  long long cap = 10'000'000);

// Exhaustive conditional moments of the wedge count over m-edge graphs.
ConditionalMoments conditional_wedge_moments_oracle(int n, int m,
                                                    long long cap = 10'000'000);

struct MomentBoundRow {
    int l = 0;       // sphere; -1 in marginal mode
    int q = 0;
    double moment = 0.0;     // E (T - E T)^{2q}
    double bound = 0.0;      // 2 (2q)! (C n d)^q
    double ratio = 0.0;
    double jackknife_se = 0.0;  // 0 when the moment is exact
    bool exact = false;
    bool ok = false;         // ratio <= 1
};

struct MgfRow {
    double gamma = 0.0;
    double empirical = 0.0;  // log E e^{gamma (T - E T)}
    double bound = 0.0;
};

struct MomentBoundReport {
    std::vector<MomentBoundRow> rows;
    std::vector<MgfRow> mgf;   // reported fit, not pass/fail
    bool all_ok = true;
};

// Checks the even central moments of the cut statistic against
// 2 (2q)! (slack_c n d)^q. With l_marginal the subset is uniform over all
// 2^n subsets (the relaxed law the concentration argument uses); otherwise
// every sphere with l/n in [eps/2, 1-eps/2] is checked. q=1 rows
// are exact (variance formula); higher q uses Monte Carlo with block
// jackknife standard errors, or exhaustive enumeration under the cap.
MomentBoundReport moment_bound_check(const RegularGraph& g, bool l_marginal, int q_max,
                                     double slack_c = 8.0, long draws = 1'000'000,
                                     double epsilon_band = 0.1, uint64_t seed = 1);

// E h(E) for E ~ Binomial(N,p) with h(E) = E^2 - (2pN+1-2p)E, exact;
// equals -p^2 N(N-1).
Rational binomial_h_mean(int n, const Rational& p);

// Max over m = 0..N of |E[g|E=m] - (n-2)/(N-1) h(m)| with the matched beta1,
// where g = c E + V, c = n(beta1 - (1/2)log(p/(1-p)))/beta2.
double matched_conditional_identity_gap(int n, double p, double beta2);

struct SuperConcentrationReport {
    double var_g = 0.0;
    double k_over_n3 = 0.0;    // var_g / n^3
    double naive_scale = 0.0;  // var(V) + c^2 var(E), the no-cancellation scale
};

// Exact variance of g under G(n,p) by enumeration (n <= 5).
SuperConcentrationReport super_concentration_var(int n, double p);

}  // namespace structest
