#include "structest/exact_oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace structest {

namespace {


void normalize_log(std::vector<double>& lp) {
    const double mx = *std::max_element(lp.begin(), lp.end());
    double total = 0.0;
    for (double v : lp) total += std::exp(v - mx);
    const double lz = mx + std::log(total);
    for (double& v : lp) v -= lz;
}

long long choose_ll(int n, int k, long long cap) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long long c = 1;
    for (int i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > cap) return cap + 1;
    }
    return c;
}

// advances a subset mask through all k-subsets in colex order (Gosper)
uint64_t next_subset(uint64_t v) {
    const uint64_t t = v | (v - 1);
    return (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
}

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

}  // namespace

ExactDistribution exact_ising_distribution(const CurieWeissParams& p) {
    if (p.n < 1 || p.n > kMaxSpinSites)
        throw std::invalid_argument("exact distribution: n must be in [1,20]");
    ExactDistribution out;
    out.space = ExactDistribution::Space::Spins;
    out.n = p.n;
    out.log_prob.resize(1ULL << p.n);
    for (uint64_t mask = 0; mask < out.log_prob.size(); ++mask) {
        const int l = std::popcount(mask);
        const double m = (2.0 * l - p.n) / p.n;
        out.log_prob[mask] = 0.5 * p.beta * p.n * m * m + p.n * p.h * m;
    }
    normalize_log(out.log_prob);
    return out;
}

ExactDistribution exact_ising_distribution(const DRegIsingParams& p) {
    if (p.graph == nullptr) throw std::invalid_argument("exact distribution: null graph");
    const auto& g = *p.graph;
    if (g.n > kMaxSpinSites)
        throw std::invalid_argument("exact distribution: n must be <= 20");
    ExactDistribution out;
    out.space = ExactDistribution::Space::Spins;
    out.n = g.n;
    out.log_prob.resize(1ULL << g.n);
    for (uint64_t mask = 0; mask < out.log_prob.size(); ++mask) {
        long long qf = 0;  // sum over edges of x_i x_j
        for (auto [u, v] : g.edges)
            qf += (((mask >> u) ^ (mask >> v)) & 1ULL) ? -1 : 1;
        const int l = std::popcount(mask);
        const double m = (2.0 * l - g.n) / g.n;
        out.log_prob[mask] = p.beta * static_cast<double>(qf) + g.n * p.h * m;
    }
    normalize_log(out.log_prob);
    return out;
}

ExactDistribution exact_ergm_distribution(const ErgmParams& p) {
    if (p.n < 2 || p.n > kMaxGraphVertices)
        throw std::invalid_argument("exact distribution: graphs need n in [2,5]");
    const long long N = GraphSample::pair_count(p.n);
    ExactDistribution out;
    out.space = ExactDistribution::Space::Graphs;
    out.n = p.n;
    out.log_prob.resize(1ULL << N);
    std::vector<std::pair<int, int>> pairs;
    for (long long i = 0; i < N; ++i) pairs.push_back(GraphSample::index_pair(p.n, i));
    std::vector<int> deg(p.n);
    for (uint64_t mask = 0; mask < out.log_prob.size(); ++mask) {
        std::fill(deg.begin(), deg.end(), 0);
        int E = 0;
        for (long long i = 0; i < N; ++i) {
            if ((mask >> i) & 1ULL) {
                ++deg[pairs[i].first];
                ++deg[pairs[i].second];
                ++E;
            }
        }
        long long V = 0;
        for (int dd : deg) V += static_cast<long long>(dd) * (dd - 1) / 2;
        out.log_prob[mask] = 2.0 * p.beta1 * E + 2.0 * p.beta2 / p.n * static_cast<double>(V);
    }
    normalize_log(out.log_prob);
    return out;
}

ExactDistribution exact_er_distribution(int n, double p) {
    if (p <= 0.0 || p >= 1.0) {
        // degenerate endpoints still make a valid table
        if (p != 0.0 && p != 1.0) throw std::invalid_argument("exact_er: p must be in [0,1]");
    }
    ErgmParams q;
    q.n = n;
    q.beta2 = 0.0;
    if (p == 0.0 || p == 1.0) {
        ExactDistribution out;
        const long long N = GraphSample::pair_count(n);
        if (n < 2 || n > kMaxGraphVertices)
            throw std::invalid_argument("exact distribution: graphs need n in [2,5]");
        out.space = ExactDistribution::Space::Graphs;
        out.n = n;
        out.log_prob.assign(1ULL << N, -1e300);
        out.log_prob[p == 0.0 ? 0 : (1ULL << N) - 1] = 0.0;
        return out;
    }
    q.beta1 = 0.5 * std::log(p / (1.0 - p));
    return exact_ergm_distribution(q);
}

double tv_distance(const ExactDistribution& a, const ExactDistribution& b) {
    if (a.space != b.space || a.n != b.n || a.states() != b.states())
        throw std::invalid_argument("tv_distance: mismatched state spaces");
    double tv = 0.0;
    for (std::size_t i = 0; i < a.states(); ++i)
        tv += std::abs(std::exp(a.log_prob[i]) - std::exp(b.log_prob[i]));
    return 0.5 * tv;
}

CurieWeissParams matched_null_ising(double beta_dreg, double h, int n, int d) {
    if (n < 2) throw std::invalid_argument("matched_null_ising: n too small");
    CurieWeissParams p;
    p.n = n;
    p.beta = static_cast<double>(n) * d * beta_dreg / (n - 1);
    p.h = h;
    return p;
}

double matched_null_ergm(double beta2, double p, int n) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("matched_null_ergm: p must be in (0,1)");
    return 0.5 * std::log(p / (1.0 - p)) - 2.0 * p * (n - 2) * beta2 / n;
}

ConditionalMoments conditional_cut_moments_oracle(const RegularGraph& g, int l, long long cap) {
    if (l < 0 || l > g.n) throw std::invalid_argument("oracle: bad l");
    if (choose_ll(g.n, l, cap) > cap) throw std::invalid_argument("oracle: C(n,l) exceeds cap");
    ConditionalMoments out{0.0, 0.0, l, g.n, g.d};
    if (l == 0 || l == g.n) return out;

    Rational s1 = 0, s2 = 0;
    long long count = 0;
    std::vector<uint8_t> mask(g.n, 0);
    uint64_t bits = (1ULL << l) - 1;
    const uint64_t limit = 1ULL << g.n;
    while (bits < limit) {
        for (int i = 0; i < g.n; ++i) mask[i] = (bits >> i) & 1ULL ? 1 : 0;
        const long long t = cut_size(g, mask);
        s1 += t;
        s2 += static_cast<long long>(t) * t;
        ++count;
        bits = next_subset(bits);
    }
    const Rational mean = s1 / count;
    const Rational var = s2 / count - mean * mean;
    out.mean = mean.convert_to<double>();
    out.variance = var.convert_to<double>();
    return out;
}

ConditionalMoments conditional_wedge_moments_oracle(int n, int m, long long cap) {
    const long long N = GraphSample::pair_count(n);
    if (N > 62) throw std::invalid_argument("oracle: graph space too large");
    if (m < 0 || m > N) throw std::invalid_argument("oracle: bad m");
    if (choose_ll(static_cast<int>(N), m, cap) > cap)
        throw std::invalid_argument("oracle: C(N,m) exceeds cap");
    ConditionalMoments out{0.0, 0.0, m, n, 0};
    if (m == 0) return out;

    std::vector<std::pair<int, int>> pairs;
    for (long long i = 0; i < N; ++i) pairs.push_back(GraphSample::index_pair(n, i));
    Rational s1 = 0, s2 = 0;
    long long count = 0;
    std::vector<int> deg(n);
    uint64_t bits = (1ULL << m) - 1;
    const uint64_t limit = 1ULL << N;
    while (bits < limit) {
        std::fill(deg.begin(), deg.end(), 0);
        for (long long i = 0; i < N; ++i) {
            if ((bits >> i) & 1ULL) {
                ++deg[pairs[i].first];
                ++deg[pairs[i].second];
            }
        }
        long long V = 0;
        for (int dd : deg) V += static_cast<long long>(dd) * (dd - 1) / 2;
        s1 += V;
        s2 += V * V;
        ++count;
        bits = next_subset(bits);
    }
    const Rational mean = s1 / count;
    const Rational var = s2 / count - mean * mean;
    out.mean = mean.convert_to<double>();
    out.variance = var.convert_to<double>();
    return out;
}

namespace {

// exact central moments E(T - mu)^{2q} over one sphere by enumeration
std::vector<double> sphere_central_moments_exact(const RegularGraph& g, int l, int q_max) {
    std::vector<double> vals;
    std::vector<uint8_t> mask(g.n, 0);
    if (l == 0 || l == g.n) {
        vals.assign(1, 0.0);
    } else {
        uint64_t bits = (1ULL << l) - 1;
        const uint64_t limit = 1ULL << g.n;
        while (bits < limit) {
            for (int i = 0; i < g.n; ++i) mask[i] = (bits >> i) & 1ULL ? 1 : 0;
            vals.push_back(static_cast<double>(cut_size(g, mask)));
            bits = next_subset(bits);
        }
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    std::vector<double> moments(q_max + 1, 0.0);
    for (double v : vals) {
        double c2 = (v - mean) * (v - mean);
        double pow_c = 1.0;
        for (int q = 1; q <= q_max; ++q) {
            pow_c *= c2;
            moments[q] += pow_c;
        }
    }
    for (int q = 1; q <= q_max; ++q) moments[q] /= static_cast<double>(vals.size());
    return moments;
}

struct McMoments {
    std::vector<double> moment;        // index q
    std::vector<double> jackknife_se;  // index q
};

// Monte Carlo central moments with block jackknife. draw() must return one
// statistic value per call; exact_mean, when finite, replaces the empirical
// centering (the q=1 row is exact elsewhere, so self-centering bias at
// higher q is what the jackknife se quantifies).
template <typename DrawFn>
McMoments mc_central_moments(DrawFn&& draw, long draws, int q_max, double center) {
    constexpr int kBlocks = 50;
    std::vector<std::vector<double>> block_sums(kBlocks, std::vector<double>(q_max + 1, 0.0));
    std::vector<long> block_counts(kBlocks, 0);
    for (long i = 0; i < draws; ++i) {
        const int b = static_cast<int>(i % kBlocks);
        const double v = draw() - center;
        const double c2 = v * v;
        double pow_c = 1.0;
        for (int q = 1; q <= q_max; ++q) {
            pow_c *= c2;
            block_sums[b][q] += pow_c;
        }
        ++block_counts[b];
    }
    McMoments out;
    out.moment.assign(q_max + 1, 0.0);
    out.jackknife_se.assign(q_max + 1, 0.0);
    std::vector<double> total(q_max + 1, 0.0);
    for (int b = 0; b < kBlocks; ++b)
        for (int q = 1; q <= q_max; ++q) total[q] += block_sums[b][q];
    for (int q = 1; q <= q_max; ++q) out.moment[q] = total[q] / static_cast<double>(draws);
    for (int q = 1; q <= q_max; ++q) {
        double ssq = 0.0;
        for (int b = 0; b < kBlocks; ++b) {
            const double loo = (total[q] - block_sums[b][q]) /
                               static_cast<double>(draws - block_counts[b]);
            const double diff = loo - out.moment[q];
            ssq += diff * diff;
        }
        out.jackknife_se[q] = std::sqrt(ssq * (kBlocks - 1) / static_cast<double>(kBlocks));
    }
    return out;
}

}  // namespace

MomentBoundReport moment_bound_check(const RegularGraph& g, bool l_marginal, int q_max,
                                     double slack_c, long draws, double epsilon_band,
                                     uint64_t seed) {
    if (q_max < 1) throw std::invalid_argument("moment_bound_check: q_max must be >= 1");
    MomentBoundReport report;
    const double nd = static_cast<double>(g.n) * g.d;
    auto bound_for = [&](int q) { return 2.0 * factorial(2 * q) * std::pow(slack_c * nd, q); };

    Rng rng(seed);
    if (l_marginal) {
        // S uniform over all subsets: exact mean/variance by binomial mixing
        Rational mean_mix = 0, second_mix = 0;
        Rational w_norm = 0;
        std::vector<Rational> binom(g.n + 1);
        {
            Rational c = 1;
            for (int l = 0; l <= g.n; ++l) {
                binom[l] = c;
                c = c * (g.n - l) / (l + 1);
            }
            for (int l = 0; l <= g.n; ++l) w_norm += binom[l];
        }
        for (int l = 0; l <= g.n; ++l) {
            const Rational w = binom[l] / w_norm;
            const Rational mu = exact_cut_mean_rational(g.n, g.d, l);
            mean_mix += w * mu;
            second_mix += w * (exact_cut_var_rational(g.n, g.d, l) + mu * mu);
        }
        const Rational var_exact = second_mix - mean_mix * mean_mix;
        const double center = mean_mix.convert_to<double>();

        MomentBoundRow r1{-1, 1, var_exact.convert_to<double>(), bound_for(1), 0.0, 0.0, true, false};
        r1.ratio = r1.moment / r1.bound;
        r1.ok = r1.ratio <= 1.0;
        report.rows.push_back(r1);

        std::vector<uint8_t> mask(g.n);
        auto draw_T = [&]() {
            for (int i = 0; i < g.n; ++i) mask[i] = rng.bernoulli(0.5) ? 1 : 0;
            return static_cast<double>(cut_size(g, mask));
        };
        if (q_max > 1) {
            auto mc = mc_central_moments(draw_T, draws, q_max, center);
            for (int q = 2; q <= q_max; ++q) {
                MomentBoundRow r{-1, q, mc.moment[q], bound_for(q), 0.0, mc.jackknife_se[q], false, false};
                r.ratio = r.moment / r.bound;
                r.ok = r.ratio <= 1.0;
                report.rows.push_back(r);
            }
        }
        // log-MGF of T - E T against the sub-exponential curve
        const double u = slack_c / 4.0;  // (1+o(1)) absorbed the same way as the moments
        const double gamma_max = 1.0 / std::sqrt(32.0 * nd * u);
        std::vector<double> gammas;
        for (int k = -4; k <= 4; ++k) gammas.push_back(0.9 * gamma_max * (k / 4.0));
        std::vector<double> acc(gammas.size(), 0.0);
        for (long i = 0; i < draws; ++i) {
            const double v = draw_T() - center;
            for (std::size_t j = 0; j < gammas.size(); ++j) acc[j] += std::exp(gammas[j] * v);
        }
        for (std::size_t j = 0; j < gammas.size(); ++j) {
            const double gamma2 = gammas[j] * gammas[j];
            MgfRow row;
            row.gamma = gammas[j];
            row.empirical = std::log(acc[j] / static_cast<double>(draws));
            row.bound = 32.0 * nd * gamma2 * u / (1.0 - 16.0 * nd * gamma2 * u);
            report.mgf.push_back(row);
        }
    } else {
        const int lo = static_cast<int>(std::ceil(epsilon_band / 2.0 * g.n));
        const int hi = static_cast<int>(std::floor((1.0 - epsilon_band / 2.0) * g.n));
        for (int l = lo; l <= hi; ++l) {
            MomentBoundRow r1{l, 1, exact_cut_var(g.n, g.d, l), bound_for(1), 0.0, 0.0, true, false};
            r1.ratio = r1.moment / r1.bound;
            r1.ok = r1.ratio <= 1.0;
            report.rows.push_back(r1);
            if (q_max == 1) continue;

            const bool enumerable = choose_ll(g.n, l, 2'000'000) <= 2'000'000 && g.n <= 62;
            if (enumerable) {
                const auto mom = sphere_central_moments_exact(g, l, q_max);
                for (int q = 2; q <= q_max; ++q) {
                    MomentBoundRow r{l, q, mom[q], bound_for(q), 0.0, 0.0, true, false};
                    r.ratio = r.moment / r.bound;
                    r.ok = r.ratio <= 1.0;
                    report.rows.push_back(r);
                }
            } else {
                const double center = exact_cut_mean(g.n, g.d, l);
                auto draw_T = [&]() {
                    SpinConfig x = sample_uniform_sphere(g.n, l, rng);
                    std::vector<uint8_t> mask(g.n);
                    for (int i = 0; i < g.n; ++i) mask[i] = x.spins[i] > 0 ? 1 : 0;
                    return static_cast<double>(cut_size(g, mask));
                };
                auto mc = mc_central_moments(draw_T, draws, q_max, center);
                for (int q = 2; q <= q_max; ++q) {
                    MomentBoundRow r{l, q, mc.moment[q], bound_for(q), 0.0, mc.jackknife_se[q], false, false};
                    r.ratio = r.moment / r.bound;
                    r.ok = r.ratio <= 1.0;
                    report.rows.push_back(r);
                }
            }
        }
    }
    for (const auto& r : report.rows) report.all_ok = report.all_ok && r.ok;
    return report;
}

Rational binomial_h_mean(int n, const Rational& p) {
    const long long N = GraphSample::pair_count(n);
    // E E = pN, E E^2 = pN(1-p) + p^2 N^2 for E ~ Binomial(N,p)
    const Rational EN = p * N;
    const Rational EN2 = p * (1 - p) * N + p * p * N * N;
    return EN2 - (2 * p * N + 1 - 2 * p) * EN;
}

double matched_conditional_identity_gap(int n, double p, double beta2) {
    if (beta2 <= 0.0) throw std::invalid_argument("identity gap: beta2 must be > 0");
    const long long N = GraphSample::pair_count(n);
    const double beta1 = matched_null_ergm(beta2, p, n);
    const double c = n * (beta1 - 0.5 * std::log(p / (1.0 - p))) / beta2;  // = -2p(n-2)
    double gap = 0.0;
    for (long long m = 0; m <= N; ++m) {
        const double ev = wedge_moments(n, m).mean;
        const double lhs = c * static_cast<double>(m) + ev;
        const double hm = static_cast<double>(m) * m - (2.0 * p * N + 1.0 - 2.0 * p) * m;
        const double rhs = static_cast<double>(n - 2) / (N - 1) * hm;
        gap = std::max(gap, std::abs(lhs - rhs));
    }
    return gap;
}

SuperConcentrationReport super_concentration_var(int n, double p) {
    if (n < 3 || n > kMaxGraphVertices)
        throw std::invalid_argument("super_concentration_var: need n in [3,5]");
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("super_concentration_var: p in (0,1)");
    const long long N = GraphSample::pair_count(n);
    const double c = -2.0 * p * (n - 2);
    std::vector<std::pair<int, int>> pairs;
    for (long long i = 0; i < N; ++i) pairs.push_back(GraphSample::index_pair(n, i));
    double Eg = 0, Eg2 = 0, EV = 0, EV2 = 0, EE = 0, EE2 = 0;
    std::vector<int> deg(n);
    for (uint64_t mask = 0; mask < (1ULL << N); ++mask) {
        std::fill(deg.begin(), deg.end(), 0);
        int E = std::popcount(mask);
        double w = std::pow(p, E) * std::pow(1.0 - p, static_cast<double>(N - E));
        for (long long i = 0; i < N; ++i) {
            if ((mask >> i) & 1ULL) {
                ++deg[pairs[i].first];
                ++deg[pairs[i].second];
            }
        }
        long long V = 0;
        for (int dd : deg) V += static_cast<long long>(dd) * (dd - 1) / 2;
        const double gval = c * E + static_cast<double>(V);
        Eg += w * gval;
        Eg2 += w * gval * gval;
        EV += w * V;
        EV2 += w * static_cast<double>(V) * V;
        EE += w * E;
        EE2 += w * static_cast<double>(E) * E;
    }
    SuperConcentrationReport rep;
    rep.var_g = Eg2 - Eg * Eg;
    rep.k_over_n3 = rep.var_g / (static_cast<double>(n) * n * n);
    rep.naive_scale = (EV2 - EV * EV) + c * c * (EE2 - EE * EE);
    return rep;
}

}  // namespace structest
