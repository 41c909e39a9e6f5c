#include "structest/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace structest {

namespace {

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

SpinConfig sample_uniform_sphere(int n, int l, Rng& rng) {
    if (n < 1 || l < 0 || l > n) throw std::invalid_argument("sample_uniform_sphere: bad (n,l)");
    // partial Fisher-Yates: select l distinct positions for the plus spins
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int8_t> spins(n, -1);
    for (int k = 0; k < l; ++k) {
        int j = k + static_cast<int>(rng.uniform_below(static_cast<uint64_t>(n - k)));
        std::swap(idx[k], idx[j]);
        spins[idx[k]] = 1;
    }
    return SpinConfig(std::move(spins));
}

std::vector<double> curie_weiss_sphere_weights(const CurieWeissParams& p) {
    if (p.n < 1) throw std::invalid_argument("curie_weiss: n must be positive");
    if (p.beta < 0) throw std::invalid_argument("curie_weiss: beta must be >= 0");
    const int n = p.n;
    std::vector<double> logw(n + 1);
    for (int l = 0; l <= n; ++l) {
        const double m = (2.0 * l - n) / n;
        logw[l] = log_choose(n, l) + 0.5 * p.beta * n * m * m + n * p.h * m;
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    std::vector<double> w(n + 1);
    for (int l = 0; l <= n; ++l) total += (w[l] = std::exp(logw[l] - mx));
    for (auto& x : w) x /= total;
    return w;
}

SpinConfig sample_curie_weiss(const CurieWeissParams& p, Rng& rng) {
    const auto w = curie_weiss_sphere_weights(p);
    double u = rng.uniform01();
    int l = p.n;  // guard against accumulated rounding leaving u unconsumed
    double acc = 0.0;
    for (int k = 0; k <= p.n; ++k) {
        acc += w[k];
        if (u < acc) { l = k; break; }
    }
    return sample_uniform_sphere(p.n, l, rng);
}

double ising_conditional_plus(const RegularGraph& g, const SpinConfig& x, int site,
                              double beta, double h) {
    int nbr_sum = 0;
    for (int j : g.adjacency[site]) nbr_sum += x.spins[j];
    return sigmoid(2.0 * beta * nbr_sum + 2.0 * h);
}

SpinConfig sample_dreg_ising(const DRegIsingParams& p, int sweeps, Rng& rng) {
    if (p.graph == nullptr) throw std::invalid_argument("sample_dreg_ising: null graph");
    if (p.beta < 0) throw std::invalid_argument("sample_dreg_ising: beta must be >= 0");
    if (sweeps < 1) throw std::invalid_argument("sample_dreg_ising: sweeps must be >= 1");
    const auto& g = *p.graph;
    std::vector<int8_t> init(g.n);
    for (auto& s : init) s = rng.bernoulli(0.5) ? 1 : -1;
    SpinConfig x(std::move(init));
    const long long steps = static_cast<long long>(sweeps) * g.n;
    for (long long t = 0; t < steps; ++t) {
        const int i = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(g.n)));
        const double prob_plus = ising_conditional_plus(g, x, i, p.beta, p.h);
        const int8_t want = rng.bernoulli(prob_plus) ? 1 : -1;
        if (want != x.spins[i]) x.flip(i);
    }
    return x;
}

double ergm_conditional_edge(const GraphSample& s, int u, int v, double beta1, double beta2) {
    long long wedges_through = static_cast<long long>(s.degrees[u]) + s.degrees[v];
    if (s.has_edge(u, v)) wedges_through -= 2;
    return sigmoid(2.0 * beta1 + 2.0 * beta2 / s.n * static_cast<double>(wedges_through));
}

GraphSample sample_er(int n, double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_er: p must be in [0,1]");
    GraphSample s(n);
    const long long N = GraphSample::pair_count(n);
    for (long long i = 0; i < N; ++i) {
        if (rng.bernoulli(p)) {
            auto [u, v] = GraphSample::index_pair(n, i);
            s.toggle(u, v);
        }
    }
    return s;
}

GraphSample sample_ergm(const ErgmParams& p, int sweeps, Rng& rng) {
    if (p.n < 2) throw std::invalid_argument("sample_ergm: n too small");
    if (p.beta2 < 0) throw std::invalid_argument("sample_ergm: beta2 must be >= 0");
    if (sweeps < 1) throw std::invalid_argument("sample_ergm: sweeps must be >= 1");
    GraphSample s = sample_er(p.n, sigmoid(2.0 * p.beta1), rng);
    const long long N = GraphSample::pair_count(p.n);
    const long long steps = static_cast<long long>(sweeps) * N;
    for (long long t = 0; t < steps; ++t) {
        const int u = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(p.n)));
        int v = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(p.n - 1)));
        if (v >= u) ++v;  // uniform over unordered pairs
        const double prob_edge = ergm_conditional_edge(s, u, v, p.beta1, p.beta2);
        const bool want = rng.bernoulli(prob_edge);
        if (want != s.has_edge(u, v)) s.toggle(u, v);
    }
    return s;
}

int default_sweeps(long long sites) {
    return static_cast<int>(std::ceil(50.0 * std::log(2.0) * static_cast<double>(sites)));
}

}  // namespace structest
