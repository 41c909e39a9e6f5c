#pragma once

#include <vector>

#include "structest/graph.hpp"
#include "structest/rng.hpp"

namespace structest {

struct CurieWeissParams {
    int n = 0;
    double beta = 0.0;  // >= 0
    double h = 0.0;
};

struct DRegIsingParams {
    const RegularGraph* graph = nullptr;
    double beta = 0.0;  // >= 0
    double h = 0.0;
};

struct ErgmParams {
    int n = 0;
    double beta1 = 0.0;
    double beta2 = 0.0;  // >= 0
};

// Uniform over configurations with exactly l plus-spins.
SpinConfig sample_uniform_sphere(int n, int l, Rng& rng);

// Normalized magnetization weights w(l), l = 0..n, of the Curie-Weiss
// measure p(x) proportional to exp((beta/2) n m^2 + n h m): the sphere
// marginal w(l) proportional to C(n,l) exp(...). Computed in log space.
std::vector<double> curie_weiss_sphere_weights(const CurieWeissParams& p);

// Exact two-stage sampler: draw the sphere from w, then uniform on it.
SpinConfig sample_curie_weiss(const CurieWeissParams& p, Rng& rng);

// Conditional probability of spin i being +1 given the rest:
// sigmoid(2 beta sum_{j ~ i} x_j + 2h).
double ising_conditional_plus(const RegularGraph& g, const SpinConfig& x, int site,
                              double beta, double h);

// Single-site Glauber chain from a uniform random start; one sweep = n
// uniformly chosen site updates. Approximate sample after `sweeps` sweeps.
SpinConfig sample_dreg_ising(const DRegIsingParams& p, int sweeps, Rng& rng);

// Conditional probability that edge (u,v) is present given the rest:
// sigmoid(2 beta1 + (2 beta2/n)(deg(u) + deg(v) counted without this edge)).
double ergm_conditional_edge(const GraphSample& s, int u, int v, double beta1, double beta2);

// N independent Bernoulli(p) edge indicators.
GraphSample sample_er(int n, double p, Rng& rng);

// Edge-flip Glauber chain for the density proportional to
// exp(2 beta1 E + (2 beta2/n) V); one sweep = N uniformly chosen pair
// updates, each O(1) via degree bookkeeping. The chain starts from
// G(n, sigmoid(2 beta1)), which is already stationary when beta2 = 0.
GraphSample sample_ergm(const ErgmParams& p, int sweeps, Rng& rng);

// Conservative default: 50*log(state count) sweeps, i.e. 50*sites*log(2).
int default_sweeps(long long sites);

}  // namespace structest
