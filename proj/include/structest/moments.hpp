#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace structest {

using Rational = boost::multiprecision::cpp_rational;

// Mean and variance of a statistic restricted to one Hamming sphere
// (spin configurations with l plus-spins, or graphs with exactly m edges).
// These depend only on (n, d, l), never on which d-regular graph.
struct ConditionalMoments {
    double mean = 0.0;
    double variance = 0.0;
    int l = 0;
    int n = 0;
    int d = 0;
};

// E[T(S)] = l(n-l)d/(n-1) for S uniform over size-l vertex subsets,
// T the number of cut edges.
Rational exact_cut_mean_rational(int n, int d, int l);
double exact_cut_mean(int n, int d, int l);

// Exact var(T(S)) via the pair-type decomposition over (adjacent, disjoint)
// edge pairs with hypergeometric occupation probabilities.
Rational exact_cut_var_rational(long long n, long long d, long long l);
double exact_cut_var(int n, int d, int l);

// Moments of the half quadratic form (1/2)x^T Ax = nd/2 - 2T on the sphere
// with l plus-spins: mean = nd/2 - 2*cut_mean, variance = 4*cut_var.
ConditionalMoments quad_form_moments(int n, int d, int l);

// Moments of the wedge count V over graphs with exactly m edges, through the
// line-graph cut identity: the N = n(n-1)/2 possible edges form a
// 2(n-2)-regular adjacency structure H and V = (n-2)m - T_H/2, giving
// mean = (n-2)m(m-1)/(N-1) and variance = exact_cut_var(N, 2(n-2), m)/4.
ConditionalMoments wedge_moments(int n, long long m);

// Kolmogorov-Smirnov error bound C*(d/n)^(1/4) used as tau_n in threshold
// selection; the constant is a calibration knob.
double ks_bound(int n, int d, double C = 1.0);

}  // namespace structest
