#include "structest/moments.hpp"

#include <cmath>
#include <stdexcept>

namespace structest {

namespace {

using Int = boost::multiprecision::cpp_int;

Int falling(long long x, int k) {
    Int r = 1;
    for (int i = 0; i < k; ++i) r *= Int(x - i);
    return r;
}

void check_sphere_args(long long n, long long d, long long l) {
    if (n < 2 || d < 1 || d >= n) throw std::invalid_argument("moments: need 0 < d < n");
    if (l < 0 || l > n) throw std::invalid_argument("moments: need 0 <= l <= n");
    if ((n * d) % 2 != 0) throw std::invalid_argument("moments: n*d must be even");
}

}  // namespace

Rational exact_cut_mean_rational(int n, int d, int l) {
    check_sphere_args(n, d, l);
    return Rational(Int(l) * (n - l) * d, Int(n - 1));
}

double exact_cut_mean(int n, int d, int l) {
    return exact_cut_mean_rational(n, d, l).convert_to<double>();
}

Rational exact_cut_var_rational(long long n, long long d, long long l) {
    check_sphere_args(n, d, l);
    // The cut is constant on degenerate spheres; the pair-type expression
    // below would evaluate falling(n,4) = 0 denominators when n <= 3.
    if (l <= 1 || l >= n - 1) return Rational(0);
    // q_{a,b} = P(a given vertices in S and b given vertices outside S)
    auto q = [&](int a, int b) {
        return Rational(falling(l, a) * falling(n - l, b), falling(n, a + b));
    };
    const Rational p1 = 2 * q(1, 1);
    const Int M = Int(n) * d / 2;                    // edges
    const Int P_adj = Int(n) * d * (d - 1) / 2;      // edge pairs sharing a vertex
    const Int P_dis = M * (M - 1) / 2 - P_adj;       // disjoint edge pairs
    if (P_dis < 0) throw std::invalid_argument("moments: inconsistent pair counts");
    return Rational(M) * (p1 - p1 * p1)
         + 2 * Rational(P_adj) * ((q(1, 2) + q(2, 1)) - p1 * p1)
         + 2 * Rational(P_dis) * (4 * q(2, 2) - p1 * p1);
}

double exact_cut_var(int n, int d, int l) {
    return exact_cut_var_rational(n, d, l).convert_to<double>();
}

ConditionalMoments quad_form_moments(int n, int d, int l) {
    Rational mean = Rational(Int(n) * d, Int(2)) - 2 * exact_cut_mean_rational(n, d, l);
    Rational var = 4 * exact_cut_var_rational(n, d, l);
    return {mean.convert_to<double>(), var.convert_to<double>(), l, n, d};
}

ConditionalMoments wedge_moments(int n, long long m) {
    if (n < 2) throw std::invalid_argument("wedge_moments: n too small");
    const long long N = static_cast<long long>(n) * (n - 1) / 2;
    if (m < 0 || m > N) throw std::invalid_argument("wedge_moments: need 0 <= m <= N");
    ConditionalMoments out{0.0, 0.0, static_cast<int>(m), n, 0};
    if (m == 0 || n == 2) return out;
    Rational mean = Rational(Int(n - 2) * m * (m - 1), Int(N - 1));
    out.mean = mean.convert_to<double>();
    Rational var = exact_cut_var_rational(N, 2LL * (n - 2), m) / 4;
    out.variance = var.convert_to<double>();
    return out;
}

double ks_bound(int n, int d, double C) {
    if (d < 1 || d >= n) throw std::invalid_argument("ks_bound: need 0 < d < n");
    return C * std::pow(static_cast<double>(d) / n, 0.25);
}

}  // namespace structest
