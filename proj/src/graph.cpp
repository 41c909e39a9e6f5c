#include "structest/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace structest {

RegularGraph RegularGraph::from_edges(int n, std::vector<std::pair<int, int>> edge_list) {
    if (n <= 0) throw std::invalid_argument("graph: n must be positive");
    RegularGraph g;
    g.n = n;
    g.adjacency.assign(n, {});
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : edge_list) {
        if (u > v) std::swap(u, v);
        if (u < 0 || v >= n) throw std::invalid_argument("graph: endpoint out of range");
        if (u == v) throw std::invalid_argument("graph: self-loop");
        if (!seen.insert({u, v}).second) throw std::invalid_argument("graph: repeated edge");
        g.adjacency[u].push_back(v);
        g.adjacency[v].push_back(u);
    }
    g.edges.assign(seen.begin(), seen.end());
    if (g.edges.empty()) throw std::invalid_argument("graph: no edges");
    g.d = static_cast<int>(g.adjacency[0].size());
    for (auto& nbrs : g.adjacency) {
        if (static_cast<int>(nbrs.size()) != g.d)
            throw std::invalid_argument("graph: not regular");
        std::sort(nbrs.begin(), nbrs.end());
    }
    return g;
}

RegularGraph RegularGraph::circulant_offsets(int n, const std::vector<int>& offsets) {
    if (n < 3) throw std::invalid_argument("circulant: n too small");
    std::set<int> offs(offsets.begin(), offsets.end());
    if (offs.empty()) throw std::invalid_argument("circulant: no offsets");
    for (int o : offs)
        if (o < 1 || 2 * o > n)
            throw std::invalid_argument("circulant: offsets must lie in [1, n/2]");
    std::vector<std::pair<int, int>> edge_list;
    for (int i = 0; i < n; ++i) {
        for (int o : offs) {
            int j = (i + o) % n;
            if (i < j) edge_list.emplace_back(i, j);
            else if (2 * o != n) edge_list.emplace_back(j, i);
        }
    }
    std::sort(edge_list.begin(), edge_list.end());
    edge_list.erase(std::unique(edge_list.begin(), edge_list.end()), edge_list.end());
    return from_edges(n, std::move(edge_list));
}

RegularGraph RegularGraph::circulant(int n, int d) {
    if (d % 2 != 0) throw std::invalid_argument("circulant: d must be even for this constructor");
    if (d < 2 || d >= n) throw std::invalid_argument("circulant: need n > d >= 2");
    std::vector<int> offs;
    for (int o = 1; o <= d / 2; ++o) offs.push_back(o);
    return circulant_offsets(n, offs);
}

RegularGraph RegularGraph::random_regular(int n, int d, uint64_t seed, long retry_budget) {
    if (d < 1 || d >= n) throw std::invalid_argument("random_regular: need 0 < d < n");
    if ((static_cast<long long>(n) * d) % 2 != 0)
        throw std::invalid_argument("random_regular: n*d must be even");
    if (retry_budget <= 0) retry_budget = 10L * n * d;

    Rng rng(seed);
    const int stubs = n * d;
    std::vector<int> perm(stubs);
    for (long attempt = 0; attempt < retry_budget; ++attempt) {
        for (int i = 0; i < stubs; ++i) perm[i] = i;
        for (int i = stubs - 1; i > 0; --i) {
            int j = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(i + 1)));
            std::swap(perm[i], perm[j]);
        }
        std::vector<std::pair<int, int>> edge_list;
        edge_list.reserve(stubs / 2);
        std::set<std::pair<int, int>> seen;
        bool simple = true;
        for (int k = 0; k < stubs && simple; k += 2) {
            int u = perm[k] / d, v = perm[k + 1] / d;
            if (u == v) { simple = false; break; }
            auto e = std::minmax(u, v);
            if (!seen.insert({e.first, e.second}).second) { simple = false; break; }
            edge_list.emplace_back(e.first, e.second);
        }
        if (simple) return from_edges(n, std::move(edge_list));
    }
    throw std::runtime_error("random_regular: retry budget exhausted without a simple graph");
}

void RegularGraph::save(std::ostream& os) const {
    os << n << ' ' << d << '\n';
    for (auto [u, v] : edges) os << u << ' ' << v << '\n';
}

RegularGraph RegularGraph::load(std::istream& is) {
    int n = 0, d = 0;
    if (!(is >> n >> d)) throw std::runtime_error("graph load: bad header");
    std::vector<std::pair<int, int>> edge_list;
    int u, v;
    while (is >> u >> v) edge_list.emplace_back(u, v);
    auto g = from_edges(n, std::move(edge_list));
    if (g.d != d) throw std::runtime_error("graph load: header degree does not match edges");
    return g;
}

SpinConfig::SpinConfig(std::vector<int8_t> s) : spins(std::move(s)) {
    for (int8_t v : spins) {
        if (v != 1 && v != -1) throw std::invalid_argument("spins must be +1/-1");
        if (v > 0) ++plus_count;
    }
}

std::string SpinConfig::to_line() const {
    std::string out(spins.size(), '-');
    for (size_t i = 0; i < spins.size(); ++i)
        if (spins[i] > 0) out[i] = '+';
    return out;
}

SpinConfig SpinConfig::from_line(const std::string& line) {
    std::vector<int8_t> s;
    s.reserve(line.size());
    for (char c : line) {
        if (c == '+') s.push_back(1);
        else if (c == '-') s.push_back(-1);
        else throw std::runtime_error("spin line: expected only '+'/'-'");
    }
    return SpinConfig(std::move(s));
}

GraphSample::GraphSample(int n_) : n(n_) {
    if (n < 1) throw std::invalid_argument("GraphSample: n must be positive");
    edge_indicators.assign(pair_count(n), 0);
    degrees.assign(n, 0);
}

long long GraphSample::pair_index(int n, int u, int v) {
    if (u > v) std::swap(u, v);
    if (u < 0 || v >= n || u == v) throw std::invalid_argument("pair_index: bad pair");
    // pairs (0,1),(0,2),...,(0,n-1),(1,2),... in lexicographic order
    return static_cast<long long>(u) * n - static_cast<long long>(u) * (u + 1) / 2 + (v - u - 1);
}

std::pair<int, int> GraphSample::index_pair(int n, long long idx) {
    if (idx < 0 || idx >= pair_count(n)) throw std::invalid_argument("index_pair: index out of range");
    // row u starts at offset u*n - u(u+1)/2; invert by the quadratic formula,
    // then correct for floating-point rounding
    const double b = 2.0 * n - 1.0;
    int u = static_cast<int>((b - std::sqrt(b * b - 8.0 * static_cast<double>(idx))) / 2.0);
    u = std::clamp(u, 0, n - 2);
    auto row_start = [n](int r) { return static_cast<long long>(r) * n - static_cast<long long>(r) * (r + 1) / 2; };
    while (u > 0 && row_start(u) > idx) --u;
    while (u < n - 2 && row_start(u + 1) <= idx) ++u;
    return {u, u + 1 + static_cast<int>(idx - row_start(u))};
}

void GraphSample::toggle(int u, int v) {
    auto idx = pair_index(n, u, v);
    if (edge_indicators[idx]) {
        edge_indicators[idx] = 0;
        --edge_count;
        --degrees[u];
        --degrees[v];
    } else {
        edge_indicators[idx] = 1;
        ++edge_count;
        ++degrees[u];
        ++degrees[v];
    }
}

std::string GraphSample::to_line() const {
    std::string out(edge_indicators.size(), '0');
    for (size_t i = 0; i < edge_indicators.size(); ++i)
        if (edge_indicators[i]) out[i] = '1';
    return out;
}

GraphSample GraphSample::from_line(const std::string& line) {
    // N = n(n-1)/2 inverts to n = (1 + sqrt(1+8N))/2
    long long N = static_cast<long long>(line.size());
    int n = static_cast<int>((1 + static_cast<long long>(std::sqrt(8.0 * N + 1.0))) / 2);
    while (pair_count(n) < N) ++n;
    while (n > 1 && pair_count(n - 1) >= N) --n;
    if (pair_count(n) != N) throw std::runtime_error("graph sample line: length is not n(n-1)/2");
    GraphSample s(n);
    for (long long i = 0; i < N; ++i) {
        if (line[i] == '1') {
            auto [u, v] = index_pair(n, i);
            s.toggle(u, v);
        } else if (line[i] != '0') {
            throw std::runtime_error("graph sample line: expected only '0'/'1'");
        }
    }
    return s;
}

void GraphSample::save(std::ostream& os) const {
    os << n << '\n';
    for (long long i = 0; i < static_cast<long long>(edge_indicators.size()); ++i) {
        if (edge_indicators[i]) {
            auto [u, v] = index_pair(n, i);
            os << u << ' ' << v << '\n';
        }
    }
}

GraphSample GraphSample::load(std::istream& is) {
    int n = 0;
    if (!(is >> n)) throw std::runtime_error("graph sample load: bad header");
    GraphSample s(n);
    int u, v;
    while (is >> u >> v) {
        if (s.has_edge(u, v)) throw std::runtime_error("graph sample load: repeated edge");
        s.toggle(u, v);
    }
    return s;
}

long long cut_size(const RegularGraph& g, const std::vector<uint8_t>& in_subset) {
    if (static_cast<int>(in_subset.size()) != g.n)
        throw std::invalid_argument("cut_size: mask length != n");
    long long cut = 0;
    for (auto [u, v] : g.edges)
        cut += (in_subset[u] != in_subset[v]) ? 1 : 0;
    return cut;
}

long long cut_size(const RegularGraph& g, const std::vector<int>& subset) {
    std::vector<uint8_t> mask(g.n, 0);
    for (int v : subset) {
        if (v < 0 || v >= g.n) throw std::invalid_argument("cut_size: vertex out of range");
        mask[v] = 1;
    }
    return cut_size(g, mask);
}

long long quadratic_form(const RegularGraph& g, const SpinConfig& x) {
    if (x.n() != g.n) throw std::invalid_argument("quadratic_form: size mismatch");
    std::vector<uint8_t> mask(g.n);
    for (int i = 0; i < g.n; ++i) mask[i] = x.spins[i] > 0 ? 1 : 0;
    return static_cast<long long>(g.n) * g.d / 2 - 2 * cut_size(g, mask);
}

long long quadratic_form_direct(const RegularGraph& g, const SpinConfig& x) {
    if (x.n() != g.n) throw std::invalid_argument("quadratic_form: size mismatch");
    long long sum = 0;
    for (auto [u, v] : g.edges)
        sum += static_cast<long long>(x.spins[u]) * x.spins[v];
    return sum;
}

long long wedge_count(const GraphSample& s) {
    long long total = 0;
    for (int deg : s.degrees)
        total += static_cast<long long>(deg) * (deg - 1) / 2;
    return total;
}

long long wedge_delta(const GraphSample& s, int u, int v) {
    if (s.has_edge(u, v)) {
        // removal: wedges through (u,v) with degrees measured after removal
        return -(static_cast<long long>(s.degrees[u]) - 1 + s.degrees[v] - 1);
    }
    return static_cast<long long>(s.degrees[u]) + s.degrees[v];
}

}  // namespace structest
