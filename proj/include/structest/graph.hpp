#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "structest/rng.hpp"

namespace structest {

// Immutable simple d-regular graph. Construction validates regularity;
// afterwards the structure is safe to share across threads.
struct RegularGraph {
    int n = 0;
    int d = 0;
    std::vector<std::vector<int>> adjacency;   // sorted neighbor lists
    std::vector<std::pair<int, int>> edges;    // u < v, lexicographic

    static RegularGraph from_edges(int n, std::vector<std::pair<int, int>> edge_list);

    // Vertex i adjacent to i±1, ..., i±d/2 (mod n). Rejects odd d.
    static RegularGraph circulant(int n, int d);

    // Connection-set circulant: i adjacent to i±o for each offset o. An
    // offset of exactly n/2 contributes a single neighbor, so odd degrees
    // are reachable on even n (e.g. offsets {1, n/2} give d = 3).
    static RegularGraph circulant_offsets(int n, const std::vector<int>& offsets);

    // Pairing model with full restart on loops or multi-edges.
    // retry_budget <= 0 means the default of 10*n*d attempts.
    static RegularGraph random_regular(int n, int d, uint64_t seed, long retry_budget = 0);

    void save(std::ostream& os) const;
    static RegularGraph load(std::istream& is);
};

// ±1 spin vector with its +1 count cached.
struct SpinConfig {
    std::vector<int8_t> spins;
    int plus_count = 0;

    SpinConfig() = default;
    explicit SpinConfig(std::vector<int8_t> s);

    int n() const { return static_cast<int>(spins.size()); }
    double magnetization() const { return (2.0 * plus_count - n()) / n(); }

    void flip(int i) {
        plus_count += (spins[i] > 0) ? -1 : 1;
        spins[i] = static_cast<int8_t>(-spins[i]);
    }

    // One character per spin: '+' or '-'.
    std::string to_line() const;
    static SpinConfig from_line(const std::string& line);
};

// Graph on n labeled vertices as an edge-indicator vector over the
// N = n(n-1)/2 vertex pairs in lexicographic order, with cached edge count
// and degree sequence.
struct GraphSample {
    int n = 0;
    std::vector<uint8_t> edge_indicators;
    long long edge_count = 0;
    std::vector<int> degrees;

    GraphSample() = default;
    explicit GraphSample(int n_);

    static long long pair_count(int n) { return static_cast<long long>(n) * (n - 1) / 2; }
    static long long pair_index(int n, int u, int v);
    static std::pair<int, int> index_pair(int n, long long idx);

    bool has_edge(int u, int v) const { return edge_indicators[pair_index(n, u, v)] != 0; }
    void toggle(int u, int v);

    // Bit string over the lexicographic pair order, e.g. "0110..".
    std::string to_line() const;
    static GraphSample from_line(const std::string& line);

    // Header "n", then one "u v" line per edge.
    void save(std::ostream& os) const;
    static GraphSample load(std::istream& is);
};

// Number of edges with exactly one endpoint in S (S given as a 0/1 mask).
long long cut_size(const RegularGraph& g, const std::vector<uint8_t>& in_subset);
long long cut_size(const RegularGraph& g, const std::vector<int>& subset);

// (1/2) x^T A x = nd/2 - 2*cut, evaluated through the cut identity.
long long quadratic_form(const RegularGraph& g, const SpinConfig& x);
// Same value by direct summation over edges; kept for cross-checking.
long long quadratic_form_direct(const RegularGraph& g, const SpinConfig& x);

// Wedge (2-path) count: sum over vertices of C(deg, 2).
long long wedge_count(const GraphSample& s);

// Change in wedge_count if edge e=(u,v) were toggled, from degrees alone.
long long wedge_delta(const GraphSample& s, int u, int v);

}  // namespace structest
