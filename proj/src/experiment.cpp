#include "structest/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/binomial.hpp>
#include <json.hpp>

#include "structest/exact_oracle.hpp"
#include "structest/rng.hpp"
#include "structest/samplers.hpp"
#include "structest/stats.hpp"

namespace structest {

using nlohmann::json;

std::string to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::IsingThreshold: return "ising-threshold";
        case ExperimentMode::ErgmThreshold: return "ergm-threshold";
        case ExperimentMode::CltSweep: return "clt-sweep";
        case ExperimentMode::TvCollapse: return "tv-collapse";
        case ExperimentMode::Calibration: return "calibration";
    }
    throw std::logic_error("unreachable experiment mode");
}

ExperimentMode experiment_mode_from_string(const std::string& s) {
    if (s == "ising-threshold") return ExperimentMode::IsingThreshold;
    if (s == "ergm-threshold") return ExperimentMode::ErgmThreshold;
    if (s == "clt-sweep") return ExperimentMode::CltSweep;
    if (s == "tv-collapse") return ExperimentMode::TvCollapse;
    if (s == "calibration") return ExperimentMode::Calibration;
    throw std::invalid_argument("config: unknown mode '" + s + "'");
}

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char ch : cell) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

void parallel_for(long count, int workers, const std::function<void(long)>& fn) {
    if (count <= 0) return;
    const int w = std::max(1, workers);
    if (w == 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mu;
    pool.reserve(w);
    for (int t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (long i = t; i < count; i += w) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

[[noreturn]] void config_error(const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt(long long v) { return std::to_string(v); }
std::string fmt(long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    long long ms() const {
        auto dt = std::chrono::steady_clock::now() - t0;
        return std::chrono::duration_cast<std::chrono::milliseconds>(dt).count();
    }
};

// Hands out disjoint RNG stream blocks in configuration order, so replicate r
// of the k-th Monte Carlo block always sees the same stream id no matter how
// many workers execute it.
struct StreamAllocator {
    uint64_t cursor = 0;
    uint64_t block(long count) {
        uint64_t base = cursor;
        cursor += static_cast<uint64_t>(count);
        return base;
    }
};

struct RateBlock {
    long errors = 0;
    long trials = 0;
    double rate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    uint64_t stream_base = 0;
    long long wall_ms = 0;
};

// Runs R independent replicates of `draw` (true = error event) and packages
// the rate with its Wilson interval.
template <class Draw>
RateBlock mc_rate(long replicates, int workers, uint64_t seed, uint64_t stream_base,
                  Draw&& draw) {
    Timer tm;
    std::vector<uint8_t> err(static_cast<std::size_t>(replicates), 0);
    parallel_for(replicates, workers, [&](long r) {
        Rng rng(seed, stream_base + static_cast<uint64_t>(r));
        err[static_cast<std::size_t>(r)] = draw(rng) ? 1 : 0;
    });
    RateBlock b;
    b.trials = replicates;
    b.errors = static_cast<long>(std::count(err.begin(), err.end(), uint8_t{1}));
    b.rate = static_cast<double>(b.errors) / static_cast<double>(replicates);
    std::tie(b.ci_lo, b.ci_hi) = wilson_interval(b.errors, replicates);
    b.stream_base = stream_base;
    b.wall_ms = tm.ms();
    return b;
}

RegularGraph make_instance(const ExperimentConfig& cfg, int n, int d) {
    if (cfg.graph_kind == "circulant") return RegularGraph::circulant(n, d);
    return RegularGraph::random_regular(n, d, cfg.graph_seed.value_or(cfg.seed));
}

double resolve_threshold(const ExperimentConfig& cfg) {
    if (cfg.threshold) return *cfg.threshold;
    const auto& r = *cfg.auto_threshold;
    return threshold_from_rule(r.tau, r.L, r.c);
}

// Exact band-miss probability of the Curie-Weiss null: the sphere marginal is
// available in closed form, so alpha needs no sampling.
double cw_alpha_exact(const CurieWeissParams& p, double epsilon) {
    const auto w = curie_weiss_sphere_weights(p);
    double alpha = 0.0;
    for (int l = 0; l <= p.n; ++l) {
        const double m = (2.0 * l - p.n) / p.n;
        if (m < -1.0 + epsilon || m > 1.0 - epsilon) alpha += w[static_cast<std::size_t>(l)];
    }
    return alpha;
}

// Same for G(n,p): the edge count is Binomial(N, p).
double er_alpha_exact(int n, double p, double delta) {
    const long long N = GraphSample::pair_count(n);
    const double Nd = static_cast<double>(N);
    const double lo = delta * Nd / 2.0;
    const double hi = (1.0 - delta / 2.0) * Nd;
    boost::math::binomial_distribution<double> bin(Nd, p);
    double alpha = 0.0;
    for (long long e = 0; e <= N; ++e) {
        const double ed = static_cast<double>(e);
        if (ed < lo || ed > hi) alpha += boost::math::pdf(bin, ed);
    }
    return alpha;
}

struct AxisPoint {
    double coupling = 0.0;
    double product = 0.0;
};

// The coupling axis can be given either as absolute couplings or as the
// dimensionless products; rows always carry both representations.
std::vector<AxisPoint> coupling_axis(const ExperimentConfig& cfg, double scale) {
    std::vector<AxisPoint> axis;
    if (!cfg.products.empty()) {
        for (double p : cfg.products) axis.push_back({p / scale, p});
    } else {
        for (double c : cfg.couplings) axis.push_back({c, c * scale});
    }
    return axis;
}

json rate_json(const RateBlock& b) {
    return json{{"errors", b.errors},
                {"trials", b.trials},
                {"rate", b.rate},
                {"ci", {b.ci_lo, b.ci_hi}},
                {"stream_base", b.stream_base}};
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

double num_field(const json& v, const std::string& key) {
    if (!v.is_number()) config_error(key + " must be a number");
    return v.get<double>();
}

long long int_field(const json& v, const std::string& key) {
    if (!v.is_number_integer()) config_error(key + " must be an integer");
    return v.get<long long>();
}

uint64_t u64_field(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0)
        return static_cast<uint64_t>(v.get<long long>());
    config_error(key + " must be a nonnegative integer");
}

std::string str_field(const json& v, const std::string& key) {
    if (!v.is_string()) config_error(key + " must be a string");
    return v.get<std::string>();
}

std::vector<double> num_list(const json& v, const std::string& key) {
    if (!v.is_array()) config_error(key + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) config_error(key + " must contain only numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<int> int_list(const json& v, const std::string& key) {
    if (!v.is_array()) config_error(key + " must be an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) config_error(key + " must contain only integers");
        const long long x = e.get<long long>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
            config_error(key + " entry out of range");
        out.push_back(static_cast<int>(x));
    }
    return out;
}

const std::set<std::string>& allowed_keys(ExperimentMode mode) {
    static const std::set<std::string> common = {"mode",    "seed",    "workers",
                                                 "out_csv", "out_json", "n"};
    static const std::map<ExperimentMode, std::set<std::string>> extra = {
        {ExperimentMode::IsingThreshold,
         {"d", "couplings", "products", "alt_h", "null_betas", "null_hs", "epsilon",
          "beta_max", "h_max", "threshold", "auto_threshold", "replicates", "sweeps",
          "graph", "graph_seed"}},
        {ExperimentMode::ErgmThreshold,
         {"couplings", "products", "match_p", "null_ps", "delta", "threshold",
          "auto_threshold", "replicates", "sweeps"}},
        {ExperimentMode::CltSweep, {"d", "s", "replicates", "graph", "graph_seed"}},
        {ExperimentMode::TvCollapse,
         {"family", "d", "couplings", "products", "alt_h", "match_p", "graph",
          "graph_seed"}},
        {ExperimentMode::Calibration,
         {"family", "d", "null_betas", "null_hs", "null_ps", "epsilon", "delta",
          "beta_max", "h_max", "threshold_grid", "auto_threshold", "replicates", "graph",
          "graph_seed"}},
    };
    static std::map<ExperimentMode, std::set<std::string>> merged = [] {
        std::map<ExperimentMode, std::set<std::string>> m = extra;
        for (auto& [mode, keys] : m) keys.insert(common.begin(), common.end());
        return m;
    }();
    return merged.at(mode);
}

bool spin_family(const ExperimentConfig& cfg) {
    switch (cfg.mode) {
        case ExperimentMode::IsingThreshold:
        case ExperimentMode::CltSweep: return true;
        case ExperimentMode::ErgmThreshold: return false;
        case ExperimentMode::TvCollapse:
        case ExperimentMode::Calibration: return cfg.family == "ising";
    }
    return true;
}

void validate_and_default(ExperimentConfig& cfg) {
    if (cfg.family != "ising" && cfg.family != "ergm")
        config_error("family must be 'ising' or 'ergm'");
    if (cfg.graph_kind != "circulant" && cfg.graph_kind != "random-regular")
        config_error("graph must be 'circulant' or 'random-regular'");
    if (cfg.n_values.empty()) config_error("n grid must be nonempty");
    for (int n : cfg.n_values)
        if (n < 2) config_error("n must be >= 2");
    if (cfg.replicates < 1) config_error("replicates must be >= 1");
    if (cfg.workers < 1) config_error("workers must be >= 1");
    if (cfg.sweeps < 0) config_error("sweeps must be >= 0");
    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) config_error("epsilon must be in (0,1)");
    if (!(cfg.delta > 0.0 && cfg.delta < 0.5)) config_error("delta must be in (0,1/2)");
    if (cfg.beta_max < 0.0 || cfg.h_max < 0.0)
        config_error("beta_max and h_max must be >= 0");

    const bool spins = spin_family(cfg);
    if (spins) {
        if (cfg.d_values.empty()) config_error("d grid must be nonempty");
        for (int d : cfg.d_values)
            if (d < 1) config_error("d must be >= 1");
        for (double h : cfg.alt_h)
            if (std::abs(h) > cfg.h_max) config_error("alt_h entries must satisfy |h| <= h_max");
        if (cfg.alt_h.empty()) config_error("alt_h must be nonempty");
    } else {
        if (!cfg.d_values.empty()) config_error("d does not apply to graph experiments");
        if (!(cfg.match_p > cfg.delta && cfg.match_p < 1.0 - cfg.delta))
            config_error("match_p must lie in (delta, 1-delta)");
    }

    const bool threshold_mode = cfg.mode == ExperimentMode::IsingThreshold ||
                                cfg.mode == ExperimentMode::ErgmThreshold;
    const bool coupling_mode = threshold_mode || cfg.mode == ExperimentMode::TvCollapse;
    if (coupling_mode) {
        if (cfg.products.empty() == cfg.couplings.empty())
            config_error("exactly one of products / couplings must be given");
        for (double v : cfg.products)
            if (v < 0.0) config_error("products must be >= 0");
        for (double v : cfg.couplings)
            if (v < 0.0) config_error("couplings must be >= 0");
    }
    if (threshold_mode) {
        if (cfg.threshold.has_value() == cfg.auto_threshold.has_value())
            config_error("exactly one of threshold / auto_threshold must be given");
        if (cfg.auto_threshold) {
            const auto& r = *cfg.auto_threshold;
            if (r.tau < 0.0) config_error("auto_threshold.tau must be >= 0");
            if (r.tau + std::exp(-r.c * r.L) >= 0.5)
                config_error("auto_threshold: tau + e^{-cL} >= 1/2");
        }
    }

    if (cfg.mode == ExperimentMode::IsingThreshold ||
        (cfg.mode == ExperimentMode::Calibration && spins)) {
        if (cfg.null_betas.empty() || cfg.null_hs.empty())
            config_error("null_betas and null_hs must be nonempty");
        for (double b : cfg.null_betas)
            if (b < 0.0 || b > cfg.beta_max)
                config_error("null_betas must lie in [0, beta_max]");
        for (double h : cfg.null_hs)
            if (std::abs(h) > cfg.h_max) config_error("null_hs must satisfy |h| <= h_max");
        // The band must exclude the degenerate spheres l in {1, n-1}, where
        // the cut is constant and the test statistic is undefined.
        for (int n : cfg.n_values)
            if (!(cfg.epsilon > 2.0 / n))
                config_error("epsilon must exceed 2/n (degenerate spheres inside the band)");
    }
    if (cfg.mode == ExperimentMode::ErgmThreshold ||
        (cfg.mode == ExperimentMode::Calibration && !spins)) {
        if (cfg.null_ps.empty()) config_error("null_ps must be nonempty");
        for (double p : cfg.null_ps)
            if (!(p > cfg.delta && p < 1.0 - cfg.delta))
                config_error("null_ps must lie in (delta, 1-delta)");
        // Same exclusion for edge counts m in {1, N-1}, constant wedge count.
        for (int n : cfg.n_values)
            if (!(cfg.delta > 2.0 / static_cast<double>(GraphSample::pair_count(n))))
                config_error("delta must exceed 2/N (degenerate edge bands inside the band)");
    }

    if (cfg.mode == ExperimentMode::CltSweep) {
        if (cfg.s_values.empty()) config_error("s grid must be nonempty");
        for (double s : cfg.s_values)
            if (!(s > 0.0 && s < 1.0)) config_error("s values must lie in (0,1)");
    }

    if (cfg.mode == ExperimentMode::TvCollapse) {
        const int cap = spins ? kMaxSpinSites : kMaxGraphVertices;
        for (int n : cfg.n_values)
            if (n > cap)
                config_error("tv-collapse: n exceeds the exact enumeration cap " +
                             std::to_string(cap));
    }

    if (cfg.mode == ExperimentMode::Calibration) {
        if (cfg.threshold_grid.empty()) {
            for (int i = 0; i <= 12; ++i) cfg.threshold_grid.push_back(0.25 * i);
        }
        if (cfg.auto_threshold && cfg.auto_threshold->tau < 0.0)
            config_error("auto_threshold.tau must be >= 0");
    }
}

json config_echo(const ExperimentConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["family"] = cfg.family;
    j["n"] = cfg.n_values;
    j["d"] = cfg.d_values;
    j["couplings"] = cfg.couplings;
    j["products"] = cfg.products;
    j["alt_h"] = cfg.alt_h;
    j["match_p"] = cfg.match_p;
    j["null_betas"] = cfg.null_betas;
    j["null_hs"] = cfg.null_hs;
    j["null_ps"] = cfg.null_ps;
    j["epsilon"] = cfg.epsilon;
    j["delta"] = cfg.delta;
    j["beta_max"] = cfg.beta_max;
    j["h_max"] = cfg.h_max;
    j["threshold"] = cfg.threshold ? json(*cfg.threshold) : json(nullptr);
    if (cfg.auto_threshold) {
        j["auto_threshold"] = {{"tau", cfg.auto_threshold->tau},
                               {"L", cfg.auto_threshold->L},
                               {"c", cfg.auto_threshold->c}};
    } else {
        j["auto_threshold"] = nullptr;
    }
    j["threshold_grid"] = cfg.threshold_grid;
    j["s"] = cfg.s_values;
    j["graph"] = cfg.graph_kind;
    j["graph_seed"] = cfg.graph_seed.value_or(cfg.seed);
    j["replicates"] = cfg.replicates;
    j["sweeps"] = cfg.sweeps;
    j["seed"] = cfg.seed;
    j["out_csv"] = cfg.out_csv;
    j["out_json"] = cfg.out_json;
    return j;
}

// ---------------------------------------------------------------------------
// Mode runners. Each fills csv rows + typed summaries and returns the JSON
// summary subtree.
// ---------------------------------------------------------------------------

json run_ising_threshold(const ExperimentConfig& cfg, ExperimentReport& rep) {
    rep.csv_header = {"mode",      "n",      "d",          "graph",  "product",
                      "arm",       "beta",   "h",          "threshold", "trials",
                      "errors",    "error_rate", "ci_lo",  "ci_hi",
                      "analytic_bound", "wall_ms"};
    const double T = resolve_threshold(cfg);
    const std::string mode_cell = to_string(cfg.mode);
    StreamAllocator streams;
    json instances = json::array();
    double worst_risk = 0.0;

    for (int n : cfg.n_values) {
        for (int d : cfg.d_values) {
            const RegularGraph g = make_instance(cfg, n, d);
            const auto table = ising_moments_table(n, d);
            IsingTestConfig tcfg;
            tcfg.graph = &g;
            tcfg.epsilon = cfg.epsilon;
            tcfg.threshold = T;
            tcfg.beta_max = cfg.beta_max;
            tcfg.h_max = cfg.h_max;
            const int sweeps = cfg.sweeps > 0 ? cfg.sweeps : default_sweeps(n);

            double worst_type1 = 0.0;
            double alpha_exact_max = 0.0;
            json null_points = json::array();
            for (double bcw : cfg.null_betas) {
                for (double hcw : cfg.null_hs) {
                    const CurieWeissParams np{n, bcw, hcw};
                    const uint64_t base = streams.block(cfg.replicates);
                    const RateBlock b =
                        mc_rate(cfg.replicates, cfg.workers, cfg.seed, base, [&](Rng& rng) {
                            const SpinConfig x = sample_curie_weiss(np, rng);
                            return ising_test(x, tcfg, table).verdict == Verdict::H1;
                        });
                    worst_type1 = std::max(worst_type1, b.rate);
                    const double a = cw_alpha_exact(np, cfg.epsilon);
                    alpha_exact_max = std::max(alpha_exact_max, a);
                    json jp = rate_json(b);
                    jp["beta_cw"] = bcw;
                    jp["h_cw"] = hcw;
                    jp["alpha_exact"] = a;
                    null_points.push_back(jp);
                    rep.csv_rows.push_back({mode_cell, fmt(n), fmt(d), cfg.graph_kind, "",
                                            "null", fmt(bcw), fmt(hcw), fmt(T),
                                            fmt(b.trials), fmt(b.errors), fmt(b.rate),
                                            fmt(b.ci_lo), fmt(b.ci_hi), "",
                                            fmt(b.wall_ms)});
                }
            }

            std::optional<double> bound;
            if (cfg.auto_threshold) {
                try {
                    bound = error_bound(alpha_exact_max, cfg.auto_threshold->tau, T,
                                        cfg.auto_threshold->L, cfg.auto_threshold->c);
                } catch (const std::exception&) {
                    bound = std::nullopt;
                }
            }

            json alt_points = json::array();
            const double scale = std::sqrt(static_cast<double>(n) * d);
            for (const AxisPoint& ax : coupling_axis(cfg, scale)) {
                for (double h : cfg.alt_h) {
                    const DRegIsingParams ap{&g, ax.coupling, h};
                    const uint64_t base = streams.block(cfg.replicates);
                    const RateBlock b =
                        mc_rate(cfg.replicates, cfg.workers, cfg.seed, base, [&](Rng& rng) {
                            const SpinConfig x = sample_dreg_ising(ap, sweeps, rng);
                            return ising_test(x, tcfg, table).verdict == Verdict::H0;
                        });
                    ThresholdPointSummary ps;
                    ps.n = n;
                    ps.d = d;
                    ps.product = ax.product;
                    ps.coupling = ax.coupling;
                    ps.h = h;
                    ps.threshold = T;
                    ps.worst_type1 = worst_type1;
                    ps.type2 = b.rate;
                    ps.risk = std::max(worst_type1, b.rate);
                    ps.analytic_bound = bound;
                    rep.points.push_back(ps);
                    worst_risk = std::max(worst_risk, ps.risk);
                    json jp = rate_json(b);
                    jp["product"] = ax.product;
                    jp["beta"] = ax.coupling;
                    jp["h"] = h;
                    jp["risk"] = ps.risk;
                    jp["analytic_bound"] = bound ? json(*bound) : json(nullptr);
                    alt_points.push_back(jp);
                    rep.csv_rows.push_back({mode_cell, fmt(n), fmt(d), cfg.graph_kind,
                                            fmt(ax.product), "alt", fmt(ax.coupling),
                                            fmt(h), fmt(T), fmt(b.trials), fmt(b.errors),
                                            fmt(b.rate), fmt(b.ci_lo), fmt(b.ci_hi),
                                            bound ? fmt(*bound) : std::string(),
                                            fmt(b.wall_ms)});
                }
            }

            instances.push_back({{"n", n},
                                 {"d", d},
                                 {"graph", cfg.graph_kind},
                                 {"sweeps_used", sweeps},
                                 {"worst_type1", worst_type1},
                                 {"alpha_exact_max", alpha_exact_max},
                                 {"null", null_points},
                                 {"alts", alt_points}});
        }
    }
    rep.worst_risk = worst_risk;
    return json{{"threshold", T}, {"instances", instances}, {"worst_risk", worst_risk}};
}

json run_ergm_threshold(const ExperimentConfig& cfg, ExperimentReport& rep) {
    rep.csv_header = {"mode",   "n",       "product", "arm",   "p",
                      "beta1",  "beta2",   "threshold", "trials", "errors",
                      "error_rate", "ci_lo", "ci_hi", "analytic_bound", "wall_ms"};
    const double T = resolve_threshold(cfg);
    const std::string mode_cell = to_string(cfg.mode);
    StreamAllocator streams;
    json instances = json::array();
    double worst_risk = 0.0;

    for (int n : cfg.n_values) {
        const long long N = GraphSample::pair_count(n);
        const auto table = ergm_moments_table(n);
        ErgmTestConfig tcfg;
        tcfg.n = n;
        tcfg.delta = cfg.delta;
        tcfg.threshold = T;
        const int sweeps = cfg.sweeps > 0 ? cfg.sweeps : default_sweeps(N);

        double worst_type1 = 0.0;
        double alpha_exact_max = 0.0;
        json null_points = json::array();
        for (double p : cfg.null_ps) {
            const uint64_t base = streams.block(cfg.replicates);
            const RateBlock b =
                mc_rate(cfg.replicates, cfg.workers, cfg.seed, base, [&](Rng& rng) {
                    const GraphSample s = sample_er(n, p, rng);
                    return ergm_test(s, tcfg, table).verdict == Verdict::H1;
                });
            worst_type1 = std::max(worst_type1, b.rate);
            const double a = er_alpha_exact(n, p, cfg.delta);
            alpha_exact_max = std::max(alpha_exact_max, a);
            json jp = rate_json(b);
            jp["p"] = p;
            jp["alpha_exact"] = a;
            null_points.push_back(jp);
            rep.csv_rows.push_back({mode_cell, fmt(n), "", "null", fmt(p), "", "", fmt(T),
                                    fmt(b.trials), fmt(b.errors), fmt(b.rate), fmt(b.ci_lo),
                                    fmt(b.ci_hi), "", fmt(b.wall_ms)});
        }

        std::optional<double> bound;
        if (cfg.auto_threshold) {
            try {
                bound = error_bound(alpha_exact_max, cfg.auto_threshold->tau, T,
                                    cfg.auto_threshold->L, cfg.auto_threshold->c);
            } catch (const std::exception&) {
                bound = std::nullopt;
            }
        }

        json alt_points = json::array();
        const double scale = std::sqrt(static_cast<double>(n));
        for (const AxisPoint& ax : coupling_axis(cfg, scale)) {
            const double beta1 = matched_null_ergm(ax.coupling, cfg.match_p, n);
            const ErgmParams ap{n, beta1, ax.coupling};
            const uint64_t base = streams.block(cfg.replicates);
            const RateBlock b =
                mc_rate(cfg.replicates, cfg.workers, cfg.seed, base, [&](Rng& rng) {
                    const GraphSample s = sample_ergm(ap, sweeps, rng);
                    return ergm_test(s, tcfg, table).verdict == Verdict::H0;
                });
            ThresholdPointSummary ps;
            ps.n = n;
            ps.d = 0;
            ps.product = ax.product;
            ps.coupling = ax.coupling;
            ps.h = 0.0;
            ps.threshold = T;
            ps.worst_type1 = worst_type1;
            ps.type2 = b.rate;
            ps.risk = std::max(worst_type1, b.rate);
            ps.analytic_bound = bound;
            rep.points.push_back(ps);
            worst_risk = std::max(worst_risk, ps.risk);
            json jp = rate_json(b);
            jp["product"] = ax.product;
            jp["beta2"] = ax.coupling;
            jp["beta1"] = beta1;
            jp["match_p"] = cfg.match_p;
            jp["risk"] = ps.risk;
            jp["analytic_bound"] = bound ? json(*bound) : json(nullptr);
            alt_points.push_back(jp);
            rep.csv_rows.push_back({mode_cell, fmt(n), fmt(ax.product), "alt",
                                    fmt(cfg.match_p), fmt(beta1), fmt(ax.coupling), fmt(T),
                                    fmt(b.trials), fmt(b.errors), fmt(b.rate), fmt(b.ci_lo),
                                    fmt(b.ci_hi), bound ? fmt(*bound) : std::string(),
                                    fmt(b.wall_ms)});
        }

        instances.push_back({{"n", n},
                             {"sweeps_used", sweeps},
                             {"worst_type1", worst_type1},
                             {"alpha_exact_max", alpha_exact_max},
                             {"null", null_points},
                             {"alts", alt_points}});
    }
    rep.worst_risk = worst_risk;
    return json{{"threshold", T}, {"instances", instances}, {"worst_risk", worst_risk}};
}

json run_clt_sweep(const ExperimentConfig& cfg, ExperimentReport& rep) {
    rep.csv_header = {"mode", "n",  "d",  "graph",        "s",      "l",
                      "trials", "ks", "ks_bound_c1", "wall_ms"};
    const std::string mode_cell = to_string(cfg.mode);
    StreamAllocator streams;
    json points = json::array();

    for (int n : cfg.n_values) {
        for (int d : cfg.d_values) {
            const RegularGraph g = make_instance(cfg, n, d);
            for (double s : cfg.s_values) {
                int l = static_cast<int>(std::lround(s * n));
                l = std::clamp(l, 0, n);
                const ConditionalMoments mom = quad_form_moments(n, d, l);
                const double sd = std::sqrt(mom.variance);
                if (!(sd > 0.0))
                    throw std::runtime_error("clt-sweep: degenerate sphere at l=" +
                                             std::to_string(l));
                Timer tm;
                const uint64_t base = streams.block(cfg.replicates);
                std::vector<double> vals(static_cast<std::size_t>(cfg.replicates));
                parallel_for(cfg.replicates, cfg.workers, [&](long r) {
                    Rng rng(cfg.seed, base + static_cast<uint64_t>(r));
                    const SpinConfig x = sample_uniform_sphere(n, l, rng);
                    const double q = static_cast<double>(quadratic_form(g, x));
                    vals[static_cast<std::size_t>(r)] = (q - mom.mean) / sd;
                });
                const double ks = ks_to_standard_normal(vals);
                const double bound = ks_bound(n, d);
                CltPointSummary cp;
                cp.n = n;
                cp.d = d;
                cp.s = s;
                cp.l = l;
                cp.trials = cfg.replicates;
                cp.ks = ks;
                cp.bound_c1 = bound;
                rep.clt.push_back(cp);
                points.push_back({{"n", n},
                                  {"d", d},
                                  {"s", s},
                                  {"l", l},
                                  {"trials", cfg.replicates},
                                  {"ks", ks},
                                  {"ks_bound_c1", bound},
                                  {"stream_base", base}});
                rep.csv_rows.push_back({mode_cell, fmt(n), fmt(d), cfg.graph_kind, fmt(s),
                                        fmt(l), fmt(cfg.replicates), fmt(ks), fmt(bound),
                                        fmt(tm.ms())});
            }
        }
    }

    // Least-squares exponent of KS ~ K (d/n)^gamma, usable with >= 2 distinct
    // aspect ratios.
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double kscale = std::numeric_limits<double>::quiet_NaN();
    {
        std::vector<double> xs, ys;
        for (const auto& cp : rep.clt) {
            if (cp.ks > 0.0) {
                xs.push_back(std::log(static_cast<double>(cp.d) / cp.n));
                ys.push_back(std::log(cp.ks));
            }
        }
        std::set<double> distinct(xs.begin(), xs.end());
        if (distinct.size() >= 2) {
            const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
            const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
            double sxx = 0.0, sxy = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxx += (xs[i] - mx) * (xs[i] - mx);
                sxy += (xs[i] - mx) * (ys[i] - my);
            }
            gamma = sxy / sxx;
            kscale = std::exp(my - gamma * mx);
        }
    }
    rep.clt_fit_gamma = gamma;
    rep.clt_fit_scale = kscale;

    json fit = nullptr;
    if (std::isfinite(gamma)) fit = json{{"gamma", gamma}, {"scale", kscale}};
    return json{{"points", points}, {"fit", fit}};
}

json run_tv_collapse(const ExperimentConfig& cfg, ExperimentReport& rep) {
    rep.csv_header = {"mode",    "family", "n",      "d",  "graph", "product",
                      "coupling", "matched", "h",     "null_p", "tv", "wall_ms"};
    const std::string mode_cell = to_string(cfg.mode);
    const bool spins = cfg.family == "ising";
    json sequences = json::array();

    if (spins) {
        // One sequence over the n grid per (axis value, d, h).
        const bool from_products = !cfg.products.empty();
        const std::vector<double>& axis = from_products ? cfg.products : cfg.couplings;
        for (double a : axis) {
            for (int d : cfg.d_values) {
                for (double h : cfg.alt_h) {
                    json seq_points = json::array();
                    std::vector<double> tvs;
                    for (int n : cfg.n_values) {
                        const double scale = std::sqrt(static_cast<double>(n) * d);
                        const double beta = from_products ? a / scale : a;
                        const double product = from_products ? a : a * scale;
                        Timer tm;
                        const RegularGraph g = make_instance(cfg, n, d);
                        const DRegIsingParams ap{&g, beta, h};
                        const CurieWeissParams np = matched_null_ising(beta, h, n, d);
                        const double tv = tv_distance(exact_ising_distribution(ap),
                                                      exact_ising_distribution(np));
                        tvs.push_back(tv);
                        TvPointSummary tp;
                        tp.family = cfg.family;
                        tp.n = n;
                        tp.d = d;
                        tp.product = product;
                        tp.coupling = beta;
                        tp.matched = np.beta;
                        tp.h = h;
                        tp.tv = tv;
                        rep.tv.push_back(tp);
                        seq_points.push_back({{"n", n},
                                              {"beta", beta},
                                              {"beta_cw", np.beta},
                                              {"tv", tv}});
                        rep.csv_rows.push_back({mode_cell, cfg.family, fmt(n), fmt(d),
                                                cfg.graph_kind, fmt(product), fmt(beta),
                                                fmt(np.beta), fmt(h), "", fmt(tv),
                                                fmt(tm.ms())});
                    }
                    bool dec = true, inc = true;
                    for (std::size_t i = 1; i < tvs.size(); ++i) {
                        dec = dec && tvs[i] < tvs[i - 1];
                        inc = inc && tvs[i] > tvs[i - 1];
                    }
                    sequences.push_back({{"product", from_products ? json(a) : json(nullptr)},
                                         {"coupling", from_products ? json(nullptr) : json(a)},
                                         {"d", d},
                                         {"h", h},
                                         {"points", seq_points},
                                         {"monotone_decreasing", dec},
                                         {"monotone_increasing", inc}});
                }
            }
        }
    } else {
        const bool from_products = !cfg.products.empty();
        const std::vector<double>& axis = from_products ? cfg.products : cfg.couplings;
        for (double a : axis) {
            json seq_points = json::array();
            std::vector<double> tvs;
            for (int n : cfg.n_values) {
                const double scale = std::sqrt(static_cast<double>(n));
                const double beta2 = from_products ? a / scale : a;
                const double product = from_products ? a : a * scale;
                Timer tm;
                const double beta1 = matched_null_ergm(beta2, cfg.match_p, n);
                const ErgmParams ap{n, beta1, beta2};
                const double tv = tv_distance(exact_ergm_distribution(ap),
                                              exact_er_distribution(n, cfg.match_p));
                tvs.push_back(tv);
                TvPointSummary tp;
                tp.family = cfg.family;
                tp.n = n;
                tp.d = 0;
                tp.product = product;
                tp.coupling = beta2;
                tp.matched = beta1;
                tp.h = 0.0;
                tp.tv = tv;
                rep.tv.push_back(tp);
                seq_points.push_back({{"n", n},
                                      {"beta2", beta2},
                                      {"beta1", beta1},
                                      {"tv", tv}});
                rep.csv_rows.push_back({mode_cell, cfg.family, fmt(n), "", "", fmt(product),
                                        fmt(beta2), fmt(beta1), "", fmt(cfg.match_p),
                                        fmt(tv), fmt(tm.ms())});
            }
            bool dec = true, inc = true;
            for (std::size_t i = 1; i < tvs.size(); ++i) {
                dec = dec && tvs[i] < tvs[i - 1];
                inc = inc && tvs[i] > tvs[i - 1];
            }
            sequences.push_back({{"product", from_products ? json(a) : json(nullptr)},
                                 {"coupling", from_products ? json(nullptr) : json(a)},
                                 {"points", seq_points},
                                 {"monotone_decreasing", dec},
                                 {"monotone_increasing", inc}});
        }
    }
    return json{{"sequences", sequences}};
}

json run_calibration(const ExperimentConfig& cfg, ExperimentReport& rep) {
    rep.csv_header = {"mode",  "family", "n",     "d",     "graph",  "beta",
                      "h",     "p",      "threshold", "trials", "rejections", "rate",
                      "ci_lo", "ci_hi",  "type1_bound", "alpha_hat", "alpha_exact",
                      "wall_ms"};
    const std::string mode_cell = to_string(cfg.mode);
    const bool spins = cfg.family == "ising";
    const double tau = cfg.auto_threshold ? cfg.auto_threshold->tau : 0.0;
    StreamAllocator streams;
    json points = json::array();

    // One sampling pass per null point; the threshold sweep reuses the stored
    // standardized statistics (band misses reject at every T).
    struct NullDraws {
        std::vector<uint8_t> miss;
        std::vector<double> stat;
        uint64_t stream_base = 0;
        long long wall_ms = 0;
    };
    auto sweep_rows = [&](const NullDraws& nd, double alpha_exact, double beta, double h,
                          double p, int n, int d, json& curve) {
        const long R = cfg.replicates;
        long misses = 0;
        for (uint8_t m : nd.miss) misses += m;
        const double alpha_hat = static_cast<double>(misses) / static_cast<double>(R);
        for (double T : cfg.threshold_grid) {
            long rej = 0;
            for (long r = 0; r < R; ++r) {
                if (nd.miss[static_cast<std::size_t>(r)] ||
                    nd.stat[static_cast<std::size_t>(r)] >= T)
                    ++rej;
            }
            const double rate = static_cast<double>(rej) / static_cast<double>(R);
            const auto [lo, hi] = wilson_interval(rej, R);
            const double bound =
                std::min(1.0, alpha_exact + (1.0 - normal_cdf(T)) + tau);
            CalibrationRow row;
            row.beta = beta;
            row.h = h;
            row.p = p;
            row.threshold = T;
            row.rejections = rej;
            row.rate = rate;
            row.ci_lo = lo;
            row.ci_hi = hi;
            row.bound = bound;
            row.alpha_hat = alpha_hat;
            row.alpha_exact = alpha_exact;
            rep.calibration.push_back(row);
            curve.push_back({{"threshold", T},
                             {"rate", rate},
                             {"ci", {lo, hi}},
                             {"bound", bound}});
            rep.csv_rows.push_back({mode_cell, cfg.family, fmt(n),
                                    spins ? fmt(d) : std::string(),
                                    spins ? cfg.graph_kind : std::string(),
                                    spins ? fmt(beta) : std::string(),
                                    spins ? fmt(h) : std::string(),
                                    spins ? std::string() : fmt(p), fmt(T), fmt(R),
                                    fmt(rej), fmt(rate), fmt(lo), fmt(hi), fmt(bound),
                                    fmt(alpha_hat), fmt(alpha_exact), fmt(nd.wall_ms)});
        }
        return alpha_hat;
    };

    if (spins) {
        for (int n : cfg.n_values) {
            for (int d : cfg.d_values) {
                const RegularGraph g = make_instance(cfg, n, d);
                const auto table = ising_moments_table(n, d);
                IsingTestConfig tcfg;
                tcfg.graph = &g;
                tcfg.epsilon = cfg.epsilon;
                tcfg.threshold = 0.0;
                tcfg.beta_max = cfg.beta_max;
                tcfg.h_max = cfg.h_max;
                for (double bcw : cfg.null_betas) {
                    for (double hcw : cfg.null_hs) {
                        const CurieWeissParams np{n, bcw, hcw};
                        NullDraws nd;
                        nd.miss.assign(static_cast<std::size_t>(cfg.replicates), 0);
                        nd.stat.assign(static_cast<std::size_t>(cfg.replicates), 0.0);
                        nd.stream_base = streams.block(cfg.replicates);
                        Timer tm;
                        parallel_for(cfg.replicates, cfg.workers, [&](long r) {
                            Rng rng(cfg.seed, nd.stream_base + static_cast<uint64_t>(r));
                            const SpinConfig x = sample_curie_weiss(np, rng);
                            const Decision dec = ising_test(x, tcfg, table);
                            if (dec.standardized) {
                                nd.stat[static_cast<std::size_t>(r)] = *dec.standardized;
                            } else {
                                nd.miss[static_cast<std::size_t>(r)] = 1;
                            }
                        });
                        nd.wall_ms = tm.ms();
                        const double a = cw_alpha_exact(np, cfg.epsilon);
                        json curve = json::array();
                        const double alpha_hat =
                            sweep_rows(nd, a, bcw, hcw, 0.0, n, d, curve);
                        points.push_back({{"n", n},
                                          {"d", d},
                                          {"beta_cw", bcw},
                                          {"h_cw", hcw},
                                          {"alpha_hat", alpha_hat},
                                          {"alpha_exact", a},
                                          {"stream_base", nd.stream_base},
                                          {"curve", curve}});
                    }
                }
            }
        }
    } else {
        for (int n : cfg.n_values) {
            const auto table = ergm_moments_table(n);
            ErgmTestConfig tcfg;
            tcfg.n = n;
            tcfg.delta = cfg.delta;
            tcfg.threshold = 0.0;
            for (double p : cfg.null_ps) {
                NullDraws nd;
                nd.miss.assign(static_cast<std::size_t>(cfg.replicates), 0);
                nd.stat.assign(static_cast<std::size_t>(cfg.replicates), 0.0);
                nd.stream_base = streams.block(cfg.replicates);
                Timer tm;
                parallel_for(cfg.replicates, cfg.workers, [&](long r) {
                    Rng rng(cfg.seed, nd.stream_base + static_cast<uint64_t>(r));
                    const GraphSample s = sample_er(n, p, rng);
                    const Decision dec = ergm_test(s, tcfg, table);
                    if (dec.standardized) {
                        nd.stat[static_cast<std::size_t>(r)] = *dec.standardized;
                    } else {
                        nd.miss[static_cast<std::size_t>(r)] = 1;
                    }
                });
                nd.wall_ms = tm.ms();
                const double a = er_alpha_exact(n, p, cfg.delta);
                json curve = json::array();
                const double alpha_hat = sweep_rows(nd, a, 0.0, 0.0, p, n, 0, curve);
                points.push_back({{"n", n},
                                  {"p", p},
                                  {"alpha_hat", alpha_hat},
                                  {"alpha_exact", a},
                                  {"stream_base", nd.stream_base},
                                  {"curve", curve}});
            }
        }
    }
    return json{{"points", points}, {"tau", tau}};
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) config_error("top level must be an object");
    if (!j.contains("mode")) config_error("mode is required");

    ExperimentConfig cfg;
    cfg.mode = experiment_mode_from_string(str_field(j.at("mode"), "mode"));

    const auto& allowed = allowed_keys(cfg.mode);
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            config_error("key '" + item.key() + "' does not apply to mode '" +
                         to_string(cfg.mode) + "'");
    }

    if (j.contains("family")) cfg.family = str_field(j.at("family"), "family");
    if (j.contains("n")) cfg.n_values = int_list(j.at("n"), "n");
    if (j.contains("d")) cfg.d_values = int_list(j.at("d"), "d");
    if (j.contains("couplings")) cfg.couplings = num_list(j.at("couplings"), "couplings");
    if (j.contains("products")) cfg.products = num_list(j.at("products"), "products");
    if (j.contains("alt_h")) cfg.alt_h = num_list(j.at("alt_h"), "alt_h");
    if (j.contains("match_p")) cfg.match_p = num_field(j.at("match_p"), "match_p");
    if (j.contains("null_betas")) cfg.null_betas = num_list(j.at("null_betas"), "null_betas");
    if (j.contains("null_hs")) cfg.null_hs = num_list(j.at("null_hs"), "null_hs");
    if (j.contains("null_ps")) cfg.null_ps = num_list(j.at("null_ps"), "null_ps");
    if (j.contains("epsilon")) cfg.epsilon = num_field(j.at("epsilon"), "epsilon");
    if (j.contains("delta")) cfg.delta = num_field(j.at("delta"), "delta");
    if (j.contains("beta_max")) cfg.beta_max = num_field(j.at("beta_max"), "beta_max");
    if (j.contains("h_max")) cfg.h_max = num_field(j.at("h_max"), "h_max");
    if (j.contains("threshold")) cfg.threshold = num_field(j.at("threshold"), "threshold");
    if (j.contains("auto_threshold")) {
        const json& a = j.at("auto_threshold");
        if (!a.is_object()) config_error("auto_threshold must be an object");
        AutoThresholdRule rule;
        for (const auto& item : a.items()) {
            if (item.key() == "tau") rule.tau = num_field(item.value(), "auto_threshold.tau");
            else if (item.key() == "L") rule.L = num_field(item.value(), "auto_threshold.L");
            else if (item.key() == "c") rule.c = num_field(item.value(), "auto_threshold.c");
            else config_error("auto_threshold: unknown key '" + item.key() + "'");
        }
        if (!a.contains("L")) config_error("auto_threshold.L is required");
        cfg.auto_threshold = rule;
    }
    if (j.contains("threshold_grid"))
        cfg.threshold_grid = num_list(j.at("threshold_grid"), "threshold_grid");
    if (j.contains("s")) cfg.s_values = num_list(j.at("s"), "s");
    if (j.contains("graph")) cfg.graph_kind = str_field(j.at("graph"), "graph");
    if (j.contains("graph_seed")) cfg.graph_seed = u64_field(j.at("graph_seed"), "graph_seed");
    if (j.contains("replicates")) {
        cfg.replicates = static_cast<long>(int_field(j.at("replicates"), "replicates"));
    }
    if (j.contains("sweeps"))
        cfg.sweeps = static_cast<int>(int_field(j.at("sweeps"), "sweeps"));
    if (j.contains("seed")) cfg.seed = u64_field(j.at("seed"), "seed");
    if (j.contains("workers"))
        cfg.workers = static_cast<int>(int_field(j.at("workers"), "workers"));
    if (j.contains("out_csv")) cfg.out_csv = str_field(j.at("out_csv"), "out_csv");
    if (j.contains("out_json")) cfg.out_json = str_field(j.at("out_json"), "out_json");

    validate_and_default(cfg);
    return cfg;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    ExperimentConfig cfg = config;
    validate_and_default(cfg);

    Timer total;
    ExperimentReport rep;
    rep.mode = cfg.mode;
    json summary;
    switch (cfg.mode) {
        case ExperimentMode::IsingThreshold: summary = run_ising_threshold(cfg, rep); break;
        case ExperimentMode::ErgmThreshold: summary = run_ergm_threshold(cfg, rep); break;
        case ExperimentMode::CltSweep: summary = run_clt_sweep(cfg, rep); break;
        case ExperimentMode::TvCollapse: summary = run_tv_collapse(cfg, rep); break;
        case ExperimentMode::Calibration: summary = run_calibration(cfg, rep); break;
    }

    // Timing (and the worker count, which may only affect timing) lives in a
    // single subtree so reproducibility comparisons can drop it wholesale.
    json side;
    side["config"] = config_echo(cfg);
    side["mode"] = to_string(cfg.mode);
    side["summary"] = summary;
    json wall = json::array();
    if (!rep.csv_rows.empty() && !rep.csv_header.empty() &&
        rep.csv_header.back() == "wall_ms") {
        for (const auto& row : rep.csv_rows) wall.push_back(row.back());
    }
    side["timing"] = {{"total_ms", total.ms()},
                      {"workers", cfg.workers},
                      {"rows_wall_ms", wall}};
    rep.sidecar_json = side.dump(2);
    rep.sidecar_json += "\n";
    return rep;
}

void write_report_files(const ExperimentConfig& cfg, const ExperimentReport& rep) {
    auto ensure_parent = [](const std::string& path) {
        const std::filesystem::path p(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    };
    if (!cfg.out_csv.empty()) {
        ensure_parent(cfg.out_csv);
        std::ofstream os(cfg.out_csv);
        if (!os) throw std::runtime_error("cannot open " + cfg.out_csv);
        for (std::size_t i = 0; i < rep.csv_header.size(); ++i) {
            if (i) os << ',';
            os << csv_escape(rep.csv_header[i]);
        }
        os << '\n';
        for (const auto& row : rep.csv_rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) os << ',';
                os << csv_escape(row[i]);
            }
            os << '\n';
        }
        if (!os) throw std::runtime_error("write failed: " + cfg.out_csv);
    }
    if (!cfg.out_json.empty()) {
        ensure_parent(cfg.out_json);
        std::ofstream os(cfg.out_json);
        if (!os) throw std::runtime_error("cannot open " + cfg.out_json);
        os << rep.sidecar_json;
        if (!os) throw std::runtime_error("write failed: " + cfg.out_json);
    }
}

}  // namespace structest
