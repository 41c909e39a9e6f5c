#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "structest/canonical_test.hpp"
#include "structest/exact_oracle.hpp"
#include "structest/experiment.hpp"
#include "structest/graph.hpp"
#include "structest/moments.hpp"
#include "structest/rng.hpp"
#include "structest/samplers.hpp"

namespace {

using nlohmann::json;
using namespace structest;

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

// Shared instance-graph flags: load a saved graph or generate one.
struct GraphOpts {
    std::string file;
    std::string kind = "circulant";
    std::optional<uint64_t> gseed;
};

void add_graph_flags(CLI::App* sub, GraphOpts& g) {
    sub->add_option("--graph", g.file, "load the d-regular instance from FILE");
    sub->add_option("--graph-kind", g.kind, "generated instance kind")
        ->check(CLI::IsMember({"circulant", "random-regular"}));
    sub->add_option("--graph-seed", g.gseed, "seed for random-regular generation");
}

RegularGraph resolve_graph(const GraphOpts& g, int n, int d, uint64_t fallback_seed) {
    if (!g.file.empty()) {
        std::ifstream is(g.file);
        if (!is) throw std::invalid_argument("cannot open " + g.file);
        RegularGraph gr = RegularGraph::load(is);
        if (gr.n != n || gr.d != d)
            throw std::invalid_argument("graph file is (" + std::to_string(gr.n) + "," +
                                        std::to_string(gr.d) + "), flags say (" +
                                        std::to_string(n) + "," + std::to_string(d) + ")");
        return gr;
    }
    if (g.kind == "circulant") return RegularGraph::circulant(n, d);
    return RegularGraph::random_regular(n, d, g.gseed.value_or(fallback_seed));
}

json decision_json(const Decision& dec) {
    json j;
    j["verdict"] = dec.verdict == Verdict::H1 ? "H1" : "H0";
    j["standardized"] = dec.standardized ? json(*dec.standardized) : json(nullptr);
    j["sphere_label"] = dec.sphere_label;
    j["threshold"] = dec.threshold_used;
    return j;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleOpts {
    std::string model;
    int n = 0;
    int d = 0;
    double beta = 0.0;
    double h = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double p = 0.5;
    int sweeps = 0;
    uint64_t seed = 1;
    long count = 1;
    std::string out;
    std::string save_graph;
    GraphOpts graph;
};

void run_sample(const SampleOpts& o) {
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) throw std::invalid_argument("cannot open " + o.out);
        os = &file;
    }
    if (o.n < 1) throw std::invalid_argument("--n must be >= 1");
    if (o.count < 1) throw std::invalid_argument("--count must be >= 1");

    if (o.model == "cw") {
        const CurieWeissParams params{o.n, o.beta, o.h};
        for (long i = 0; i < o.count; ++i) {
            Rng rng(o.seed, static_cast<uint64_t>(i));
            *os << sample_curie_weiss(params, rng).to_line() << '\n';
        }
    } else if (o.model == "ising") {
        const RegularGraph g = resolve_graph(o.graph, o.n, o.d, o.seed);
        if (!o.save_graph.empty()) {
            std::ofstream gs(o.save_graph);
            if (!gs) throw std::invalid_argument("cannot open " + o.save_graph);
            g.save(gs);
            if (!gs) throw std::runtime_error("write failed: " + o.save_graph);
        }
        const DRegIsingParams params{&g, o.beta, o.h};
        const int sweeps = o.sweeps > 0 ? o.sweeps : default_sweeps(o.n);
        for (long i = 0; i < o.count; ++i) {
            Rng rng(o.seed, static_cast<uint64_t>(i));
            *os << sample_dreg_ising(params, sweeps, rng).to_line() << '\n';
        }
    } else if (o.model == "er") {
        for (long i = 0; i < o.count; ++i) {
            Rng rng(o.seed, static_cast<uint64_t>(i));
            *os << sample_er(o.n, o.p, rng).to_line() << '\n';
        }
    } else if (o.model == "ergm") {
        const ErgmParams params{o.n, o.beta1, o.beta2};
        const int sweeps =
            o.sweeps > 0 ? o.sweeps : default_sweeps(GraphSample::pair_count(o.n));
        for (long i = 0; i < o.count; ++i) {
            Rng rng(o.seed, static_cast<uint64_t>(i));
            *os << sample_ergm(params, sweeps, rng).to_line() << '\n';
        }
    } else {
        throw std::invalid_argument("--model must be one of cw, ising, er, ergm");
    }
    if (!*os) throw std::runtime_error("write failed");
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

struct TestOpts {
    std::string mode;
    std::string graph_file;
    std::string sample_file;
    double epsilon = 0.1;
    double delta = 0.1;
    std::optional<double> T;
    bool auto_threshold = false;
    double Ln = 0.0;
    double c = 1.0;
    double tau = 0.0;
};

void run_test(const TestOpts& o) {
    if (o.T.has_value() == o.auto_threshold)
        throw std::invalid_argument("give exactly one of --T and --auto-threshold");
    const double T = o.T ? *o.T : threshold_from_rule(o.tau, o.Ln, o.c);
    const auto lines = read_lines(o.sample_file);
    if (lines.empty()) throw std::invalid_argument("no samples in " + o.sample_file);

    if (o.mode == "ising") {
        if (o.graph_file.empty()) throw std::invalid_argument("--graph is required for ising");
        std::ifstream is(o.graph_file);
        if (!is) throw std::invalid_argument("cannot open " + o.graph_file);
        const RegularGraph g = RegularGraph::load(is);
        IsingTestConfig cfg;
        cfg.graph = &g;
        cfg.epsilon = o.epsilon;
        cfg.threshold = T;
        for (const auto& line : lines) {
            const SpinConfig x = SpinConfig::from_line(line);
            std::cout << decision_json(ising_test(x, cfg)).dump() << "\n";
        }
    } else if (o.mode == "ergm") {
        if (!o.graph_file.empty())
            throw std::invalid_argument("--graph does not apply to ergm mode");
        for (const auto& line : lines) {
            const GraphSample s = GraphSample::from_line(line);
            ErgmTestConfig cfg;
            cfg.n = s.n;
            cfg.delta = o.delta;
            cfg.threshold = T;
            std::cout << decision_json(ergm_test(s, cfg)).dump() << "\n";
        }
    } else {
        throw std::invalid_argument("--mode must be ising or ergm");
    }
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

struct MomentsOpts {
    std::string kind = "quad";
    int n = 0;
    int d = 0;
    int l = 0;
    long long m = 0;
};

void run_moments(const MomentsOpts& o) {
    json j;
    j["kind"] = o.kind;
    j["n"] = o.n;
    if (o.kind == "quad") {
        const ConditionalMoments mom = quad_form_moments(o.n, o.d, o.l);
        j["d"] = o.d;
        j["l"] = o.l;
        j["mean"] = mom.mean;
        j["variance"] = mom.variance;
    } else if (o.kind == "wedge") {
        const ConditionalMoments mom = wedge_moments(o.n, o.m);
        j["m"] = o.m;
        j["mean"] = mom.mean;
        j["variance"] = mom.variance;
    } else {
        throw std::invalid_argument("--kind must be quad or wedge");
    }
    std::cout << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// oracle {tv, moments, bounds}
// ---------------------------------------------------------------------------

struct OracleTvOpts {
    std::string family = "ising";
    int n = 0;
    int d = 0;
    double beta = 0.0;
    double h = 0.0;
    double beta2 = 0.0;
    double p = 0.5;
    std::optional<double> beta_cw;
    std::optional<double> h_cw;
    std::optional<double> beta1;
    GraphOpts graph;
};

void run_oracle_tv(const OracleTvOpts& o) {
    json j;
    j["family"] = o.family;
    j["n"] = o.n;
    if (o.family == "ising") {
        const RegularGraph g = resolve_graph(o.graph, o.n, o.d, 1);
        const DRegIsingParams alt{&g, o.beta, o.h};
        CurieWeissParams null_params = matched_null_ising(o.beta, o.h, o.n, o.d);
        const bool matched = !o.beta_cw && !o.h_cw;
        if (o.beta_cw) null_params.beta = *o.beta_cw;
        if (o.h_cw) null_params.h = *o.h_cw;
        j["alternative"] = {{"beta", o.beta}, {"h", o.h}, {"d", o.d}};
        j["null"] = {{"beta_cw", null_params.beta}, {"h_cw", null_params.h},
                     {"matched", matched}};
        j["tv"] = tv_distance(exact_ising_distribution(alt),
                              exact_ising_distribution(null_params));
    } else if (o.family == "ergm") {
        const double beta1 = o.beta1 ? *o.beta1 : matched_null_ergm(o.beta2, o.p, o.n);
        const ErgmParams alt{o.n, beta1, o.beta2};
        j["alternative"] = {{"beta1", beta1}, {"beta2", o.beta2}};
        j["null"] = {{"p", o.p}, {"matched", !o.beta1.has_value()}};
        j["tv"] = tv_distance(exact_ergm_distribution(alt), exact_er_distribution(o.n, o.p));
    } else {
        throw std::invalid_argument("--family must be ising or ergm");
    }
    std::cout << j.dump(2) << "\n";
}

struct OracleMomentsOpts {
    std::string kind = "quad";
    int n = 0;
    int d = 0;
    int l = 0;
    int m = 0;
    long long cap = 10000000;
    GraphOpts graph;
};

void run_oracle_moments(const OracleMomentsOpts& o) {
    json j;
    j["kind"] = o.kind;
    j["n"] = o.n;
    ConditionalMoments brute, formula;
    if (o.kind == "quad") {
        const RegularGraph g = resolve_graph(o.graph, o.n, o.d, 1);
        const ConditionalMoments cut = conditional_cut_moments_oracle(g, o.l, o.cap);
        brute.mean = o.n * o.d / 2.0 - 2.0 * cut.mean;
        brute.variance = 4.0 * cut.variance;
        formula = quad_form_moments(o.n, o.d, o.l);
        j["d"] = o.d;
        j["l"] = o.l;
    } else if (o.kind == "wedge") {
        brute = conditional_wedge_moments_oracle(o.n, o.m, o.cap);
        formula = wedge_moments(o.n, o.m);
        j["m"] = o.m;
    } else {
        throw std::invalid_argument("--kind must be quad or wedge");
    }
    j["enumeration"] = {{"mean", brute.mean}, {"variance", brute.variance}};
    j["formula"] = {{"mean", formula.mean}, {"variance", formula.variance}};
    j["max_abs_diff"] = std::max(std::abs(brute.mean - formula.mean),
                                 std::abs(brute.variance - formula.variance));
    std::cout << j.dump(2) << "\n";
}

struct OracleBoundsOpts {
    int n = 0;
    int d = 0;
    int q_max = 3;
    double slack = 8.0;
    long draws = 1000000;
    double epsilon = 0.1;
    uint64_t seed = 1;
    bool marginal = false;
    GraphOpts graph;
};

void run_oracle_bounds(const OracleBoundsOpts& o) {
    const RegularGraph g = resolve_graph(o.graph, o.n, o.d, o.seed);
    const MomentBoundReport rep =
        moment_bound_check(g, o.marginal, o.q_max, o.slack, o.draws, o.epsilon, o.seed);
    json rows = json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"l", r.l},
                        {"q", r.q},
                        {"moment", r.moment},
                        {"bound", r.bound},
                        {"ratio", r.ratio},
                        {"jackknife_se", r.jackknife_se},
                        {"exact", r.exact},
                        {"ok", r.ok}});
    }
    json mgf = json::array();
    for (const auto& r : rep.mgf) {
        mgf.push_back({{"gamma", r.gamma}, {"empirical", r.empirical}, {"bound", r.bound}});
    }
    json j;
    j["n"] = o.n;
    j["d"] = o.d;
    j["mode"] = o.marginal ? "marginal" : "conditional";
    j["slack"] = o.slack;
    j["rows"] = rows;
    j["mgf"] = mgf;
    j["all_ok"] = rep.all_ok;
    std::cout << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

void run_experiment_cmd(const std::string& config_path) {
    const ExperimentConfig cfg = parse_experiment_config(read_file(config_path));
    const ExperimentReport rep = run_experiment(cfg);
    write_report_files(cfg, rep);
    if (cfg.out_csv.empty()) {
        for (std::size_t i = 0; i < rep.csv_header.size(); ++i) {
            if (i) std::cout << ',';
            std::cout << csv_escape(rep.csv_header[i]);
        }
        std::cout << '\n';
        for (const auto& row : rep.csv_rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) std::cout << ',';
                std::cout << csv_escape(row[i]);
            }
            std::cout << '\n';
        }
    }
    if (rep.mode == ExperimentMode::IsingThreshold ||
        rep.mode == ExperimentMode::ErgmThreshold) {
        std::cerr << "worst_risk=" << rep.worst_risk << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-sample tests of structured vs mean-field dependence"};
    app.require_subcommand(1);

    SampleOpts sample_opts;
    auto* sample = app.add_subcommand("sample", "draw model configurations, one per line");
    sample->set_help_flag("--help", "print help");  // frees -h for the field flag
    sample->add_option("--model", sample_opts.model, "cw | ising | er | ergm")->required();
    sample->add_option("--n", sample_opts.n, "number of sites / vertices")->required();
    sample->add_option("--d", sample_opts.d, "instance degree (ising)");
    sample->add_option("--beta", sample_opts.beta, "coupling (cw, ising)");
    sample->add_option("--h", sample_opts.h, "external field (cw, ising)");
    sample->add_option("--beta1", sample_opts.beta1, "edge coefficient (ergm)");
    sample->add_option("--beta2", sample_opts.beta2, "wedge coefficient (ergm)");
    sample->add_option("--p", sample_opts.p, "edge probability (er)");
    sample->add_option("--sweeps", sample_opts.sweeps, "chain sweeps (0 = default)");
    sample->add_option("--seed", sample_opts.seed, "RNG seed; draw i uses stream i");
    sample->add_option("--count", sample_opts.count, "number of samples");
    sample->add_option("--out", sample_opts.out, "output file (default stdout)");
    sample->add_option("--save-graph", sample_opts.save_graph,
                       "write the resolved instance (ising) to FILE");
    add_graph_flags(sample, sample_opts.graph);
    sample->callback([&] { run_sample(sample_opts); });

    TestOpts test_opts;
    auto* test = app.add_subcommand("test", "apply the canonical decision rule to samples");
    test->add_option("--mode", test_opts.mode, "ising | ergm")->required();
    test->add_option("--graph", test_opts.graph_file, "d-regular instance file (ising)");
    test->add_option("--sample", test_opts.sample_file, "sample file, one config per line")
        ->required();
    test->add_option("--epsilon", test_opts.epsilon, "magnetization band parameter");
    test->add_option("--delta", test_opts.delta, "edge-density band parameter");
    test->add_option("--T", test_opts.T, "decision threshold");
    test->add_flag("--auto-threshold", test_opts.auto_threshold,
                   "derive T from (tau, Ln, c)");
    test->add_option("--Ln", test_opts.Ln, "scaling parameter L_n for --auto-threshold");
    test->add_option("--c", test_opts.c, "rate constant for --auto-threshold");
    test->add_option("--tau", test_opts.tau, "CLT slack tau_n for --auto-threshold");
    test->callback([&] { run_test(test_opts); });

    MomentsOpts mom_opts;
    auto* mom = app.add_subcommand("moments", "closed-form conditional moments as JSON");
    mom->add_option("--kind", mom_opts.kind, "quad | wedge");
    mom->add_option("--n", mom_opts.n, "sites (quad) or vertices (wedge)")->required();
    mom->add_option("--d", mom_opts.d, "degree (quad)");
    mom->add_option("--l", mom_opts.l, "plus-spin count (quad)");
    mom->add_option("--m", mom_opts.m, "edge count (wedge)");
    mom->callback([&] { run_moments(mom_opts); });

    auto* oracle = app.add_subcommand("oracle", "exact small-instance checks");
    oracle->require_subcommand(1);

    OracleTvOpts tv_opts;
    auto* otv = oracle->add_subcommand("tv", "exact total variation to the matched null");
    otv->set_help_flag("--help", "print help");  // frees -h for the field flag
    otv->add_option("--family", tv_opts.family, "ising | ergm");
    otv->add_option("--n", tv_opts.n, "sites / vertices")->required();
    otv->add_option("--d", tv_opts.d, "instance degree (ising)");
    otv->add_option("--beta", tv_opts.beta, "alternative coupling (ising)");
    otv->add_option("--h", tv_opts.h, "alternative field (ising)");
    otv->add_option("--beta2", tv_opts.beta2, "wedge coefficient (ergm)");
    otv->add_option("--p", tv_opts.p, "null edge probability (ergm)");
    otv->add_option("--beta-cw", tv_opts.beta_cw, "override the matched null coupling");
    otv->add_option("--h-cw", tv_opts.h_cw, "override the matched null field");
    otv->add_option("--beta1", tv_opts.beta1, "override the matched edge coefficient");
    add_graph_flags(otv, tv_opts.graph);
    otv->callback([&] { run_oracle_tv(tv_opts); });

    OracleMomentsOpts omom_opts;
    auto* omom = oracle->add_subcommand("moments", "enumerated vs closed-form moments");
    omom->add_option("--kind", omom_opts.kind, "quad | wedge");
    omom->add_option("--n", omom_opts.n, "sites / vertices")->required();
    omom->add_option("--d", omom_opts.d, "degree (quad)");
    omom->add_option("--l", omom_opts.l, "plus-spin count (quad)");
    omom->add_option("--m", omom_opts.m, "edge count (wedge)");
    omom->add_option("--cap", omom_opts.cap, "enumeration size cap");
    add_graph_flags(omom, omom_opts.graph);
    omom->callback([&] { run_oracle_moments(omom_opts); });

    OracleBoundsOpts ob_opts;
    auto* ob = oracle->add_subcommand("bounds", "even central moment bound check");
    ob->add_option("--n", ob_opts.n, "sites")->required();
    ob->add_option("--d", ob_opts.d, "degree")->required();
    ob->add_option("--q-max", ob_opts.q_max, "highest moment order 2q");
    ob->add_option("--slack", ob_opts.slack, "slack constant C in 2(2q)!(Cnd)^q");
    ob->add_option("--draws", ob_opts.draws, "Monte Carlo draws per sphere");
    ob->add_option("--epsilon", ob_opts.epsilon, "central band parameter");
    ob->add_option("--seed", ob_opts.seed, "RNG seed");
    ob->add_flag("--marginal", ob_opts.marginal, "uniform-over-spins instead of per-sphere");
    add_graph_flags(ob, ob_opts.graph);
    ob->callback([&] { run_oracle_bounds(ob_opts); });

    std::string config_path;
    auto* exp = app.add_subcommand("experiment", "run a JSON-configured experiment");
    exp->add_option("--config", config_path, "experiment config file")->required();
    exp->callback([&] { run_experiment_cmd(config_path); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
