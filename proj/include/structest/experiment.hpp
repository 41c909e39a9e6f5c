#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "structest/canonical_test.hpp"

namespace structest {

enum class ExperimentMode { IsingThreshold, ErgmThreshold, CltSweep, TvCollapse, Calibration };

std::string to_string(ExperimentMode m);
ExperimentMode experiment_mode_from_string(const std::string& s);

// Inputs of threshold_from_rule; the derived T is recorded in the report.
struct AutoThresholdRule {
    double tau = 0.0;
    double L = 0.0;
    double c = 1.0;
};

// Mirrors the JSON config document accepted by `structest experiment`.
// Grids are cross products; every list a mode uses must be nonempty.
struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::IsingThreshold;
    std::string family = "ising";  // tv-collapse / calibration: "ising" or "ergm"

    std::vector<int> n_values;
    std::vector<int> d_values;      // spin instances only
    std::vector<double> couplings;  // absolute beta (spins) or beta2 (graphs)
    std::vector<double> products;   // beta*sqrt(nd) or beta2*sqrt(n); exclusive with couplings
    std::vector<double> alt_h{0.0};
    double match_p = 0.5;  // density the graph null is matched at

    // Null-hypothesis parameter sub-grids (type-1 rates take the worst case).
    std::vector<double> null_betas{0.0, 0.5, 1.0, 1.5};
    std::vector<double> null_hs{-0.2, 0.0, 0.2};
    std::vector<double> null_ps{0.2, 0.35, 0.5, 0.65, 0.8};

    double epsilon = 0.1;
    double delta = 0.1;
    double beta_max = 1.5;
    double h_max = 0.2;

    std::optional<double> threshold;
    std::optional<AutoThresholdRule> auto_threshold;
    std::vector<double> threshold_grid;  // calibration mode

    std::vector<double> s_values{0.5};  // clt-sweep sphere fractions

    std::string graph_kind = "circulant";  // or "random-regular"
    std::optional<uint64_t> graph_seed;    // defaults to seed
    long replicates = 2000;
    int sweeps = 0;  // 0 = sampler default
    uint64_t seed = 1;
    int workers = 1;
    std::string out_csv;
    std::string out_json;
};

// Strict parse (unknown or mode-inapplicable keys rejected) plus per-mode
// validation. Throws std::invalid_argument with a "config:" message.
ExperimentConfig parse_experiment_config(const std::string& json_text);

// One alternative grid point of a threshold experiment, with the worst-case
// type-1 rate of its instance and the §risk max(worst type-1, type-2).
struct ThresholdPointSummary {
    int n = 0;
    int d = 0;  // 0 for graph experiments
    double product = 0.0;
    double coupling = 0.0;
    double h = 0.0;  // spin alternatives only
    double threshold = 0.0;
    double worst_type1 = 0.0;
    double type2 = 0.0;
    double risk = 0.0;
    std::optional<double> analytic_bound;
};

struct CltPointSummary {
    int n = 0;
    int d = 0;
    double s = 0.0;
    int l = 0;
    long trials = 0;
    double ks = 0.0;
    double bound_c1 = 0.0;  // (d/n)^{1/4}
};

struct TvPointSummary {
    std::string family;
    int n = 0;
    int d = 0;  // 0 for graphs
    double product = 0.0;
    double coupling = 0.0;
    double matched = 0.0;  // matched mean-field coupling (beta_cw or beta1)
    double h = 0.0;
    double tv = 0.0;
};

struct CalibrationRow {
    double beta = 0.0;  // null parameters (beta,h) or p
    double h = 0.0;
    double p = 0.0;
    double threshold = 0.0;
    long rejections = 0;
    double rate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double bound = 0.0;  // alpha_exact + (1 - Phi(T)) + tau, capped at 1
    double alpha_hat = 0.0;
    double alpha_exact = 0.0;
};

struct ExperimentReport {
    ExperimentMode mode = ExperimentMode::IsingThreshold;

    // Formatted output; the trailing wall_ms column is the only timing column
    // and is excluded from reproducibility comparisons.
    std::vector<std::string> csv_header;
    std::vector<std::vector<std::string>> csv_rows;
    std::string sidecar_json;  // config echo + mode summary + "timing" subtree

    // Typed summaries by mode.
    std::vector<ThresholdPointSummary> points;
    double worst_risk = 0.0;
    std::vector<CltPointSummary> clt;
    double clt_fit_gamma = 0.0;  // exponent of KS ~ K (d/n)^gamma; NaN if < 2 ratios
    double clt_fit_scale = 0.0;
    std::vector<TvPointSummary> tv;
    std::vector<CalibrationRow> calibration;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Writes out_csv / out_json when set; throws std::runtime_error on I/O errors.
void write_report_files(const ExperimentConfig& cfg, const ExperimentReport& rep);

// RFC-4180 cell escaping: quotes only when the cell needs it.
std::string csv_escape(const std::string& cell);

// Calls fn(0..count-1) across `workers` threads in a strided split. fn must
// write to a preallocated slot for its index; aggregation after the join is
// then independent of scheduling. The first worker exception is rethrown.
void parallel_for(long count, int workers, const std::function<void(long)>& fn);

}  // namespace structest
