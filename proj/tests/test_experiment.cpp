#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "structest/canonical_test.hpp"
#include "structest/experiment.hpp"

using namespace structest;
using nlohmann::json;

namespace {

ExperimentConfig parsed(const json& j) { return parse_experiment_config(j.dump()); }

std::vector<std::vector<std::string>> without_wall_ms(
    std::vector<std::vector<std::string>> rows) {
    for (auto& r : rows) r.pop_back();
    return rows;
}

json sidecar_without_timing(const std::string& text) {
    json j = json::parse(text);
    REQUIRE(j.contains("timing"));
    j.erase("timing");
    return j;
}

json tiny_ising_threshold() {
    return json{{"mode", "ising-threshold"},
                {"n", {8}},
                {"d", {2}},
                {"products", {1.0}},
                {"alt_h", {0.0}},
                {"null_betas", {0.0, 0.5}},
                {"null_hs", {0.0}},
                {"epsilon", 0.3},
                {"threshold", 1.0},
                {"replicates", 200},
                {"sweeps", 20},
                {"seed", 7}};
}

}  // namespace

TEST_CASE("config parsing accepts a full document and applies defaults") {
    const ExperimentConfig cfg = parsed(tiny_ising_threshold());
    CHECK(cfg.mode == ExperimentMode::IsingThreshold);
    CHECK(cfg.n_values == std::vector<int>{8});
    CHECK(cfg.d_values == std::vector<int>{2});
    CHECK(cfg.products == std::vector<double>{1.0});
    CHECK(cfg.replicates == 200);
    CHECK(cfg.epsilon == doctest::Approx(0.3));
    CHECK(cfg.delta == doctest::Approx(0.1));
    CHECK(cfg.graph_kind == "circulant");
    CHECK(cfg.workers == 1);
    REQUIRE(cfg.threshold.has_value());
    CHECK(*cfg.threshold == doctest::Approx(1.0));
}

TEST_CASE("config parsing rejects malformed documents") {
    CHECK_THROWS_AS(parse_experiment_config("not json"), std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_config("[1,2]"), std::invalid_argument);
    CHECK_THROWS_AS(parsed(json{{"mode", "nope"}, {"n", {4}}}), std::invalid_argument);

    SUBCASE("unknown keys") {
        json j = tiny_ising_threshold();
        j["bogus"] = 1;
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
    }

    SUBCASE("keys from another mode") {
        json j{{"mode", "clt-sweep"}, {"n", {64}}, {"d", {4}}, {"epsilon", 0.2}};
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
    }

    SUBCASE("products and couplings are exclusive") {
        json j = tiny_ising_threshold();
        j["couplings"] = {0.1};
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
        j.erase("products");
        j.erase("couplings");
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
    }

    SUBCASE("threshold and auto_threshold are exclusive") {
        json j = tiny_ising_threshold();
        j["auto_threshold"] = {{"tau", 0.01}, {"L", 5.0}, {"c", 1.0}};
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
        j.erase("threshold");
        j.erase("auto_threshold");
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
    }

    SUBCASE("auto threshold must leave tail room") {
        json j = tiny_ising_threshold();
        j.erase("threshold");
        j["auto_threshold"] = {{"tau", 0.45}, {"L", 2.0}, {"c", 1.0}};
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
    }

    SUBCASE("null densities must avoid the delta band") {
        json j{{"mode", "ergm-threshold"}, {"n", {4}},      {"products", {0.5}},
               {"null_ps", {0.05}},        {"delta", 0.1},  {"threshold", 1.0},
               {"replicates", 100}};
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
    }

    SUBCASE("tv enumeration caps") {
        json ising{{"mode", "tv-collapse"}, {"family", "ising"}, {"n", {22}},
                   {"d", {2}},              {"couplings", {0.1}}};
        CHECK_THROWS_AS(parsed(ising), std::invalid_argument);
        json ergm{{"mode", "tv-collapse"}, {"family", "ergm"}, {"n", {6}},
                  {"couplings", {0.1}}};
        CHECK_THROWS_AS(parsed(ergm), std::invalid_argument);
    }

    SUBCASE("d is for spin experiments only") {
        json j{{"mode", "calibration"}, {"family", "ergm"},      {"n", {4}},
               {"d", {2}},              {"null_ps", {0.5}},      {"replicates", 100}};
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
    }

    SUBCASE("counts and ranges") {
        json j = tiny_ising_threshold();
        j["replicates"] = 0;
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
        j = tiny_ising_threshold();
        j["workers"] = 0;
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
        j = tiny_ising_threshold();
        j["alt_h"] = {0.5};
        CHECK_THROWS_AS(parsed(j), std::invalid_argument);
        json clt{{"mode", "clt-sweep"}, {"n", {64}}, {"d", {4}}, {"s", {1.5}}};
        CHECK_THROWS_AS(parsed(clt), std::invalid_argument);
    }
}

TEST_CASE("csv escaping") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("") == "");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("parallel_for covers the range and propagates errors") {
    std::vector<long> slots(1000, -1);
    parallel_for(1000, 3, [&](long i) { slots[i] = 2 * i; });
    for (long i = 0; i < 1000; ++i) REQUIRE(slots[i] == 2 * i);

    SUBCASE("more workers than items") {
        std::vector<long> small(3, -1);
        parallel_for(3, 8, [&](long i) { small[i] = i; });
        CHECK(small == std::vector<long>{0, 1, 2});
    }

    SUBCASE("worker exceptions surface") {
        CHECK_THROWS_AS(parallel_for(600, 3,
                                     [&](long i) {
                                         if (i == 500) throw std::runtime_error("boom");
                                     }),
                        std::runtime_error);
    }
}

TEST_CASE("reports are invariant to worker count and reruns") {
    ExperimentConfig cfg = parsed(tiny_ising_threshold());
    const ExperimentReport one = run_experiment(cfg);
    cfg.workers = 3;
    const ExperimentReport three = run_experiment(cfg);

    CHECK(one.csv_header == three.csv_header);
    CHECK(without_wall_ms(one.csv_rows) == without_wall_ms(three.csv_rows));
    CHECK(sidecar_without_timing(one.sidecar_json) ==
          sidecar_without_timing(three.sidecar_json));

    SUBCASE("a rerun with identical config matches even in estimates") {
        const ExperimentReport again = run_experiment(cfg);
        CHECK(without_wall_ms(again.csv_rows) == without_wall_ms(three.csv_rows));
        REQUIRE(again.points.size() == three.points.size());
        CHECK(again.points[0].worst_type1 == three.points[0].worst_type1);
        CHECK(again.points[0].type2 == three.points[0].type2);
    }
}

TEST_CASE("zero coupling anchor: the test cannot separate identical laws") {
    json j{{"mode", "ising-threshold"},
           {"n", {8}},
           {"d", {2}},
           {"products", {0.0}},
           {"alt_h", {0.0}},
           {"null_betas", {0.0}},
           {"null_hs", {0.0}},
           {"epsilon", 0.3},
           {"threshold", 0.0},
           {"replicates", 400},
           {"sweeps", 5},
           {"seed", 5}};
    const ExperimentReport rep = run_experiment(parsed(j));
    REQUIRE(rep.points.size() == 1);
    const double t1 = rep.points[0].worst_type1;
    const double t2 = rep.points[0].type2;
    CHECK(std::abs(t1 + t2 - 1.0) < 0.15);
    CHECK(rep.worst_risk == doctest::Approx(rep.points[0].risk));
}

TEST_CASE("auto threshold rule is applied to the decision") {
    json j = tiny_ising_threshold();
    j.erase("threshold");
    j["auto_threshold"] = {{"tau", 0.01}, {"L", 4.362}, {"c", 1.0}};
    const ExperimentReport rep = run_experiment(parsed(j));
    REQUIRE(!rep.points.empty());
    CHECK(rep.points[0].threshold ==
          doctest::Approx(threshold_from_rule(0.01, 4.362, 1.0)).epsilon(1e-12));
    REQUIRE(rep.points[0].analytic_bound.has_value());
    CHECK(*rep.points[0].analytic_bound > 0.0);
}

TEST_CASE("clt sweep reports small ks and a scaling fit") {
    json j{{"mode", "clt-sweep"}, {"n", {64, 128}}, {"d", {4}},
           {"s", {0.5}},          {"replicates", 4000}, {"seed", 3}};
    const ExperimentReport rep = run_experiment(parsed(j));
    REQUIRE(rep.clt.size() == 2);
    for (const auto& pt : rep.clt) {
        CHECK(pt.ks < 0.1);
        CHECK(pt.trials == 4000);
    }
    CHECK(rep.clt[0].bound_c1 == doctest::Approx(std::pow(4.0 / 64.0, 0.25)).epsilon(1e-12));
    CHECK(std::isfinite(rep.clt_fit_gamma));
}

TEST_CASE("tv grows along n at a fixed large scaling product") {
    json j{{"mode", "tv-collapse"}, {"family", "ising"}, {"n", {8, 10, 12, 14}},
           {"d", {2}},              {"products", {5.0}},  {"alt_h", {0.0}}};
    const ExperimentReport rep = run_experiment(parsed(j));
    REQUIRE(rep.tv.size() == 4);
    for (size_t i = 1; i < rep.tv.size(); ++i) CHECK(rep.tv[i].tv > rep.tv[i - 1].tv);
    CHECK(rep.tv[0].tv == doctest::Approx(0.1124794287).epsilon(1e-8));
    CHECK(rep.tv[3].tv == doctest::Approx(0.6034176672).epsilon(1e-8));
}

TEST_CASE("tv collapse is exactly zero at zero coupling") {
    SUBCASE("spin family") {
        json j{{"mode", "tv-collapse"}, {"family", "ising"}, {"n", {8}},
               {"d", {2}},              {"couplings", {0.0}}, {"alt_h", {0.0}}};
        const ExperimentReport rep = run_experiment(parsed(j));
        REQUIRE(rep.tv.size() == 1);
        CHECK(rep.tv[0].tv <= 1e-12);
    }

    SUBCASE("graph family") {
        json j{{"mode", "tv-collapse"}, {"family", "ergm"}, {"n", {4}},
               {"couplings", {0.0}},    {"match_p", 0.4}};
        const ExperimentReport rep = run_experiment(parsed(j));
        REQUIRE(rep.tv.size() == 1);
        CHECK(rep.tv[0].tv <= 1e-12);
    }
}

TEST_CASE("calibration curve is monotone and anchored at the band rate") {
    json j{{"mode", "calibration"},
           {"family", "ising"},
           {"n", {8}},
           {"d", {2}},
           {"null_betas", {0.5}},
           {"null_hs", {0.0}},
           {"epsilon", 0.3},
           {"threshold_grid", {0.0, 0.5, 1.0, 1.5, 2.0, 50.0}},
           {"replicates", 2000},
           {"seed", 11}};
    const ExperimentReport rep = run_experiment(parsed(j));
    REQUIRE(rep.calibration.size() == 6);
    for (size_t i = 1; i < rep.calibration.size(); ++i)
        CHECK(rep.calibration[i].rate <= rep.calibration[i - 1].rate);
    const CalibrationRow& far = rep.calibration.back();
    CHECK(far.threshold == doctest::Approx(50.0));
    CHECK(far.rate == doctest::Approx(far.alpha_hat).epsilon(1e-12));
    CHECK(std::abs(far.alpha_hat - far.alpha_exact) <= 0.02);
    for (const auto& row : rep.calibration) {
        CHECK(row.rate >= 0.0);
        CHECK(row.rate <= 1.0);
        CHECK(row.ci_lo <= row.rate);
        CHECK(row.ci_hi >= row.rate);
        CHECK(row.alpha_exact == doctest::Approx(far.alpha_exact));
    }
}

TEST_CASE("ergm threshold mode produces well-formed worker-invariant rows") {
    json j{{"mode", "ergm-threshold"},
           {"n", {4}},
           {"products", {0.5}},
           {"match_p", 0.5},
           {"null_ps", {0.5}},
           {"delta", 0.4},
           {"threshold", 1.0},
           {"replicates", 200},
           {"sweeps", 10},
           {"seed", 9}};
    ExperimentConfig cfg = parsed(j);
    const ExperimentReport one = run_experiment(cfg);
    REQUIRE(one.csv_rows.size() == 2);
    for (const auto& row : one.csv_rows) REQUIRE(row.size() == one.csv_header.size());
    REQUIRE(one.points.size() == 1);
    CHECK(one.points[0].worst_type1 >= 0.0);
    CHECK(one.points[0].worst_type1 <= 1.0);
    CHECK(one.points[0].type2 >= 0.0);
    CHECK(one.points[0].type2 <= 1.0);

    cfg.workers = 2;
    const ExperimentReport two = run_experiment(cfg);
    CHECK(without_wall_ms(one.csv_rows) == without_wall_ms(two.csv_rows));
}

TEST_CASE("report files are written with the config echoed sans worker count") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "structest_report_test";
    std::error_code ec;
    fs::remove_all(dir, ec);

    ExperimentConfig cfg = parsed(tiny_ising_threshold());
    cfg.replicates = 50;
    cfg.workers = 2;
    cfg.out_csv = (dir / "sub" / "report.csv").string();
    cfg.out_json = (dir / "sub" / "report.json").string();
    const ExperimentReport rep = run_experiment(cfg);
    write_report_files(cfg, rep);

    std::ifstream csv(cfg.out_csv);
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    std::string want;
    for (size_t i = 0; i < rep.csv_header.size(); ++i) {
        if (i) want += ",";
        want += rep.csv_header[i];
    }
    CHECK(header == want);
    size_t data_lines = 0;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty()) ++data_lines;
    CHECK(data_lines == rep.csv_rows.size());

    std::ifstream js(cfg.out_json);
    REQUIRE(js.good());
    const json side = json::parse(js);
    REQUIRE(side.contains("config"));
    CHECK_FALSE(side["config"].contains("workers"));
    REQUIRE(side.contains("timing"));
    CHECK(side["timing"]["workers"] == 2);
    CHECK(side["timing"].contains("total_ms"));

    fs::remove_all(dir, ec);
}
