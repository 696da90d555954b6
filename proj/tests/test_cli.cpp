#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "safer/cli_support.hpp"

using namespace safer;
using namespace safer::cli;

namespace {

int count_lines(const std::string& s) {
    int n = 0;
    for (const char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("config parsing accepts the full schema") {
    const std::string text = R"({
        "design": {"alpha": 0.025, "power_target": 0.9, "hr_margin": 1.3, "hr_alt": 1.05,
                   "pi_design": 0.6, "info_fraction": 0.4, "accrual_months": 36,
                   "followup_months": 18, "control_median": 8, "update_interval": 2,
                   "n_updates": 10, "pi_lower": 0.5, "pi_upper": 0.9, "min_phi_events": 20,
                   "phi_margin_shifted": true},
        "replicates": 500, "seed": 7, "parallelism": 3,
        "format": "json", "out": "x.json",
        "scenario": "S2", "cells": "pi=0.8", "trajectories": true,
        "pi_grid": [0.5, 0.6], "if_grid": [0.3]
    })";
    const RunConfig c = parse_config_json(text);
    CHECK(c.design.alpha == 0.025);
    CHECK(c.design.power_target == 0.9);
    CHECK(c.design.hr_margin == 1.3);
    CHECK(c.design.hr_alt == 1.05);
    CHECK(c.design.pi_design == 0.6);
    CHECK(c.design.info_fraction == 0.4);
    CHECK(c.design.accrual_months == 36);
    CHECK(c.design.followup_months == 18);
    CHECK(c.design.control_median == 8);
    CHECK(c.design.update_interval == 2);
    CHECK(c.design.n_updates == 10);
    CHECK(c.design.pi_upper == 0.9);
    CHECK(c.design.min_phi_events == 20);
    CHECK(c.design.phi_margin_shifted);
    CHECK(c.replicates == 500);
    CHECK(c.seed == 7);
    CHECK(c.parallelism == 3);
    CHECK(c.format == "json");
    CHECK(c.out == "x.json");
    CHECK(c.scenario == "S2");
    CHECK(c.cells == "pi=0.8");
    CHECK(c.trajectories);
    CHECK(c.pi_grid == std::vector<double>{0.5, 0.6});
    CHECK(c.if_grid == std::vector<double>{0.3});
}

TEST_CASE("config parsing is strict") {
    CHECK_THROWS_AS(parse_config_json("[1,2]"), ConfigError);
    CHECK_THROWS_AS(parse_config_json("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"replicatez": 10})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"design": {"alpha": 0.05, "alhpa": 0.1}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"design": 3})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"replicates": "many"})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"replicates": 0})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"format": "xml"})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"pi_grid": [0.5, "x"]})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"parallelism": -2})"), ConfigError);
    // Defaults survive an empty object.
    const RunConfig c = parse_config_json("{}");
    CHECK(c.replicates == 1000);
    CHECK(c.format == "csv");
    CHECK(c.scenario == "all");
}

TEST_CASE("cell filter and grid parsing") {
    const auto f = parse_cell_filter("pi=0.8,assoc=very_weak");
    REQUIRE(f.size() == 2);
    CHECK(f[0].first == "pi");
    CHECK(f[0].second == "0.8");
    CHECK(f[1].first == "assoc");
    CHECK(f[1].second == "very_weak");
    CHECK(parse_cell_filter("").empty());
    CHECK_THROWS_AS(parse_cell_filter("junk"), ConfigError);
    CHECK_THROWS_AS(parse_cell_filter("=x"), ConfigError);
    CHECK_THROWS_AS(parse_cell_filter("x="), ConfigError);

    CHECK(parse_grid("0.5,0.55") == std::vector<double>{0.5, 0.55});
    CHECK_THROWS_AS(parse_grid("0.5,zzz"), ConfigError);
    CHECK_THROWS_AS(parse_grid(""), ConfigError);
}

TEST_CASE("design report rendering") {
    const design::TrialDesign d;
    const design::DesignReport r = design::design_report(d);
    const std::string text = design_report_text(d, r);
    CHECK(text.find("888") != std::string::npos);
    CHECK(text.find("497") != std::string::npos);
    CHECK(text.find("501") != std::string::npos);
    CHECK(text.find("interim_target_events") != std::string::npos);

    const auto j = nlohmann::json::parse(design_report_json(d, r));
    CHECK(j["gs_n"] == 888);
    CHECK(j["fixed_n"] == 881);
    CHECK(j["gs_events"] == 501);
    CHECK(j["interim_target_events"] == 251);
    CHECK(j["c1"].get<double>() == doctest::Approx(2.537987603443).epsilon(1e-9));
    CHECK(j["c2"].get<double>() == doctest::Approx(1.662106581823).epsilon(1e-9));
    CHECK(j["design"]["alpha"].get<double>() == 0.05);
}

TEST_CASE("power curve rendering matches the direct computation") {
    const design::TrialDesign d;
    const std::vector<double> ifs = {0.2, 0.5};
    const std::vector<double> pis = {0.5, 0.65, 0.8};
    const std::string csv = power_curve_csv(d, ifs, pis);
    CHECK(count_lines(csv) == 1 + 2 * 3);
    CHECK(csv.rfind("if,pi,events,n,alpha1,c1,c2,power,power_interim\n", 0) == 0);

    const auto j = nlohmann::json::parse(power_curve_json(d, ifs, pis));
    REQUIRE(j.size() == 6);
    // Row (if=0.5, pi=0.65) against a direct evaluation.
    const auto& row = j[4];
    CHECK(row["if"].get<double>() == 0.5);
    CHECK(row["pi"].get<double>() == 0.65);
    CHECK(row["events"].get<long>() == 501);
    CHECK(row["n"].get<long>() == 888);
    design::TrialDesign d5 = d;
    d5.info_fraction = 0.5;
    const auto rep = design::design_report(d5);
    const auto gp =
        design::gs_power(rep.events_gs, rep.bounds, 0.5, 0.65, d.hr_margin, d.hr_alt);
    CHECK(row["power"].get<double>() == doctest::Approx(gp.total).epsilon(1e-12));
}

TEST_CASE("scenario listings") {
    const auto catalog = mc::builtin_scenarios("all");
    const std::string csv = scenarios_csv(catalog);
    CHECK(count_lines(csv) == 162);
    CHECK(csv.find("S0") != std::string::npos);
    CHECK(csv.find("red_flag") != std::string::npos);
    const auto j = nlohmann::json::parse(scenarios_json(catalog));
    CHECK(j.size() == 161);
    CHECK(j[0]["tags"]["scenario"] == "S0");
}

TEST_CASE("run_cells resolves selections and simulates") {
    RunConfig cfg;
    cfg.scenario = "S1";
    cfg.cells = "assoc=very_weak,pi=0.5";
    cfg.replicates = 4;
    cfg.seed = 123;
    cfg.parallelism = 2;
    const auto results = run_cells(cfg);
    REQUIRE(results.size() == 1);
    CHECK(results[0].summary.n_replicates == 4);
    CHECK(results[0].summary.mean_events_final > 100.0);

    const std::string csv = summaries_csv(results);
    CHECK(count_lines(csv) == 2);
    CHECK(csv.find("S1") != std::string::npos);
    const auto j = nlohmann::json::parse(summaries_json(results, cfg));
    CHECK(j["results"][0]["summary"]["replicates"] == 4);
    CHECK(j["results"][0]["summary"]["power"].get<double>() >= 0.0);

    SUBCASE("json summaries round-trip their config") {
        const RunConfig back = parse_config_json(j["config"].dump());
        CHECK(back.scenario == cfg.scenario);
        CHECK(back.cells == cfg.cells);
        CHECK(back.replicates == cfg.replicates);
        CHECK(back.seed == cfg.seed);
        CHECK(back.parallelism == cfg.parallelism);
        CHECK(back.design.alpha == cfg.design.alpha);
        CHECK(back.design.info_fraction == cfg.design.info_fraction);
        CHECK(back.pi_grid == cfg.pi_grid);
        CHECK(back.if_grid == cfg.if_grid);
    }

    SUBCASE("unknown scenario is a config error") {
        cfg.scenario = "S17";
        CHECK_THROWS_AS(run_cells(cfg), ConfigError);
    }

    SUBCASE("empty selection is a warned no-op, not an error") {
        cfg.cells = "pi=0.93";
        std::vector<std::string> warnings;
        const auto none = run_cells(cfg, &warnings);
        CHECK(none.empty());
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("no cells match") != std::string::npos);
        // Header-only CSV is still well formed.
        CHECK(count_lines(summaries_csv(none)) == 1);
    }
}

TEST_CASE("trajectory rendering") {
    RunConfig cfg;
    cfg.scenario = "S1";
    cfg.cells = "assoc=very_weak,pi=0.5";
    cfg.replicates = 3;
    cfg.seed = 5;
    cfg.parallelism = 2;
    const auto rows = run_trajectories(cfg);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].trajectory.update_months.size() == 15);
    const std::string csv = trajectories_csv(rows);
    CHECK(count_lines(csv) == 16);
    // The complete policy never moves off one half.
    CHECK(csv.find("0.500000,0.500000,0.500000") != std::string::npos);
    const auto j = nlohmann::json::parse(trajectories_json(rows, cfg));
    CHECK(j["results"][0]["months"].size() == 15);
    CHECK(j["results"][0]["median"][0].get<double>() == 0.5);
    CHECK(j["config"]["scenario"] == "S1");
}

TEST_CASE("output writing creates the directory and file") {
    const std::string dir = "cli_test_output.tmp.d";
    write_output(dir, "part.csv", "hello\n");
    std::ifstream in(dir + "/part.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "hello");
    std::remove((dir + "/part.csv").c_str());
    std::remove(dir.c_str());
    CHECK_THROWS_AS(write_output("/dev/null/sub", "x.csv", "x"), ConfigError);
}

TEST_CASE("summary csv column set is stable") {
    const std::string header =
        "cell_id,scenario,policy,eta,median_e,median_c,pi,if,hyp,assoc,pfs_median,"
        "dropout,underreport,strategy,replicates,power,power_interim,mc_se_power,"
        "mean_alloc_e,mc_se_alloc,ae_rate_control,ae_rate_experimental,ae_rate_total,"
        "ae_rate_nominal_control,ae_rate_nominal_experimental,ae_rate_nominal_total,"
        "mean_events_final,interim_reached_rate,mean_interim_month,"
        "mean_enrolled_at_stop,mean_alloc_e_at_stop\n";
    CHECK(summaries_csv({}) == header);
}

TEST_CASE("scenario names accept the bare index form") {
    CHECK(mc::builtin_scenarios("0").size() == mc::builtin_scenarios("S0").size());
    CHECK(mc::builtin_scenarios("3a").size() == 20);
    CHECK(mc::builtin_scenarios("3").size() == 40);
    CHECK(mc::builtin_scenarios("red_flag").size() == 1);
}
