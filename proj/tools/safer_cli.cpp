#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "safer/cli_support.hpp"
#include "safer/gsdesign.hpp"
#include "safer/harness.hpp"

namespace cli = safer::cli;

namespace {

// Flag values buffered here; only flags the user actually passed override the
// config file.
struct FlagBag {
    std::string config_path;
    double alpha = 0, power_target = 0, hr_margin = 0, hr_alt = 0, pi_design = 0,
           info_fraction = 0;
    long replicates = 0;
    std::uint64_t seed = 0;
    int parallelism = 0;
    std::string format, out, scenario, cells, pi_grid, if_grid;
    bool trajectories = false;
};

void add_design_flags(CLI::App* cmd, FlagBag& f) {
    cmd->add_option("--alpha", f.alpha, "One-sided significance level");
    cmd->add_option("--power-target", f.power_target, "Target power at the alternative");
    cmd->add_option("--hr-margin", f.hr_margin, "Non-inferiority hazard-ratio margin");
    cmd->add_option("--hr-alt", f.hr_alt, "Hazard ratio the trial is powered at");
    cmd->add_option("--pi", f.pi_design, "Design allocation fraction (experimental)");
    cmd->add_option("--if", f.info_fraction, "Interim information fraction");
}

void add_output_flags(CLI::App* cmd, FlagBag& f) {
    cmd->add_option("--format", f.format, "Output format: csv, json, or text");
    cmd->add_option("--out", f.out, "Write outputs into this directory instead of stdout");
}

void report_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

cli::RunConfig assemble(const CLI::App* cmd, const FlagBag& f) {
    cli::RunConfig cfg;
    if (!f.config_path.empty()) cfg = cli::load_config_file(f.config_path);
    const auto passed = [&](const std::string& name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (passed("--alpha")) cfg.design.alpha = f.alpha;
    if (passed("--power-target")) cfg.design.power_target = f.power_target;
    if (passed("--hr-margin")) cfg.design.hr_margin = f.hr_margin;
    if (passed("--hr-alt")) cfg.design.hr_alt = f.hr_alt;
    if (passed("--pi")) cfg.design.pi_design = f.pi_design;
    if (passed("--if")) cfg.design.info_fraction = f.info_fraction;
    if (passed("--replicates")) cfg.replicates = f.replicates;
    if (passed("--seed")) cfg.seed = f.seed;
    if (passed("--parallelism")) cfg.parallelism = f.parallelism;
    if (passed("--format")) cfg.format = f.format;
    if (passed("--out")) cfg.out = f.out;
    if (passed("--scenario")) cfg.scenario = f.scenario;
    if (passed("--cells")) cfg.cells = f.cells;
    if (passed("--trajectories")) cfg.trajectories = f.trajectories;
    if (passed("--pi-grid")) cfg.pi_grid = cli::parse_grid(f.pi_grid);
    if (passed("--if-grid")) cfg.if_grid = cli::parse_grid(f.if_grid);
    if (cfg.format != "csv" && cfg.format != "json" && cfg.format != "text")
        throw cli::ConfigError("format must be csv, json, or text");
    return cfg;
}

// Emits the text report together with its machine-readable JSON twin unless
// --format text/json picks one (csv has no meaning for a key-value report).
int cmd_design(const cli::RunConfig& cfg) {
    const safer::design::DesignReport rep = safer::design::design_report(cfg.design);
    const std::string text = cli::design_report_text(cfg.design, rep);
    const std::string machine = cli::design_report_json(cfg.design, rep);
    if (cfg.format == "json") {
        cli::write_output(cfg.out, "design.json", machine);
    } else if (cfg.format == "text") {
        cli::write_output(cfg.out, "design.txt", text);
    } else if (cfg.out.empty()) {
        std::cout << text << "\n" << machine;
    } else {
        cli::write_output(cfg.out, "design.txt", text);
        cli::write_output(cfg.out, "design.json", machine);
    }
    return 0;
}

int cmd_power_curve(const cli::RunConfig& cfg) {
    const bool js = cfg.format == "json";
    const std::string body = js ? cli::power_curve_json(cfg.design, cfg.if_grid, cfg.pi_grid)
                                : cli::power_curve_csv(cfg.design, cfg.if_grid, cfg.pi_grid);
    cli::write_output(cfg.out, js ? "power_curve.json" : "power_curve.csv", body);
    return 0;
}

int cmd_simulate(const cli::RunConfig& cfg) {
    const bool js = cfg.format == "json";
    std::vector<std::string> warnings;
    const auto results = cli::run_cells(cfg, &warnings);
    cli::write_output(cfg.out, js ? "summaries.json" : "summaries.csv",
                      js ? cli::summaries_json(results, cfg) : cli::summaries_csv(results));
    if (cfg.trajectories) {
        std::vector<std::string> traj_warnings;
        const auto rows = cli::run_trajectories(cfg, &traj_warnings);
        cli::write_output(cfg.out, js ? "trajectories.json" : "trajectories.csv",
                          js ? cli::trajectories_json(rows, cfg) : cli::trajectories_csv(rows));
    }
    report_warnings(warnings);
    return 0;
}

int cmd_scenarios(const cli::RunConfig& cfg) {
    std::vector<safer::mc::CellSpec> catalog;
    try {
        catalog = safer::mc::builtin_scenarios(cfg.scenario);
    } catch (const std::invalid_argument& e) {
        throw cli::ConfigError(e.what());
    }
    const bool js = cfg.format == "json";
    cli::write_output(cfg.out, js ? "scenarios.json" : "scenarios.csv",
                      js ? cli::scenarios_json(catalog) : cli::scenarios_csv(catalog));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-sequential non-inferiority trial simulator with safety-aware "
                 "response-adaptive allocation"};
    app.require_subcommand(1);
    FlagBag f;
    app.add_option("--config", f.config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);

    CLI::App* design_cmd =
        app.add_subcommand("design", "Size the trial and print the stopping boundaries");
    add_design_flags(design_cmd, f);
    add_output_flags(design_cmd, f);

    CLI::App* curve_cmd = app.add_subcommand(
        "power-curve", "Theoretical power over allocation and interim-timing grids");
    add_design_flags(curve_cmd, f);
    add_output_flags(curve_cmd, f);
    curve_cmd->add_option("--pi-grid", f.pi_grid, "Comma-separated allocation fractions");
    curve_cmd->add_option("--if-grid", f.if_grid, "Comma-separated information fractions");

    CLI::App* sim_cmd =
        app.add_subcommand("simulate", "Monte Carlo over built-in scenario cells");
    sim_cmd->add_option("--scenario", f.scenario,
                        "Scenario family: 0..6, 3a, 3b (S-prefix accepted), red_flag, or all");
    sim_cmd->add_option("--cells", f.cells, "Tag filter, e.g. pi=0.8,assoc=very_weak");
    sim_cmd->add_option("--replicates", f.replicates, "Replicates per cell");
    sim_cmd->add_option("--seed", f.seed, "Master seed");
    sim_cmd->add_option("--parallelism", f.parallelism, "Worker threads (0 = all cores)");
    sim_cmd->add_flag("--trajectories", f.trajectories,
                      "Also emit allocation-probability quantile paths");
    add_output_flags(sim_cmd, f);

    CLI::App* list_cmd = app.add_subcommand("scenarios", "List the built-in scenario catalog");
    list_cmd->add_option("--scenario", f.scenario, "Restrict to one family");
    add_output_flags(list_cmd, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // help/version exit clean, usage errors exit 1
    }

    try {
        if (design_cmd->parsed()) return cmd_design(assemble(design_cmd, f));
        if (curve_cmd->parsed()) return cmd_power_curve(assemble(curve_cmd, f));
        if (sim_cmd->parsed()) return cmd_simulate(assemble(sim_cmd, f));
        if (list_cmd->parsed()) return cmd_scenarios(assemble(list_cmd, f));
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const cli::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}
