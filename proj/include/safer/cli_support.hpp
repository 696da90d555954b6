#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "safer/gsdesign.hpp"
#include "safer/harness.hpp"

namespace safer::cli {

/// User-input problems: malformed config, unknown keys, impossible selections.
/// The tool maps these to exit code 1; numerical failures exit with 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    design::TrialDesign design;
    long replicates = 1000;
    std::uint64_t seed = 20260818;
    int parallelism = 0;  // 0 = all hardware threads
    std::string format = "csv";
    std::string out;  // empty = stdout
    std::string scenario = "all";
    std::string cells;  // "key=value,key=value" tag filter
    bool trajectories = false;
    std::vector<double> pi_grid = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80};
    std::vector<double> if_grid = {0.2, 0.3, 0.4, 0.5};
};

/// Strict JSON: every key must be known and well-typed.
RunConfig parse_config_json(const std::string& text);
RunConfig load_config_file(const std::string& path);

std::vector<std::pair<std::string, std::string>> parse_cell_filter(const std::string& filter);
std::vector<double> parse_grid(const std::string& comma_list);

int resolved_parallelism(const RunConfig& cfg);

std::string design_report_text(const design::TrialDesign& d, const design::DesignReport& r);
std::string design_report_json(const design::TrialDesign& d, const design::DesignReport& r);

/// Theoretical operating characteristics: events are sized once per
/// information fraction at the design allocation, then power is evaluated at
/// each running allocation in the grid.
std::string power_curve_csv(const design::TrialDesign& d, const std::vector<double>& if_grid,
                            const std::vector<double>& pi_grid);
std::string power_curve_json(const design::TrialDesign& d, const std::vector<double>& if_grid,
                             const std::vector<double>& pi_grid);

struct CellResult {
    mc::CellSpec cell;
    mc::SimulationSummary summary;
};

/// Resolve scenario + cell filter against the built-in catalog and simulate
/// every selected cell. An empty selection is a warning, not an error, and a
/// cell that fails numerically is reported in warnings while the rest of the
/// grid still runs (without a warning sink the failure propagates).
std::vector<CellResult> run_cells(const RunConfig& cfg,
                                  std::vector<std::string>* warnings = nullptr);

std::string summaries_csv(const std::vector<CellResult>& results);
/// JSON output embeds the originating config, so the file round-trips back
/// through parse_config_json.
std::string summaries_json(const std::vector<CellResult>& results, const RunConfig& cfg);

struct CellTrajectory {
    mc::CellSpec cell;
    mc::Trajectory trajectory;
};

std::vector<CellTrajectory> run_trajectories(const RunConfig& cfg,
                                             std::vector<std::string>* warnings = nullptr);
std::string trajectories_csv(const std::vector<CellTrajectory>& rows);
std::string trajectories_json(const std::vector<CellTrajectory>& rows, const RunConfig& cfg);

std::string scenarios_csv(const std::vector<mc::CellSpec>& catalog);
std::string scenarios_json(const std::vector<mc::CellSpec>& catalog);

/// Empty out_dir prints to stdout; otherwise the content lands in
/// out_dir/basename, creating the directory if needed.
void write_output(const std::string& out_dir, const std::string& basename,
                  const std::string& content);

}  // namespace safer::cli
