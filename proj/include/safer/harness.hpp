#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "safer/datagen.hpp"
#include "safer/engine.hpp"
#include "safer/gsdesign.hpp"

namespace safer::mc {

/// One simulation cell: a generative scenario plus the trial design run on it.
/// tags carry the cell's coordinates as ordered key/value pairs for reports
/// and filtering; cell_id seeds the replicate streams and is stable across
/// catalog subsets.
struct CellSpec {
    std::string scenario;
    std::string label;
    std::vector<std::pair<std::string, std::string>> tags;
    sim::ScenarioSpec spec;
    design::TrialDesign design;
    std::uint32_t cell_id = 0;
};

struct SimulationSummary {
    long n_replicates = 0;
    double power = 0.0;          // P(reject at either look)
    double power_interim = 0.0;  // P(reject at the interim look)
    double mc_se_power = 0.0;
    double mean_alloc_e = 0.0;  // mean over trials of n_experimental / n_total
    double mc_se_alloc = 0.0;
    double ae_rate_control = 0.0;  // safety events per person-year on treatment
    double ae_rate_experimental = 0.0;
    double ae_rate_total = 0.0;
    double ae_rate_nominal_control = 0.0;  // same counts over one nominal year per patient
    double ae_rate_nominal_experimental = 0.0;
    double ae_rate_nominal_total = 0.0;
    double mean_events_final = 0.0;
    double interim_reached_rate = 0.0;
    double mean_interim_month = 0.0;     // over trials whose interim happened
    double mean_enrolled_at_stop = 0.0;  // enrollment when stopping early, else full size
    double mean_alloc_e_at_stop = 0.0;
};

/// Per-update allocation-probability quantiles across replicates.
struct Trajectory {
    std::vector<double> update_months;
    std::vector<double> q25, median, q75;
};

/// Replicate rep runs on stream id (cell_id << 32) | rep, folded in fixed
/// 64-replicate blocks, so the summary is byte-identical for any parallelism.
SimulationSummary run_scenario(const CellSpec& cell, long n_replicates, std::uint64_t master_seed,
                               int parallelism);

Trajectory allocation_trajectory(const CellSpec& cell, long n_replicates,
                                 std::uint64_t master_seed, int parallelism);

/// Built-in scenario catalog. which selects one family ("S0".."S6", "S3a",
/// "S3b", "red_flag") or "all"; ids always come from the full-catalog order.
std::vector<CellSpec> builtin_scenarios(const std::string& which = "all");

/// Value of one tag, empty when absent.
std::string tag_value(const CellSpec& cell, const std::string& key);

/// Cells whose tags match every given key=value pair.
std::vector<CellSpec> matched_cells(const std::vector<CellSpec>& catalog,
                                    const std::vector<std::pair<std::string, std::string>>& want);

}  // namespace safer::mc
