#pragma once

#include <optional>
#include <span>
#include <vector>

#include "safer/datagen.hpp"
#include "safer/gsdesign.hpp"
#include "safer/rng.hpp"

namespace safer::engine {

/// Outcome of one fully simulated trial. The trial always runs to the final
/// analysis; an interim rejection is recorded, and the enrollment snapshot at
/// the interim is kept alongside the full-enrollment numbers.
struct TrialResult {
    int n_total = 0;
    int n_experimental = 0;

    int rejected = 0;  // 0 = never, 1 = at interim, 2 = at final
    bool interim_reached = false;
    double interim_month = 0.0;
    long events_at_interim = 0;
    double z_interim = 0.0;

    long events_final = 0;
    double beta_final = 0.0;
    double se_final = 0.0;
    bool final_converged = false;
    double z_final = 0.0;

    // Observed safety burden at the final analysis, by arm [control, experimental].
    long ae_count[2] = {0, 0};
    double exposure_months[2] = {0.0, 0.0};

    std::vector<double> pi_trace;  // allocation probability after each scheduled update
    double pi_final = 0.5;

    int n_enrolled_at_stop = 0;  // enrollment at the interim when rejected there, else n_total
    int n_exp_at_stop = 0;
};

/// Calendar time at which the target-th efficacy event lands, given the
/// sorted calendar event times of the whole trial. Empty when fewer events
/// than the target ever occur.
std::optional<double> interim_time(std::span<const double> sorted_event_times, long target);

/// Simulate one trial end to end: staggered accrual, scheduled allocation
/// updates, the event-driven interim look, and the final analysis on complete
/// follow-up. Design constants come from the precomputed report.
TrialResult run_trial(const sim::ScenarioSpec& spec, const design::TrialDesign& d,
                      const design::DesignReport& report, rng::Stream& rng);

/// Convenience overload that derives the report first.
TrialResult run_trial(const sim::ScenarioSpec& spec, const design::TrialDesign& d,
                      rng::Stream& rng);

}  // namespace safer::engine
