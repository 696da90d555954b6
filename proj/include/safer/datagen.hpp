#pragma once

#include <cmath>
#include <string>

#include "safer/rng.hpp"

namespace safer::sim {

/// Per-arm exponential time-to-first-safety-event model (months).
struct SafetyModel {
    double median_control = 1.5;
    double median_experimental = 1.5;
};

/// Safety-to-efficacy link: tolerating more treatment cycles scales the
/// expected progression-free time. gamma1 is drawn per patient from
/// Gamma(shape, expected/shape).
struct AssociationModel {
    double gamma0 = std::log(434.78);  // log mean control PFS in days
    double expected_gamma1 = 0.0;      // 0 disables the link
    double gamma_shape = 50.0;
    double cycle_days = 21.0;
    int baseline_cycles = 3;
    double days_per_month = 30.0;
    double log_effect_cap = 10.0;      // cap on gamma1 * extra before exponentiation
};

enum class Policy { complete, safety_rar, safer };
enum class Strategy { none, composite };

/// Generative truth plus observation policy for one simulation cell.
struct ScenarioSpec {
    SafetyModel safety;
    bool independent = true;          // efficacy independent of safety
    bool efficacy_null = false;       // independent mode: experimental hazard = margin * control
    double pfs_hr = 1.0;              // experimental/control PFS hazard, applied in either mode
    double control_pfs_median = 10.0; // months, independent mode
    AssociationModel assoc;           // linked mode parameters
    Policy policy = Policy::complete;
    double eta = 1.0;                 // elastic-allocation curvature (policy safer)
    double dropout_rate = 0.0;        // P(exit at the safety event | safety event observed)
    double underreport_rate = 0.0;    // P(safety event never recorded)
    Strategy strategy = Strategy::none;
};

/// Latent patient state; observation happens later against an analysis time.
struct PatientRecord {
    int id = 0;
    double entry = 0.0;      // calendar month of enrollment
    int arm = 0;             // 1 = experimental
    double t_safety = 0.0;   // latent months to first safety event
    double t_pfs = 0.0;      // latent months to progression
    double gamma1 = 0.0;     // association coefficient drawn for this patient
    bool dropout = false;
    bool underreport = false;
};

/// What an analysis at a given calendar time sees for one patient.
struct Observed {
    double eff_time = 0.0;   // months from entry
    bool eff_event = false;
    double safety_time = 0.0;
    bool safety_event = false;     // as recorded (under-reporting already applied)
    bool safety_occurred = false;  // latent truth inside the window, for burden metrics
    double exposure = 0.0;         // months on treatment, for event-rate denominators
};

/// ln2 / median. Throws on non-positive medians.
double rate_from_median(double median);

/// Implied target allocation theta_e / (theta_e + theta_c) of a safety model.
double true_neyman(const SafetyModel& m);

double generate_safety_time(int arm, const SafetyModel& model, rng::Stream& rng);

/// Completed cycles beyond the baseline: max(0, floor(t*days_per_month /
/// cycle_days) - baseline_cycles).
int extra_cycles(double safety_time_months, const AssociationModel& assoc);

/// Expected PFS in days: exp(gamma0 + min(gamma1*extra, cap)).
double efficacy_mean(int extra, double gamma0, double gamma1, double log_effect_cap = 10.0);

PatientRecord generate_patient(int id, double entry, int arm, const ScenarioSpec& spec,
                               rng::Stream& rng);

/// Observation rules at analysis_time (calendar months):
/// - administrative censor tau = min(analysis_time - entry, followup_months);
/// - safety is truncated by progression: event iff t_safety <= min(t_pfs, tau);
/// - a drop-out flagged patient exits at the safety event; composite strategy
///   records that exit as an efficacy event, otherwise it censors efficacy;
/// - an under-report flagged safety event is erased (censored at the
///   observation end) and efficacy is untouched.
/// Throws if analysis_time <= entry.
Observed observe(const PatientRecord& p, double analysis_time, Strategy strategy,
                 double followup_months);

}  // namespace safer::sim
