#pragma once

namespace safer::design {

/// Design constants for the two-stage non-inferiority trial. Defaults encode
/// the reference redesign: one-sided alpha 0.05, 80% power against HR 1
/// with margin 1.25, 48-month accrual, 12-month per-patient follow-up,
/// 10-month control median, allocation updates every 3 months through 45.
struct TrialDesign {
    double alpha = 0.05;            // one-sided level
    double power_target = 0.80;
    double hr_margin = 1.25;        // non-inferiority margin (experimental/control hazard)
    double hr_alt = 1.0;            // hazard ratio the trial is powered at
    double pi_design = 0.5;         // allocation used in the sizing formulas
    double info_fraction = 0.5;     // interim information fraction
    double accrual_months = 48.0;
    double followup_months = 12.0;
    double control_median = 10.0;   // months; event rate ln2 / median
    double update_interval = 3.0;   // months between allocation updates
    int n_updates = 15;             // updates at 3, 6, ..., 45
    double pi_lower = 0.5;          // allocation bounds for the elastic policy
    double pi_upper = 1.0;
    int min_phi_events = 10;        // pooled events before the efficacy weight engages
    bool phi_margin_shifted = false;  // center the efficacy weight at the margin instead of HR 1
};

/// Lan-DeMets O'Brien-Fleming alpha spent at information fraction t:
/// 2 * (1 - Phi(z_{1-alpha/2} / sqrt(t))).
double obf_spent_alpha(double t, double alpha);

struct Boundaries {
    double alpha1 = 0.0;  // alpha spent at the interim
    double c1 = 0.0;      // interim critical value (standardized scale)
    double c2 = 0.0;      // final critical value
    double rho = 0.0;     // corr(Z1, Z2) = sqrt(information fraction)
};

/// Two-stage boundaries: c1 from the spent level, c2 solved so the total null
/// rejection probability is exactly alpha under corr(Z1,Z2) = sqrt(if).
Boundaries boundaries(double info_fraction, double alpha);

/// Smallest event count P with sqrt(P * delta^2 * pi(1-pi)) - z_{1-alpha}
/// >= z_{1-beta}, where delta = ln(hr_margin) - ln(hr_alt).
long fixed_events(double alpha, double beta, double hr_margin, double hr_alt, double pi);

struct GsPower {
    double at_interim = 0.0;  // probability of rejecting at the interim look
    double total = 0.0;       // overall rejection probability
};

/// Two-stage rejection probability at P events for true hazard ratio hr_true,
/// allocation pi, against margin hr_margin, with the given boundaries.
GsPower gs_power(long events, const Boundaries& b, double info_fraction, double pi,
                 double hr_margin, double hr_true);

/// Smallest P whose two-stage power reaches the design's target.
long required_events_gs(const TrialDesign& design);

/// Patients needed to observe P events when each is watched for t months at
/// exponential rate lambda_bar: ceil(P / (1 - exp(-lambda_bar * t))).
long sample_size(long events, double lambda_bar, double t_months);

/// The full derivation for reporting: fixed-design and group-sequential
/// event counts and sample sizes plus the boundaries used.
struct DesignReport {
    long events_fixed = 0;
    long n_fixed = 0;
    long events_gs = 0;
    long n_gs = 0;
    Boundaries bounds;
    double power_at_events_gs = 0.0;
    double power1_at_events_gs = 0.0;
    double lambda_bar = 0.0;
    long interim_target = 0;  // ceil(if * events_gs)
};

DesignReport design_report(const TrialDesign& design);

}  // namespace safer::design
