#pragma once

#include <cstdint>
#include <span>

namespace safer::inference {

/// Result of a proportional-hazards fit with one binary covariate
/// (experimental vs control).
struct CoxFit {
    double beta = 0.0;        // log hazard ratio, experimental over control
    double se = 0.0;          // 1 / sqrt(observed information) at beta
    double information = 0.0; // observed information at beta
    double score = 0.0;       // score at beta (|score| <= 1e-8 when converged)
    int n_events = 0;         // pooled event count
    int iterations = 0;
    bool converged = false;
};

/// Breslow partial-likelihood fit by Newton-Raphson started at beta = 0 with
/// step-halving; converged when |score| <= 1e-8, capped at 50 iterations.
/// Complete separation is reported as converged = false.
/// Throws if the input is empty, has no events, or has only one arm.
CoxFit cox_fit(std::span<const double> time, std::span<const std::uint8_t> event,
               std::span<const std::uint8_t> group);

struct WaldResult {
    double w = 0.0;       // (beta - ln margin) / se
    double hr_hat = 1.0;  // exp(beta)
    double margin = 1.0;  // hazard-ratio margin the test is anchored to
};

/// Standardized non-inferiority statistic on the log hazard-ratio scale.
/// Negative w favors the experimental arm.
WaldResult wald_noninferiority(const CoxFit& fit, double hr_margin);

/// Censoring-aware exponential mean estimate for one arm's safety times.
struct ExpMean {
    double mean = 0.0;      // total exposure / event count
    double exposure = 0.0;  // sum of observed times
    int n_events = 0;
    bool valid = false;     // false when no events (mean undefined)
};

ExpMean exp_mean_mle(std::span<const double> time, std::span<const std::uint8_t> event);

/// Efficacy evidence weight in [0,1]: the normal CDF of the sign-inverted
/// effect z, so values above 0.5 mean the experimental arm looks better.
/// Reverts to 0.5 on a non-converged fit or fewer than min_events pooled
/// events. No margin shift is applied (0.5 corresponds to beta = 0).
double phi_weight(const CoxFit& fit, int min_events = 10, double log_shift = 0.0);

}  // namespace safer::inference
