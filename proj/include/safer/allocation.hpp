#pragma once

#include <optional>
#include <vector>

#include "safer/cox.hpp"
#include "safer/datagen.hpp"
#include "safer/gsdesign.hpp"
#include "safer/rng.hpp"

namespace safer::alloc {

/// Calendar months at which the allocation probability is re-estimated:
/// interval, 2*interval, ..., n_updates*interval.
std::vector<double> update_schedule(double interval_months, int n_updates);
std::vector<double> update_schedule(const design::TrialDesign& d);

/// Raw Neyman allocation theta_e / (theta_e + theta_c) from per-arm mean
/// time-to-toxicity estimates. Throws if either mean is non-positive.
double neyman_pi(double theta_e, double theta_c);

/// Same, from per-arm exponential mean estimates. Undefined (nullopt) until
/// both arms have at least one event.
std::optional<double> neyman_raw(const inference::ExpMean& experimental,
                                 const inference::ExpMean& control);

/// neyman_raw with the retention rule: undefined keeps the previous value.
double neyman_pi(const inference::ExpMean& experimental, const inference::ExpMean& control,
                 double prev_pi);

/// Elastic tilt of the Neyman target by the efficacy weight phi in [0,1]:
///   phi <= 0.5        -> lo (no evidence, stay balanced)
///   phi  = 1          -> clamp(neyman)
///   otherwise         -> lo + (neyman - lo) * (1 - (1 - (phi - lo)/(1 - lo))^eta)
/// clamped to [lo, hi]. eta >= 1 controls how fast the tilt engages.
double safer_pi(double neyman, double phi, double eta, double lo = 0.5, double hi = 1.0);

/// One row per scheduled update. theta_* are the per-arm mean estimates in
/// months (0 when that arm has no events yet), neyman the retained target,
/// pi the probability actually used until the next update.
struct UpdateRecord {
    double time = 0.0;
    double theta_e = 0.0;
    double theta_c = 0.0;
    double neyman = 0.5;
    double phi = 0.5;
    double pi = 0.5;
};

/// Allocation policy state threaded through a running trial. current_pi
/// starts balanced and only moves at scheduled updates.
struct AllocationState {
    sim::Policy policy = sim::Policy::complete;
    double eta = 1.0;
    double lo = 0.5;
    double hi = 1.0;
    double current_pi = 0.5;
    std::vector<UpdateRecord> history;
};

AllocationState make_state(sim::Policy policy, double eta, const design::TrialDesign& d);

/// One scheduled update: recomputes the policy target from the safety
/// estimates and the efficacy weight phi, appends a history row, and moves
/// current_pi. complete pins 0.5; safety_rar tracks the raw Neyman target
/// (retaining the previous value while it is undefined); safer tilts it by
/// phi within [lo, hi].
void apply_update(AllocationState& state, double time, const inference::ExpMean& experimental,
                  const inference::ExpMean& control, double phi);

/// Bernoulli(pi) draw: 1 = experimental arm.
int next_assignment(double pi, rng::Stream& rng);
int next_assignment(const AllocationState& state, rng::Stream& rng);

}  // namespace safer::alloc
