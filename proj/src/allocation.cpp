#include "safer/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safer::alloc {

std::vector<double> update_schedule(double interval_months, int n_updates) {
    if (!(interval_months > 0.0))
        throw std::invalid_argument("update_schedule: interval must be positive");
    if (n_updates < 0) throw std::invalid_argument("update_schedule: negative count");
    std::vector<double> months;
    months.reserve(static_cast<std::size_t>(n_updates));
    for (int k = 1; k <= n_updates; ++k) months.push_back(interval_months * k);
    return months;
}

std::vector<double> update_schedule(const design::TrialDesign& d) {
    return update_schedule(d.update_interval, d.n_updates);
}

double neyman_pi(double theta_e, double theta_c) {
    if (!(theta_e > 0.0) || !(theta_c > 0.0))
        throw std::invalid_argument("neyman_pi: means must be positive");
    return theta_e / (theta_e + theta_c);
}

std::optional<double> neyman_raw(const inference::ExpMean& experimental,
                                 const inference::ExpMean& control) {
    if (!experimental.valid || !control.valid) return std::nullopt;
    return neyman_pi(experimental.mean, control.mean);
}

double neyman_pi(const inference::ExpMean& experimental, const inference::ExpMean& control,
                 double prev_pi) {
    return neyman_raw(experimental, control).value_or(prev_pi);
}

double safer_pi(double neyman, double phi, double eta, double lo, double hi) {
    if (!(eta >= 1.0)) throw std::invalid_argument("safer_pi: eta must be >= 1");
    if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("safer_pi: phi outside [0,1]");
    if (!(lo < hi) || !(lo >= 0.0) || !(hi <= 1.0))
        throw std::invalid_argument("safer_pi: bad bounds");
    if (phi <= lo) return lo;
    const double evidence = (phi - lo) / (1.0 - lo);
    const double pulled = lo + (neyman - lo) * (1.0 - std::pow(1.0 - evidence, eta));
    return std::clamp(pulled, lo, hi);
}

AllocationState make_state(sim::Policy policy, double eta, const design::TrialDesign& d) {
    AllocationState state;
    state.policy = policy;
    state.eta = eta;
    state.lo = d.pi_lower;
    state.hi = d.pi_upper;
    return state;
}

void apply_update(AllocationState& state, double time, const inference::ExpMean& experimental,
                  const inference::ExpMean& control, double phi) {
    const auto raw = neyman_raw(experimental, control);
    UpdateRecord row;
    row.time = time;
    row.theta_e = experimental.valid ? experimental.mean : 0.0;
    row.theta_c = control.valid ? control.mean : 0.0;
    row.phi = phi;
    const double prev_neyman = state.history.empty() ? 0.5 : state.history.back().neyman;
    row.neyman = raw.value_or(prev_neyman);
    switch (state.policy) {
        case sim::Policy::complete:
            row.pi = 0.5;
            break;
        case sim::Policy::safety_rar:
            // Tracks the raw Neyman target, below 0.5 included.
            row.pi = raw.value_or(state.current_pi);
            break;
        case sim::Policy::safer:
            row.pi = raw ? safer_pi(*raw, phi, state.eta, state.lo, state.hi) : state.current_pi;
            break;
    }
    state.current_pi = row.pi;
    state.history.push_back(row);
}

int next_assignment(double pi, rng::Stream& rng) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw std::invalid_argument("next_assignment: pi outside [0,1]");
    return rng.uniform() < pi ? 1 : 0;
}

int next_assignment(const AllocationState& state, rng::Stream& rng) {
    return next_assignment(state.current_pi, rng);
}

}  // namespace safer::alloc
