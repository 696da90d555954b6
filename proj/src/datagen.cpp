#include "safer/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safer::sim {

double rate_from_median(double median) {
    if (!(median > 0.0)) throw std::invalid_argument("rate_from_median: median must be positive");
    return std::log(2.0) / median;
}

double true_neyman(const SafetyModel& m) {
    // theta = mean time to event = median / ln2; shared factor cancels.
    const double te = m.median_experimental;
    const double tc = m.median_control;
    return te / (te + tc);
}

double generate_safety_time(int arm, const SafetyModel& model, rng::Stream& rng) {
    const double median = arm ? model.median_experimental : model.median_control;
    return rng::sample_exponential(rate_from_median(median), rng);
}

int extra_cycles(double safety_time_months, const AssociationModel& assoc) {
    const double days = safety_time_months * assoc.days_per_month;
    const int completed = static_cast<int>(std::floor(days / assoc.cycle_days));
    return std::max(0, completed - assoc.baseline_cycles);
}

double efficacy_mean(int extra, double gamma0, double gamma1, double log_effect_cap) {
    const double effect = std::min(gamma1 * static_cast<double>(extra), log_effect_cap);
    return std::exp(gamma0 + effect);
}

PatientRecord generate_patient(int id, double entry, int arm, const ScenarioSpec& spec,
                               rng::Stream& rng) {
    PatientRecord p;
    p.id = id;
    p.entry = entry;
    p.arm = arm;

    p.t_safety = generate_safety_time(arm, spec.safety, rng);

    if (spec.independent || spec.efficacy_null) {
        // Efficacy generated on its own clock. Under the null the experimental
        // hazard sits exactly on the non-inferiority margin.
        double rate = rate_from_median(spec.control_pfs_median);
        if (arm) rate *= spec.efficacy_null ? 1.25 : spec.pfs_hr;
        p.t_pfs = rng::sample_exponential(rate, rng);
    } else {
        if (spec.assoc.expected_gamma1 > 0.0) {
            p.gamma1 = rng::sample_gamma(spec.assoc.gamma_shape,
                                         spec.assoc.expected_gamma1 / spec.assoc.gamma_shape, rng);
        }
        const int extra = extra_cycles(p.t_safety, spec.assoc);
        const double mu_days =
            efficacy_mean(extra, spec.assoc.gamma0, p.gamma1, spec.assoc.log_effect_cap);
        double rate_days = 1.0 / mu_days;
        if (arm) rate_days *= spec.pfs_hr;
        p.t_pfs = rng::sample_exponential(rate_days, rng) / spec.assoc.days_per_month;
    }

    p.dropout = spec.dropout_rate > 0.0 && rng.uniform() < spec.dropout_rate;
    p.underreport = spec.underreport_rate > 0.0 && rng.uniform() < spec.underreport_rate;
    return p;
}

Observed observe(const PatientRecord& p, double analysis_time, Strategy strategy,
                 double followup_months) {
    if (!(analysis_time > p.entry))
        throw std::invalid_argument("observe: analysis_time must exceed patient entry");
    const double tau = std::min(analysis_time - p.entry, followup_months);

    Observed o;
    const bool saw_safety = p.t_safety <= std::min(p.t_pfs, tau);
    o.safety_occurred = saw_safety;

    if (saw_safety && p.dropout) {
        // Patient leaves the trial at the safety event.
        o.exposure = p.t_safety;
        o.safety_time = p.t_safety;
        o.safety_event = !p.underreport;
        o.eff_time = p.t_safety;
        o.eff_event = strategy == Strategy::composite;
        return o;
    }

    const double end = std::min(p.t_pfs, tau);
    o.exposure = end;
    if (saw_safety && !p.underreport) {
        o.safety_time = p.t_safety;
        o.safety_event = true;
    } else {
        o.safety_time = end;
        o.safety_event = false;
    }
    o.eff_time = end;
    o.eff_event = p.t_pfs <= tau;
    return o;
}

}  // namespace safer::sim
