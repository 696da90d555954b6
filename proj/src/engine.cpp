#include "safer/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "safer/allocation.hpp"
#include "safer/cox.hpp"

namespace safer::engine {

namespace {

struct FitOutcome {
    inference::CoxFit fit;
    bool usable = false;  // false when the data cannot support a fit at all
    long events = 0;
};

FitOutcome fit_from(const std::vector<double>& time, const std::vector<std::uint8_t>& event,
                    const std::vector<std::uint8_t>& group) {
    FitOutcome out;
    for (const auto e : event) out.events += e;
    try {
        out.fit = inference::cox_fit(time, event, group);
        out.usable = true;
    } catch (const std::invalid_argument&) {
        out.usable = false;
    }
    return out;
}

// Efficacy observations for everyone enrolled strictly before analysis_time.
FitOutcome fit_at(const std::vector<sim::PatientRecord>& pts, double analysis_time,
                  const sim::ScenarioSpec& spec, const design::TrialDesign& d,
                  std::vector<double>& time, std::vector<std::uint8_t>& event,
                  std::vector<std::uint8_t>& group) {
    time.clear();
    event.clear();
    group.clear();
    for (const auto& p : pts) {
        if (!(p.entry < analysis_time)) continue;
        const sim::Observed o = sim::observe(p, analysis_time, spec.strategy, d.followup_months);
        time.push_back(o.eff_time);
        event.push_back(o.eff_event ? 1 : 0);
        group.push_back(static_cast<std::uint8_t>(p.arm));
    }
    return fit_from(time, event, group);
}

// Lower-is-better Wald statistic flipped so that large values reject.
double z_statistic(const FitOutcome& f, double hr_margin) {
    if (!f.usable || !f.fit.converged || !(f.fit.se > 0.0))
        return -std::numeric_limits<double>::infinity();
    return -inference::wald_noninferiority(f.fit, hr_margin).w;
}

}  // namespace

std::optional<double> interim_time(std::span<const double> sorted_event_times, long target) {
    if (target < 1) throw std::invalid_argument("interim_time: target must be positive");
    if (std::ssize(sorted_event_times) < target) return std::nullopt;
    return sorted_event_times[static_cast<std::size_t>(target - 1)];
}

TrialResult run_trial(const sim::ScenarioSpec& spec, const design::TrialDesign& d,
                      const design::DesignReport& report, rng::Stream& rng) {
    const int n = static_cast<int>(report.n_gs);
    if (n <= 0) throw std::invalid_argument("run_trial: degenerate sample size");
    const double final_time = d.accrual_months + d.followup_months;

    std::vector<double> entry(static_cast<std::size_t>(n));
    for (auto& e : entry) e = rng::sample_uniform(0.0, d.accrual_months, rng);
    std::sort(entry.begin(), entry.end());

    const auto updates = alloc::update_schedule(d);
    const double phi_shift = d.phi_margin_shifted ? std::log(d.hr_margin) : 0.0;

    TrialResult r;
    r.n_total = n;
    r.pi_trace.reserve(updates.size());

    std::vector<sim::PatientRecord> pts;
    pts.reserve(entry.size());
    std::vector<double> tbuf;
    std::vector<std::uint8_t> ebuf, gbuf;
    tbuf.reserve(entry.size());
    ebuf.reserve(entry.size());
    gbuf.reserve(entry.size());

    alloc::AllocationState state = alloc::make_state(spec.policy, spec.eta, d);
    std::size_t next = 0;
    auto enroll_until = [&](double t) {
        while (next < entry.size() && entry[next] < t) {
            const int arm = alloc::next_assignment(state, rng);
            pts.push_back(
                sim::generate_patient(static_cast<int>(next), entry[next], arm, spec, rng));
            ++next;
        }
    };

    for (const double u : updates) {
        enroll_until(u);
        if (spec.policy != sim::Policy::complete && !pts.empty()) {
            double exposure[2] = {0.0, 0.0};
            long events[2] = {0, 0};
            for (const auto& p : pts) {
                const sim::Observed o = sim::observe(p, u, spec.strategy, d.followup_months);
                exposure[p.arm] += o.safety_time;
                events[p.arm] += o.safety_event ? 1 : 0;
            }
            inference::ExpMean em[2];
            for (int a = 0; a < 2; ++a) {
                em[a].exposure = exposure[a];
                em[a].n_events = static_cast<int>(events[a]);
                em[a].valid = events[a] > 0;
                em[a].mean = em[a].valid ? exposure[a] / static_cast<double>(events[a]) : 0.0;
            }
            double phi = 0.5;
            if (spec.policy == sim::Policy::safer) {
                const FitOutcome f = fit_at(pts, u, spec, d, tbuf, ebuf, gbuf);
                phi = f.usable ? inference::phi_weight(f.fit, d.min_phi_events, phi_shift) : 0.5;
            }
            alloc::apply_update(state, u, em[1], em[0], phi);
        } else {
            alloc::apply_update(state, u, inference::ExpMean{}, inference::ExpMean{}, 0.5);
        }
        r.pi_trace.push_back(state.current_pi);
    }
    enroll_until(std::numeric_limits<double>::infinity());
    r.pi_final = state.current_pi;

    // Final-analysis observations double as the trial-level bookkeeping pass.
    tbuf.clear();
    ebuf.clear();
    gbuf.clear();
    std::vector<double> event_calendar;
    event_calendar.reserve(pts.size());
    for (const auto& p : pts) {
        const sim::Observed o = sim::observe(p, final_time, spec.strategy, d.followup_months);
        tbuf.push_back(o.eff_time);
        ebuf.push_back(o.eff_event ? 1 : 0);
        gbuf.push_back(static_cast<std::uint8_t>(p.arm));
        r.ae_count[p.arm] += o.safety_occurred ? 1 : 0;
        r.exposure_months[p.arm] += o.exposure;
        r.n_experimental += p.arm;
        if (o.eff_event) event_calendar.push_back(p.entry + o.eff_time);
    }
    std::sort(event_calendar.begin(), event_calendar.end());

    const auto t_int = interim_time(event_calendar, report.interim_target);
    if (t_int) {
        // The cut must include the event that defines it. Reconstructing the
        // follow-up window as (entry + time) - entry can land an ulp short of
        // time, so push the cut just past the rounding error (~1e-14 here).
        const double t_cut = *t_int + 1e-12;
        std::vector<double> itime;
        std::vector<std::uint8_t> ievent, igroup;
        const FitOutcome fi = fit_at(pts, t_cut, spec, d, itime, ievent, igroup);
        r.interim_reached = true;
        r.interim_month = *t_int;
        r.events_at_interim = fi.events;
        r.z_interim = z_statistic(fi, d.hr_margin);
        if (r.z_interim >= report.bounds.c1) r.rejected = 1;
    }

    const FitOutcome ff = fit_from(tbuf, ebuf, gbuf);
    r.events_final = ff.events;
    if (ff.usable) {
        r.beta_final = ff.fit.beta;
        r.se_final = ff.fit.se;
        r.final_converged = ff.fit.converged;
    }
    r.z_final = z_statistic(ff, d.hr_margin);
    if (r.rejected == 0 && r.z_final >= report.bounds.c2) r.rejected = 2;

    if (r.rejected == 1) {
        for (const auto& p : pts) {
            if (p.entry < *t_int) {
                ++r.n_enrolled_at_stop;
                r.n_exp_at_stop += p.arm;
            }
        }
    } else {
        r.n_enrolled_at_stop = r.n_total;
        r.n_exp_at_stop = r.n_experimental;
    }
    return r;
}

TrialResult run_trial(const sim::ScenarioSpec& spec, const design::TrialDesign& d,
                      rng::Stream& rng) {
    return run_trial(spec, d, design::design_report(d), rng);
}

}  // namespace safer::engine
