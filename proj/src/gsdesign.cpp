#include "safer/gsdesign.hpp"

#include <cmath>
#include <stdexcept>

#include "safer/stats.hpp"

namespace safer::design {

namespace {

void check_fraction(double t) {
    if (!(t > 0.0 && t <= 1.0))
        throw std::invalid_argument("information fraction must be in (0, 1]");
}

void check_alpha(double a) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
}

}  // namespace

double obf_spent_alpha(double t, double alpha) {
    check_fraction(t);
    check_alpha(alpha);
    const double z = stats::normal_quantile(1.0 - alpha / 2.0);
    return 2.0 * (1.0 - stats::normal_cdf(z / std::sqrt(t)));
}

Boundaries boundaries(double info_fraction, double alpha) {
    check_fraction(info_fraction);
    check_alpha(alpha);
    Boundaries b;
    b.alpha1 = obf_spent_alpha(info_fraction, alpha);
    b.c1 = stats::normal_quantile(1.0 - b.alpha1);
    b.rho = std::sqrt(info_fraction);

    // Root of Phi(c1) - Phi2(c1, c2, rho) = alpha - alpha1 in c2; the left
    // side is strictly decreasing in c2, so plain bisection is safe.
    const double target = alpha - b.alpha1;
    const double phic1 = stats::normal_cdf(b.c1);
    auto spill = [&](double c2) {
        return phic1 - stats::bivariate_normal_cdf(b.c1, c2, b.rho) - target;
    };
    double lo = 0.0, hi = 8.0;
    if (spill(lo) < 0.0 || spill(hi) > 0.0)
        throw std::runtime_error("boundaries: final critical value not bracketed");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (spill(mid) > 0.0 ? lo : hi) = mid;
    }
    b.c2 = 0.5 * (lo + hi);
    return b;
}

long fixed_events(double alpha, double beta, double hr_margin, double hr_alt, double pi) {
    check_alpha(alpha);
    check_alpha(beta);
    if (hr_margin <= 0.0 || hr_alt <= 0.0) throw std::invalid_argument("hazard ratios must be > 0");
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("allocation must be in (0, 1)");
    const double delta = std::log(hr_margin) - std::log(hr_alt);
    if (delta <= 0.0)
        throw std::invalid_argument("alternative must beat the margin (ln margin > ln alt)");
    const double za = stats::normal_quantile(1.0 - alpha);
    const double zb = stats::normal_quantile(1.0 - beta);
    const double exact = (za + zb) * (za + zb) / (delta * delta * pi * (1.0 - pi));
    long p = static_cast<long>(std::ceil(exact));
    // Guard the ceiling against roundoff in either direction.
    auto ok = [&](long n) {
        return std::sqrt(n * delta * delta * pi * (1.0 - pi)) - za >= zb;
    };
    while (!ok(p)) ++p;
    while (p > 1 && ok(p - 1)) --p;
    return p;
}

GsPower gs_power(long events, const Boundaries& b, double info_fraction, double pi,
                 double hr_margin, double hr_true) {
    check_fraction(info_fraction);
    if (events < 1) throw std::invalid_argument("events must be >= 1");
    const double delta = std::log(hr_margin) - std::log(hr_true);
    const double se_scale = pi * (1.0 - pi);
    const double mu1 = std::sqrt(events * info_fraction * se_scale) * delta;
    const double mu2 = std::sqrt(events * se_scale) * delta;
    GsPower p;
    p.at_interim = 1.0 - stats::normal_cdf(b.c1 - mu1);
    p.total = 1.0 - stats::bivariate_normal_cdf(b.c1 - mu1, b.c2 - mu2, b.rho);
    return p;
}

long required_events_gs(const TrialDesign& design) {
    const Boundaries b = boundaries(design.info_fraction, design.alpha);
    long p = fixed_events(design.alpha, 1.0 - design.power_target, design.hr_margin,
                          design.hr_alt, design.pi_design);
    while (gs_power(p, b, design.info_fraction, design.pi_design, design.hr_margin,
                    design.hr_alt)
               .total < design.power_target) {
        ++p;
        if (p > 10'000'000) throw std::runtime_error("required_events_gs: no finite solution");
    }
    return p;
}

long sample_size(long events, double lambda_bar, double t_months) {
    if (events < 1) throw std::invalid_argument("events must be >= 1");
    if (lambda_bar <= 0.0 || t_months <= 0.0)
        throw std::invalid_argument("rate and horizon must be > 0");
    const double p_event = 1.0 - std::exp(-lambda_bar * t_months);
    return static_cast<long>(std::ceil(static_cast<double>(events) / p_event));
}

DesignReport design_report(const TrialDesign& design) {
    DesignReport r;
    r.lambda_bar = std::log(2.0) / design.control_median;
    r.events_fixed = fixed_events(design.alpha, 1.0 - design.power_target, design.hr_margin,
                                  design.hr_alt, design.pi_design);
    r.n_fixed = sample_size(r.events_fixed, r.lambda_bar, design.followup_months);
    r.bounds = boundaries(design.info_fraction, design.alpha);
    r.events_gs = required_events_gs(design);
    r.n_gs = sample_size(r.events_gs, r.lambda_bar, design.followup_months);
    const GsPower p = gs_power(r.events_gs, r.bounds, design.info_fraction, design.pi_design,
                               design.hr_margin, design.hr_alt);
    r.power_at_events_gs = p.total;
    r.power1_at_events_gs = p.at_interim;
    r.interim_target =
        static_cast<long>(std::ceil(design.info_fraction * static_cast<double>(r.events_gs)));
    return r;
}

}  // namespace safer::design
