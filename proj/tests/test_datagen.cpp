#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "safer/datagen.hpp"
#include "safer/rng.hpp"

using namespace safer;
using namespace safer::sim;

namespace {

struct Moments {
    double mean_x = 0, mean_y = 0, corr = 0;
};

Moments sample_latent(const ScenarioSpec& spec, int arm, int n, rng::Stream& rng) {
    std::vector<double> xs, ys;
    xs.reserve(n);
    ys.reserve(n);
    for (int i = 0; i < n; ++i) {
        PatientRecord p = generate_patient(i, 0.0, arm, spec, rng);
        xs.push_back(p.t_safety);
        ys.push_back(p.t_pfs);
    }
    Moments m;
    for (int i = 0; i < n; ++i) {
        m.mean_x += xs[i];
        m.mean_y += ys[i];
    }
    m.mean_x /= n;
    m.mean_y /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double dx = xs[i] - m.mean_x;
        const double dy = ys[i] - m.mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    m.corr = sxy / std::sqrt(sxx * syy);
    return m;
}

PatientRecord base_patient() {
    PatientRecord p;
    p.id = 1;
    p.entry = 10.0;
    p.arm = 1;
    p.t_safety = 2.0;
    p.t_pfs = 8.0;
    return p;
}

}  // namespace

TEST_CASE("rate_from_median") {
    CHECK(rate_from_median(10.0) == doctest::Approx(0.06931471805599453).epsilon(1e-12));
    CHECK(rate_from_median(std::log(2.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rate_from_median(1.5) == doctest::Approx(std::log(2.0) / 1.5).epsilon(1e-12));
    CHECK_THROWS_AS(rate_from_median(0.0), std::invalid_argument);
    CHECK_THROWS_AS(rate_from_median(-3.0), std::invalid_argument);
}

TEST_CASE("true_neyman from medians") {
    SafetyModel m;
    m.median_experimental = 6.0;
    m.median_control = 1.5;
    CHECK(true_neyman(m) == doctest::Approx(0.8).epsilon(1e-12));
    m.median_experimental = 1.5;
    CHECK(true_neyman(m) == doctest::Approx(0.5).epsilon(1e-12));
    m.median_experimental = 3.5;
    CHECK(true_neyman(m) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("generate_safety_time hits the configured medians") {
    SafetyModel m;
    m.median_control = 1.5;
    m.median_experimental = 6.0;
    rng::Stream rng(7001, 0);
    const int n = 100000;
    std::vector<double> e, c;
    for (int i = 0; i < n; ++i) {
        e.push_back(generate_safety_time(1, m, rng));
        c.push_back(generate_safety_time(0, m, rng));
    }
    std::nth_element(e.begin(), e.begin() + n / 2, e.end());
    std::nth_element(c.begin(), c.begin() + n / 2, c.end());
    CHECK(e[n / 2] == doctest::Approx(6.0).epsilon(0.02));
    CHECK(c[n / 2] == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("extra_cycles counts completed 21-day cycles beyond three") {
    AssociationModel a;
    CHECK(extra_cycles(0.0, a) == 0);
    CHECK(extra_cycles(1.5, a) == 0);   // 45 days, 2 cycles
    CHECK(extra_cycles(2.1, a) == 0);   // 63 days, exactly 3 cycles
    CHECK(extra_cycles(2.8, a) == 1);   // 84 days
    CHECK(extra_cycles(6.0, a) == 5);   // 180 days, 8 cycles
    CHECK(extra_cycles(12.0, a) == 14); // 360 days, 17 cycles
    // Non-decreasing in the safety time.
    int prev = 0;
    for (double t = 0.0; t <= 24.0; t += 0.05) {
        const int cur = extra_cycles(t, a);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("efficacy_mean scales the baseline by the tolerated cycles") {
    const double g0 = std::log(434.78);
    CHECK(efficacy_mean(0, g0, 0.05) == doctest::Approx(434.78).epsilon(1e-10));
    CHECK(efficacy_mean(7, g0, 0.0) == doctest::Approx(434.78).epsilon(1e-10));
    CHECK(efficacy_mean(5, g0, 0.05) ==
          doctest::Approx(434.78 * std::exp(0.25)).epsilon(1e-10));
    // The log effect saturates at the cap.
    CHECK(efficacy_mean(1000, g0, 0.05, 10.0) ==
          doctest::Approx(434.78 * std::exp(10.0)).epsilon(1e-10));
    CHECK(efficacy_mean(400, g0, 0.05, 10.0) == efficacy_mean(1000, g0, 0.05, 10.0));
}

TEST_CASE("independent mode: control PFS median and null hazard ratio") {
    ScenarioSpec spec;
    spec.independent = true;
    spec.control_pfs_median = 10.0;
    rng::Stream rng(7002, 0);
    const int n = 200000;

    SUBCASE("control median is the configured one") {
        std::vector<double> t;
        for (int i = 0; i < n; ++i) t.push_back(generate_patient(i, 0.0, 0, spec, rng).t_pfs);
        std::nth_element(t.begin(), t.begin() + n / 2, t.end());
        CHECK(t[n / 2] == doctest::Approx(10.0).epsilon(0.015));
    }

    SUBCASE("efficacy_null puts the experimental hazard on the margin") {
        spec.efficacy_null = true;
        double sum_e = 0, sum_c = 0;
        for (int i = 0; i < n; ++i) {
            sum_e += generate_patient(i, 0.0, 1, spec, rng).t_pfs;
            sum_c += generate_patient(i, 0.0, 0, spec, rng).t_pfs;
        }
        // Exponential hazard ratio equals the inverse ratio of means.
        CHECK(sum_c / sum_e == doctest::Approx(1.25).epsilon(0.015));
    }

    SUBCASE("pfs_hr scales the experimental hazard") {
        spec.pfs_hr = 2.0;
        double sum_e = 0, sum_c = 0;
        for (int i = 0; i < n; ++i) {
            sum_e += generate_patient(i, 0.0, 1, spec, rng).t_pfs;
            sum_c += generate_patient(i, 0.0, 0, spec, rng).t_pfs;
        }
        CHECK(sum_c / sum_e == doctest::Approx(2.0).epsilon(0.02));
    }

    SUBCASE("safety and efficacy are uncorrelated") {
        const Moments m = sample_latent(spec, 1, 100000, rng);
        CHECK(std::abs(m.corr) < 0.012);
    }
}

TEST_CASE("linked mode couples tolerability to efficacy") {
    ScenarioSpec spec;
    spec.independent = false;
    spec.safety.median_control = 1.5;
    spec.safety.median_experimental = 6.0;
    spec.assoc.expected_gamma1 = 0.05;
    rng::Stream rng(7003, 0);
    const int n = 100000;

    const Moments me = sample_latent(spec, 1, n, rng);
    const Moments mc = sample_latent(spec, 0, n, rng);
    // Better tolerability buys longer mean PFS.
    CHECK(me.mean_y > mc.mean_y * 1.1);
    CHECK(me.mean_y > 434.78 / 30.0);
    CHECK(me.corr > 0.03);

    // With the link disabled both arms revert to the baseline mean.
    spec.assoc.expected_gamma1 = 0.0;
    const Moments m0e = sample_latent(spec, 1, n, rng);
    const Moments m0c = sample_latent(spec, 0, n, rng);
    CHECK(m0e.mean_y == doctest::Approx(434.78 / 30.0).epsilon(0.02));
    CHECK(m0c.mean_y == doctest::Approx(434.78 / 30.0).epsilon(0.02));
    CHECK(std::abs(m0e.corr) < 0.02);
}

TEST_CASE("pfs_hr also scales the linked-mode hazard") {
    ScenarioSpec spec;
    spec.independent = false;
    spec.safety.median_experimental = 6.0;
    spec.assoc.expected_gamma1 = 0.05;
    // Same stream, same latent draws: doubling the hazard exactly halves each
    // experimental PFS time.
    rng::Stream r1(7013, 0), r2(7013, 0);
    ScenarioSpec doubled = spec;
    doubled.pfs_hr = 2.0;
    for (int i = 0; i < 2000; ++i) {
        const PatientRecord a = generate_patient(i, 0.0, 1, spec, r1);
        const PatientRecord b = generate_patient(i, 0.0, 1, doubled, r2);
        CHECK(a.t_safety == b.t_safety);
        CHECK(a.t_pfs == doctest::Approx(2.0 * b.t_pfs).epsilon(1e-12));
    }
}

TEST_CASE("gamma1 is drawn per patient around its expectation") {
    ScenarioSpec spec;
    spec.independent = false;
    spec.safety.median_experimental = 6.0;
    spec.assoc.expected_gamma1 = 0.05;
    rng::Stream rng(7004, 0);
    const int n = 50000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double g = generate_patient(i, 0.0, 1, spec, rng).gamma1;
        CHECK(g > 0.0);
        sum += g;
        sum2 += g * g;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(0.05).epsilon(0.01));
    // Gamma(50, 0.001): variance = 50 * 0.001^2.
    CHECK(var == doctest::Approx(50.0 * 1e-6).epsilon(0.05));
}

TEST_CASE("dropout and under-report flags match their rates") {
    ScenarioSpec spec;
    spec.dropout_rate = 0.25;
    spec.underreport_rate = 0.10;
    rng::Stream rng(7005, 0);
    const int n = 100000;
    int nd = 0, nu = 0;
    for (int i = 0; i < n; ++i) {
        const PatientRecord p = generate_patient(i, 0.0, 0, spec, rng);
        nd += p.dropout;
        nu += p.underreport;
    }
    CHECK(nd / double(n) == doctest::Approx(0.25).epsilon(0.02));
    CHECK(nu / double(n) == doctest::Approx(0.10).epsilon(0.04));

    spec.dropout_rate = 0.0;
    spec.underreport_rate = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const PatientRecord p = generate_patient(i, 0.0, 0, spec, rng);
        CHECK_FALSE(p.dropout);
        CHECK_FALSE(p.underreport);
    }
}

TEST_CASE("generation replays identically from the same stream") {
    ScenarioSpec spec;
    spec.independent = false;
    spec.assoc.expected_gamma1 = 0.01;
    spec.dropout_rate = 0.1;
    rng::Stream a(99, 5), b(99, 5);
    for (int i = 0; i < 200; ++i) {
        const PatientRecord pa = generate_patient(i, 1.0, i % 2, spec, a);
        const PatientRecord pb = generate_patient(i, 1.0, i % 2, spec, b);
        CHECK(pa.t_safety == pb.t_safety);
        CHECK(pa.t_pfs == pb.t_pfs);
        CHECK(pa.gamma1 == pb.gamma1);
        CHECK(pa.dropout == pb.dropout);
    }
}

TEST_CASE("observe: plain follow-up") {
    PatientRecord p = base_patient();  // entry 10, Ts 2, Te 8
    const Observed o = observe(p, 60.0, Strategy::none, 12.0);
    CHECK(o.safety_event);
    CHECK(o.safety_time == doctest::Approx(2.0));
    CHECK(o.safety_occurred);
    CHECK(o.eff_event);
    CHECK(o.eff_time == doctest::Approx(8.0));
    CHECK(o.exposure == doctest::Approx(8.0));
}

TEST_CASE("observe: follow-up cap censors late progressions") {
    PatientRecord p = base_patient();
    p.t_pfs = 14.0;
    const Observed o = observe(p, 60.0, Strategy::none, 12.0);
    CHECK_FALSE(o.eff_event);
    CHECK(o.eff_time == doctest::Approx(12.0));
    CHECK(o.exposure == doctest::Approx(12.0));

    // Early analyses truncate harder than the cap.
    const Observed oe = observe(p, 15.0, Strategy::none, 12.0);
    CHECK_FALSE(oe.eff_event);
    CHECK(oe.eff_time == doctest::Approx(5.0));

    p.t_pfs = 8.0;
    const Observed o2 = observe(p, 15.0, Strategy::none, 12.0);
    CHECK_FALSE(o2.eff_event);  // progression at 8 not yet visible at tau = 5
    CHECK(o2.eff_time == doctest::Approx(5.0));
    const Observed o3 = observe(p, 18.0 + 1e-9, Strategy::none, 12.0);
    CHECK(o3.eff_event);  // visible once tau passes 8
}

TEST_CASE("observe: progression truncates the safety endpoint") {
    PatientRecord p = base_patient();
    p.t_safety = 9.0;  // after progression at 8
    const Observed o = observe(p, 60.0, Strategy::none, 12.0);
    CHECK_FALSE(o.safety_event);
    CHECK_FALSE(o.safety_occurred);
    CHECK(o.safety_time == doctest::Approx(8.0));

    p.t_safety = 13.0;
    p.t_pfs = 14.0;  // both beyond the cap
    const Observed o2 = observe(p, 60.0, Strategy::none, 12.0);
    CHECK_FALSE(o2.safety_event);
    CHECK(o2.safety_time == doctest::Approx(12.0));
    CHECK_FALSE(o2.eff_event);
}

TEST_CASE("observe: drop-out exits at the safety event") {
    PatientRecord p = base_patient();
    p.dropout = true;

    const Observed oc = observe(p, 60.0, Strategy::composite, 12.0);
    CHECK(oc.safety_event);
    CHECK(oc.eff_event);  // composite turns the exit into an efficacy event
    CHECK(oc.eff_time == doctest::Approx(2.0));
    CHECK(oc.exposure == doctest::Approx(2.0));

    const Observed on = observe(p, 60.0, Strategy::none, 12.0);
    CHECK(on.safety_event);
    CHECK_FALSE(on.eff_event);  // otherwise the exit censors efficacy
    CHECK(on.eff_time == doctest::Approx(2.0));

    // The flag is inert when no safety event is observed.
    p.t_safety = 20.0;
    const Observed oq = observe(p, 60.0, Strategy::composite, 12.0);
    CHECK_FALSE(oq.safety_event);
    CHECK(oq.eff_event);
    CHECK(oq.eff_time == doctest::Approx(8.0));
}

TEST_CASE("observe: under-reporting erases safety but never efficacy") {
    PatientRecord p = base_patient();
    p.underreport = true;
    const Observed o = observe(p, 60.0, Strategy::none, 12.0);
    CHECK_FALSE(o.safety_event);
    CHECK(o.safety_occurred);  // burden metrics still see it
    CHECK(o.safety_time == doctest::Approx(8.0));

    PatientRecord q = base_patient();
    const Observed ref = observe(q, 60.0, Strategy::none, 12.0);
    CHECK(o.eff_time == ref.eff_time);
    CHECK(o.eff_event == ref.eff_event);
    CHECK(o.exposure == ref.exposure);
}

TEST_CASE("observe: rejects analyses at or before entry") {
    const PatientRecord p = base_patient();
    CHECK_THROWS_AS(observe(p, 10.0, Strategy::none, 12.0), std::invalid_argument);
    CHECK_THROWS_AS(observe(p, 9.0, Strategy::none, 12.0), std::invalid_argument);
}

TEST_CASE("observe invariants over random patients") {
    ScenarioSpec spec;
    spec.independent = false;
    spec.assoc.expected_gamma1 = 0.01;
    spec.safety.median_experimental = 3.5;
    spec.dropout_rate = 0.2;
    spec.underreport_rate = 0.2;
    rng::Stream rng(7006, 1);
    for (int i = 0; i < 20000; ++i) {
        PatientRecord p = generate_patient(i, rng.uniform() * 48.0, i % 2, spec, rng);
        const double analysis = p.entry + 0.5 + rng.uniform() * 59.0;
        const Observed o = observe(p, analysis, Strategy::composite, 12.0);
        const double tau = std::min(analysis - p.entry, 12.0);
        CHECK(o.eff_time <= tau + 1e-12);
        CHECK(o.exposure <= tau + 1e-12);
        CHECK(o.safety_time <= tau + 1e-12);
        CHECK(o.exposure > 0.0);
        if (o.safety_event) CHECK(o.safety_occurred);
        if (o.safety_occurred) CHECK(o.safety_time <= std::min(p.t_pfs, tau) + 1e-12);
        // Under-reporting must not leak into the efficacy record.
        PatientRecord clean = p;
        clean.underreport = false;
        const Observed oc = observe(clean, analysis, Strategy::composite, 12.0);
        CHECK(o.eff_time == oc.eff_time);
        CHECK(o.eff_event == oc.eff_event);
    }
}
