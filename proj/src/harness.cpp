#include "safer/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "safer/allocation.hpp"
#include "safer/rng.hpp"

namespace safer::mc {

namespace {

constexpr long kBlock = 64;  // replicates folded per block, fixed for reproducibility

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

struct Acc {
    long n = 0;
    long rejects = 0;
    long rejects_interim = 0;
    long interim_reached = 0;
    double sum_alloc = 0, sum_alloc_sq = 0;
    long ae[2] = {0, 0};
    double exposure[2] = {0, 0};
    long patients[2] = {0, 0};
    long events_final = 0;
    double sum_interim_month = 0;
    double sum_enrolled_stop = 0, sum_alloc_stop = 0;

    void add(const engine::TrialResult& r) {
        ++n;
        rejects += r.rejected != 0;
        rejects_interim += r.rejected == 1;
        interim_reached += r.interim_reached ? 1 : 0;
        const double frac = static_cast<double>(r.n_experimental) / r.n_total;
        sum_alloc += frac;
        sum_alloc_sq += frac * frac;
        for (int a = 0; a < 2; ++a) {
            ae[a] += r.ae_count[a];
            exposure[a] += r.exposure_months[a];
        }
        patients[0] += r.n_total - r.n_experimental;
        patients[1] += r.n_experimental;
        events_final += r.events_final;
        if (r.interim_reached) sum_interim_month += r.interim_month;
        sum_enrolled_stop += r.n_enrolled_at_stop;
        if (r.n_enrolled_at_stop > 0)
            sum_alloc_stop += static_cast<double>(r.n_exp_at_stop) / r.n_enrolled_at_stop;
    }

    void merge(const Acc& o) {
        n += o.n;
        rejects += o.rejects;
        rejects_interim += o.rejects_interim;
        interim_reached += o.interim_reached;
        sum_alloc += o.sum_alloc;
        sum_alloc_sq += o.sum_alloc_sq;
        for (int a = 0; a < 2; ++a) {
            ae[a] += o.ae[a];
            exposure[a] += o.exposure[a];
            patients[a] += o.patients[a];
        }
        events_final += o.events_final;
        sum_interim_month += o.sum_interim_month;
        sum_enrolled_stop += o.sum_enrolled_stop;
        sum_alloc_stop += o.sum_alloc_stop;
    }
};

SimulationSummary summarize(const Acc& a) {
    SimulationSummary s;
    s.n_replicates = a.n;
    const double n = static_cast<double>(a.n);
    s.power = a.rejects / n;
    s.power_interim = a.rejects_interim / n;
    s.mc_se_power = std::sqrt(std::max(0.0, s.power * (1.0 - s.power) / n));
    s.mean_alloc_e = a.sum_alloc / n;
    const double var = std::max(0.0, a.sum_alloc_sq / n - s.mean_alloc_e * s.mean_alloc_e);
    s.mc_se_alloc = std::sqrt(var / n);
    const auto rate = [](long count, double months) {
        return months > 0.0 ? static_cast<double>(count) / (months / 12.0) : 0.0;
    };
    s.ae_rate_control = rate(a.ae[0], a.exposure[0]);
    s.ae_rate_experimental = rate(a.ae[1], a.exposure[1]);
    s.ae_rate_total = rate(a.ae[0] + a.ae[1], a.exposure[0] + a.exposure[1]);
    auto nominal = [](long count, long heads) {
        return heads > 0 ? static_cast<double>(count) / static_cast<double>(heads) : 0.0;
    };
    s.ae_rate_nominal_control = nominal(a.ae[0], a.patients[0]);
    s.ae_rate_nominal_experimental = nominal(a.ae[1], a.patients[1]);
    s.ae_rate_nominal_total = nominal(a.ae[0] + a.ae[1], a.patients[0] + a.patients[1]);
    s.mean_events_final = a.events_final / n;
    s.interim_reached_rate = a.interim_reached / n;
    s.mean_interim_month =
        a.interim_reached > 0 ? a.sum_interim_month / a.interim_reached : 0.0;
    s.mean_enrolled_at_stop = a.sum_enrolled_stop / n;
    s.mean_alloc_e_at_stop = a.sum_alloc_stop / n;
    return s;
}

// Runs per_block(block, lo, hi) over [0, reps) split into kBlock chunks.
// Workers claim blocks through an atomic counter; results live in per-block
// slots, so any thread count reproduces the single-thread numbers.
template <class Fn>
void run_blocks(long reps, int parallelism, long n_blocks, Fn&& per_block) {
    std::atomic<long> cursor{0};
    auto worker = [&]() {
        for (;;) {
            const long b = cursor.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_blocks) return;
            const long lo = b * kBlock;
            const long hi = std::min(reps, lo + kBlock);
            per_block(b, lo, hi);
        }
    };
    const int threads = static_cast<int>(
        std::clamp<long>(parallelism, 1, std::min<long>(n_blocks, 256)));
    if (threads <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

void validate_reps(long reps) {
    if (reps <= 0) throw std::invalid_argument("run_scenario: replicates must be positive");
    if (reps > (1L << 32))
        throw std::invalid_argument("run_scenario: replicate index space exhausted");
}

rng::Stream replicate_stream(std::uint64_t master_seed, std::uint32_t cell_id, long rep) {
    const std::uint64_t sid =
        (static_cast<std::uint64_t>(cell_id) << 32) | static_cast<std::uint64_t>(rep);
    return rng::Stream(master_seed, sid);
}

double quantile_sorted(const std::vector<double>& x, double p) {
    const double h = static_cast<double>(x.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    return lo + 1 < x.size() ? x[lo] + (x[lo + 1] - x[lo]) * frac : x[lo];
}

}  // namespace

SimulationSummary run_scenario(const CellSpec& cell, long n_replicates, std::uint64_t master_seed,
                               int parallelism) {
    validate_reps(n_replicates);
    const design::DesignReport report = design::design_report(cell.design);
    const long n_blocks = (n_replicates + kBlock - 1) / kBlock;
    std::vector<Acc> accs(static_cast<std::size_t>(n_blocks));
    run_blocks(n_replicates, parallelism, n_blocks, [&](long b, long lo, long hi) {
        Acc& a = accs[static_cast<std::size_t>(b)];
        for (long rep = lo; rep < hi; ++rep) {
            rng::Stream rng = replicate_stream(master_seed, cell.cell_id, rep);
            a.add(engine::run_trial(cell.spec, cell.design, report, rng));
        }
    });
    Acc total;
    for (const Acc& a : accs) total.merge(a);
    return summarize(total);
}

Trajectory allocation_trajectory(const CellSpec& cell, long n_replicates,
                                 std::uint64_t master_seed, int parallelism) {
    validate_reps(n_replicates);
    const design::DesignReport report = design::design_report(cell.design);
    const auto nu = static_cast<std::size_t>(cell.design.n_updates);
    std::vector<double> mat(static_cast<std::size_t>(n_replicates) * nu);
    const long n_blocks = (n_replicates + kBlock - 1) / kBlock;
    run_blocks(n_replicates, parallelism, n_blocks, [&](long, long lo, long hi) {
        for (long rep = lo; rep < hi; ++rep) {
            rng::Stream rng = replicate_stream(master_seed, cell.cell_id, rep);
            const engine::TrialResult r = engine::run_trial(cell.spec, cell.design, report, rng);
            std::copy(r.pi_trace.begin(), r.pi_trace.end(),
                      mat.begin() + static_cast<std::size_t>(rep) * nu);
        }
    });

    Trajectory t;
    t.update_months = alloc::update_schedule(cell.design.update_interval, cell.design.n_updates);
    t.q25.resize(nu);
    t.median.resize(nu);
    t.q75.resize(nu);
    std::vector<double> col(static_cast<std::size_t>(n_replicates));
    for (std::size_t u = 0; u < nu; ++u) {
        for (std::size_t rep = 0; rep < static_cast<std::size_t>(n_replicates); ++rep)
            col[rep] = mat[rep * nu + u];
        std::sort(col.begin(), col.end());
        t.q25[u] = quantile_sorted(col, 0.25);
        t.median[u] = quantile_sorted(col, 0.50);
        t.q75[u] = quantile_sorted(col, 0.75);
    }
    return t;
}

namespace {

const std::vector<std::pair<double, double>>& median_pi_grid() {
    // Experimental safety median (months) against the 1.5-month control and
    // the Neyman target it implies.
    static const std::vector<std::pair<double, double>> g = {
        {1.5, 0.5}, {2.25, 0.6}, {3.5, 0.7}, {6.0, 0.8}};
    return g;
}

const std::vector<std::pair<double, std::string>>& assoc_grid() {
    static const std::vector<std::pair<double, std::string>> g = {{0.001, "very_weak"},
                                                                  {0.005, "weak"},
                                                                  {0.01, "moderate"},
                                                                  {0.03, "strong"},
                                                                  {0.05, "very_strong"}};
    return g;
}

std::string assoc_label(const sim::ScenarioSpec& s) {
    if (s.independent) return "none";
    for (const auto& [e, name] : assoc_grid())
        if (e == s.assoc.expected_gamma1) return name;
    return fmt_num(s.assoc.expected_gamma1);
}

std::string policy_name(sim::Policy p) {
    switch (p) {
        case sim::Policy::complete: return "complete";
        case sim::Policy::safety_rar: return "safety_rar";
        case sim::Policy::safer: return "safer";
    }
    return "?";
}

CellSpec make_cell(std::string scenario, std::string label, const sim::ScenarioSpec& spec,
                   const design::TrialDesign& d) {
    CellSpec c;
    c.scenario = std::move(scenario);
    c.label = std::move(label);
    c.spec = spec;
    c.design = d;
    const double pfs_median_months = spec.independent
                                         ? spec.control_pfs_median
                                         : std::exp(spec.assoc.gamma0) * std::log(2.0) /
                                               spec.assoc.days_per_month;
    c.tags = {
        {"scenario", c.scenario},
        {"policy", policy_name(spec.policy)},
        {"eta", fmt_num(spec.eta)},
        {"median_e", fmt_num(spec.safety.median_experimental)},
        {"median_c", fmt_num(spec.safety.median_control)},
        {"pi", fmt_num(sim::true_neyman(spec.safety))},
        {"if", fmt_num(d.info_fraction)},
        {"hyp", spec.efficacy_null ? "H0" : "H1"},
        {"assoc", assoc_label(spec)},
        {"pfs_median", fmt_num(pfs_median_months)},
        {"dropout", fmt_num(spec.dropout_rate)},
        {"underreport", fmt_num(spec.underreport_rate)},
        {"strategy", spec.strategy == sim::Strategy::composite ? "composite" : "none"},
    };
    return c;
}

void add_s0(std::vector<CellSpec>& out) {
    for (const auto& [median_e, pi] : median_pi_grid()) {
        for (const double info : {0.2, 0.3, 0.4, 0.5}) {
            for (const bool null_hyp : {false, true}) {
                sim::ScenarioSpec s;
                s.independent = true;
                s.efficacy_null = null_hyp;
                s.policy = sim::Policy::safety_rar;
                s.safety.median_experimental = median_e;
                design::TrialDesign d;
                d.info_fraction = info;
                const std::string label = "S0 pi=" + fmt_num(pi) + " if=" + fmt_num(info) +
                                          (null_hyp ? " H0" : " H1");
                out.push_back(make_cell("S0", label, s, d));
            }
        }
    }
}

void add_linked_family(std::vector<CellSpec>& out, const std::string& name, sim::Policy policy,
                       double eta) {
    for (const auto& [e_gamma, assoc_name] : assoc_grid()) {
        for (const auto& [median_e, pi] : median_pi_grid()) {
            sim::ScenarioSpec s;
            s.independent = false;
            s.assoc.expected_gamma1 = e_gamma;
            s.policy = policy;
            s.eta = eta;
            s.safety.median_experimental = median_e;
            const std::string label =
                name + " assoc=" + assoc_name + " pi=" + fmt_num(pi);
            out.push_back(make_cell(name, label, s, design::TrialDesign{}));
        }
    }
}

void add_s4(std::vector<CellSpec>& out) {
    for (const double pfs_median : {3.0, 9.0, 18.0, 24.0}) {
        for (const auto& [e_gamma, assoc_name] :
             std::vector<std::pair<double, std::string>>{{0.05, "very_strong"},
                                                         {0.005, "weak"}}) {
            sim::ScenarioSpec s;
            s.independent = false;
            s.assoc.expected_gamma1 = e_gamma;
            s.assoc.gamma0 = std::log(pfs_median * 30.0 / std::log(2.0));
            s.policy = sim::Policy::safer;
            s.eta = 5.0;
            s.safety.median_experimental = 6.0;
            const std::string label =
                "S4 pfs_median=" + fmt_num(pfs_median) + " assoc=" + assoc_name;
            out.push_back(make_cell("S4", label, s, design::TrialDesign{}));
        }
    }
}

void add_s5(std::vector<CellSpec>& out) {
    for (const double dropout : {0.05, 0.10, 0.15, 0.20, 0.25}) {
        for (const auto& [median_e, pi] : median_pi_grid()) {
            sim::ScenarioSpec s;
            s.independent = false;
            s.assoc.expected_gamma1 = 0.05;
            s.policy = sim::Policy::safer;
            s.eta = 5.0;
            s.safety.median_experimental = median_e;
            s.dropout_rate = dropout;
            s.strategy = sim::Strategy::composite;
            const std::string label =
                "S5 dropout=" + fmt_num(dropout) + " pi=" + fmt_num(pi);
            out.push_back(make_cell("S5", label, s, design::TrialDesign{}));
        }
    }
}

void add_s6(std::vector<CellSpec>& out) {
    for (const double underreport : {0.05, 0.10, 0.15, 0.20, 0.25}) {
        for (const auto& [median_e, pi] : median_pi_grid()) {
            sim::ScenarioSpec s;
            s.independent = false;
            s.assoc.expected_gamma1 = 0.05;
            s.policy = sim::Policy::safer;
            s.eta = 5.0;
            s.safety.median_experimental = median_e;
            s.underreport_rate = underreport;
            const std::string label =
                "S6 underreport=" + fmt_num(underreport) + " pi=" + fmt_num(pi);
            out.push_back(make_cell("S6", label, s, design::TrialDesign{}));
        }
    }
}

void add_red_flag(std::vector<CellSpec>& out) {
    // Worst case for a composite analysis: the experimental arm halves the
    // tolerability hazard but doubles the true progression hazard, and every
    // tolerability event ends follow-up. The imputed events then let the
    // safety advantage masquerade as efficacy and the test rejects a truly
    // inferior treatment almost surely.
    sim::ScenarioSpec s;
    s.independent = true;
    s.efficacy_null = false;
    s.pfs_hr = 2.0;
    s.safety.median_experimental = 6.0;
    s.policy = sim::Policy::safer;
    s.eta = 5.0;
    s.dropout_rate = 1.0;
    s.strategy = sim::Strategy::composite;
    out.push_back(make_cell("red_flag", "red_flag", s, design::TrialDesign{}));
}

}  // namespace

std::vector<CellSpec> builtin_scenarios(const std::string& which) {
    std::vector<CellSpec> all;
    add_s0(all);
    add_linked_family(all, "S1", sim::Policy::complete, 1.0);
    add_linked_family(all, "S2", sim::Policy::safety_rar, 1.0);
    add_linked_family(all, "S3a", sim::Policy::safer, 1.0);
    add_linked_family(all, "S3b", sim::Policy::safer, 5.0);
    add_s4(all);
    add_s5(all);
    add_s6(all);
    add_red_flag(all);
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i].cell_id = static_cast<std::uint32_t>(i);
    if (which == "all") return all;

    // Accept both the bare index form ("0", "3a") and the prefixed one ("S0").
    std::string name = which;
    if (!name.empty() && name[0] != 'S' && name != "red_flag") name = "S" + name;
    std::vector<CellSpec> picked;
    for (auto& c : all) {
        const bool match = c.scenario == name || (name == "S3" && (c.scenario == "S3a" ||
                                                                   c.scenario == "S3b"));
        if (match) picked.push_back(std::move(c));
    }
    if (picked.empty())
        throw std::invalid_argument("builtin_scenarios: unknown scenario '" + which + "'");
    return picked;
}

std::string tag_value(const CellSpec& cell, const std::string& key) {
    for (const auto& [k, v] : cell.tags)
        if (k == key) return v;
    return {};
}

std::vector<CellSpec> matched_cells(const std::vector<CellSpec>& catalog,
                                    const std::vector<std::pair<std::string, std::string>>& want) {
    std::vector<CellSpec> out;
    for (const auto& c : catalog) {
        bool ok = true;
        for (const auto& [k, v] : want)
            if (tag_value(c, k) != v) {
                ok = false;
                break;
            }
        if (ok) out.push_back(c);
    }
    return out;
}

}  // namespace safer::mc
