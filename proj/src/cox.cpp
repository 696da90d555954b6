#include "safer/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "safer/stats.hpp"

namespace safer::inference {

namespace {

// Partial log-likelihood, score, and information at beta for a single binary
// covariate, Breslow ties. One descending sweep maintains the risk-set counts
// per arm; tied event times share the risk set that includes every subject
// tied at that time.
struct LikelihoodState {
    double loglik = 0.0;
    double score = 0.0;
    double info = 0.0;
};

LikelihoodState evaluate(const std::vector<int>& order, std::span<const double> time,
                         std::span<const std::uint8_t> event,
                         std::span<const std::uint8_t> group, double beta) {
    LikelihoodState st;
    const double ebeta = std::exp(beta);
    double n0 = 0.0, n1 = 0.0;
    const int n = static_cast<int>(order.size());
    int i = n - 1;
    while (i >= 0) {
        const double t = time[order[i]];
        int j = i;
        int d = 0, d1 = 0;
        while (j >= 0 && time[order[j]] == t) {
            const int idx = order[j];
            (group[idx] ? n1 : n0) += 1.0;
            if (event[idx]) {
                ++d;
                d1 += group[idx];
            }
            --j;
        }
        if (d > 0) {
            const double s0 = n0 + n1 * ebeta;
            const double p = n1 * ebeta / s0;  // expected covariate in the risk set
            st.loglik += beta * d1 - d * std::log(s0);
            st.score += d1 - d * p;
            st.info += d * p * (1.0 - p);
        }
        i = j;
    }
    return st;
}

}  // namespace

CoxFit cox_fit(std::span<const double> time, std::span<const std::uint8_t> event,
               std::span<const std::uint8_t> group) {
    const int n = static_cast<int>(time.size());
    if (n == 0 || static_cast<int>(event.size()) != n || static_cast<int>(group.size()) != n)
        throw std::invalid_argument("cox_fit: empty or mismatched inputs");

    int events = 0, events1 = 0;
    bool seen0 = false, seen1 = false;
    for (int i = 0; i < n; ++i) {
        if (event[i]) {
            ++events;
            events1 += group[i] ? 1 : 0;
        }
        (group[i] ? seen1 : seen0) = true;
    }
    if (events == 0) throw std::invalid_argument("cox_fit: no events");
    if (!seen0 || !seen1) throw std::invalid_argument("cox_fit: only one arm present");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return time[a] < time[b]; });

    CoxFit fit;
    fit.n_events = events;

    // All events in one arm: the partial likelihood is monotone in beta, so no
    // finite maximiser exists. Report the null evaluation, flagged.
    if (events1 == 0 || events1 == events) {
        const LikelihoodState st = evaluate(order, time, event, group, 0.0);
        fit.score = st.score;
        fit.information = st.info;
        fit.se = st.info > 0.0 ? 1.0 / std::sqrt(st.info) : 0.0;
        return fit;
    }

    constexpr double kScoreTol = 1e-8;
    constexpr int kMaxIter = 50;
    // Past this log hazard ratio the likelihood is flat enough that the score
    // tolerance can fire on a monotone ridge; treat it as separation.
    constexpr double kBetaRidge = 15.0;
    double beta = 0.0;
    LikelihoodState st = evaluate(order, time, event, group, beta);
    for (int iter = 1; iter <= kMaxIter; ++iter) {
        fit.iterations = iter;
        if (std::fabs(st.score) <= kScoreTol) break;
        if (st.info <= 1e-12) break;  // flat likelihood: separation or no contrast
        if (std::fabs(beta) > kBetaRidge) break;
        double step = st.score / st.info;
        // Step-halving keeps the partial likelihood nondecreasing. Accept any
        // step whose decrease is within rounding noise of the log-likelihood,
        // otherwise the final Newton steps near the optimum get rejected.
        const double noise = (std::fabs(st.loglik) + 1.0) * 1e-12;
        LikelihoodState next = evaluate(order, time, event, group, beta + step);
        int halvings = 0;
        while (next.loglik < st.loglik - noise && halvings < 30) {
            step /= 2.0;
            next = evaluate(order, time, event, group, beta + step);
            ++halvings;
        }
        beta += step;
        st = next;
    }
    fit.converged = std::fabs(st.score) <= kScoreTol && std::fabs(beta) <= kBetaRidge &&
                    st.info > 1e-12;

    fit.beta = beta;
    fit.score = st.score;
    fit.information = st.info;
    fit.se = st.info > 0.0 ? 1.0 / std::sqrt(st.info) : 0.0;
    return fit;
}

WaldResult wald_noninferiority(const CoxFit& fit, double hr_margin) {
    if (hr_margin <= 0.0) throw std::invalid_argument("wald_noninferiority: margin must be > 0");
    WaldResult r;
    r.margin = hr_margin;
    r.hr_hat = std::exp(fit.beta);
    r.w = (fit.beta - std::log(hr_margin)) / fit.se;
    return r;
}

ExpMean exp_mean_mle(std::span<const double> time, std::span<const std::uint8_t> event) {
    if (time.empty() || time.size() != event.size())
        throw std::invalid_argument("exp_mean_mle: empty or mismatched inputs");
    ExpMean m;
    for (std::size_t i = 0; i < time.size(); ++i) {
        m.exposure += time[i];
        m.n_events += event[i] ? 1 : 0;
    }
    if (m.n_events > 0) {
        m.mean = m.exposure / m.n_events;
        m.valid = true;
    }
    return m;
}

double phi_weight(const CoxFit& fit, int min_events, double log_shift) {
    if (!fit.converged || fit.n_events < min_events || fit.se <= 0.0) return 0.5;
    return stats::normal_cdf(-(fit.beta - log_shift) / fit.se);
}

}  // namespace safer::inference
