#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ubiq/errors.hpp"
#include "ubiq/model.hpp"

namespace ubiq {

// Psi(l) = u'(l)/u(l) = beta/l - gamma/(1-l) together with its first two
// derivatives. Psi is a strictly increasing bijection (0,1) -> R.
struct PsiValue {
    double value = 0.0;
    double d1 = 0.0;  // -beta/l^2 - gamma/(1-l)^2, always > 0
    double d2 = 0.0;  // 2 beta/l^3 - 2 gamma/(1-l)^3
};

inline PsiValue psi(double l, double beta, double gamma) {
    if (!(l > 0.0 && l < 1.0))
        throw DomainError("psi: labor share must lie in (0,1), got " + std::to_string(l));
    const double m = 1.0 - l;
    PsiValue p;
    p.value = beta / l - gamma / m;
    p.d1 = -beta / (l * l) - gamma / (m * m);
    p.d2 = 2.0 * beta / (l * l * l) - 2.0 * gamma / (m * m * m);
    return p;
}

namespace detail {

inline constexpr double kLaborEdge = 1e-12;

// Bisection-safeguarded Newton on (edge, 1-edge); Psi increasing makes the
// bracket maintenance trivial.
inline double invert_psi_newton(double c, double beta, double gamma, double start) {
    double lo = kLaborEdge;
    double hi = 1.0 - kLaborEdge;
    double l = std::clamp(start, lo, hi);
    for (int it = 0; it < 100; ++it) {
        const PsiValue p = psi(l, beta, gamma);
        const double r = p.value - c;
        if (r == 0.0) return l;
        if (r < 0.0) lo = l; else hi = l;
        double next = l - r / p.d1;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - l) <= 1e-16 * std::max(1.0, std::abs(l))) return next;
        l = next;
    }
    return l;
}

}  // namespace detail

// Unique l in (0,1) with Psi(l) = c, i.e. the root in (0,1) of
// c l^2 - (c+beta+gamma) l + beta = 0 (denominators cleared). The quadratic is
// evaluated in the cancellation-safe q arrangement; of the two roots the one
// inside (0,1) is kept, ties broken by the smaller Psi residual. A short
// guarded Newton polish drives the residual to its floating-point floor, and
// a bracketed Newton takes over entirely if the quadratic degenerates.
inline double invert_psi(double c, double beta, double gamma) {
    if (!(beta < 0.0) || !(gamma < 0.0))
        throw DomainError("invert_psi: beta and gamma must be negative");
    const double interior = beta / (beta + gamma);
    if (c == 0.0) return interior;

    double best = std::numeric_limits<double>::quiet_NaN();
    double best_res = std::numeric_limits<double>::infinity();
    const double b = -(c + beta + gamma);
    const double disc = b * b - 4.0 * c * beta;
    if (disc >= 0.0 && std::isfinite(disc)) {
        const double sq = std::sqrt(disc);
        const double q = (b == 0.0) ? -0.5 * sq : -0.5 * (b + std::copysign(sq, b));
        const double candidates[2] = {q / c, (q != 0.0) ? beta / q : -1.0};
        for (double l : candidates) {
            if (!(l > 0.0 && l < 1.0)) continue;
            const double res = std::abs(psi(l, beta, gamma).value - c);
            if (res < best_res) {
                best_res = res;
                best = l;
            }
        }
    }
    if (!std::isfinite(best)) best = detail::invert_psi_newton(c, beta, gamma, interior);

    double l = std::clamp(best, detail::kLaborEdge, 1.0 - detail::kLaborEdge);
    double r = psi(l, beta, gamma).value - c;
    for (int it = 0; it < 4 && r != 0.0; ++it) {
        const PsiValue p = psi(l, beta, gamma);
        const double next =
            std::clamp(l - (p.value - c) / p.d1, detail::kLaborEdge, 1.0 - detail::kLaborEdge);
        const double rn = psi(next, beta, gamma).value - c;
        if (std::abs(rn) >= std::abs(r)) break;
        l = next;
        r = rn;
    }
    return l;
}

// L_i = Psi_i^{-1}(alpha_i * lambda * w_i). Negative targets are processed as
// valid Psi targets; the caller tags nonpositive wages where that matters.
inline std::vector<double> labor_shares(const EconomyModel& model, const UbiPolicy& policy,
                                        const std::vector<double>& wages) {
    const double lambda = effective_lambda(policy, model.agent_count());
    std::vector<double> shares(model.agent_count());
    for (std::size_t i = 0; i < shares.size(); ++i) {
        const auto& a = model.agents[i];
        shares[i] = invert_psi(a.alpha * lambda * wages[i], a.beta, a.gamma);
    }
    return shares;
}

// (1/alpha) log u(L); positive for every L in (0,1) since beta, gamma < 0.
inline double leisure_log_utility(const AgentPreferences& agent, double labor) {
    if (!(labor > 0.0 && labor < 1.0))
        throw DomainError("leisure_log_utility: labor must lie in (0,1), got " +
                          std::to_string(labor));
    return (agent.beta * std::log(labor) + agent.gamma * std::log1p(-labor)) / agent.alpha;
}

// Snapshot of the labor layer at one (t, wage vector) state.
struct LaborState {
    double time = 0.0;
    std::vector<double> wages;
    std::vector<double> labor;                // L_i in (0,1)
    std::vector<double> leisure_log_utility;  // (1/alpha_i) log u_i(L_i)
    bool has_nonpositive_wage = false;
};

inline LaborState make_labor_state(const EconomyModel& model, const UbiPolicy& policy,
                                   double t, const std::vector<double>& wages) {
    LaborState s;
    s.time = t;
    s.wages = wages;
    s.labor = labor_shares(model, policy, wages);
    s.leisure_log_utility.resize(model.agent_count());
    for (std::size_t i = 0; i < model.agent_count(); ++i) {
        s.leisure_log_utility[i] = ubiq::leisure_log_utility(model.agents[i], s.labor[i]);
        if (!(wages[i] > 0.0)) s.has_nonpositive_wage = true;
    }
    return s;
}

// Agent i's perception of agent j's labor reaction to i choosing l: affine
// with slope delta * w_i/w_j, anchored so that l = L_i maps to L_j exactly.
// Zero w_j pins the response at L_j.
inline double response(std::size_t i, std::size_t j, double l, const LaborState& state,
                       const UbiPolicy& policy) {
    if (i == j)
        throw IndexError("response: agent indices must differ, got i = j = " + std::to_string(i));
    if (state.wages[j] == 0.0) return state.labor[j];
    return policy.delta * (state.wages[i] / state.wages[j]) * (l - state.labor[i]) +
           state.labor[j];
}

// Perceived income for agent i choosing labor l while others are perceived to
// react through the affine responses:
//   eps_i(l) = w_i lambda l
//            + (lambda_ubi/I) (sum_{j != i} w_j L_j - delta (I-1) w_i L_i).
inline double perceived_income(std::size_t i, double l, const LaborState& state,
                               const UbiPolicy& policy) {
    const std::size_t n = state.wages.size();
    const double lambda = effective_lambda(policy, n);
    double others = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) others += state.wages[j] * state.labor[j];
    const double own = state.wages[i] * state.labor[i];
    return state.wages[i] * lambda * l +
           policy.lambda_ubi / static_cast<double>(n) *
               (others - policy.delta * (static_cast<double>(n) - 1.0) * own);
}

struct IncomeState {
    std::vector<double> perceived;  // eps_i(L_i)
    double aggregate = 0.0;         // eps_Sigma
};

// eps_Sigma = (lambda_keep + lambda_ubi) sum_i w_i L_i. Cross-checked against
// the sum of perceived incomes at the optimizers, where the delta terms cancel
// exactly.
inline double aggregate_income(const LaborState& state, const UbiPolicy& policy) {
    double wage_income = 0.0;
    for (std::size_t i = 0; i < state.wages.size(); ++i)
        wage_income += state.wages[i] * state.labor[i];
    const double agg = (policy.lambda_keep + policy.lambda_ubi) * wage_income;

    double cross = 0.0;
    for (std::size_t i = 0; i < state.wages.size(); ++i)
        cross += perceived_income(i, state.labor[i], state, policy);
    if (std::abs(cross - agg) > 1e-12 * std::max(1.0, std::abs(agg)))
        throw ConsistencyError("aggregate_income: perception identity violated, " +
                               std::to_string(cross) + " vs " + std::to_string(agg));
    return agg;
}

inline IncomeState make_income_state(const LaborState& state, const UbiPolicy& policy) {
    IncomeState inc;
    inc.perceived.resize(state.wages.size());
    for (std::size_t i = 0; i < state.wages.size(); ++i)
        inc.perceived[i] = perceived_income(i, state.labor[i], state, policy);
    inc.aggregate = aggregate_income(state, policy);
    return inc;
}

}  // namespace ubiq
