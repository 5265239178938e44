#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ubiq/bsde.hpp"
#include "ubiq/equilibrium.hpp"
#include "ubiq/errors.hpp"
#include "ubiq/model.hpp"

namespace ubiq {

// (1 - e^{-rho T})/rho + e^{-rho T}; the removable singularity at rho = 0
// evaluates to T + 1.
inline double discount_annuity(double rho, double T) {
    if (rho == 0.0) return T + 1.0;
    return -std::expm1(-rho * T) / rho + std::exp(-rho * T);
}

// Constant consumption level the agent would accept in place of the optimal
// stochastic stream:
//   CE_i = (1/alpha) log u(L_i) - (1/alpha) log((1-e^{-rho T})/rho + e^{-rho T})
//        + X_{i,0}/A_0 + Y_{i,0},
// with X_{i,0} the value of the initial endowment. Constant-wage regime only.
inline double certainty_equivalent(std::size_t i, const BackwardSolution& solution,
                                   const EconomyModel& model, const UbiPolicy& policy) {
    if (solution.regime != Regime::Ode || !model.constant_wages())
        throw RegimeError("certainty_equivalent: requires the constant-wage (ODE) regime");
    const EquilibriumState s0 = make_state(model, policy, solution, 0.0, 0.0);
    const auto& agent = model.agents[i];
    const double x0 = model.initial_annuity_shares[i] * s0.prices.annuity +
                      model.initial_stock_shares[i] * s0.prices.stock;
    return s0.labor.leisure_log_utility[i] -
           std::log(discount_annuity(agent.rho, model.horizon)) / agent.alpha +
           x0 / s0.prices.annuity + s0.y[i];
}

struct WelfareReport {
    UbiPolicy policy;
    double lambda = 0.0;
    std::vector<double> ce;
    double aggregate = 0.0;    // sum of per-agent certainty equivalents
    double closed_form = 0.0;  // 1 + D_0 + eps_Sigma0 - a_0/alpha_Sigma - sum of log terms
};

inline WelfareReport welfare_report(const BackwardSolution& solution, const EconomyModel& model,
                                    const UbiPolicy& policy) {
    WelfareReport rep;
    rep.policy = policy;
    rep.lambda = effective_lambda(policy, model.agent_count());
    rep.ce.resize(model.agent_count());
    rep.aggregate = 0.0;
    for (std::size_t i = 0; i < model.agent_count(); ++i) {
        rep.ce[i] = certainty_equivalent(i, solution, model, policy);
        rep.aggregate += rep.ce[i];
    }

    const EquilibriumState s0 = make_state(model, policy, solution, 0.0, 0.0);
    const auto agg = aggregate_preferences(model.agents);
    double log_terms = 0.0;
    for (const auto& a : model.agents)
        log_terms += std::log(discount_annuity(a.rho, model.horizon)) / a.alpha;
    rep.closed_form = 1.0 + model.dividend.initial + s0.eps_sigma -
                      s0.node.a / agg.alpha_sigma - log_terms;
    return rep;
}

// Aggregate welfare via the per-agent sum, cross-checked against the
// stock-market-clearing closed form.
inline double aggregate_welfare(const BackwardSolution& solution, const EconomyModel& model,
                                const UbiPolicy& policy) {
    const WelfareReport rep = welfare_report(solution, model, policy);
    if (std::abs(rep.aggregate - rep.closed_form) > 1e-8)
        throw ConsistencyError("aggregate_welfare: closed form and per-agent sum disagree by " +
                               std::to_string(rep.aggregate - rep.closed_form));
    return rep.aggregate;
}

struct PolicyRow {
    std::string label;
    UbiPolicy policy;
    double lambda = 0.0;
    std::vector<double> labor;
    double eps_sigma = 0.0;
    double aggregate_ce = 0.0;
};

// Welfare comparison across policies in the constant-wage regime. The canned
// pure-communism row (keep = 0, ubi = 1, delta = 0) and pure-socialism rows
// (same split, delta free) are always appended.
inline std::vector<PolicyRow> compare_policies(const EconomyModel& model,
                                               const std::vector<UbiPolicy>& policies,
                                               const std::vector<double>& socialism_deltas = {-0.5,
                                                                                              0.5},
                                               std::size_t ode_steps = 2048) {
    std::vector<PolicyRow> rows;
    auto add_row = [&](const std::string& label, const UbiPolicy& p) {
        const BackwardSolution sol = solve_ode(model, p, ode_steps);
        const EquilibriumState s0 = make_state(model, p, sol, 0.0, 0.0);
        PolicyRow row;
        row.label = label;
        row.policy = p;
        row.lambda = effective_lambda(p, model.agent_count());
        row.labor = s0.labor.labor;
        row.eps_sigma = s0.eps_sigma;
        row.aggregate_ce = aggregate_welfare(sol, model, p);
        rows.push_back(std::move(row));
    };
    for (std::size_t k = 0; k < policies.size(); ++k)
        add_row("policy-" + std::to_string(k + 1), policies[k]);
    add_row("communism", UbiPolicy{0.0, 1.0, 0.0});
    for (double d : socialism_deltas)
        add_row("socialism(delta=" + std::to_string(d) + ")", UbiPolicy{0.0, 1.0, d});
    return rows;
}

}  // namespace ubiq
