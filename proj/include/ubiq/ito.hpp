#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ubiq/labor.hpp"
#include "ubiq/model.hpp"

namespace ubiq {

// Drift/volatility pair of an Ito process.
struct ItoCoeffs {
    double mu = 0.0;
    double sigma = 0.0;
};

// L = Psi^{-1}(alpha lambda w) gives, by the Ito chain rule,
//   mu_L    = alpha lambda mu_w / Psi' - (alpha lambda sigma_w)^2/2 * Psi''/Psi'^3,
//   sigma_L = alpha lambda sigma_w / Psi'.
inline ItoCoeffs labor_coeffs(const AgentPreferences& agent, double lambda, double w,
                              double mu_w, double sigma_w) {
    const double al = agent.alpha * lambda;
    const double L = invert_psi(al * w, agent.beta, agent.gamma);
    const PsiValue p = psi(L, agent.beta, agent.gamma);
    ItoCoeffs c;
    c.mu = al * mu_w / p.d1 - 0.5 * al * al * sigma_w * sigma_w * p.d2 / (p.d1 * p.d1 * p.d1);
    c.sigma = al * sigma_w / p.d1;
    return c;
}

// Coefficients of (1/alpha) log u(L).
inline ItoCoeffs leisure_coeffs(const AgentPreferences& agent, double lambda, double w,
                                double mu_w, double sigma_w) {
    const double L = invert_psi(agent.alpha * lambda * w, agent.beta, agent.gamma);
    const PsiValue p = psi(L, agent.beta, agent.gamma);
    const double ratio = p.value / p.d1;
    const double lsw2 = lambda * lambda * sigma_w * sigma_w;
    ItoCoeffs c;
    c.mu = lambda * mu_w * ratio -
           0.5 * agent.alpha * lsw2 * p.d2 * p.value / (p.d1 * p.d1 * p.d1) +
           0.5 * agent.alpha * lsw2 / p.d1;
    c.sigma = lambda * sigma_w * ratio;
    return c;
}

// Coefficients of the wage income w L.
inline ItoCoeffs wage_labor_coeffs(const AgentPreferences& agent, double lambda, double w,
                                   double mu_w, double sigma_w) {
    const double L = invert_psi(agent.alpha * lambda * w, agent.beta, agent.gamma);
    const PsiValue p = psi(L, agent.beta, agent.gamma);
    const double ratio = p.value / p.d1;
    ItoCoeffs c;
    c.mu = mu_w * L + (agent.alpha * lambda * sigma_w * sigma_w + mu_w * p.value) / p.d1 -
           0.5 * agent.alpha * lambda * sigma_w * sigma_w * p.value * p.d2 /
               (p.d1 * p.d1 * p.d1);
    c.sigma = sigma_w * L + sigma_w * ratio;
    return c;
}

struct AgentCoeffs {
    ItoCoeffs labor;       // L_i
    ItoCoeffs leisure;     // (1/alpha_i) log u_i(L_i)
    ItoCoeffs wage_labor;  // w_i L_i
    ItoCoeffs income;      // eps_i(L_i)
};

// All per-agent and aggregate coefficients at one wage state. On-equilibrium
// perceived income is eps_i(L_i) = (lambda_keep + lambda_ubi/I) w_i L_i
// + (lambda_ubi/I) sum_{j != i} w_j L_j, so its coefficients are the same
// combination of the wage-income ones.
struct CoefficientBundle {
    std::vector<AgentCoeffs> agents;
    ItoCoeffs income_sum;   // eps_Sigma
    ItoCoeffs leisure_sum;  // sum_i (1/alpha_i) log u_i(L_i)
};

inline CoefficientBundle bundle(const EconomyModel& model, const UbiPolicy& policy,
                                const std::vector<double>& wages) {
    const std::size_t n = model.agent_count();
    const double lambda = effective_lambda(policy, n);
    CoefficientBundle b;
    b.agents.resize(n);

    ItoCoeffs wl_sum;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& agent = model.agents[i];
        const auto& spec = model.wages[i];
        auto& c = b.agents[i];
        c.labor = labor_coeffs(agent, lambda, wages[i], spec.drift, spec.vol);
        c.leisure = leisure_coeffs(agent, lambda, wages[i], spec.drift, spec.vol);
        c.wage_labor = wage_labor_coeffs(agent, lambda, wages[i], spec.drift, spec.vol);
        wl_sum.mu += c.wage_labor.mu;
        wl_sum.sigma += c.wage_labor.sigma;
        b.leisure_sum.mu += c.leisure.mu;
        b.leisure_sum.sigma += c.leisure.sigma;
    }

    const double share = policy.lambda_ubi / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = b.agents[i];
        c.income.mu = policy.lambda_keep * c.wage_labor.mu + share * wl_sum.mu;
        c.income.sigma = policy.lambda_keep * c.wage_labor.sigma + share * wl_sum.sigma;
    }
    b.income_sum.mu = (policy.lambda_keep + policy.lambda_ubi) * wl_sum.mu;
    b.income_sum.sigma = (policy.lambda_keep + policy.lambda_ubi) * wl_sum.sigma;
    return b;
}

// State price deflator coefficients:
//   kappa = alpha_Sigma (sigma_D + sigma_eps - sigma_Lcal),
//   r     = rho_Sigma + alpha_Sigma (mu_D + mu_eps - mu_Lcal) - kappa^2/2.
struct MarketAnalytics {
    double kappa = 0.0;
    double rate = 0.0;
};

inline MarketAnalytics market_analytics_from_bundle(const CoefficientBundle& b,
                                                    const AggregatePreferences& agg,
                                                    const DiffusionSpec& dividend) {
    MarketAnalytics m;
    m.kappa = agg.alpha_sigma * (dividend.vol + b.income_sum.sigma - b.leisure_sum.sigma);
    m.rate = agg.rho_sigma +
             agg.alpha_sigma * (dividend.drift + b.income_sum.mu - b.leisure_sum.mu) -
             0.5 * m.kappa * m.kappa;
    return m;
}

inline MarketAnalytics market_analytics(const EconomyModel& model, const UbiPolicy& policy,
                                        const std::vector<double>& wages) {
    return market_analytics_from_bundle(bundle(model, policy, wages),
                                        aggregate_preferences(model.agents), model.dividend);
}

struct MarketSweepRow {
    double wage = 0.0;
    double delta = 0.0;
    double kappa = 0.0;
    double rate = 0.0;
};

// kappa and r over a grid of shared initial wage rates, one block per delta;
// every agent's wage level is set to w while keeping its drift and volatility.
inline std::vector<MarketSweepRow> sweep_market(const EconomyModel& model,
                                                const UbiPolicy& policy,
                                                const std::vector<double>& wage_grid,
                                                const std::vector<double>& deltas) {
    std::vector<MarketSweepRow> rows;
    rows.reserve(wage_grid.size() * deltas.size());
    std::vector<double> wages(model.agent_count());
    for (double delta : deltas) {
        UbiPolicy p = policy;
        p.delta = delta;
        for (double w : wage_grid) {
            std::fill(wages.begin(), wages.end(), w);
            const MarketAnalytics m = market_analytics(model, p, wages);
            rows.push_back({w, delta, m.kappa, m.rate});
        }
    }
    return rows;
}

enum class Monotonicity { Constant, Increasing, Decreasing, NonMonotone };

inline const char* to_string(Monotonicity m) {
    switch (m) {
        case Monotonicity::Constant: return "constant";
        case Monotonicity::Increasing: return "increasing";
        case Monotonicity::Decreasing: return "decreasing";
        default: return "nonmonotone";
    }
}

// Classification by signs of successive differences with a dead-band for
// roundoff-level wiggles.
inline Monotonicity classify_monotonicity(const std::vector<double>& values,
                                          double dead_band = 1e-10) {
    bool up = false;
    bool down = false;
    for (std::size_t k = 1; k < values.size(); ++k) {
        const double d = values[k] - values[k - 1];
        if (d > dead_band) up = true;
        else if (d < -dead_band) down = true;
    }
    if (up && down) return Monotonicity::NonMonotone;
    if (up) return Monotonicity::Increasing;
    if (down) return Monotonicity::Decreasing;
    return Monotonicity::Constant;
}

}  // namespace ubiq
