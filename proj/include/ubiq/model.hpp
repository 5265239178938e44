#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ubiq/errors.hpp"

namespace ubiq {

// One agent's preference parameters. Leisure utility is u(l) = l^beta (1-l)^gamma
// on (0,1); beta, gamma < 0 make u strictly convex.
struct AgentPreferences {
    double alpha = 1.0;  // risk aversion, > 0
    double rho = 0.0;    // time preference, >= 0
    double beta = -0.5;  // labor exponent, < 0
    double gamma = -0.5; // leisure exponent, < 0
};

// Tax scheme: every agent keeps lambda_keep of own labor income and receives
// lambda_ubi/I of aggregate labor income; delta scales how strongly agents
// believe others' labor reacts to their own choice.
struct UbiPolicy {
    double lambda_keep = 1.0;
    double lambda_ubi = 0.0;
    double delta = 0.0;
};

// Arithmetic Brownian coefficients; level(t, x) = initial + drift*t + vol*x
// with x the Brownian level. Constant drift/vol keeps every state process a
// function of (t, x) only.
struct DiffusionSpec {
    double initial = 0.0;
    double drift = 0.0;
    double vol = 0.0;

    double level(double t, double x) const { return initial + drift * t + vol * x; }
};

struct EconomyModel {
    std::vector<AgentPreferences> agents;
    std::vector<DiffusionSpec> wages;  // one per agent
    DiffusionSpec dividend;
    double horizon = 1.0;
    std::vector<double> initial_stock_shares;    // sums to 1 (one-net supply)
    std::vector<double> initial_annuity_shares;  // sums to 1

    std::size_t agent_count() const { return agents.size(); }

    bool constant_wages() const {
        for (const auto& w : wages)
            if (w.drift != 0.0 || w.vol != 0.0) return false;
        return true;
    }
};

struct AggregatePreferences {
    double alpha_sigma = 0.0;  // (sum 1/alpha_i)^-1
    double rho_sigma = 0.0;    // alpha_sigma * sum rho_i/alpha_i
};

// lambda = lambda_keep + lambda_ubi/I * (1 + delta*(I-1)): the scalar through
// which policy reaches labor choices. May be negative for very negative delta.
inline double effective_lambda(const UbiPolicy& policy, std::size_t agent_count) {
    const double n = static_cast<double>(agent_count);
    return policy.lambda_keep + policy.lambda_ubi / n * (1.0 + policy.delta * (n - 1.0));
}

inline AggregatePreferences aggregate_preferences(const std::vector<AgentPreferences>& agents) {
    double inv_sum = 0.0;
    double rho_over_alpha = 0.0;
    for (const auto& a : agents) {
        inv_sum += 1.0 / a.alpha;
        rho_over_alpha += a.rho / a.alpha;
    }
    AggregatePreferences agg;
    agg.alpha_sigma = 1.0 / inv_sum;
    agg.rho_sigma = agg.alpha_sigma * rho_over_alpha;
    return agg;
}

namespace detail {

inline void require_finite(double v, Violation kind, const std::string& what,
                           std::vector<ValidationIssue>& out) {
    if (!std::isfinite(v))
        out.push_back({kind, what + " must be finite, got " + std::to_string(v)});
}

}  // namespace detail

inline std::vector<ValidationIssue> validate_policy_issues(const UbiPolicy& p) {
    std::vector<ValidationIssue> out;
    if (!(p.lambda_keep >= 0.0) || !(p.lambda_keep <= 1.0))
        out.push_back({Violation::InvalidPolicy,
                       "lambda_keep must lie in [0,1], got " + std::to_string(p.lambda_keep)});
    if (!(p.lambda_ubi >= 0.0))
        out.push_back({Violation::InvalidPolicy,
                       "lambda_ubi must be nonnegative, got " + std::to_string(p.lambda_ubi)});
    if (p.lambda_keep + p.lambda_ubi > 1.0 + 1e-12)
        out.push_back({Violation::InvalidPolicy,
                       "lambda_keep + lambda_ubi must not exceed 1, got " +
                           std::to_string(p.lambda_keep + p.lambda_ubi)});
    detail::require_finite(p.delta, Violation::InvalidPolicy, "delta", out);
    return out;
}

inline std::vector<ValidationIssue> validate_economy_issues(const EconomyModel& m) {
    std::vector<ValidationIssue> out;
    const std::size_t n = m.agents.size();
    if (n == 0)
        out.push_back({Violation::LengthMismatch, "economy must contain at least one agent"});

    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = m.agents[i];
        const std::string tag = "agent " + std::to_string(i + 1) + ": ";
        if (!(a.alpha > 0.0))
            out.push_back({Violation::InvalidPreferences,
                           tag + "alpha must be positive, got " + std::to_string(a.alpha)});
        if (!(a.rho >= 0.0))
            out.push_back({Violation::InvalidPreferences,
                           tag + "rho must be nonnegative, got " + std::to_string(a.rho)});
        if (!(a.beta < 0.0))
            out.push_back({Violation::InvalidPreferences,
                           tag + "beta must be negative, got " + std::to_string(a.beta)});
        if (!(a.gamma < 0.0))
            out.push_back({Violation::InvalidPreferences,
                           tag + "gamma must be negative, got " + std::to_string(a.gamma)});
    }

    if (m.wages.size() != n)
        out.push_back({Violation::LengthMismatch,
                       "expected " + std::to_string(n) + " wage specs, got " +
                           std::to_string(m.wages.size())});
    for (std::size_t i = 0; i < m.wages.size(); ++i) {
        const std::string tag = "wage " + std::to_string(i + 1) + ": ";
        detail::require_finite(m.wages[i].initial, Violation::InvalidDiffusion, tag + "initial", out);
        detail::require_finite(m.wages[i].drift, Violation::InvalidDiffusion, tag + "drift", out);
        detail::require_finite(m.wages[i].vol, Violation::InvalidDiffusion, tag + "vol", out);
    }
    detail::require_finite(m.dividend.initial, Violation::InvalidDiffusion, "dividend initial", out);
    detail::require_finite(m.dividend.drift, Violation::InvalidDiffusion, "dividend drift", out);
    detail::require_finite(m.dividend.vol, Violation::InvalidDiffusion, "dividend vol", out);

    if (!(m.horizon > 0.0) || !std::isfinite(m.horizon))
        out.push_back({Violation::InvalidHorizon,
                       "horizon must be a positive real, got " + std::to_string(m.horizon)});

    auto check_shares = [&](const std::vector<double>& shares, const char* name) {
        if (shares.size() != n) {
            out.push_back({Violation::LengthMismatch,
                           std::string(name) + " must list one entry per agent"});
            return;
        }
        double sum = 0.0;
        for (double s : shares) sum += s;
        if (std::abs(sum - 1.0) > 1e-9)
            out.push_back({Violation::ShareImbalance,
                           std::string(name) + " must sum to 1 (one-net supply), got " +
                               std::to_string(sum)});
    };
    check_shares(m.initial_stock_shares, "initial stock shares");
    check_shares(m.initial_annuity_shares, "initial annuity shares");
    return out;
}

// Checks every type invariant and reports all violations at once. Idempotent:
// a model that passes is returned unchanged.
inline EconomyModel validate_economy(const EconomyModel& raw) {
    auto issues = validate_economy_issues(raw);
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return raw;
}

inline UbiPolicy validate_policy(const UbiPolicy& raw) {
    auto issues = validate_policy_issues(raw);
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return raw;
}

// One-pass validation of a full run input (economy together with policy).
inline void validate_all(const EconomyModel& model, const UbiPolicy& policy) {
    auto issues = validate_economy_issues(model);
    auto more = validate_policy_issues(policy);
    issues.insert(issues.end(), more.begin(), more.end());
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

}  // namespace ubiq
