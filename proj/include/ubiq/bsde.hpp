#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ubiq/errors.hpp"
#include "ubiq/ito.hpp"
#include "ubiq/labor.hpp"
#include "ubiq/model.hpp"

namespace ubiq {

enum class Regime { Ode, Pde, Mc };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::Ode: return "ode";
        case Regime::Pde: return "pde";
        default: return "mc";
    }
}

// The backward system is solved in the shifted variables (a, Ybar_i) with
// terminal values 0; both are bounded, which is what the numerics want. The
// original Y_i is recovered as Ybar_i + eps_i(L_i) - (1/alpha_i) log u_i(L_i)
// and Z_i as Zbar_i + sigma_eps_i - sigma_Lcal_i.
struct BackwardSolution {
    Regime regime = Regime::Ode;
    std::vector<double> time_grid;   // uniform, time_grid.front() = 0, back() = T
    std::vector<double> state_grid;  // uniform x nodes; {0} in the ODE regime
    // fields are row-major [time][state]
    std::vector<double> a_field, za_field;
    std::vector<std::vector<double>> ybar_fields, zbar_fields;  // per agent
    double lower_bound_c = 0.0;  // truncation constant C: a >= -C on the grid

    std::size_t nt() const { return time_grid.size(); }
    std::size_t nx() const { return state_grid.size(); }
    std::size_t n_agents() const { return ybar_fields.size(); }
    double horizon() const { return time_grid.back(); }

    double min_a() const {
        double m = a_field.front();
        for (double v : a_field) m = std::min(m, v);
        return m;
    }

    struct Point {
        double a = 0.0;
        double za = 0.0;
        std::vector<double> ybar, zbar;
    };

    // Linear in t, linear in x. Returns false when x leaves the state grid
    // (never happens in the ODE regime, where fields are x-independent).
    bool try_sample(double t, double x, Point& out) const {
        const double T = horizon();
        if (t < -1e-9 || t > T + 1e-9) return false;
        t = std::clamp(t, 0.0, T);

        const std::size_t n_time = nt();
        const double dt = T / static_cast<double>(n_time - 1);
        std::size_t k = std::min(static_cast<std::size_t>(t / dt), n_time - 2);
        const double wt = std::clamp((t - time_grid[k]) / dt, 0.0, 1.0);

        std::size_t j = 0;
        double wx = 0.0;
        if (nx() > 1) {
            const double x0 = state_grid.front();
            const double x1 = state_grid.back();
            if (x < x0 || x > x1) return false;
            const double dx = (x1 - x0) / static_cast<double>(nx() - 1);
            j = std::min(static_cast<std::size_t>((x - x0) / dx), nx() - 2);
            wx = std::clamp((x - state_grid[j]) / dx, 0.0, 1.0);
        }

        const std::size_t stride = nx();
        auto lerp = [&](const std::vector<double>& f) {
            const std::size_t base0 = k * stride + j;
            const std::size_t base1 = (k + 1) * stride + j;
            if (nx() == 1) return (1.0 - wt) * f[base0] + wt * f[base1];
            const double lo = (1.0 - wx) * f[base0] + wx * f[base0 + 1];
            const double hi = (1.0 - wx) * f[base1] + wx * f[base1 + 1];
            return (1.0 - wt) * lo + wt * hi;
        };

        out.a = lerp(a_field);
        out.za = lerp(za_field);
        out.ybar.resize(n_agents());
        out.zbar.resize(n_agents());
        for (std::size_t i = 0; i < n_agents(); ++i) {
            out.ybar[i] = lerp(ybar_fields[i]);
            out.zbar[i] = lerp(zbar_fields[i]);
        }
        return true;
    }

    Point sample(double t, double x) const {
        Point p;
        if (!try_sample(t, x, p))
            throw OutOfGrid("solution lookup outside grid at (t, x) = (" + std::to_string(t) +
                            ", " + std::to_string(x) + ")");
        return p;
    }
};

namespace detail {

// (t, x)-dependent driver ingredients, free of the unknowns.
struct DriverTerms {
    double lin_a = 0.0;  // rho_Sigma + alpha_Sigma (mu_D + mu_eps - mu_Lcal)
    double kappa = 0.0;
};

struct AgentDriverTerms {
    double d_mu = 0.0;   // mu_Lcal_i - mu_eps_i
    double d_sig = 0.0;  // sigma_eps_i - sigma_Lcal_i
};

inline void wages_at(const EconomyModel& model, double t, double x, std::vector<double>& out) {
    out.resize(model.agent_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.wages[i].level(t, x);
}

inline DriverTerms driver_terms(const CoefficientBundle& b, const AggregatePreferences& agg,
                                const DiffusionSpec& dividend) {
    DriverTerms d;
    d.lin_a = agg.rho_sigma +
              agg.alpha_sigma * (dividend.drift + b.income_sum.mu - b.leisure_sum.mu);
    d.kappa = agg.alpha_sigma * (dividend.vol + b.income_sum.sigma - b.leisure_sum.sigma);
    return d;
}

inline double eval_driver_a(const DriverTerms& d, double a, double za, double guard) {
    const double q = d.kappa - za;
    return d.lin_a - 0.5 * q * q - std::exp(-std::max(a, -guard));
}

inline double eval_driver_ybar(const AgentPreferences& agent, const DriverTerms& d,
                               const AgentDriverTerms& ad, double ybar, double zbar,
                               double a, double za) {
    const double q = d.kappa - za;
    return (-agent.rho + agent.alpha * ad.d_mu +
            (1.0 + a + agent.alpha * ybar) * std::exp(-a) - 0.5 * q * q +
            agent.alpha * (zbar + ad.d_sig) * q) /
           agent.alpha;
}

}  // namespace detail

// Drift of a at one state: the dt-coefficient of the a-equation,
//   lin_a - (kappa - Z_a)^2 / 2 - exp(-a),
// with wages read off the Markovian map w_i(t, x) = w_{i,0} + mu_w t + sigma_w x.
inline double driver_a(double t, double x, double a, double za, const EconomyModel& model,
                       const UbiPolicy& policy) {
    std::vector<double> wages;
    detail::wages_at(model, t, x, wages);
    const auto terms = detail::driver_terms(bundle(model, policy, wages),
                                            aggregate_preferences(model.agents), model.dividend);
    return detail::eval_driver_a(terms, a, za, std::numeric_limits<double>::infinity());
}

// Drift of Ybar_i, including the cross term in (Zbar_i + sigma_eps_i - sigma_Lcal_i).
inline double driver_ybar(std::size_t i, double t, double x, double ybar, double zbar,
                          double a, double za, const EconomyModel& model,
                          const UbiPolicy& policy) {
    std::vector<double> wages;
    detail::wages_at(model, t, x, wages);
    const auto b = bundle(model, policy, wages);
    const auto terms = detail::driver_terms(b, aggregate_preferences(model.agents), model.dividend);
    detail::AgentDriverTerms ad;
    ad.d_mu = b.agents[i].leisure.mu - b.agents[i].income.mu;
    ad.d_sig = b.agents[i].income.sigma - b.agents[i].leisure.sigma;
    return detail::eval_driver_ybar(model.agents[i], terms, ad, ybar, zbar, a, za);
}

// Constant-wage regime: every driver is deterministic and Z vanishes, so the
// system is a backward ODE integrated with classic RK4 from a_T = 0, Ybar_T = 0.
inline BackwardSolution solve_ode(const EconomyModel& model, const UbiPolicy& policy,
                                  std::size_t n_steps) {
    if (n_steps < 2)
        throw StepSizeError("solve_ode: need at least 2 steps, got " + std::to_string(n_steps));
    if (!model.constant_wages())
        throw RegimeError("solve_ode: wage coefficients must be constant (zero drift and vol)");

    const std::size_t n_agents = model.agent_count();
    const auto agg = aggregate_preferences(model.agents);
    std::vector<double> w0(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) w0[i] = model.wages[i].initial;
    const auto terms = detail::driver_terms(bundle(model, policy, w0), agg, model.dividend);

    const double T = model.horizon;
    const double h = T / static_cast<double>(n_steps);

    BackwardSolution sol;
    sol.regime = Regime::Ode;
    sol.state_grid = {0.0};
    sol.time_grid.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) sol.time_grid[k] = h * static_cast<double>(k);
    sol.time_grid.back() = T;
    sol.a_field.assign(n_steps + 1, 0.0);
    sol.za_field.assign(n_steps + 1, 0.0);
    sol.ybar_fields.assign(n_agents, std::vector<double>(n_steps + 1, 0.0));
    sol.zbar_fields.assign(n_agents, std::vector<double>(n_steps + 1, 0.0));
    sol.lower_bound_c = T * std::abs(terms.lin_a);

    const double guard = sol.lower_bound_c + 1.0;
    const detail::AgentDriverTerms no_shift;  // constant wages: both terms zero

    // y = [a, Ybar_1, ..., Ybar_I]
    std::vector<double> y(1 + n_agents, 0.0), k1(y), k2(y), k3(y), k4(y), tmp(y);
    auto deriv = [&](const std::vector<double>& s, std::vector<double>& out) {
        out[0] = detail::eval_driver_a(terms, s[0], 0.0, guard);
        for (std::size_t i = 0; i < n_agents; ++i)
            out[1 + i] = detail::eval_driver_ybar(model.agents[i], terms, no_shift, s[1 + i],
                                                  0.0, s[0], 0.0);
    };
    auto blend = [&](const std::vector<double>& s, const std::vector<double>& d, double c,
                     std::vector<double>& out) {
        for (std::size_t m = 0; m < s.size(); ++m) out[m] = s[m] + c * d[m];
    };

    for (std::size_t k = n_steps; k-- > 0;) {
        deriv(y, k1);
        blend(y, k1, -0.5 * h, tmp);
        deriv(tmp, k2);
        blend(y, k2, -0.5 * h, tmp);
        deriv(tmp, k3);
        blend(y, k3, -h, tmp);
        deriv(tmp, k4);
        for (std::size_t m = 0; m < y.size(); ++m)
            y[m] -= h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        sol.a_field[k] = y[0];
        for (std::size_t i = 0; i < n_agents; ++i) sol.ybar_fields[i][k] = y[1 + i];
    }

    if (sol.min_a() < -sol.lower_bound_c - 1e-9)
        throw NoConvergence("solve_ode: solution violated the lower bound -C");
    return sol;
}

struct PdeGrid {
    std::size_t n_time = 400;   // time steps (nodes: n_time + 1)
    std::size_t n_space = 201;  // spatial nodes
    // Defaults cover +-5 standard deviations of the terminal Brownian level.
    double x_min = std::numeric_limits<double>::quiet_NaN();
    double x_max = std::numeric_limits<double>::quiet_NaN();
    // implicit weight of the theta-scheme time stepper
    double time_weight = 0.51;
};

namespace detail {

// Tridiagonal system with constant coefficients, prefactored Thomas solve.
struct Tridiag {
    std::vector<double> diag, lower, upper, cprime;

    void factor() {
        const std::size_t n = diag.size();
        cprime.resize(n);
        cprime[0] = upper[0] / diag[0];
        for (std::size_t j = 1; j < n; ++j)
            cprime[j] = upper[j] / (diag[j] - lower[j] * cprime[j - 1]);
    }

    void solve(const std::vector<double>& rhs, std::vector<double>& out) const {
        const std::size_t n = diag.size();
        out.resize(n);
        out[0] = rhs[0] / diag[0];
        for (std::size_t j = 1; j < n; ++j)
            out[j] = (rhs[j] - lower[j] * out[j - 1]) / (diag[j] - lower[j] * cprime[j - 1]);
        for (std::size_t j = n - 1; j-- > 0;) out[j] -= cprime[j] * out[j + 1];
    }
};

// Driver ingredients tabulated over the whole (t, x) grid.
struct DriverField {
    std::size_t nt1 = 0, nx = 0, n_agents = 0;
    std::vector<double> lin_a, kappa;  // [k*nx + j]
    std::vector<double> d_mu, d_sig;   // [(k*n_agents + i)*nx + j]

    DriverTerms terms(std::size_t k, std::size_t j) const {
        return {lin_a[k * nx + j], kappa[k * nx + j]};
    }
    AgentDriverTerms agent_terms(std::size_t i, std::size_t k, std::size_t j) const {
        const std::size_t base = (k * n_agents + i) * nx + j;
        return {d_mu[base], d_sig[base]};
    }
};

inline DriverField tabulate_drivers(const EconomyModel& model, const UbiPolicy& policy,
                                    const std::vector<double>& ts,
                                    const std::vector<double>& xs) {
    const auto agg = aggregate_preferences(model.agents);
    DriverField f;
    f.nt1 = ts.size();
    f.nx = xs.size();
    f.n_agents = model.agent_count();
    f.lin_a.resize(f.nt1 * f.nx);
    f.kappa.resize(f.nt1 * f.nx);
    f.d_mu.resize(f.nt1 * f.n_agents * f.nx);
    f.d_sig.resize(f.nt1 * f.n_agents * f.nx);
    std::vector<double> wages(f.n_agents);
    for (std::size_t k = 0; k < f.nt1; ++k) {
        for (std::size_t j = 0; j < f.nx; ++j) {
            wages_at(model, ts[k], xs[j], wages);
            const auto b = bundle(model, policy, wages);
            const auto d = driver_terms(b, agg, model.dividend);
            f.lin_a[k * f.nx + j] = d.lin_a;
            f.kappa[k * f.nx + j] = d.kappa;
            for (std::size_t i = 0; i < f.n_agents; ++i) {
                const std::size_t base = (k * f.n_agents + i) * f.nx + j;
                f.d_mu[base] = b.agents[i].leisure.mu - b.agents[i].income.mu;
                f.d_sig[base] = b.agents[i].income.sigma - b.agents[i].leisure.sigma;
            }
        }
    }
    return f;
}

inline void gradient(const std::vector<double>& u, double dx, std::vector<double>& out) {
    const std::size_t n = u.size();
    out.resize(n);
    out[0] = (u[1] - u[0]) / dx;
    for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
    out[n - 1] = (u[n - 1] - u[n - 2]) / dx;
}

}  // namespace detail

// Markovian one-factor regime: a(t, x) and each Ybar_i(t, x) solve
//   d_t u + (1/2) d_xx u = driver(t, x, u, d_x u),  u(T, .) = 0,
// marched backward with Crank-Nicolson diffusion and Picard iteration on the
// nonlinear driver. Z fields are the spatial gradients (Feynman-Kac). The
// exp(-a) term is truncated at exp(N) with N = C + 1 during iteration, exactly
// mirroring the bound the solution itself satisfies; the guard must be slack at
// convergence and that is checked. Boundary rows drop the diffusion term
// (zero second derivative) and use one-sided gradients.
inline BackwardSolution solve_pde(const EconomyModel& model, const UbiPolicy& policy,
                                  PdeGrid grid) {
    const double T = model.horizon;
    if (std::isnan(grid.x_min)) grid.x_min = -5.0 * std::sqrt(T);
    if (std::isnan(grid.x_max)) grid.x_max = 5.0 * std::sqrt(T);
    if (grid.n_time < 2 || grid.n_space < 3 || !(grid.x_min < grid.x_max))
        throw GridError("solve_pde: degenerate grid");

    const std::size_t nt1 = grid.n_time + 1;
    const std::size_t nx = grid.n_space;
    const double dt = T / static_cast<double>(grid.n_time);
    const double dx = (grid.x_max - grid.x_min) / static_cast<double>(nx - 1);

    BackwardSolution sol;
    sol.regime = Regime::Pde;
    sol.time_grid.resize(nt1);
    for (std::size_t k = 0; k < nt1; ++k) sol.time_grid[k] = dt * static_cast<double>(k);
    sol.time_grid.back() = T;
    sol.state_grid.resize(nx);
    for (std::size_t j = 0; j < nx; ++j)
        sol.state_grid[j] = grid.x_min + dx * static_cast<double>(j);
    sol.state_grid.back() = grid.x_max;

    const auto field = detail::tabulate_drivers(model, policy, sol.time_grid, sol.state_grid);
    double sup_lin = 0.0;
    for (double v : field.lin_a) sup_lin = std::max(sup_lin, std::abs(v));
    sol.lower_bound_c = T * sup_lin;
    const double guard = sol.lower_bound_c + 1.0;

    const double theta = grid.time_weight;
    detail::Tridiag M;
    M.diag.assign(nx, 1.0 / dt);
    M.lower.assign(nx, 0.0);
    M.upper.assign(nx, 0.0);
    for (std::size_t j = 1; j + 1 < nx; ++j) {
        M.diag[j] = 1.0 / dt + theta / (dx * dx);
        M.lower[j] = -0.5 * theta / (dx * dx);
        M.upper[j] = -0.5 * theta / (dx * dx);
    }
    M.factor();

    const std::size_t n_agents = model.agent_count();

    // One backward sweep for a scalar unknown; the driver closure sees
    // (level k, node j, value, gradient value).
    auto sweep = [&](auto&& driver, std::vector<double>& out_field,
                     std::vector<double>& out_grad, const char* label) {
        std::vector<double> next(nx, 0.0), cur(nx), grad(nx), rhs(nx), trial(nx);
        std::vector<double> f_next(nx);
        for (std::size_t j = 0; j < nx; ++j) {
            out_field[grid.n_time * nx + j] = 0.0;
            out_grad[grid.n_time * nx + j] = 0.0;
        }
        for (std::size_t k = grid.n_time; k-- > 0;) {
            detail::gradient(next, dx, grad);
            for (std::size_t j = 0; j < nx; ++j) f_next[j] = driver(k + 1, j, next[j], grad[j]);

            std::vector<double> explicit_part(nx, 0.0);
            for (std::size_t j = 1; j + 1 < nx; ++j)
                explicit_part[j] =
                    0.5 * (1.0 - theta) * (next[j - 1] - 2.0 * next[j] + next[j + 1]) / (dx * dx);

            cur = next;
            bool converged = false;
            for (int pic = 0; pic < 60; ++pic) {
                detail::gradient(cur, dx, grad);
                for (std::size_t j = 0; j < nx; ++j) {
                    const double f_cur = driver(k, j, cur[j], grad[j]);
                    rhs[j] = next[j] / dt + explicit_part[j] - theta * f_cur -
                             (1.0 - theta) * f_next[j];
                }
                M.solve(rhs, trial);
                double diff = 0.0;
                for (std::size_t j = 0; j < nx; ++j)
                    diff = std::max(diff, std::abs(trial[j] - cur[j]));
                cur.swap(trial);
                if (diff < 1e-10) {
                    converged = true;
                    break;
                }
            }
            if (!converged)
                throw NoConvergence(std::string("solve_pde: Picard iteration stalled in the ") +
                                    label + " sweep at t = " + std::to_string(sol.time_grid[k]));
            detail::gradient(cur, dx, grad);
            for (std::size_t j = 0; j < nx; ++j) {
                out_field[k * nx + j] = cur[j];
                out_grad[k * nx + j] = grad[j];
            }
            next = cur;
        }
    };

    sol.a_field.assign(nt1 * nx, 0.0);
    sol.za_field.assign(nt1 * nx, 0.0);
    sweep(
        [&](std::size_t k, std::size_t j, double v, double g) {
            return detail::eval_driver_a(field.terms(k, j), v, g, guard);
        },
        sol.a_field, sol.za_field, "a");

    if (sol.min_a() < -sol.lower_bound_c - 1e-9)
        throw NoConvergence("solve_pde: truncation guard active in the converged solution");

    sol.ybar_fields.assign(n_agents, std::vector<double>(nt1 * nx, 0.0));
    sol.zbar_fields.assign(n_agents, std::vector<double>(nt1 * nx, 0.0));
    for (std::size_t i = 0; i < n_agents; ++i) {
        sweep(
            [&](std::size_t k, std::size_t j, double v, double g) {
                return detail::eval_driver_ybar(model.agents[i], field.terms(k, j),
                                                field.agent_terms(i, k, j), v, g,
                                                sol.a_field[k * nx + j],
                                                sol.za_field[k * nx + j]);
            },
            sol.ybar_fields[i], sol.zbar_fields[i], "ybar");
    }
    return sol;
}

// Monte Carlo t = 0 estimates with standard errors.
struct McEstimate {
    double a0 = 0.0;
    double a0_se = 0.0;
    std::vector<double> ybar0, ybar0_se;
    std::size_t n_paths = 0, n_steps = 0;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Cubic polynomial least squares in standardized x; degenerate designs
// (e.g. the trivial slice where all paths sit at x = 0) fall back to the mean.
struct PolyFit {
    double mean = 0.0, scale = 1.0;
    std::array<double, 4> coef{};

    double eval(double x) const {
        const double s = (x - mean) / scale;
        return coef[0] + s * (coef[1] + s * (coef[2] + s * coef[3]));
    }
};

inline PolyFit fit_poly(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    PolyFit fit;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    fit.mean = mean;
    fit.scale = std::sqrt(var);
    if (!(fit.scale > 1e-12)) {
        fit.scale = 1.0;
        double my = 0.0;
        for (double v : y) my += v;
        fit.coef[0] = my / static_cast<double>(n);
        return fit;
    }

    // normal equations over the monomial basis 1, s, s^2, s^3
    std::array<double, 7> moments{};
    std::array<double, 4> rhs{};
    for (std::size_t p = 0; p < n; ++p) {
        const double s = (x[p] - fit.mean) / fit.scale;
        double pw = 1.0;
        std::array<double, 4> phi;
        for (int d = 0; d < 4; ++d) {
            phi[d] = pw;
            pw *= s;
        }
        double mw = 1.0;
        for (int d = 0; d < 7; ++d) {
            moments[d] += mw;
            mw *= s;
        }
        for (int d = 0; d < 4; ++d) rhs[d] += phi[d] * y[p];
    }
    double A[4][5];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) A[r][c] = moments[r + c];
        A[r][4] = rhs[r];
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        for (int c = 0; c < 5; ++c) std::swap(A[col][c], A[piv][c]);
        if (std::abs(A[col][col]) < 1e-300) continue;
        for (int r = col + 1; r < 4; ++r) {
            const double m = A[r][col] / A[col][col];
            for (int c = col; c < 5; ++c) A[r][c] -= m * A[col][c];
        }
    }
    for (int r = 3; r >= 0; --r) {
        double v = A[r][4];
        for (int c = r + 1; c < 4; ++c) v -= A[r][c] * fit.coef[c];
        fit.coef[r] = (std::abs(A[r][r]) < 1e-300) ? 0.0 : v / A[r][r];
    }
    return fit;
}

}  // namespace detail

// Regression Monte Carlo cross-check: forward Brownian paths, then backward
// least-squares induction carrying values per path. Conditional expectations
// and Z come from cubic-polynomial regressions; the driver enters through a
// trapezoidal step whose implicit end is resolved by Picard iteration. Reports
// t = 0 estimates with Monte Carlo standard errors. Independent of the
// ODE/PDE steppers by construction.
inline McEstimate mc_crosscheck(const EconomyModel& model, const UbiPolicy& policy,
                                std::size_t n_paths, std::size_t n_steps,
                                std::optional<std::uint64_t> seed) {
    if (!seed)
        throw SeedRequired("mc_crosscheck: a seed is required for reproducibility");
    if (n_paths < 2) throw InsufficientPaths("mc_crosscheck: need at least 2 paths");
    if (n_steps < 1) throw StepSizeError("mc_crosscheck: need at least 1 step");

    const double T = model.horizon;
    const double dt = T / static_cast<double>(n_steps);
    const double sq_dt = std::sqrt(dt);
    const std::size_t n_agents = model.agent_count();
    const auto agg = aggregate_preferences(model.agents);

    // forward paths of the Brownian level
    std::vector<std::vector<double>> xs(n_steps + 1, std::vector<double>(n_paths, 0.0));
    for (std::size_t p = 0; p < n_paths; ++p) {
        std::mt19937_64 rng(detail::mix_seed(*seed, p));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t k = 0; k < n_steps; ++k)
            xs[k + 1][p] = xs[k][p] + sq_dt * normal(rng);
    }
    std::vector<double> ts(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) ts[k] = dt * static_cast<double>(k);
    ts.back() = T;

    // driver ingredients along paths for one time level
    struct LevelCoeffs {
        std::vector<double> lin_a, kappa;  // per path
        std::vector<double> d_mu, d_sig;   // [i*n_paths + p]
    };
    auto fill_level = [&](std::size_t k, LevelCoeffs& lc) {
        lc.lin_a.resize(n_paths);
        lc.kappa.resize(n_paths);
        lc.d_mu.resize(n_agents * n_paths);
        lc.d_sig.resize(n_agents * n_paths);
        std::vector<double> wages(n_agents);
        for (std::size_t p = 0; p < n_paths; ++p) {
            detail::wages_at(model, ts[k], xs[k][p], wages);
            const auto b = bundle(model, policy, wages);
            const auto d = detail::driver_terms(b, agg, model.dividend);
            lc.lin_a[p] = d.lin_a;
            lc.kappa[p] = d.kappa;
            for (std::size_t i = 0; i < n_agents; ++i) {
                lc.d_mu[i * n_paths + p] = b.agents[i].leisure.mu - b.agents[i].income.mu;
                lc.d_sig[i * n_paths + p] = b.agents[i].income.sigma - b.agents[i].leisure.sigma;
            }
        }
    };

    // Backward sweep for one scalar equation. driver(level, path, v, z) uses
    // the level's coefficients; fits for the a-equation are recorded so the
    // Ybar sweeps can read (a, Z_a) along their own backward pass.
    std::vector<detail::PolyFit> a_fit(n_steps + 1), za_fit(n_steps + 1);
    auto sweep = [&](auto&& driver, bool record_a, std::vector<detail::PolyFit>* val_fits,
                     std::vector<detail::PolyFit>* z_fits, double& out_mean, double& out_se) {
        std::vector<double> v(n_paths, 0.0), target(n_paths), zhat(n_paths), vhat(n_paths);
        LevelCoeffs cur, nxt;
        fill_level(n_steps, nxt);
        std::vector<double> f_next(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p)
            f_next[p] = driver(nxt, p, 0.0, 0.0, n_steps);

        for (std::size_t k = n_steps; k-- > 0;) {
            fill_level(k, cur);
            const auto cf = detail::fit_poly(xs[k], v);
            // Z_k regression with the predictable part removed (martingale
            // basis); without it the v dW target noise biases the quadratic
            // Z term
            for (std::size_t p = 0; p < n_paths; ++p) {
                vhat[p] = cf.eval(xs[k][p]);
                target[p] = (v[p] - vhat[p]) * (xs[k + 1][p] - xs[k][p]) / dt;
            }
            const auto zf = detail::fit_poly(xs[k], target);
            for (std::size_t p = 0; p < n_paths; ++p) zhat[p] = zf.eval(xs[k][p]);
            // trapezoidal step, implicit end resolved by Picard; the values
            // keep their martingale dispersion, so the reported standard
            // error is the natural statistical scale of the estimate
            for (std::size_t p = 0; p < n_paths; ++p) {
                double u = vhat[p];
                for (int pic = 0; pic < 4; ++pic)
                    u = vhat[p] - 0.5 * dt * (driver(cur, p, u, zhat[p], k) + f_next[p]);
                v[p] -= 0.5 * dt * (driver(cur, p, u, zhat[p], k) + f_next[p]);
            }
            // refresh the smoothed value fit at level k; the next backward
            // step evaluates its trapezoid end against it
            const auto vf = detail::fit_poly(xs[k], v);
            if (record_a) {
                (*val_fits)[k] = vf;
                (*z_fits)[k] = zf;
            }
            for (std::size_t p = 0; p < n_paths; ++p)
                f_next[p] = driver(cur, p, vf.eval(xs[k][p]), zhat[p], k);
            std::swap(cur, nxt);
        }

        double mean = 0.0;
        for (double u : v) mean += u;
        mean /= static_cast<double>(n_paths);
        double var = 0.0;
        for (double u : v) var += (u - mean) * (u - mean);
        var /= static_cast<double>(n_paths - 1);
        out_mean = mean;
        out_se = std::sqrt(var / static_cast<double>(n_paths));
    };

    McEstimate est;
    est.n_paths = n_paths;
    est.n_steps = n_steps;

    sweep(
        [&](const auto& lc, std::size_t p, double v, double z, std::size_t) {
            const double q = lc.kappa[p] - z;
            return lc.lin_a[p] - 0.5 * q * q - std::exp(-v);
        },
        true, &a_fit, &za_fit, est.a0, est.a0_se);

    est.ybar0.resize(n_agents);
    est.ybar0_se.resize(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) {
        sweep(
            [&](const auto& lc, std::size_t p, double v, double z, std::size_t k) {
                const double a = (k == n_steps) ? 0.0 : a_fit[k].eval(xs[k][p]);
                const double za = (k == n_steps) ? 0.0 : za_fit[k].eval(xs[k][p]);
                const double q = lc.kappa[p] - za;
                const auto& agent = model.agents[i];
                return (-agent.rho + agent.alpha * lc.d_mu[i * n_paths + p] +
                        (1.0 + a + agent.alpha * v) * std::exp(-a) - 0.5 * q * q +
                        agent.alpha * (z + lc.d_sig[i * n_paths + p]) * q) /
                       agent.alpha;
            },
            false, nullptr, nullptr, est.ybar0[i], est.ybar0_se[i]);
    }
    return est;
}

}  // namespace ubiq
