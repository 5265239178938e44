#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ubiq/bsde.hpp"
#include "ubiq/config.hpp"
#include "ubiq/equilibrium.hpp"
#include "ubiq/errors.hpp"
#include "ubiq/ito.hpp"
#include "ubiq/model.hpp"
#include "ubiq/table.hpp"
#include "ubiq/welfare.hpp"

namespace ubiq {

struct RunConfig {
    std::string economy_path;
    std::string policy_spec;  // inline or file; empty -> economy file's policy line
    std::string out_path;     // empty -> stdout
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    std::size_t paths = 1000;
    std::size_t steps = 200;
    std::size_t nt = 400;
    std::size_t nx = 201;
    double x_min = std::numeric_limits<double>::quiet_NaN();
    double x_max = std::numeric_limits<double>::quiet_NaN();
    double tol = 1e-10;
    std::string regime = "auto";  // ode | pde | mc | auto
    double w_min = 0.1;
    double w_max = 10.0;
    std::size_t w_count = 100;
    std::vector<double> deltas;
};

namespace cli_detail {

struct LoadedRun {
    EconomyModel model;
    UbiPolicy policy;
};

inline LoadedRun load(const RunConfig& cfg) {
    if (cfg.economy_path.empty()) throw ConfigError("--economy is required");
    EconomyFile file = parse_economy_file(cfg.economy_path);
    UbiPolicy policy;
    if (!cfg.policy_spec.empty()) policy = parse_policy_spec(cfg.policy_spec);
    else if (file.policy) policy = *file.policy;
    else throw ConfigError("no policy given: add a 'policy' line or pass --policy");
    validate_all(file.model, policy);
    return {std::move(file.model), policy};
}

inline void stamp_meta(Table& table, const std::string& command, const RunConfig& cfg,
                       const LoadedRun& run) {
    table.add_meta("command", command);
    table.add_meta("version", kVersion);
    table.add_meta("economy", cfg.economy_path);
    table.add_meta("agents", static_cast<double>(run.model.agent_count()));
    table.add_meta("horizon", run.model.horizon);
    table.add_meta("lambda_keep", run.policy.lambda_keep);
    table.add_meta("lambda_ubi", run.policy.lambda_ubi);
    table.add_meta("delta", run.policy.delta);
    table.add_meta("lambda", effective_lambda(run.policy, run.model.agent_count()));
}

inline void emit(const Table& table, const RunConfig& cfg) {
    const TableFormat format = parse_format(cfg.format);
    if (cfg.out_path.empty()) write_table(table, std::cout, format);
    else write_table_file(table, cfg.out_path, format);
}

inline std::vector<double> wage_grid(const RunConfig& cfg) {
    if (cfg.w_count < 2) return {cfg.w_min};
    std::vector<double> grid(cfg.w_count);
    const double step = (cfg.w_max - cfg.w_min) / static_cast<double>(cfg.w_count - 1);
    for (std::size_t k = 0; k < cfg.w_count; ++k)
        grid[k] = cfg.w_min + step * static_cast<double>(k);
    return grid;
}

inline std::vector<double> delta_list(const RunConfig& cfg, const UbiPolicy& policy) {
    return cfg.deltas.empty() ? std::vector<double>{policy.delta} : cfg.deltas;
}

inline Regime pick_regime(const RunConfig& cfg, const EconomyModel& model) {
    if (cfg.regime == "ode") return Regime::Ode;
    if (cfg.regime == "pde") return Regime::Pde;
    if (cfg.regime == "mc") return Regime::Mc;
    if (cfg.regime == "auto") return model.constant_wages() ? Regime::Ode : Regime::Pde;
    throw ConfigError("unknown regime '" + cfg.regime + "' (expected ode, pde, mc or auto)");
}

inline BackwardSolution solve_for(const RunConfig& cfg, const EconomyModel& model,
                                  const UbiPolicy& policy) {
    const Regime regime = pick_regime(cfg, model);
    if (regime == Regime::Ode) return solve_ode(model, policy, cfg.nt);
    if (regime == Regime::Pde) {
        PdeGrid grid;
        grid.n_time = cfg.nt;
        grid.n_space = cfg.nx;
        grid.x_min = cfg.x_min;
        grid.x_max = cfg.x_max;
        return solve_pde(model, policy, grid);
    }
    throw ConfigError("this command needs a field solution; use --regime ode or pde");
}

inline void require_seed(const RunConfig& cfg, const char* command) {
    if (!cfg.seed)
        throw SeedRequired(std::string(command) + ": --seed is required for stochastic commands");
}

inline Table run_labor_sweep(const RunConfig& cfg) {
    const LoadedRun run = load(cfg);
    const std::size_t n = run.model.agent_count();
    Table table;
    stamp_meta(table, "labor-sweep", cfg, run);
    table.add_meta("w_min", cfg.w_min);
    table.add_meta("w_max", cfg.w_max);
    table.add_meta("w_count", static_cast<double>(cfg.w_count));
    table.columns = {"w", "delta", "lambda"};
    for (std::size_t i = 1; i <= n; ++i) table.columns.push_back("L_" + std::to_string(i));
    for (std::size_t i = 1; i <= n; ++i) table.columns.push_back("Lcal_" + std::to_string(i));
    table.columns.push_back("eps_sigma");

    std::vector<double> wages(n);
    for (double delta : delta_list(cfg, run.policy)) {
        UbiPolicy policy = run.policy;
        policy.delta = delta;
        for (double w : wage_grid(cfg)) {
            std::fill(wages.begin(), wages.end(), w);
            const LaborState state = make_labor_state(run.model, policy, 0.0, wages);
            std::vector<double> row = {w, delta, effective_lambda(policy, n)};
            for (double v : state.labor) row.push_back(v);
            for (double v : state.leisure_log_utility) row.push_back(v);
            row.push_back(aggregate_income(state, policy));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

inline Table run_market_sweep(const RunConfig& cfg) {
    const LoadedRun run = load(cfg);
    Table table;
    stamp_meta(table, "market-sweep", cfg, run);
    table.add_meta("w_min", cfg.w_min);
    table.add_meta("w_max", cfg.w_max);
    table.add_meta("w_count", static_cast<double>(cfg.w_count));
    table.columns = {"w", "delta", "kappa", "r"};
    const auto rows =
        sweep_market(run.model, run.policy, wage_grid(cfg), delta_list(cfg, run.policy));
    for (const auto& r : rows) table.rows.push_back({r.wage, r.delta, r.kappa, r.rate});
    return table;
}

inline Table run_solve(const RunConfig& cfg) {
    const LoadedRun run = load(cfg);
    Table table;
    stamp_meta(table, "solve", cfg, run);
    const Regime regime = pick_regime(cfg, run.model);
    table.add_meta("regime", to_string(regime));
    table.add_meta("nt", static_cast<double>(cfg.nt));

    const std::size_t n = run.model.agent_count();
    if (regime == Regime::Mc) {
        require_seed(cfg, "solve --regime mc");
        table.add_meta("paths", static_cast<double>(cfg.paths));
        table.add_meta("steps", static_cast<double>(cfg.steps));
        table.add_meta("seed", static_cast<double>(*cfg.seed));
        const McEstimate est =
            mc_crosscheck(run.model, run.policy, cfg.paths, cfg.steps, cfg.seed);
        table.columns = {"a0", "a0_se"};
        std::vector<double> row = {est.a0, est.a0_se};
        for (std::size_t i = 1; i <= n; ++i) {
            table.columns.push_back("Ybar0_" + std::to_string(i));
            table.columns.push_back("Ybar0_se_" + std::to_string(i));
            row.push_back(est.ybar0[i - 1]);
            row.push_back(est.ybar0_se[i - 1]);
        }
        table.rows.push_back(std::move(row));
        return table;
    }

    const BackwardSolution sol = solve_for(cfg, run.model, run.policy);
    if (regime == Regime::Pde) {
        table.add_meta("nx", static_cast<double>(sol.nx()));
        table.add_meta("x_min", sol.state_grid.front());
        table.add_meta("x_max", sol.state_grid.back());
    }
    table.add_meta("lower_bound_c", sol.lower_bound_c);
    table.columns = {"t", "x", "a", "Z_a"};
    for (std::size_t i = 1; i <= n; ++i) table.columns.push_back("Ybar_" + std::to_string(i));
    for (std::size_t i = 1; i <= n; ++i) table.columns.push_back("Zbar_" + std::to_string(i));
    for (std::size_t k = 0; k < sol.nt(); ++k) {
        for (std::size_t j = 0; j < sol.nx(); ++j) {
            const std::size_t idx = k * sol.nx() + j;
            std::vector<double> row = {sol.time_grid[k], sol.state_grid[j], sol.a_field[idx],
                                       sol.za_field[idx]};
            for (std::size_t i = 0; i < n; ++i) row.push_back(sol.ybar_fields[i][idx]);
            for (std::size_t i = 0; i < n; ++i) row.push_back(sol.zbar_fields[i][idx]);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

inline Table run_simulate(const RunConfig& cfg, std::ostream& log) {
    const LoadedRun run = load(cfg);
    require_seed(cfg, "simulate");
    const BackwardSolution sol = solve_for(cfg, run.model, run.policy);

    SimOptions opts;
    opts.n_paths = cfg.paths;
    opts.n_steps = cfg.steps;
    opts.seed = cfg.seed;
    opts.record_paths = cfg.paths;
    const Ensemble ens = simulate(run.model, run.policy, sol, opts);

    Table table;
    stamp_meta(table, "simulate", cfg, run);
    table.add_meta("regime", to_string(sol.regime));
    table.add_meta("paths", static_cast<double>(cfg.paths));
    table.add_meta("steps", static_cast<double>(cfg.steps));
    table.add_meta("seed", static_cast<double>(*cfg.seed));
    table.add_meta("nt", static_cast<double>(cfg.nt));
    table.add_meta("excluded_out_of_grid", static_cast<double>(ens.out_of_grid_count));

    const std::size_t n = run.model.agent_count();
    table.columns = {"path", "step", "t", "x", "D", "A", "S", "kappa", "eps_sigma"};
    for (std::size_t i = 1; i <= n; ++i) {
        const std::string s = std::to_string(i);
        table.columns.push_back("w_" + s);
        table.columns.push_back("L_" + s);
        table.columns.push_back("eps_" + s);
        table.columns.push_back("pi_" + s);
        table.columns.push_back("theta_" + s);
        table.columns.push_back("c_" + s);
        table.columns.push_back("X_" + s);
        table.columns.push_back("V_" + s);
    }
    for (std::size_t p = 0; p < ens.records.size(); ++p) {
        const PathRecord& rec = ens.records[p];
        for (std::size_t k = 0; k < rec.t.size(); ++k) {
            std::vector<double> row = {static_cast<double>(p), static_cast<double>(k),
                                       rec.t[k],  rec.x[k],    rec.dividend[k], rec.annuity[k],
                                       rec.stock[k], rec.kappa[k], rec.eps_sigma[k]};
            for (std::size_t i = 0; i < n; ++i) {
                row.push_back(rec.wages[i][k]);
                row.push_back(rec.labor[i][k]);
                row.push_back(rec.eps[i][k]);
                row.push_back(rec.pi[i][k]);
                row.push_back(rec.theta[i][k]);
                row.push_back(rec.c[i][k]);
                row.push_back(rec.wealth[i][k]);
                row.push_back(rec.v[i][k]);
            }
            table.rows.push_back(std::move(row));
        }
    }

    std::array<double, 5> max_res{};
    std::size_t nonpos = 0;
    for (const auto& s : ens.stats) {
        if (s.out_of_grid) continue;
        for (std::size_t m = 0; m < 5; ++m)
            max_res[m] = std::max(max_res[m], s.max_residual[m]);
        nonpos += s.nonpositive_wage_steps;
    }
    log << "simulate: " << cfg.paths << " paths, " << cfg.steps << " steps, seed " << *cfg.seed
        << "\n";
    for (std::size_t m = 0; m < 5; ++m)
        log << "  max residual " << kClearingNames[m] << ": " << max_res[m] << "\n";
    log << "  paths excluded (out of grid): " << ens.out_of_grid_count << "\n";
    log << "  steps with nonpositive wages: " << nonpos << "\n";
    return table;
}

inline Table run_welfare(const RunConfig& cfg) {
    const LoadedRun run = load(cfg);
    const BackwardSolution sol = solve_ode(run.model, run.policy, cfg.nt);
    const WelfareReport rep = welfare_report(sol, run.model, run.policy);
    if (std::abs(rep.aggregate - rep.closed_form) > 1e-8)
        throw ConsistencyError("welfare: closed form and per-agent sum disagree");

    Table table;
    stamp_meta(table, "welfare", cfg, run);
    table.add_meta("nt", static_cast<double>(cfg.nt));
    table.add_meta("aggregate_ce", rep.aggregate);
    table.add_meta("aggregate_ce_closed_form", rep.closed_form);
    table.columns = {"agent", "alpha", "rho", "L", "CE", "aggregate_CE"};
    const EquilibriumState s0 = make_state(run.model, run.policy, sol, 0.0, 0.0);
    for (std::size_t i = 0; i < run.model.agent_count(); ++i)
        table.rows.push_back({static_cast<double>(i + 1), run.model.agents[i].alpha,
                              run.model.agents[i].rho, s0.labor.labor[i], rep.ce[i],
                              rep.aggregate});
    return table;
}

inline Table run_policy_compare(const RunConfig& cfg) {
    const LoadedRun run = load(cfg);
    const std::vector<double> socialism =
        cfg.deltas.empty() ? std::vector<double>{-0.5, 0.5} : cfg.deltas;
    const auto rows = compare_policies(run.model, {run.policy}, socialism, cfg.nt);

    Table table;
    stamp_meta(table, "policy-compare", cfg, run);
    table.add_meta("nt", static_cast<double>(cfg.nt));
    const std::size_t n = run.model.agent_count();
    table.columns = {"policy", "lambda_keep", "lambda_ubi", "delta", "lambda"};
    for (std::size_t i = 1; i <= n; ++i) table.columns.push_back("L_" + std::to_string(i));
    table.columns.push_back("eps_sigma");
    table.columns.push_back("aggregate_CE");
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const PolicyRow& r = rows[k];
        table.add_meta("policy_" + std::to_string(k + 1), r.label);
        std::vector<double> row = {static_cast<double>(k + 1), r.policy.lambda_keep,
                                   r.policy.lambda_ubi, r.policy.delta, r.lambda};
        for (double v : r.labor) row.push_back(v);
        row.push_back(r.eps_sigma);
        row.push_back(r.aggregate_ce);
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline Table run_verify(const RunConfig& cfg, std::ostream& log) {
    const LoadedRun run = load(cfg);
    require_seed(cfg, "verify");
    const BackwardSolution sol = solve_for(cfg, run.model, run.policy);

    Table table;
    stamp_meta(table, "verify", cfg, run);
    table.add_meta("regime", to_string(sol.regime));
    table.add_meta("seed", static_cast<double>(*cfg.seed));
    table.add_meta("tol", cfg.tol);
    table.columns = {"check", "value", "threshold", "pass"};
    bool all_pass = true;
    std::size_t check_id = 0;
    auto record = [&](const std::string& name, double value, double threshold, bool pass) {
        table.add_meta("check_" + std::to_string(++check_id), name);
        table.rows.push_back({static_cast<double>(check_id), value, threshold, pass ? 1.0 : 0.0});
        log << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << value
            << (threshold > 0 ? " (threshold " + Table::format_number(threshold) + ")" : "")
            << "\n";
        all_pass = all_pass && pass;
    };

    // analytic clearing residuals at random interior grid states
    {
        std::mt19937_64 rng(*cfg.seed);
        std::uniform_real_distribution<double> ut(0.0, run.model.horizon);
        const double x_lo = sol.nx() > 1 ? sol.state_grid.front() * 0.8 : 0.0;
        const double x_hi = sol.nx() > 1 ? sol.state_grid.back() * 0.8 : 0.0;
        std::uniform_real_distribution<double> ux(x_lo, x_hi);
        std::array<double, 5> worst{};
        for (int s = 0; s < 1000; ++s) {
            const double t = ut(rng);
            const double x = sol.nx() > 1 ? ux(rng) : 0.0;
            const EquilibriumState st = make_state(run.model, run.policy, sol, t, x);
            const auto wealth = endowment_wealth(st, run.model);
            const auto agents = strategies_from_state(st, run.model, wealth);
            const auto res = clearing_residuals(st, agents,
                                                run.policy.lambda_keep + run.policy.lambda_ubi);
            for (std::size_t m = 0; m < 5; ++m) worst[m] = std::max(worst[m], res[m]);
        }
        for (std::size_t m = 0; m < 5; ++m)
            record(std::string("analytic clearing: ") + kClearingNames[m], worst[m], cfg.tol,
                   worst[m] <= cfg.tol);
    }

    // simulated residuals shrink linearly under dt halving
    {
        auto max_sim_residual = [&](std::size_t steps) {
            SimOptions opts;
            opts.n_paths = std::min<std::size_t>(cfg.paths, 64);
            opts.n_steps = steps;
            opts.seed = cfg.seed;
            const Ensemble ens = simulate(run.model, run.policy, sol, opts);
            double worst = 0.0;
            for (const auto& s : ens.stats) {
                if (s.out_of_grid) continue;
                worst = std::max({worst, s.max_residual[2], s.max_residual[3]});
            }
            return worst;
        };
        const double coarse = max_sim_residual(cfg.steps);
        const double fine = max_sim_residual(cfg.steps * 2);
        record("simulated clearing residual at dt", coarse, 0.0, true);
        record("simulated residual shrink factor under dt halving (>= 1.5)",
               coarse / std::max(fine, 1e-300), 0.0, coarse / std::max(fine, 1e-300) >= 1.5);
    }

    // optimality: martingale at the optimum, supermartingale under deviations
    {
        auto run_mart = [&](Perturbation::Kind kind, double amount) {
            SimOptions opts;
            opts.n_paths = cfg.paths;
            opts.n_steps = cfg.steps;
            opts.seed = cfg.seed;
            opts.perturbation = {kind, amount};
            const Ensemble ens = simulate(run.model, run.policy, sol, opts);
            return martingale_test(ens, 0);
        };
        const auto opt = run_mart(Perturbation::Kind::None, 0.0);
        record("martingale |mean V_T - V_0| / SE (optimal, <= 3)",
               opt.se > 0 ? std::abs(opt.gap) / opt.se : 0.0, 3.0,
               opt.verdict == MartingaleVerdict::MartingaleConsistent);
        const auto pc = run_mart(Perturbation::Kind::ConsumptionShift, 0.1);
        record("supermartingale gap / SE (consumption +0.1, <= -3)", pc.se > 0 ? pc.gap / pc.se : 0.0,
               -3.0, pc.verdict == MartingaleVerdict::SupermartingaleStrict);
        const auto pl = run_mart(Perturbation::Kind::LaborScale, 0.5);
        record("supermartingale gap / SE (labor halved, <= -3)", pl.se > 0 ? pl.gap / pl.se : 0.0,
               -3.0, pl.verdict == MartingaleVerdict::SupermartingaleStrict);
        const auto pp = run_mart(Perturbation::Kind::PortfolioShift, 1.0);
        record("supermartingale gap / SE (stock shares +1, <= -3)",
               pp.se > 0 ? pp.gap / pp.se : 0.0, -3.0,
               pp.verdict == MartingaleVerdict::SupermartingaleStrict);
    }

    if (!all_pass) {
        cli_detail::emit(table, cfg);
        throw VerificationFailure("verify: one or more checks failed");
    }
    return table;
}

}  // namespace cli_detail

// Dispatches one CLI command; writes the artifact table and returns 0.
// Throws ConfigError / ValidationError / VerificationFailure for the
// distinct nonzero exit codes.
inline int run_command(const std::string& command, const RunConfig& cfg,
                       std::ostream& log = std::cerr) {
    Table table;
    if (command == "labor-sweep") table = cli_detail::run_labor_sweep(cfg);
    else if (command == "market-sweep") table = cli_detail::run_market_sweep(cfg);
    else if (command == "solve") table = cli_detail::run_solve(cfg);
    else if (command == "simulate") table = cli_detail::run_simulate(cfg, log);
    else if (command == "verify") table = cli_detail::run_verify(cfg, log);
    else if (command == "welfare") table = cli_detail::run_welfare(cfg);
    else if (command == "policy-compare") table = cli_detail::run_policy_compare(cfg);
    else throw ConfigError("unknown command '" + command + "'");
    cli_detail::emit(table, cfg);
    return 0;
}

}  // namespace ubiq
