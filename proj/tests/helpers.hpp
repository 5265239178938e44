#pragma once

#include <random>
#include <vector>

#include "ubiq/model.hpp"

namespace testutil {

// Matches configs/constant_wage.econ.
inline ubiq::EconomyModel constant_wage_model() {
    ubiq::EconomyModel m;
    m.agents = {{2.0, 1.0, -0.5, -0.5}, {3.0, 1.0, -0.5, -0.5}};
    m.wages = {{1.0, 0.0, 0.0}, {1.5, 0.0, 0.0}};
    m.dividend = {1.0, 0.05, 0.2};
    m.horizon = 1.0;
    m.initial_stock_shares = {0.5, 0.5};
    m.initial_annuity_shares = {0.5, 0.5};
    return m;
}

inline ubiq::UbiPolicy constant_wage_policy() { return {0.7, 0.2, 0.5}; }

// Matches configs/figure1.econ (leisure exponents at the documented default).
inline ubiq::EconomyModel figure1_model() {
    ubiq::EconomyModel m;
    m.agents = {{0.2, 1.0, -0.2, -0.3}, {0.2, 1.0, -0.4, -0.3}};
    m.wages = {{1.0, 0.1, 0.1}, {1.0, 0.2, -0.05}};
    m.dividend = {1.0, 0.1, 0.5};
    m.horizon = 1.0;
    m.initial_stock_shares = {0.5, 0.5};
    m.initial_annuity_shares = {0.5, 0.5};
    return m;
}

inline ubiq::UbiPolicy figure1_policy() { return {0.7, 0.2, 0.0}; }

// Constant-wage economy with r = rho_Sigma + alpha_Sigma mu_D - kappa^2/2 = 0:
// alpha_Sigma = 2, kappa = 2 * 0.5 = 1, rho_Sigma = 0.5.
inline ubiq::EconomyModel rate_zero_model() {
    ubiq::EconomyModel m;
    m.agents = {{4.0, 0.5, -0.5, -0.5}, {4.0, 0.5, -0.5, -0.5}};
    m.wages = {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
    m.dividend = {1.0, 0.0, 0.5};
    m.horizon = 1.0;
    m.initial_stock_shares = {0.5, 0.5};
    m.initial_annuity_shares = {0.5, 0.5};
    return m;
}

// Constant-wage economy with r = 1, the fixed point a == 0:
// alpha_Sigma = 0.1, kappa = 0.05, rho_Sigma = 1 - 0.01 + 0.00125.
inline ubiq::EconomyModel rate_one_model() {
    ubiq::EconomyModel m;
    m.agents = {{0.2, 0.99125, -0.5, -0.5}, {0.2, 0.99125, -0.5, -0.5}};
    m.wages = {{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
    m.dividend = {1.0, 0.1, 0.5};
    m.horizon = 1.0;
    m.initial_stock_shares = {0.5, 0.5};
    m.initial_annuity_shares = {0.5, 0.5};
    return m;
}

}  // namespace testutil
