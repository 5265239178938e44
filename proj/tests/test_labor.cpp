#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ubiq/labor.hpp"

using namespace ubiq;

TEST_CASE("psi and derivatives") {
    CHECK(psi(0.5, -0.7, -0.7).value == Catch::Approx(0.0).margin(1e-15));
    CHECK(psi(0.70711, -0.5, -0.5).value == Catch::Approx(1.0).margin(1e-4));
    CHECK_THROWS_AS(psi(0.0, -0.5, -0.5), DomainError);
    CHECK_THROWS_AS(psi(1.0, -0.5, -0.5), DomainError);

    SECTION("strictly increasing on the open interval") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> ul(0.01, 0.99), ue(-3.0, -0.05);
        for (int k = 0; k < 500; ++k) {
            const double l = ul(rng), beta = ue(rng), gamma = ue(rng);
            CHECK(psi(l, beta, gamma).d1 > 0.0);
        }
    }

    SECTION("derivatives match finite differences") {
        const double beta = -0.4, gamma = -1.2, h = 1e-6;
        for (double l : {0.1, 0.37, 0.5, 0.83}) {
            const auto p = psi(l, beta, gamma);
            const double fd1 = (psi(l + h, beta, gamma).value - psi(l - h, beta, gamma).value) /
                               (2.0 * h);
            const double fd2 = (psi(l + h, beta, gamma).d1 - psi(l - h, beta, gamma).d1) /
                               (2.0 * h);
            CHECK(p.d1 == Catch::Approx(fd1).epsilon(1e-8));
            CHECK(p.d2 == Catch::Approx(fd2).epsilon(1e-8));
        }
    }
}

TEST_CASE("psi inversion") {
    SECTION("zero target has the closed form beta/(beta+gamma)") {
        CHECK(invert_psi(0.0, -0.2, -0.4) == Catch::Approx(1.0 / 3.0).margin(1e-15));
        CHECK(invert_psi(0.0, -0.5, -0.5) == 0.5);
    }

    SECTION("unit target with symmetric exponents: quadratic oracle sqrt(1/2)") {
        // quadratic c l^2 - (c+beta+gamma) l + beta = 0 reduces to l^2 = 1/2
        CHECK(invert_psi(1.0, -0.5, -0.5) == Catch::Approx(std::sqrt(0.5)).margin(1e-14));
    }

    SECTION("residual stays at the floating point floor") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> uc(-20.0, 20.0), ue(-3.0, -0.2);
        for (int k = 0; k < 20000; ++k) {
            const double c = uc(rng), beta = ue(rng), gamma = ue(rng);
            const double l = invert_psi(c, beta, gamma);
            REQUIRE(l > 0.0);
            REQUIRE(l < 1.0);
            REQUIRE(std::abs(psi(l, beta, gamma).value - c) < 1e-12);
        }
    }

    SECTION("swap symmetry invert_psi(-c, gamma, beta) = 1 - invert_psi(c, beta, gamma)") {
        std::mt19937_64 rng(19);
        std::uniform_real_distribution<double> uc(-15.0, 15.0), ue(-2.5, -0.2);
        for (int k = 0; k < 2000; ++k) {
            const double c = uc(rng), beta = ue(rng), gamma = ue(rng);
            CHECK(invert_psi(-c, gamma, beta) ==
                  Catch::Approx(1.0 - invert_psi(c, beta, gamma)).margin(1e-12));
        }
    }
}

TEST_CASE("labor shares") {
    EconomyModel m = testutil::constant_wage_model();

    SECTION("zero lambda pins labor at the interior point") {
        const UbiPolicy none{0.0, 0.0, 0.0};
        const auto shares = labor_shares(m, none, {2.0, 7.0});
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(shares[i] ==
                  Catch::Approx(m.agents[i].beta / (m.agents[i].beta + m.agents[i].gamma))
                      .margin(1e-15));
    }

    SECTION("strictly increasing in the wage for positive lambda") {
        const UbiPolicy pol{0.6, 0.2, 0.0};
        double prev0 = 0.0, prev1 = 0.0;
        bool first = true;
        for (double w = 0.25; w <= 8.0; w += 0.25) {
            const auto shares = labor_shares(m, pol, {w, w});
            if (!first) {
                CHECK(shares[0] > prev0);
                CHECK(shares[1] > prev1);
            }
            prev0 = shares[0];
            prev1 = shares[1];
            first = false;
        }
    }

    SECTION("alpha lambda w = 1 reduces to the unit-target inversion") {
        EconomyModel one = m;
        one.agents = {{0.2, 1.0, -0.5, -0.5}};
        one.wages = {{6.25, 0.0, 0.0}};
        one.initial_stock_shares = {1.0};
        one.initial_annuity_shares = {1.0};
        const auto shares = labor_shares(one, {0.6, 0.2, 0.0}, {6.25});  // lambda = 0.8
        CHECK(shares[0] == Catch::Approx(std::sqrt(0.5)).margin(1e-12));
    }
}

TEST_CASE("leisure log utility") {
    CHECK(leisure_log_utility({1.0, 0.0, -0.5, -0.5}, 0.5) ==
          Catch::Approx(std::log(2.0)).margin(1e-15));
    CHECK_THROWS_AS(leisure_log_utility({1.0, 0.0, -0.5, -0.5}, 0.0), DomainError);
    CHECK_THROWS_AS(leisure_log_utility({1.0, 0.0, -0.5, -0.5}, 1.0), DomainError);

    SECTION("positive everywhere and diverging at the edges (log pole)") {
        const AgentPreferences a{0.7, 0.1, -0.3, -1.1};
        const double mid = leisure_log_utility(a, 0.5);
        double near0 = 0.0, near1 = 0.0;
        for (int k = 2; k <= 14; ++k) {
            const double eps = std::pow(10.0, -k);
            const double lo = leisure_log_utility(a, eps);
            const double hi = leisure_log_utility(a, 1.0 - eps);
            CHECK(lo > 0.0);
            CHECK(hi > 0.0);
            CHECK(lo > near0);
            CHECK(hi > near1);
            near0 = lo;
            near1 = hi;
        }
        // the pole is logarithmic; push far enough to clear any fixed multiple
        CHECK(leisure_log_utility(a, 1e-200) > 50.0 * mid);
        CHECK(near1 > 5.0 * mid);
    }
}

TEST_CASE("response functions") {
    EconomyModel m = testutil::constant_wage_model();
    const UbiPolicy pol{0.5, 0.3, 0.8};
    const LaborState state = make_labor_state(m, pol, 0.0, {1.0, 1.5});

    SECTION("consistency: response at the optimizer is the other agent's labor, exactly") {
        CHECK(response(0, 1, state.labor[0], state, pol) == state.labor[1]);
        CHECK(response(1, 0, state.labor[1], state, pol) == state.labor[0]);
    }

    SECTION("competitive scenario ignores l") {
        const UbiPolicy comp{0.5, 0.3, 0.0};
        for (double l : {0.1, 0.4, 0.9})
            CHECK(response(0, 1, l, state, comp) == state.labor[1]);
    }

    SECTION("zero wage pins the response") {
        LaborState z = state;
        z.wages[1] = 0.0;
        for (double l : {0.1, 0.9}) CHECK(response(0, 1, l, z, pol) == z.labor[1]);
    }

    CHECK_THROWS_AS(response(1, 1, 0.5, state, pol), IndexError);
}

TEST_CASE("perceived and aggregate income") {
    EconomyModel m = testutil::constant_wage_model();

    SECTION("summed perceptions equal the realized aggregate, delta cancels") {
        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> uw(0.2, 5.0), ud(-2.0, 2.0), us(0.0, 0.5);
        for (int k = 0; k < 300; ++k) {
            const UbiPolicy pol{us(rng), us(rng), ud(rng)};
            const LaborState state = make_labor_state(m, pol, 0.0, {uw(rng), uw(rng)});
            double wage_income = 0.0;
            for (std::size_t i = 0; i < 2; ++i)
                wage_income += state.wages[i] * state.labor[i];
            double perceived_sum = 0.0;
            for (std::size_t i = 0; i < 2; ++i)
                perceived_sum += perceived_income(i, state.labor[i], state, pol);
            const double agg = (pol.lambda_keep + pol.lambda_ubi) * wage_income;
            CHECK(perceived_sum == Catch::Approx(agg).margin(1e-12 * std::max(1.0, agg)));
            CHECK(aggregate_income(state, pol) == agg);
        }
    }

    SECTION("competitive case matches the direct formula") {
        const UbiPolicy pol{0.6, 0.3, 0.0};
        const LaborState state = make_labor_state(m, pol, 0.0, {1.2, 0.8});
        for (double l : {0.2, 0.5, 0.77}) {
            const double expected =
                pol.lambda_keep * state.wages[0] * l +
                pol.lambda_ubi / 2.0 * (state.wages[0] * l + state.wages[1] * state.labor[1]);
            CHECK(perceived_income(0, l, state, pol) == Catch::Approx(expected).margin(1e-14));
        }
    }

    SECTION("no income channel when both fractions vanish") {
        const UbiPolicy pol{0.0, 0.0, 0.3};
        const LaborState state = make_labor_state(m, pol, 0.0, {1.2, 0.8});
        for (double l : {0.2, 0.9}) CHECK(perceived_income(0, l, state, pol) == 0.0);
        CHECK(aggregate_income(state, pol) == 0.0);
    }

    SECTION("pure communism realizes the full wage income") {
        const UbiPolicy pol{0.0, 1.0, 0.0};
        const LaborState state = make_labor_state(m, pol, 0.0, {1.0, 1.5});
        double wage_income = 0.0;
        for (std::size_t i = 0; i < 2; ++i) wage_income += state.wages[i] * state.labor[i];
        CHECK(aggregate_income(state, pol) == Catch::Approx(wage_income).margin(1e-14));
    }

    SECTION("single agent") {
        EconomyModel one = m;
        one.agents = {m.agents[0]};
        one.wages = {m.wages[0]};
        one.initial_stock_shares = {1.0};
        one.initial_annuity_shares = {1.0};
        const UbiPolicy pol{0.5, 0.2, 0.9};
        const LaborState state = make_labor_state(one, pol, 0.0, {2.0});
        CHECK(aggregate_income(state, pol) ==
              Catch::Approx(0.7 * 2.0 * state.labor[0]).margin(1e-14));
    }
}

TEST_CASE("labor quantities increase along increasing lambda") {
    EconomyModel m = testutil::constant_wage_model();
    const std::vector<double> wages = {1.0, 1.5};
    double prev_labor[2] = {0.0, 0.0};
    double prev_lcal[2] = {0.0, 0.0};
    double prev_eps = 0.0;
    bool first = true;
    for (double lambda = 0.05; lambda <= 1.0; lambda += 0.05) {
        // realize the lambda with delta while keeping the payout split fixed
        const double delta = (2.0 * (lambda - 0.7) / 0.2) - 1.0;  // keep=0.7, ubi=0.2, I=2
        const UbiPolicy pol{0.7, 0.2, delta};
        REQUIRE(effective_lambda(pol, 2) == Catch::Approx(lambda).margin(1e-12));
        const LaborState state = make_labor_state(m, pol, 0.0, wages);
        const double eps = aggregate_income(state, pol);
        if (!first) {
            for (int i = 0; i < 2; ++i) {
                CHECK(state.labor[i] > prev_labor[i]);
                CHECK(state.leisure_log_utility[i] > prev_lcal[i]);
            }
            CHECK(eps > prev_eps);
        }
        for (int i = 0; i < 2; ++i) {
            prev_labor[i] = state.labor[i];
            prev_lcal[i] = state.leisure_log_utility[i];
        }
        prev_eps = eps;
        first = false;
    }
}
