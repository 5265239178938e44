#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "ubiq/model.hpp"

using namespace ubiq;

TEST_CASE("effective lambda") {
    CHECK(effective_lambda({0.7, 0.2, 0.0}, 2) == Catch::Approx(0.8).margin(1e-15));
    for (std::size_t n : {1, 2, 5, 17})
        CHECK(effective_lambda({0.0, 1.0, 0.0}, n) ==
              Catch::Approx(1.0 / static_cast<double>(n)).margin(1e-15));

    SECTION("threshold delta gives lambda = 0") {
        const double keep = 0.4, ubi = 0.3;
        for (std::size_t n : {2, 3, 6}) {
            const double nn = static_cast<double>(n);
            const double delta = -(1.0 + nn * keep / ubi) / (nn - 1.0);
            CHECK(std::abs(effective_lambda({keep, ubi, delta}, n)) < 1e-12);
        }
    }

    SECTION("delta = 0 collapses to keep + ubi/I exactly") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 0.5);
        for (int k = 0; k < 200; ++k) {
            const double keep = u(rng), ubi = u(rng);
            const std::size_t n = 1 + k % 7;
            CHECK(effective_lambda({keep, ubi, 0.0}, n) == keep + ubi / static_cast<double>(n));
        }
    }

    SECTION("affine in each policy coordinate") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int k = 0; k < 100; ++k) {
            const UbiPolicy base{0.3 + 0.1 * u(rng), 0.2 + 0.1 * u(rng), u(rng)};
            const std::size_t n = 2 + k % 5;
            auto lam = [&](double keep, double ubi, double delta) {
                return effective_lambda({keep, ubi, delta}, n);
            };
            // midpoint values agree with the average of endpoints, coordinatewise
            CHECK(lam(base.lambda_keep + 0.1, base.lambda_ubi, base.delta) +
                      lam(base.lambda_keep - 0.1, base.lambda_ubi, base.delta) ==
                  Catch::Approx(2.0 * lam(base.lambda_keep, base.lambda_ubi, base.delta))
                      .margin(1e-14));
            CHECK(lam(base.lambda_keep, base.lambda_ubi + 0.1, base.delta) +
                      lam(base.lambda_keep, base.lambda_ubi - 0.1, base.delta) ==
                  Catch::Approx(2.0 * lam(base.lambda_keep, base.lambda_ubi, base.delta))
                      .margin(1e-14));
            CHECK(lam(base.lambda_keep, base.lambda_ubi, base.delta + 0.3) +
                      lam(base.lambda_keep, base.lambda_ubi, base.delta - 0.3) ==
                  Catch::Approx(2.0 * lam(base.lambda_keep, base.lambda_ubi, base.delta))
                      .margin(1e-14));
        }
    }
}

TEST_CASE("aggregate preferences") {
    SECTION("figure benchmark values") {
        const auto agg = aggregate_preferences({{0.2, 1.0, -0.5, -0.5}, {0.2, 1.0, -0.5, -0.5}});
        CHECK(agg.alpha_sigma == Catch::Approx(0.1).margin(1e-15));
        CHECK(agg.rho_sigma == Catch::Approx(1.0).margin(1e-14));
    }
    SECTION("single agent is the identity") {
        const auto agg = aggregate_preferences({{1.7, 0.3, -0.5, -0.5}});
        CHECK(agg.alpha_sigma == Catch::Approx(1.7).margin(1e-15));
        CHECK(agg.rho_sigma == Catch::Approx(0.3).margin(1e-15));
    }
    SECTION("equal risk aversion scales by 1/I, rho averages") {
        const auto agg = aggregate_preferences(
            {{0.8, 0.1, -0.5, -0.5}, {0.8, 0.5, -0.5, -0.5}, {0.8, 0.9, -0.5, -0.5}});
        CHECK(agg.alpha_sigma == Catch::Approx(0.8 / 3.0).margin(1e-15));
        CHECK(agg.rho_sigma == Catch::Approx(0.5).margin(1e-14));
    }
    SECTION("alpha_sigma never exceeds the smallest alpha") {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> u(0.05, 5.0);
        for (int k = 0; k < 200; ++k) {
            std::vector<AgentPreferences> agents(1 + k % 6);
            double min_alpha = 1e300;
            for (auto& a : agents) {
                a = {u(rng), u(rng), -0.5, -0.5};
                min_alpha = std::min(min_alpha, a.alpha);
            }
            const auto agg = aggregate_preferences(agents);
            CHECK(agg.alpha_sigma <= min_alpha + 1e-15);
            if (agents.size() == 1) CHECK(agg.alpha_sigma == Catch::Approx(min_alpha));
            else CHECK(agg.alpha_sigma < min_alpha);
        }
    }
}

TEST_CASE("economy validation") {
    const EconomyModel good = testutil::constant_wage_model();

    SECTION("valid model accepted and unchanged") {
        const EconomyModel back = validate_economy(good);
        CHECK(back.agent_count() == good.agent_count());
        CHECK(back.horizon == good.horizon);
        // idempotent
        CHECK_NOTHROW(validate_economy(validate_economy(good)));
    }

    SECTION("policy bound violation") {
        try {
            validate_policy({0.7, 0.4, 0.0});
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            REQUIRE(e.issues.size() == 1);
            CHECK(e.issues[0].kind == Violation::InvalidPolicy);
        }
    }

    SECTION("preference sign violation") {
        EconomyModel bad = good;
        bad.agents[0].beta = 0.2;
        try {
            validate_economy(bad);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            REQUIRE(e.issues.size() == 1);
            CHECK(e.issues[0].kind == Violation::InvalidPreferences);
        }
    }

    SECTION("share imbalance") {
        EconomyModel bad = good;
        bad.initial_stock_shares = {0.5, 0.6};
        try {
            validate_economy(bad);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            REQUIRE(e.issues.size() == 1);
            CHECK(e.issues[0].kind == Violation::ShareImbalance);
        }
    }

    SECTION("length mismatch") {
        EconomyModel bad = good;
        bad.wages.pop_back();
        try {
            validate_economy(bad);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            REQUIRE(!e.issues.empty());
            CHECK(e.issues[0].kind == Violation::LengthMismatch);
        }
    }

    SECTION("all violations reported in one pass") {
        EconomyModel bad = good;
        bad.agents[0].beta = 0.2;
        bad.agents[1].alpha = -1.0;
        bad.initial_annuity_shares = {0.9, 0.3};
        bad.horizon = -2.0;
        try {
            validate_all(bad, {0.9, 0.4, 0.0});
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(e.issues.size() == 5);
        }
    }
}
