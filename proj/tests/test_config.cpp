#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include <json.hpp>

#include "ubiq/config.hpp"
#include "ubiq/table.hpp"

using namespace ubiq;

namespace {

const char* kEconomyText = R"(# sample economy
horizon 2.0
dividend initial=1.0 drift=0.1 vol=0.5

agent alpha=0.2 rho=1.0 beta=-0.2 gamma=-0.3 wage_initial=1.0 wage_drift=0.1 wage_vol=0.1 stock0=0.6 annuity0=0.4
agent alpha=0.4 rho=0.5 beta=-0.4 gamma=-0.3 wage_initial=2.0 wage_drift=0.2 wage_vol=-0.05 stock0=0.4 annuity0=0.6
policy keep=0.7 ubi=0.2 delta=0.5
)";

}  // namespace

TEST_CASE("economy config parsing") {
    SECTION("full file round trip") {
        const EconomyFile file = parse_economy_text(kEconomyText);
        CHECK(file.model.horizon == 2.0);
        CHECK(file.model.agent_count() == 2);
        CHECK(file.model.agents[1].alpha == 0.4);
        CHECK(file.model.wages[1].vol == -0.05);
        CHECK(file.model.dividend.drift == 0.1);
        CHECK(file.model.initial_stock_shares == std::vector<double>{0.6, 0.4});
        REQUIRE(file.policy.has_value());
        CHECK(file.policy->lambda_keep == 0.7);
        CHECK(file.policy->delta == 0.5);
        CHECK_NOTHROW(validate_all(file.model, *file.policy));
    }

    SECTION("missing required lines") {
        CHECK_THROWS_AS(parse_economy_text("dividend initial=1 drift=0 vol=0\n"
                                           "agent alpha=1 rho=0 beta=-1 gamma=-1 "
                                           "wage_initial=1 wage_drift=0 wage_vol=0 "
                                           "stock0=1 annuity0=1\n"),
                        ConfigError);
        CHECK_THROWS_AS(parse_economy_text("horizon 1\n"), ConfigError);
    }

    SECTION("unknown directives and fields are rejected with the line number") {
        try {
            parse_economy_text("horizon 1\nwidget a=1\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
        CHECK_THROWS_AS(
            parse_economy_text("horizon 1\ndividend initial=1 drift=0 vol=0 extra=3\n"),
            ConfigError);
    }

    SECTION("malformed numbers are rejected") {
        CHECK_THROWS_AS(parse_economy_text("horizon banana\n"), ConfigError);
        CHECK_THROWS_AS(
            parse_economy_text("horizon 1\ndividend initial=x drift=0 vol=0\n"),
            ConfigError);
    }
}

TEST_CASE("policy specs") {
    SECTION("inline with commas or spaces") {
        const UbiPolicy a = parse_policy_spec("keep=0.7,ubi=0.2,delta=-0.5");
        CHECK(a.lambda_keep == 0.7);
        CHECK(a.lambda_ubi == 0.2);
        CHECK(a.delta == -0.5);
        const UbiPolicy b = parse_policy_spec("keep=0 ubi=1 delta=0");
        CHECK(b.lambda_ubi == 1.0);
    }

    SECTION("missing fields in inline specs") {
        CHECK_THROWS_AS(parse_policy_spec("keep=0.7,ubi=0.2"), ConfigError);
        CHECK_THROWS_AS(parse_policy_spec("keep=0.7,ubi=0.2,delta=0,bogus=1"), ConfigError);
    }
}

TEST_CASE("table output") {
    Table t;
    t.add_meta("command", "demo");
    t.add_meta("seed", 42.0);
    t.columns = {"x", "y"};
    t.rows = {{1.0, 0.1}, {2.0, 0.2}};

    SECTION("csv embeds metadata as comment lines") {
        std::ostringstream out;
        write_csv(t, out);
        const std::string text = out.str();
        CHECK(text.find("# command = demo") != std::string::npos);
        CHECK(text.find("# seed = 42") != std::string::npos);
        CHECK(text.find("x,y\n") != std::string::npos);
        // deterministic: repeated writes are byte-identical
        std::ostringstream again;
        write_csv(t, again);
        CHECK(text == again.str());
    }

    SECTION("json is well formed and ordered") {
        std::ostringstream out;
        write_json(t, out);
        const auto j = nlohmann::json::parse(out.str());
        CHECK(j["meta"]["command"] == "demo");
        CHECK(j["columns"].size() == 2);
        CHECK(j["rows"][1][0] == 2.0);
    }

    SECTION("unknown format is rejected") {
        CHECK_THROWS_AS(parse_format("xml"), ConfigError);
    }
}
