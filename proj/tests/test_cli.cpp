#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "ubiq/cli.hpp"

using namespace ubiq;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    const std::string path = name;
    std::ofstream out(path);
    out << body;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* kEconomy = R"(horizon 1.0
dividend initial=1.0 drift=0.05 vol=0.2
agent alpha=2.0 rho=1.0 beta=-0.5 gamma=-0.5 wage_initial=1.0 wage_drift=0 wage_vol=0 stock0=0.5 annuity0=0.5
agent alpha=3.0 rho=1.0 beta=-0.5 gamma=-0.5 wage_initial=1.5 wage_drift=0 wage_vol=0 stock0=0.5 annuity0=0.5
policy keep=0.7 ubi=0.2 delta=0.5
)";

}  // namespace

TEST_CASE("cli commands produce deterministic artifacts") {
    const std::string econ = write_temp("cli_test_econ.econ", kEconomy);
    std::ostringstream log;

    SECTION("labor sweep") {
        RunConfig cfg;
        cfg.economy_path = econ;
        cfg.out_path = "cli_labor.csv";
        cfg.w_count = 5;
        cfg.deltas = {0.0, 0.5};
        REQUIRE(run_command("labor-sweep", cfg, log) == 0);
        const std::string body = slurp("cli_labor.csv");
        CHECK(body.find("w,delta,lambda,L_1,L_2,Lcal_1,Lcal_2,eps_sigma") != std::string::npos);
        CHECK(body.find("# command = labor-sweep") != std::string::npos);
    }

    SECTION("market sweep in json") {
        RunConfig cfg;
        cfg.economy_path = econ;
        cfg.out_path = "cli_market.json";
        cfg.format = "json";
        cfg.w_count = 4;
        REQUIRE(run_command("market-sweep", cfg, log) == 0);
        CHECK(slurp("cli_market.json").find("\"columns\"") != std::string::npos);
    }

    SECTION("simulate twice with one seed: byte-identical artifacts") {
        RunConfig cfg;
        cfg.economy_path = econ;
        cfg.seed = 4242;
        cfg.paths = 4;
        cfg.steps = 50;
        cfg.nt = 256;
        cfg.out_path = "cli_sim_a.csv";
        REQUIRE(run_command("simulate", cfg, log) == 0);
        cfg.out_path = "cli_sim_b.csv";
        REQUIRE(run_command("simulate", cfg, log) == 0);
        const std::string a = slurp("cli_sim_a.csv");
        CHECK(!a.empty());
        CHECK(a == slurp("cli_sim_b.csv"));
    }

    SECTION("solve exports the field table") {
        RunConfig cfg;
        cfg.economy_path = econ;
        cfg.nt = 64;
        cfg.out_path = "cli_solve.csv";
        REQUIRE(run_command("solve", cfg, log) == 0);
        CHECK(slurp("cli_solve.csv").find("t,x,a,Z_a,Ybar_1,Ybar_2,Zbar_1,Zbar_2") !=
              std::string::npos);
    }

    SECTION("welfare and policy-compare") {
        RunConfig cfg;
        cfg.economy_path = econ;
        cfg.nt = 512;
        cfg.out_path = "cli_welfare.csv";
        REQUIRE(run_command("welfare", cfg, log) == 0);
        CHECK(slurp("cli_welfare.csv").find("agent,alpha,rho,L,CE,aggregate_CE") !=
              std::string::npos);
        cfg.out_path = "cli_compare.csv";
        cfg.deltas = {-0.5, 0.5};
        REQUIRE(run_command("policy-compare", cfg, log) == 0);
        CHECK(slurp("cli_compare.csv").find("communism") != std::string::npos);
    }
}

TEST_CASE("cli error taxonomy") {
    std::ostringstream log;

    SECTION("unknown command and missing economy are config errors") {
        RunConfig cfg;
        CHECK_THROWS_AS(run_command("dance", cfg, log), ConfigError);
        CHECK_THROWS_AS(run_command("labor-sweep", cfg, log), ConfigError);
    }

    SECTION("stochastic commands demand a seed") {
        const std::string econ = write_temp("cli_test_econ2.econ", kEconomy);
        RunConfig cfg;
        cfg.economy_path = econ;
        CHECK_THROWS_AS(run_command("simulate", cfg, log), SeedRequired);
        CHECK_THROWS_AS(run_command("verify", cfg, log), SeedRequired);
    }

    SECTION("invalid economies are validation errors") {
        const std::string bad = write_temp(
            "cli_test_bad.econ",
            "horizon 1.0\n"
            "dividend initial=1 drift=0 vol=0.2\n"
            "agent alpha=-2 rho=1 beta=-0.5 gamma=-0.5 wage_initial=1 wage_drift=0 "
            "wage_vol=0 stock0=1 annuity0=1\n"
            "policy keep=0.7 ubi=0.2 delta=0\n");
        RunConfig cfg;
        cfg.economy_path = bad;
        CHECK_THROWS_AS(run_command("labor-sweep", cfg, log), ValidationError);
    }

    SECTION("missing policy is a config error") {
        const std::string nopol = write_temp("cli_test_nopol.econ",
                                             "horizon 1.0\n"
                                             "dividend initial=1 drift=0 vol=0.2\n"
                                             "agent alpha=2 rho=1 beta=-0.5 gamma=-0.5 "
                                             "wage_initial=1 wage_drift=0 wage_vol=0 "
                                             "stock0=1 annuity0=1\n");
        RunConfig cfg;
        cfg.economy_path = nopol;
        CHECK_THROWS_AS(run_command("labor-sweep", cfg, log), ConfigError);
    }
}
