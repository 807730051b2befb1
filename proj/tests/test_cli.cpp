#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pdmp/cli.hpp"

using namespace pdmp::cli;
namespace fs = std::filesystem;

namespace
{
std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small(const std::string& experiment, const std::string& model, const std::string& out)
{
    RunConfig c;
    c.experiment = experiment;
    c.model = model;
    c.seed = 42;
    c.chain_length = 5000;
    c.outer_n = 200;
    c.inner_n = 50;
    c.coupling_n = 2000;
    c.out = (fs::path("cli_runs") / out).string();
    return c;
}

// Exit status 0 exactly when every assertion line passes.
void check_status(const RunResult& r)
{
    bool all_pass = true;
    for (const auto& a : r.assertions)
    {
        all_pass = all_pass && a.rfind("PASS", 0) == 0;
    }
    CHECK((r.exit_status == 0) == all_pass);
}
}  // namespace

TEST_CASE("config parsing")
{
    const auto c = parse_config_text("model = tcp_constant\nlambda = 1\ndelta = 0.5\nseed = 42\n");
    RunConfig expected;
    expected.seed = 42;
    CHECK(c == expected);
    CHECK(c.outer_n == 1000);
    CHECK(c.times.size() == 6);

    const auto lists = parse_config_text(
        "# comment\ntimes = 0, 0.5, 2   # trailing\nfunctions = x, sin(x)\nfamily =\n");
    CHECK(lists.times == std::vector<double>{0.0, 0.5, 2.0});
    CHECK(lists.functions == std::vector<std::string>{"x", "sin(x)"});
    CHECK(lists.family.empty());

    CHECK_THROWS_WITH_AS(parse_config_text("model = tcp_constant\ndelta = 1.2\n", "run.ini"),
                         "run.ini:2: delta must lie in [0,1)", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("lamda = 1\n", "a"), "a:1: unknown key 'lamda'", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("seed = 1\nseed = 2\n", "a"),
                         "a:2: key 'seed' already set on line 1", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("outer_n = 1.5\n", "a"), doctest::Contains("a:1:"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("lambda = fast\n", "a"), doctest::Contains("finite number"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("\n\ntimes = 1, 0\n", "a"), doctest::Contains("a:3:"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("outer_n = 0\n", "a"), doctest::Contains("outer_n must be positive"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("model\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("functions = cos(x)\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("serialize round-trips")
{
    RunConfig c;
    c.model = "tcp_linear";
    c.delta = 0.1 + 0.2;
    c.lambda = 1.0 / 3.0;
    c.times = {0.0, 0.1, 1.0 / 7.0};
    c.functions = {"x", "x*exp(-x)"};
    c.family = {"sin(3x)", "log(1+x)"};
    c.seed = 18446744073709551615ull;
    const auto back = parse_config_text(serialize(c));
    CHECK(back == c);
    CHECK(serialize(back) == serialize(c));
}

TEST_CASE("certify writes the ledger")
{
    const auto r = run_experiment(small("certify", "tcp_constant", "certify"));
    CHECK(r.exit_status == 0);
    const auto ledger = slurp(r.directory / "ledger.csv");
    CHECK(ledger.rfind("quantity,value,provenance\n", 0) == 0);
    CHECK(ledger.find("\npoincare_c,5.333333333333333") != std::string::npos);
    for (const char* f : {"series.csv", "measure.csv", "ledger.csv", "report.txt"})
    {
        CHECK(fs::exists(r.directory / f));
    }
    check_status(r);
}

TEST_CASE("verify on the storage model")
{
    auto c = small("verify", "storage", "storage");
    const auto r = run_experiment(c);
    CHECK(r.exit_status == 0);
    const auto ledger = slurp(r.directory / "ledger.csv");
    const auto pos = ledger.find("W_x.rate,");
    REQUIRE(pos != std::string::npos);
    const double rate = std::stod(ledger.substr(pos + 9));
    CHECK(std::abs(rate - 2.0) <= 1e-3);
    CHECK(slurp(r.directory / "report.txt").find("{\"rate\": ") != std::string::npos);
    check_status(r);
}

TEST_CASE("all experiments run on every model")
{
    for (const char* model : {"tcp_constant", "tcp_linear", "tcp_increasing", "storage"})
    {
        for (const char* experiment : {"simulate", "certify", "verify", "inequality"})
        {
            auto c = small(experiment, model, std::string("grid_") + model);
            c.times = {0, 1, 2};
            const auto r = run_experiment(c);
            CAPTURE(model);
            CAPTURE(experiment);
            CHECK(r.exit_status != 2);
            check_status(r);
        }
    }
}

TEST_CASE("seed replay and worker invariance")
{
    auto base = small("simulate", "tcp_linear", "replay_a");
    base.chains = 3;
    base.workers = 1;
    auto again = base;
    again.out = (fs::path("cli_runs") / "replay_b").string();
    auto threaded = base;
    threaded.out = (fs::path("cli_runs") / "replay_c").string();
    threaded.workers = 4;
    const auto a = run_experiment(base);
    const auto b = run_experiment(again);
    const auto t = run_experiment(threaded);
    for (const char* f : {"series.csv", "measure.csv", "ledger.csv"})
    {
        const auto ref = slurp(a.directory / f);
        CHECK(!ref.empty());
        CHECK(ref == slurp(b.directory / f));
        CHECK(ref == slurp(t.directory / f));
    }

    auto v1 = small("verify", "tcp_constant", "verify_w1");
    v1.workers = 1;
    v1.times = {0, 1, 2};
    auto v4 = v1;
    v4.workers = 4;
    v4.out = (fs::path("cli_runs") / "verify_w4").string();
    const auto r1 = run_experiment(v1);
    const auto r4 = run_experiment(v4);
    CHECK(slurp(r1.directory / "series.csv") == slurp(r4.directory / "series.csv"));
    CHECK(slurp(r1.directory / "ledger.csv") == slurp(r4.directory / "ledger.csv"));
}

TEST_CASE("errors inside an experiment become a failing assertion")
{
    auto c = small("verify", "tcp_constant", "broken");
    c.times = {0.0, 1.0};  // too few points for a rate fit
    const auto r = run_experiment(c);
    CHECK(r.exit_status == 2);
    REQUIRE(!r.assertions.empty());
    CHECK(r.assertions.back().rfind("FAIL Wasserstein decay:", 0) == 0);
    RunConfig bad;
    bad.delta = 2.0;
    CHECK_THROWS_AS(run_experiment(bad), ConfigError);
}
