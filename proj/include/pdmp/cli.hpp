#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdmp/errors.hpp"

namespace pdmp::cli
{

// Invalid configuration file; the message names the key and line.
class ConfigError : public Error
{
  public:
    using Error::Error;
};

/*!
 * Flat experiment configuration.
 *
 * Keys mirror the field names. Lists (times, functions, family) are comma
 * separated. See README for defaults.
 */
struct RunConfig
{
    std::string experiment = "simulate";  // simulate | certify | verify | inequality
    std::string model = "tcp_constant";   // tcp_constant | tcp_linear | tcp_increasing | storage

    double lambda = 1.0;
    double delta = 0.5;
    double rate_exponent = 1.0;  // tcp_increasing: rate lambda (1 + x)^q
    double kappa = 0.0;          // tcp_increasing: 0 means use rate_exponent
    double increment_mean = 1.0; // storage: exponential jump sizes

    std::uint64_t seed = 1;
    std::size_t outer_n = 1000;
    std::size_t inner_n = 200;
    std::size_t chain_length = 100'000;
    std::size_t burn_in = 1000;
    std::size_t thinning = 1;
    std::size_t chains = 1;
    std::size_t coupling_n = 100'000;

    double start_a = 0.0;
    double start_b = 2.0;
    double bump = 1e-4;
    double p = 0.0;  // 0 selects 1 for tcp_linear and 2 otherwise
    double max_relative_error = 0.25;

    std::vector<double> times = {0, 1, 2, 3, 4, 5};
    std::vector<std::string> functions = {"x"};
    std::vector<std::string> family;  // empty: the default family

    unsigned workers = 0;
    std::string out = "out";

    bool operator==(const RunConfig&) const = default;
};

// Parse from text; source names the file in error messages.
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
RunConfig parse_config(const std::filesystem::path& path);

// Every field, one `key = value` per line, 17 significant digits.
std::string serialize(const RunConfig& config);

// Throws ConfigError for invariant violations (line-free form).
void validate(const RunConfig& config);

struct RunResult
{
    int exit_status = 0;
    std::filesystem::path directory;
    std::vector<std::string> assertions;  // "PASS ..." / "FAIL ..."
};

/*!
 * Run the configured experiment and write
 * <out>/<experiment>/{series.csv, measure.csv, ledger.csv, report.txt}.
 *
 * exit_status is 0 iff every assertion passed. Library errors are caught,
 * reported as a failing assertion and give status 2.
 */
RunResult run_experiment(const RunConfig& config);

}  // namespace pdmp::cli
