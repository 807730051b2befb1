#include <cstdlib>
#include <optional>
#include <CLI11.hpp>
#include <fmt/format.h>

#include "pdmp/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Simulation and certified decay rates for piecewise deterministic Markov processes"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;

    for (const char* name : {"simulate", "certify", "verify", "inequality"})
    {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--workers", workers, "worker threads, 0 for hardware concurrency");
        sub->add_option("--out", out, "output root directory");
    }
    CLI11_PARSE(app, argc, argv);

    try
    {
        auto config = pdmp::cli::parse_config(config_path);
        config.experiment = app.get_subcommands().front()->get_name();
        if (seed)
        {
            config.seed = *seed;
        }
        if (const char* env = std::getenv("PDMP_ERGO_WORKERS"); env && !workers)
        {
            workers = static_cast<unsigned>(std::stoul(env));
        }
        if (workers)
        {
            config.workers = *workers;
        }
        if (out)
        {
            config.out = *out;
        }
        const auto result = pdmp::cli::run_experiment(config);
        for (const auto& line : result.assertions)
        {
            fmt::print("{}\n", line);
        }
        fmt::print("report: {}\n", (result.directory / "report.txt").string());
        return result.exit_status;
    }
    catch (const pdmp::cli::ConfigError& e)
    {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 3;
    }
    catch (const pdmp::Error& e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
}
