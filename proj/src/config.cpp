#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pdmp/cli.hpp"

namespace pdmp::cli
{
namespace
{
std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
    {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
        {
            out.push_back(item);
        }
    }
    return out;
}

struct Context
{
    std::string source;
    int line = 0;
    std::string key;

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ConfigError(fmt::format("{}:{}: {}", source, line, what));
    }
};

double to_double(const std::string& v, const Context& ctx)
{
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out))
    {
        ctx.fail(fmt::format("key '{}' expects a finite number, got '{}'", ctx.key, v));
    }
    return out;
}

std::uint64_t to_unsigned(const std::string& v, const Context& ctx)
{
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
    {
        ctx.fail(fmt::format("key '{}' expects a nonnegative integer, got '{}'", ctx.key, v));
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const Context&)>;

template<class T>
Setter set_number(T RunConfig::*field)
{
    return [field](RunConfig& c, const std::string& v, const Context& ctx) {
        if constexpr (std::is_floating_point_v<T>)
        {
            c.*field = to_double(v, ctx);
        }
        else
        {
            c.*field = static_cast<T>(to_unsigned(v, ctx));
        }
    };
}

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"experiment", [](RunConfig& c, const std::string& v, const Context&) { c.experiment = v; }},
        {"model", [](RunConfig& c, const std::string& v, const Context&) { c.model = v; }},
        {"lambda", set_number(&RunConfig::lambda)},
        {"delta", set_number(&RunConfig::delta)},
        {"rate_exponent", set_number(&RunConfig::rate_exponent)},
        {"kappa", set_number(&RunConfig::kappa)},
        {"increment_mean", set_number(&RunConfig::increment_mean)},
        {"seed", set_number(&RunConfig::seed)},
        {"outer_n", set_number(&RunConfig::outer_n)},
        {"inner_n", set_number(&RunConfig::inner_n)},
        {"chain_length", set_number(&RunConfig::chain_length)},
        {"burn_in", set_number(&RunConfig::burn_in)},
        {"thinning", set_number(&RunConfig::thinning)},
        {"chains", set_number(&RunConfig::chains)},
        {"coupling_n", set_number(&RunConfig::coupling_n)},
        {"start_a", set_number(&RunConfig::start_a)},
        {"start_b", set_number(&RunConfig::start_b)},
        {"bump", set_number(&RunConfig::bump)},
        {"p", set_number(&RunConfig::p)},
        {"max_relative_error", set_number(&RunConfig::max_relative_error)},
        {"workers", set_number(&RunConfig::workers)},
        {"out", [](RunConfig& c, const std::string& v, const Context&) { c.out = v; }},
        {"times",
         [](RunConfig& c, const std::string& v, const Context& ctx) {
             c.times.clear();
             for (const auto& item : split_list(v))
             {
                 c.times.push_back(to_double(item, ctx));
             }
         }},
        {"functions",
         [](RunConfig& c, const std::string& v, const Context&) { c.functions = split_list(v); }},
        {"family",
         [](RunConfig& c, const std::string& v, const Context&) { c.family = split_list(v); }},
    };
    return table;
}

const std::vector<std::string> known_experiments = {"simulate", "certify", "verify", "inequality"};
const std::vector<std::string> known_models = {"tcp_constant", "tcp_linear", "tcp_increasing",
                                               "storage"};
const std::vector<std::string> known_functions = {"x",      "x^2",      "exp(-x)",  "sin(x)",
                                                  "sin(3x)", "log(1+x)", "x*exp(-x)"};

bool one_of(const std::string& v, const std::vector<std::string>& set)
{
    return std::find(set.begin(), set.end(), v) != set.end();
}

// Invariant checks; report(key, message) raises with whatever location the caller knows.
void check(const RunConfig& c, const std::function<void(const std::string&, const std::string&)>& report)
{
    if (!one_of(c.experiment, known_experiments))
    {
        report("experiment", fmt::format("experiment must be one of {}, got '{}'",
                                         fmt::join(known_experiments, ", "), c.experiment));
    }
    if (!one_of(c.model, known_models))
    {
        report("model", fmt::format("model must be one of {}, got '{}'",
                                    fmt::join(known_models, ", "), c.model));
    }
    if (!(c.lambda > 0.0))
    {
        report("lambda", "lambda must be positive");
    }
    if (!(c.delta >= 0.0 && c.delta < 1.0))
    {
        report("delta", "delta must lie in [0,1)");
    }
    if (!(c.rate_exponent > 0.0 && c.rate_exponent <= 1.0))
    {
        report("rate_exponent", "rate_exponent must lie in (0,1]");
    }
    if (!(c.kappa >= 0.0))
    {
        report("kappa", "kappa must be nonnegative");
    }
    if (!(c.increment_mean > 0.0))
    {
        report("increment_mean", "increment_mean must be positive");
    }
    const std::pair<const char*, std::size_t> counts[] = {
        {"outer_n", c.outer_n},   {"chain_length", c.chain_length}, {"thinning", c.thinning},
        {"chains", c.chains},     {"coupling_n", c.coupling_n}};
    for (const auto& [key, value] : counts)
    {
        if (value == 0)
        {
            report(key, fmt::format("{} must be positive", key));
        }
    }
    if (c.inner_n < 2)
    {
        report("inner_n", "inner_n must be at least 2");
    }
    if (!(c.start_a >= 0.0) || !(c.start_b >= 0.0))
    {
        report(c.start_a >= 0.0 ? "start_b" : "start_a", "start points must be nonnegative");
    }
    if (!(c.bump > 0.0))
    {
        report("bump", "bump must be positive");
    }
    if (!(c.p == 0.0 || (c.p >= 1.0 && c.p <= 2.0)))
    {
        report("p", "p must be 0 (model default) or lie in [1,2]");
    }
    if (!(c.max_relative_error > 0.0))
    {
        report("max_relative_error", "max_relative_error must be positive");
    }
    if (c.times.empty())
    {
        report("times", "times must not be empty");
    }
    for (std::size_t i = 0; i < c.times.size(); ++i)
    {
        if (c.times[i] < 0.0 || (i > 0 && !(c.times[i] > c.times[i - 1])))
        {
            report("times", "times must be nonnegative and strictly increasing");
        }
    }
    if (c.functions.empty())
    {
        report("functions", "functions must not be empty");
    }
    for (const auto& f : c.functions)
    {
        if (!one_of(f, known_functions))
        {
            report("functions", fmt::format("unknown test function '{}' (known: {})", f,
                                            fmt::join(known_functions, ", ")));
        }
    }
    for (const auto& f : c.family)
    {
        if (!one_of(f, known_functions))
        {
            report("family", fmt::format("unknown test function '{}' (known: {})", f,
                                         fmt::join(known_functions, ", ")));
        }
    }
    if (c.out.empty())
    {
        report("out", "out must not be empty");
    }
}
}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& source)
{
    RunConfig config;
    std::map<std::string, int> seen;
    std::stringstream ss(text);
    std::string raw;
    Context ctx{source, 0, {}};
    while (std::getline(ss, raw))
    {
        ++ctx.line;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos)
        {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty())
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
        {
            ctx.fail(fmt::format("expected 'key = value', got '{}'", line));
        }
        ctx.key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(ctx.key);
        if (it == setters().end())
        {
            ctx.fail(fmt::format("unknown key '{}'", ctx.key));
        }
        if (auto [pos, fresh] = seen.emplace(ctx.key, ctx.line); !fresh)
        {
            ctx.fail(fmt::format("key '{}' already set on line {}", ctx.key, pos->second));
        }
        if (value.empty() && ctx.key != "family")
        {
            ctx.fail(fmt::format("key '{}' has no value", ctx.key));
        }
        it->second(config, value, ctx);
    }

    check(config, [&](const std::string& key, const std::string& message) {
        const auto it = seen.find(key);
        if (it != seen.end())
        {
            throw ConfigError(fmt::format("{}:{}: {}", source, it->second, message));
        }
        throw ConfigError(fmt::format("{}: {} (default value)", source, message));
    });
    return config;
}

RunConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.string());
}

void validate(const RunConfig& config)
{
    check(config, [](const std::string& key, const std::string& message) {
        throw ConfigError(fmt::format("{}: {}", key, message));
    });
}

std::string serialize(const RunConfig& c)
{
    auto num = [](double v) { return fmt::format("{:.17g}", v); };
    std::vector<std::string> times;
    for (double t : c.times)
    {
        times.push_back(num(t));
    }
    std::string s;
    s += fmt::format("experiment = {}\n", c.experiment);
    s += fmt::format("model = {}\n", c.model);
    s += fmt::format("lambda = {}\n", num(c.lambda));
    s += fmt::format("delta = {}\n", num(c.delta));
    s += fmt::format("rate_exponent = {}\n", num(c.rate_exponent));
    s += fmt::format("kappa = {}\n", num(c.kappa));
    s += fmt::format("increment_mean = {}\n", num(c.increment_mean));
    s += fmt::format("seed = {}\n", c.seed);
    s += fmt::format("outer_n = {}\n", c.outer_n);
    s += fmt::format("inner_n = {}\n", c.inner_n);
    s += fmt::format("chain_length = {}\n", c.chain_length);
    s += fmt::format("burn_in = {}\n", c.burn_in);
    s += fmt::format("thinning = {}\n", c.thinning);
    s += fmt::format("chains = {}\n", c.chains);
    s += fmt::format("coupling_n = {}\n", c.coupling_n);
    s += fmt::format("start_a = {}\n", num(c.start_a));
    s += fmt::format("start_b = {}\n", num(c.start_b));
    s += fmt::format("bump = {}\n", num(c.bump));
    s += fmt::format("p = {}\n", num(c.p));
    s += fmt::format("max_relative_error = {}\n", num(c.max_relative_error));
    s += fmt::format("times = {}\n", fmt::join(times, ", "));
    s += fmt::format("functions = {}\n", fmt::join(c.functions, ", "));
    s += fmt::format("family = {}\n", fmt::join(c.family, ", "));
    s += fmt::format("workers = {}\n", c.workers);
    s += fmt::format("out = {}\n", c.out);
    return s;
}

}  // namespace pdmp::cli
