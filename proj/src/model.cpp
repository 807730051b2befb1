#include "pdmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/quadrature.hpp"

namespace pdmp
{
namespace
{
void require_in_domain(const Model& model, double x, const char* what)
{
    if (!model.contains(x))
    {
        throw DomainError(fmt::format("{} {} lies outside the domain [{}, {}] of model '{}'",
                                      what, x, model.domain_low, model.domain_high,
                                      model.name));
    }
}

template<class Sink>
double advance(const Model& model, double x, double t_end, RandomStream& marks,
               RandomStream& kicks, const SimulationOptions& options, Sink&& on_event)
{
    double now = 0.0;
    std::size_t count = 0;
    for (;;)
    {
        const double wait = sample_jump_time(model, x, marks);
        if (!(now + wait <= t_end))
        {
            return model.flow(x, t_end - now);
        }
        now += wait;
        const double pre = model.flow(x, wait);
        const double post = model.jump(pre, kicks);
        if (!model.contains(post))
        {
            throw DomainError(fmt::format("jump from {} landed at {} outside the domain of '{}'",
                                          pre, post, model.name));
        }
        on_event(now, pre, post);
        x = post;
        if (++count > options.max_events)
        {
            throw ExplosionError(fmt::format(
                "model '{}' exceeded {} jumps before time {} (started within [0, {}])",
                model.name, options.max_events, now, t_end));
        }
    }
}
}  // namespace

FlowFn inverse_cum_rate_by_search(FlowFn cum_rate, FlowFn intensity)
{
    return [cum_rate = std::move(cum_rate), intensity = std::move(intensity)](double x,
                                                                              double level) {
        quadrature::Integrand derivative;
        if (intensity)
        {
            derivative = [&](double t) { return intensity(x, t); };
        }
        return quadrature::invert_nondecreasing([&](double t) { return cum_rate(x, t); },
                                                level, 1.0, 1e-12, 1e15, derivative);
    };
}

Estimate mean_and_error(const std::vector<double>& samples)
{
    const std::size_t n = samples.size();
    if (n == 0)
    {
        throw EstimationError("mean of an empty sample");
    }
    double sum = 0.0;
    for (double v : samples)
    {
        sum += v;
    }
    const double mean = sum / static_cast<double>(n);
    if (n < 2)
    {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : samples)
    {
        ss += (v - mean) * (v - mean);
    }
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

double sample_jump_time(const Model& model, double x, RandomStream& rng)
{
    const double mark = rng.exponential();
    const double wait = model.inv_cum_rate(x, mark);
    if (std::isnan(wait) || wait < 0.0)
    {
        throw UnboundedSearchError(fmt::format(
            "model '{}': cumulative rate inverse at x={} level={} returned {}", model.name, x,
            mark, wait));
    }
    // +inf is a legitimate answer for a clock that never rings (rate identically zero).
    return wait;
}

Trajectory simulate_path(const Model& model, double x0, double t_end, RandomStream& rng,
                         const SimulationOptions& options)
{
    require_in_domain(model, x0, "initial state");
    if (!(t_end >= 0.0))
    {
        throw DomainError(fmt::format("t_end = {} must be nonnegative", t_end));
    }
    RandomStream marks = rng.substream(0);
    RandomStream kicks = rng.substream(1);
    Trajectory path;
    path.initial_state = x0;
    path.end_time = t_end;
    path.end_state = advance(model, x0, t_end, marks, kicks, options,
                             [&](double time, double pre, double post) {
                                 path.events.push_back({time, pre, post});
                             });
    return path;
}

double simulate_endpoint(const Model& model, double x0, double t_end, RandomStream& rng,
                         const SimulationOptions& options)
{
    require_in_domain(model, x0, "initial state");
    if (!(t_end >= 0.0))
    {
        throw DomainError(fmt::format("t_end = {} must be nonnegative", t_end));
    }
    RandomStream marks = rng.substream(0);
    RandomStream kicks = rng.substream(1);
    return advance(model, x0, t_end, marks, kicks, options, [](double, double, double) {});
}

Estimate semigroup_estimate(const Model& model, const ScalarFn& f, double x, double t,
                            std::size_t n, const RandomStream& rng, unsigned workers)
{
    if (n < 2)
    {
        throw DomainError("semigroup_estimate needs at least 2 replications");
    }
    require_in_domain(model, x, "start state");
    if (t == 0.0)
    {
        return {f(x), 0.0};
    }
    std::vector<double> values(n);
    parallel_for(n, workers, [&](std::size_t k) {
        RandomStream stream = rng.substream(k);
        values[k] = f(simulate_endpoint(model, x, t, stream));
    });
    return mean_and_error(values);
}

double default_bump(double x)
{
    return 1e-4 * std::max(1.0, std::abs(x));
}

Estimate gradient_semigroup_estimate(const Model& model, const ScalarFn& f, double x, double t,
                                     double h, std::size_t n, const RandomStream& rng,
                                     unsigned workers)
{
    if (!(h > 0.0))
    {
        throw DomainError(fmt::format("bump h = {} must be positive", h));
    }
    if (!model.contains(x - h) || !model.contains(x + h))
    {
        throw DomainError(fmt::format("central difference at {} with bump {} leaves the domain",
                                      x, h));
    }
    if (n < 2)
    {
        throw DomainError("gradient_semigroup_estimate needs at least 2 replications");
    }
    if (t == 0.0)
    {
        return {(f(x + h) - f(x - h)) / (2.0 * h), 0.0};
    }
    std::vector<double> diffs(n);
    parallel_for(n, workers, [&](std::size_t k) {
        RandomStream up = rng.substream(k);
        RandomStream down = up;
        const double hi = f(simulate_endpoint(model, x + h, t, up));
        const double lo = f(simulate_endpoint(model, x - h, t, down));
        diffs[k] = (hi - lo) / (2.0 * h);
    });
    return mean_and_error(diffs);
}

}  // namespace pdmp
