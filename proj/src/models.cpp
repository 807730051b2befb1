#include "pdmp/models.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/quadrature.hpp"

namespace pdmp::models
{
namespace
{
void require_delta(double delta)
{
    if (!(delta >= 0.0 && delta < 1.0))
    {
        throw DomainError(fmt::format("delta must lie in [0,1), got {}", delta));
    }
}

void require_positive(double value, const char* name)
{
    if (!(value > 0.0) || !std::isfinite(value))
    {
        throw DomainError(fmt::format("{} must be positive and finite, got {}", name, value));
    }
}

// Stable form of sqrt(x^2 + 2u) - x.
double linear_inverse(double x, double u)
{
    if (u == 0.0)
    {
        return 0.0;
    }
    return 2.0 * u / (std::sqrt(x * x + 2.0 * u) + x);
}

double linear_cum(double x, double t)
{
    return t * (x + 0.5 * t);
}

double factorial(int n)
{
    double r = 1.0;
    for (int i = 2; i <= n; ++i)
    {
        r *= i;
    }
    return r;
}
}  // namespace

//---------------------------------------------------------------------------//
// JumpFactor
//---------------------------------------------------------------------------//

JumpFactor JumpFactor::deterministic(double delta)
{
    require_delta(delta);
    JumpFactor r;
    r.deterministic_ = delta;
    r.sampler_ = [delta](RandomStream&) { return delta; };
    r.moment_ = [delta](int k) { return std::pow(delta, k); };
    return r;
}

JumpFactor JumpFactor::sampled(std::function<double(RandomStream&)> sampler,
                               std::function<double(int)> moment)
{
    if (!sampler || !moment)
    {
        throw DomainError("a random jump factor needs both a sampler and its moments");
    }
    JumpFactor r;
    r.sampler_ = std::move(sampler);
    r.moment_ = std::move(moment);
    return r;
}

JumpFactor JumpFactor::uniform(double lo, double hi)
{
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
    {
        throw DomainError(fmt::format("uniform jump factor needs 0 <= lo < hi <= 1, got [{}, {})",
                                      lo, hi));
    }
    return sampled([lo, hi](RandomStream& rng) { return lo + (hi - lo) * rng.uniform(); },
                   [lo, hi](int k) {
                       return (std::pow(hi, k + 1) - std::pow(lo, k + 1))
                              / ((k + 1) * (hi - lo));
                   });
}

double JumpFactor::delta() const
{
    if (!deterministic_)
    {
        throw DomainError("jump factor is random; a deterministic delta is required here");
    }
    return *deterministic_;
}

double JumpFactor::sample(RandomStream& rng) const
{
    return sampler_(rng);
}

double JumpFactor::moment(int k) const
{
    return moment_(k);
}

StorageParams StorageParams::exponential_increments(double lambda, double mean)
{
    require_positive(mean, "increment mean");
    StorageParams p;
    p.lambda = lambda;
    p.increment = [mean](RandomStream& rng) { return mean * rng.exponential(); };
    p.increment_mean = mean;
    return p;
}

//---------------------------------------------------------------------------//
// Model factories
//---------------------------------------------------------------------------//

Model make_tcp_constant(const TcpConstantParams& params)
{
    const double lambda = params.lambda;
    require_positive(lambda, "lambda");
    const JumpFactor factor = params.jump_factor;
    const double m2 = factor.moment(2);
    if (!(m2 < 1.0))
    {
        throw DomainError(fmt::format("E[R^2] = {} must be below 1", m2));
    }

    Model m;
    m.name = "tcp_constant";
    m.drift = [](double) { return 1.0; };
    m.flow = [](double x, double t) { return x + t; };
    m.rate = [lambda](double) { return lambda; };
    m.cum_rate = [lambda](double, double t) { return lambda * t; };
    m.inv_cum_rate = [lambda](double, double u) { return u / lambda; };
    m.jump = [factor](double x, RandomStream& rng) { return factor.sample(rng) * x; };
    m.jump_gradient_bound = [m2](double) { return m2; };
    m.mean_holding = [lambda](double) { return 1.0 / lambda; };
    m.size_biased_time = [lambda](double, RandomStream& rng) {
        return rng.exponential() / lambda;
    };
    return m;
}

Model make_tcp_linear(const TcpLinearParams& params)
{
    const double delta = params.delta;
    require_delta(delta);

    Model m;
    m.name = "tcp_linear";
    m.drift = [](double) { return 1.0; };
    m.flow = [](double x, double t) { return x + t; };
    m.rate = [](double x) { return x; };
    m.cum_rate = linear_cum;
    m.inv_cum_rate = linear_inverse;
    m.jump = [delta](double x, RandomStream&) { return delta * x; };
    m.jump_gradient_bound = [delta](double) { return delta; };
    m.weight = tcp_linear_weight;
    m.mean_holding = mills_ratio;
    m.size_biased_time = [](double x, RandomStream& rng) {
        return sample_normal_tail_excess(x, rng);
    };
    return m;
}

Model make_tcp_increasing(const TcpIncreasingParams& params)
{
    if (!params.rate)
    {
        throw DomainError("increasing-rate model needs a rate function");
    }
    require_delta(params.delta);
    if (!(params.kappa >= 0.0) || !std::isfinite(params.kappa))
    {
        throw DomainError(fmt::format("kappa must be finite and nonnegative, got {}",
                                      params.kappa));
    }
    require_positive(params.rate(0.0), "rate(0)");
    require_positive(params.check_grid_high, "check_grid_high");

    const ScalarFn rate = params.rate;
    const ScalarFn slope = params.rate_derivative;

    // Monotonicity and the log-Lipschitz bound, sampled on a uniform grid.
    constexpr int points = 2000;
    double previous = rate(0.0);
    for (int i = 0; i <= points; ++i)
    {
        const double x = params.check_grid_high * i / points;
        const double r = rate(x);
        if (!(r > 0.0) || !std::isfinite(r))
        {
            throw DomainError(fmt::format("rate({}) = {} is not positive and finite", x, r));
        }
        if (r < previous * (1.0 - 1e-12))
        {
            throw DomainError(fmt::format("rate decreases near x = {} ({} < {})", x, r,
                                          previous));
        }
        previous = r;

        double dr;
        double slack = 1e-9;
        if (slope)
        {
            dr = slope(x);
        }
        else
        {
            const double h = 1e-6 * std::max(1.0, x);
            const double lo = std::max(0.0, x - h);
            dr = (rate(x + h) - rate(lo)) / (x + h - lo);
            slack = 1e-5;
        }
        const double log_slope = std::abs(dr) / r;
        if (log_slope > params.kappa * (1.0 + slack) + slack)
        {
            throw DomainError(fmt::format(
                "|(ln rate)'({})| = {} exceeds kappa = {}", x, log_slope, params.kappa));
        }
    }

    FlowFn cum = params.cum_rate;
    if (!cum)
    {
        cum = [rate](double x, double t) {
            return quadrature::integrate([&](double s) { return rate(x + s); }, 0.0, t, 1e-13);
        };
    }
    FlowFn inv = params.inv_cum_rate;
    if (!inv)
    {
        inv = inverse_cum_rate_by_search(cum, [rate](double x, double t) { return rate(x + t); });
    }

    const double delta = params.delta;
    Model m;
    m.name = "tcp_increasing";
    m.drift = [](double) { return 1.0; };
    m.flow = [](double x, double t) { return x + t; };
    m.rate = rate;
    m.cum_rate = std::move(cum);
    m.inv_cum_rate = std::move(inv);
    m.jump = [delta](double x, RandomStream&) { return delta * x; };
    m.jump_gradient_bound = [delta](double) { return delta * delta; };
    // The rate is nondecreasing along the flow, so exp(-cum_rate) <= exp(-rate(x) t)
    // and an Exp(rate(x)) proposal accepts with probability rate(x) h(x).
    m.size_biased_time = [rate, cum = m.cum_rate](double x, RandomStream& rng) {
        const double r = rate(x);
        for (int tries = 0; tries < 1'000'000; ++tries)
        {
            const double t = rng.exponential() / r;
            if (rng.uniform() < std::exp(r * t - cum(x, t)))
            {
                return t;
            }
        }
        throw UnboundedSearchError(
            fmt::format("size-biased time rejection did not accept from x = {}", x));
    };
    return m;
}

Model make_storage(const StorageParams& params)
{
    const double lambda = params.lambda;
    require_positive(lambda, "lambda");
    if (!params.increment)
    {
        throw DomainError("storage model needs an increment sampler");
    }
    require_positive(params.increment_mean, "increment mean");
    const auto increment = params.increment;

    Model m;
    m.name = "storage";
    m.drift = [](double x) { return -x; };
    m.flow = [](double x, double t) { return x * std::exp(-t); };
    m.rate = [lambda](double) { return lambda; };
    m.cum_rate = [lambda](double, double t) { return lambda * t; };
    m.inv_cum_rate = [lambda](double, double u) { return u / lambda; };
    m.jump = [increment](double x, RandomStream& rng) {
        const double u = increment(rng);
        if (!(u > 0.0))
        {
            throw DomainError(fmt::format("storage increment {} is not positive", u));
        }
        return x + u;
    };
    m.jump_gradient_bound = [](double) { return 1.0; };
    m.mean_holding = [lambda](double) { return 1.0 / lambda; };
    m.size_biased_time = [lambda](double, RandomStream& rng) {
        return rng.exponential() / lambda;
    };
    return m;
}

Model make_twisted_tcp_linear(double delta)
{
    require_delta(delta);

    Model m;
    m.name = "tcp_linear_twisted";
    m.drift = [](double z) { return 1.0 / std::sqrt(tcp_linear_weight(twist_inverse(z))); };
    m.flow = [](double z, double t) { return twist(twist_inverse(z) + t); };
    m.rate = twist_inverse;
    m.cum_rate = [](double z, double t) { return linear_cum(twist_inverse(z), t); };
    m.inv_cum_rate = [](double z, double u) { return linear_inverse(twist_inverse(z), u); };
    m.jump = [delta](double z, RandomStream&) { return twist(delta * twist_inverse(z)); };
    m.jump_gradient_bound = [delta](double) { return delta; };
    m.mean_holding = [](double z) { return mills_ratio(twist_inverse(z)); };
    m.size_biased_time = [](double z, RandomStream& rng) {
        return sample_normal_tail_excess(twist_inverse(z), rng);
    };
    return m;
}

double lambda_star(const TcpIncreasingParams& params)
{
    if (!params.rate)
    {
        throw DomainError("increasing-rate model needs a rate function");
    }
    return params.rate(0.0);
}

//---------------------------------------------------------------------------//
// Closed forms
//---------------------------------------------------------------------------//

double tcp_linear_weight(double x)
{
    return -std::expm1(-x);
}

double tcp_linear_weight_derivative(double x)
{
    return std::exp(-x);
}

double twist(double x)
{
    if (x < 0.0)
    {
        throw DomainError(fmt::format("twist is defined on [0, inf), got {}", x));
    }
    return x + 2.0 * std::log1p(std::sqrt(-std::expm1(-x)));
}

double twist_inverse(double z)
{
    if (z < 0.0)
    {
        throw DomainError(fmt::format("twist_inverse is defined on [0, inf), got {}", z));
    }
    if (z < 20.0)
    {
        const double s = std::sinh(0.25 * z);
        return 2.0 * std::log1p(2.0 * s * s);
    }
    return z - 2.0 * std::numbers::ln2 + 2.0 * std::log1p(std::exp(-z));
}

double normal_tail_acceptance(double x)
{
    if (x < 0.0)
    {
        throw DomainError(fmt::format("normal tail threshold must be nonnegative, got {}", x));
    }
    // P(|N| > x) for the half-normal proposal.
    if (x < 0.5)
    {
        return std::erfc(x / std::numbers::sqrt2);
    }
    // alpha exp(alpha x - alpha^2 / 2) sqrt(2 pi) Phi_bar(x), with Phi_bar / phi = mills_ratio.
    const double alpha = 0.5 * (x + std::sqrt(x * x + 4.0));
    return alpha * std::exp(alpha * x - 0.5 * alpha * alpha - 0.5 * x * x) * mills_ratio(x);
}

double sample_normal_tail_excess(double x, RandomStream& rng, int* tries)
{
    if (x < 0.0)
    {
        throw DomainError(fmt::format("normal tail threshold must be nonnegative, got {}", x));
    }
    int count = 0;
    if (x < 0.5)
    {
        for (;;)
        {
            ++count;
            const double n = std::abs(rng.normal());
            if (n > x)
            {
                if (tries)
                {
                    *tries = count;
                }
                return n - x;
            }
        }
    }
    const double alpha = 0.5 * (x + std::sqrt(x * x + 4.0));
    for (;;)
    {
        ++count;
        const double excess = rng.exponential() / alpha;
        const double gap = x + excess - alpha;
        if (rng.uniform() <= std::exp(-0.5 * gap * gap))
        {
            if (tries)
            {
                *tries = count;
            }
            return excess;
        }
    }
}

double mills_ratio(double x)
{
    const double y = x / std::numbers::sqrt2;
    if (y < 26.0)
    {
        return std::sqrt(0.5 * std::numbers::pi) * std::exp(y * y) * std::erfc(y);
    }
    // Asymptotic series; the first omitted term is below 1e-13 relative here.
    const double r = 1.0 / (x * x);
    return (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)))) / x;
}

double tcp_constant_invariant_moments(const TcpConstantParams& params, int k)
{
    require_positive(params.lambda, "lambda");
    if (k < 0)
    {
        throw DomainError(fmt::format("moment order must be nonnegative, got {}", k));
    }
    const double lambda = params.lambda;
    std::vector<double> m(k + 1, 0.0);
    m[0] = 1.0;
    for (int order = 1; order <= k; ++order)
    {
        // Z = R (Z + E / lambda) with R, Z, E independent.
        const double r_moment = params.jump_factor.moment(order);
        double sum = 0.0;
        double binom = 1.0;
        for (int j = 0; j < order; ++j)
        {
            sum += binom * m[j] * factorial(order - j) / std::pow(lambda, order - j);
            binom = binom * (order - j) / (j + 1);
        }
        m[order] = r_moment * sum / (1.0 - r_moment);
    }
    return m[k];
}

double tcp_constant_spectrum(const TcpConstantParams& params, int k)
{
    if (k < 0)
    {
        throw DomainError(fmt::format("spectrum index must be nonnegative, got {}", k));
    }
    return params.lambda * (params.jump_factor.moment(k) - 1.0);
}

}  // namespace pdmp::models
