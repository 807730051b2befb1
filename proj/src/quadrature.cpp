#include "pdmp/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cfloat>
#include <cmath>
#include <fmt/format.h>

#include "pdmp/errors.hpp"

namespace pdmp::quadrature
{

namespace
{
using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;

// One Kronrod panel; Boost reports the error of the panel mapped to [-1, 1],
// so it is rescaled here before any comparison.
double panel(const Integrand& f, double a, double b, double* error, double* l1)
{
    const double v = Rule::integrate(f, a, b, 0, 0.0, error, l1);
    *error *= 0.5 * (b - a);
    return v;
}

double adapt(const Integrand& f, double a, double b, double abs_tol, int depth)
{
    double error = 0.0, l1 = 0.0;
    const double v = panel(f, a, b, &error, &l1);
    if (depth == 0 || error <= abs_tol || error <= 50.0 * DBL_EPSILON * l1)
    {
        return v;
    }
    const double mid = 0.5 * (a + b);
    return adapt(f, a, mid, abs_tol / 2, depth - 1) + adapt(f, mid, b, abs_tol / 2, depth - 1);
}
}  // namespace

double integrate(const Integrand& f, double a, double b, double rel_tol)
{
    if (a == b)
    {
        return 0.0;
    }
    double error = 0.0, l1 = 0.0;
    double value = panel(f, a, b, &error, &l1);
    const double abs_tol = rel_tol * l1;
    if (error > abs_tol && error > 50.0 * DBL_EPSILON * l1)
    {
        const double mid = 0.5 * (a + b);
        value = adapt(f, a, mid, abs_tol / 2, 19) + adapt(f, mid, b, abs_tol / 2, 19);
    }
    if (!std::isfinite(value))
    {
        throw DivergenceError(fmt::format("integral over [{}, {}] is not finite", a, b));
    }
    return value;
}

double integrate_to_infinity(const Integrand& f, double a, double rel_tol, double initial_step,
                             int max_pieces)
{
    double total = 0.0;
    double lo = a;
    double step = initial_step;
    int small_in_a_row = 0;
    for (int piece = 0; piece < max_pieces; ++piece)
    {
        const double hi = lo + step;
        const double part = integrate(f, lo, hi, rel_tol * 1e-2);
        total += part;
        if (!std::isfinite(total))
        {
            throw DivergenceError("integral to infinity is not finite");
        }
        if (std::abs(part) <= rel_tol * std::abs(total))
        {
            if (++small_in_a_row == 2)
            {
                return total;
            }
        }
        else
        {
            small_in_a_row = 0;
        }
        lo = hi;
        step *= 2.0;
    }
    throw DivergenceError(
        fmt::format("integral from {} to infinity did not converge after {} pieces", a,
                    max_pieces));
}

double invert_nondecreasing(const Integrand& F, double level, double initial_step, double tol,
                            double horizon, const Integrand& derivative)
{
    if (!(level >= 0.0) || !std::isfinite(level))
    {
        throw DomainError(fmt::format("inversion level {} must be finite and nonnegative", level));
    }
    if (F(0.0) >= level)
    {
        return 0.0;
    }

    double lo = 0.0;
    double hi = initial_step;
    while (F(hi) < level)
    {
        lo = hi;
        hi *= 2.0;
        if (hi > horizon)
        {
            throw UnboundedSearchError(fmt::format(
                "cumulative intensity stays below {} up to horizon {}", level, horizon));
        }
    }

    double t = 0.5 * (lo + hi);
    for (int iter = 0; iter < 400; ++iter)
    {
        const double value = F(t) - level;
        if (value == 0.0)
        {
            return t;
        }
        if (value < 0.0)
        {
            lo = t;
        }
        else
        {
            hi = t;
        }
        if (hi - lo <= tol * std::max(1.0, std::abs(hi)))
        {
            break;
        }
        double candidate = 0.5 * (lo + hi);
        if (derivative)
        {
            const double slope = derivative(t);
            if (slope > 0.0)
            {
                const double newton = t - value / slope;
                if (newton > lo && newton < hi)
                {
                    candidate = newton;
                    if (std::abs(newton - t) <= tol * std::max(1.0, std::abs(t)))
                    {
                        return newton;
                    }
                }
            }
        }
        t = candidate;
    }
    return 0.5 * (lo + hi);
}

}  // namespace pdmp::quadrature
