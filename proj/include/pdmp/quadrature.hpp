#pragma once

#include <functional>

namespace pdmp::quadrature
{

using Integrand = std::function<double(double)>;

// Adaptive Gauss-Kronrod (31-point) on a finite interval.
double integrate(const Integrand& f, double a, double b, double rel_tol = 1e-12);

/*!
 * Integral over [a, infinity) by interval doubling.
 *
 * Integrates [a, a + s], [a + s, a + 3s], ... with Gauss-Kronrod on each piece
 * and stops once a piece contributes less than rel_tol of the running total
 * twice in a row. Throws DivergenceError if the total is not finite or the
 * pieces stop shrinking after max_pieces doublings.
 */
double integrate_to_infinity(const Integrand& f, double a, double rel_tol = 1e-8,
                             double initial_step = 1.0, int max_pieces = 80);

/*!
 * Smallest t >= 0 with F(t) = level for a continuous nondecreasing F, F(0) <= level.
 *
 * Brackets by doubling from initial_step, then bisects to relative tolerance
 * tol. When derivative is supplied a safeguarded Newton step replaces
 * bisection whenever it stays inside the bracket. Throws UnboundedSearchError
 * if F stays below level up to horizon.
 */
double invert_nondecreasing(const Integrand& F, double level, double initial_step = 1.0,
                            double tol = 1e-12, double horizon = 1e15,
                            const Integrand& derivative = {});

}  // namespace pdmp::quadrature
