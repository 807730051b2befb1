#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pdmp/random.hpp"

namespace pdmp
{

using ScalarFn = std::function<double(double)>;
using FlowFn = std::function<double(double, double)>;
using JumpFn = std::function<double(double, RandomStream&)>;

//---------------------------------------------------------------------------//
/*!
 * A one-dimensional piecewise deterministic Markov process.
 *
 * Between jumps the state follows the flow of the drift; the jump clock has
 * intensity rate(flow(x, t)) and its integral cum_rate(x, t). At a jump the
 * state is replaced by a draw of jump(pre_jump_state, rng).
 *
 * The two trailing optional members let a model publish closed forms used by
 * the embedded-chain kernels:
 *  - mean_holding(x)       = integral of exp(-cum_rate(x, t)) over t >= 0;
 *  - size_biased_time(x,r) = a draw from the density exp(-cum_rate(x, t)) / mean_holding(x).
 * When absent, quadrature is used.
 */
struct Model
{
    std::string name;
    double domain_low = 0.0;
    double domain_high = std::numeric_limits<double>::infinity();

    ScalarFn drift;
    FlowFn flow;
    ScalarFn rate;
    FlowFn cum_rate;
    FlowFn inv_cum_rate;
    JumpFn jump;
    ScalarFn jump_gradient_bound;
    ScalarFn weight = [](double) { return 1.0; };

    ScalarFn mean_holding;
    JumpFn size_biased_time;

    // Finite endpoints are admissible states (the TCP family starts at 0).
    bool contains(double x) const { return x >= domain_low && x <= domain_high; }
};

struct JumpEvent
{
    double time;
    double pre_jump_state;
    double post_jump_state;
};

struct Trajectory
{
    double initial_state = 0.0;
    std::vector<JumpEvent> events;
    double end_time = 0.0;
    double end_state = 0.0;
};

struct Estimate
{
    double value = 0.0;
    double std_error = 0.0;
};

struct SimulationOptions
{
    std::size_t max_events = 10'000'000;
};

// Inverse of t -> cum_rate(x, t) by bracket doubling and bisection (tolerance 1e-12).
// intensity(x, t) = rate(flow(x, t)), when given, enables safeguarded Newton steps.
FlowFn inverse_cum_rate_by_search(FlowFn cum_rate, FlowFn intensity = {});

// Sample mean and standard error of the mean, summed in index order.
Estimate mean_and_error(const std::vector<double>& samples);

// Duration until the next jump from x: inv_cum_rate(x, E) with E ~ Exp(1).
double sample_jump_time(const Model& model, double x, RandomStream& rng);

/*!
 * Exact trajectory on [0, t_end].
 *
 * Exponential marks are drawn from rng.substream(0) and jump randomness from
 * rng.substream(1). Two paths started from different points with the same rng
 * therefore share the k-th mark and the k-th jump draw, which is the
 * synchronous coupling used by the gradient estimators.
 */
Trajectory simulate_path(const Model& model, double x0, double t_end, RandomStream& rng,
                         const SimulationOptions& options = {});

// State at t_end only; bit-identical to simulate_path(...).end_state.
double simulate_endpoint(const Model& model, double x0, double t_end, RandomStream& rng,
                         const SimulationOptions& options = {});

// Mean and standard error of f(X_t) from x over n paths; path k uses rng.substream(k).
Estimate semigroup_estimate(const Model& model, const ScalarFn& f, double x, double t,
                            std::size_t n, const RandomStream& rng, unsigned workers = 0);

// Default bump for central differences, 1e-4 * max(1, |x|).
double default_bump(double x);

/*!
 * Central-difference estimate of d/dx P_t f(x) with common random numbers.
 *
 * Replication k runs the paths from x + h and x - h on the same
 * rng.substream(k); the standard error comes from the paired differences.
 */
Estimate gradient_semigroup_estimate(const Model& model, const ScalarFn& f, double x, double t,
                                     double h, std::size_t n, const RandomStream& rng,
                                     unsigned workers = 0);

}  // namespace pdmp
