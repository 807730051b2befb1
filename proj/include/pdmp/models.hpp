#pragma once

#include <functional>
#include <optional>

#include "pdmp/model.hpp"

namespace pdmp::models
{

//---------------------------------------------------------------------------//
/*!
 * Multiplicative jump factor R in [0, 1) of the TCP with constant rate.
 *
 * Either deterministic (R = delta) or a sampler paired with its raw moments
 * E[R^k].
 */
class JumpFactor
{
  public:
    static JumpFactor deterministic(double delta);
    static JumpFactor sampled(std::function<double(RandomStream&)> sampler,
                              std::function<double(int)> moment);
    // R uniform on [lo, hi) with 0 <= lo < hi <= 1.
    static JumpFactor uniform(double lo, double hi);

    bool is_deterministic() const { return deterministic_.has_value(); }
    // Throws DomainError for a random factor.
    double delta() const;
    double sample(RandomStream& rng) const;
    double moment(int k) const;

  private:
    std::optional<double> deterministic_;
    std::function<double(RandomStream&)> sampler_;
    std::function<double(int)> moment_;
};

struct TcpConstantParams
{
    double lambda = 1.0;
    JumpFactor jump_factor = JumpFactor::deterministic(0.5);
};

struct TcpLinearParams
{
    double delta = 0.5;
};

struct TcpIncreasingParams
{
    ScalarFn rate;                  // nondecreasing, rate(0) > 0
    ScalarFn rate_derivative;       // optional; finite differences otherwise
    double kappa = 0.0;             // Lipschitz constant of log(rate)
    double delta = 0.5;
    FlowFn cum_rate;                // optional closed forms
    FlowFn inv_cum_rate;
    double check_grid_high = 50.0;  // right end of the verification grid
};

struct StorageParams
{
    double lambda = 1.0;
    std::function<double(RandomStream&)> increment;  // positive almost surely
    double increment_mean = 1.0;

    static StorageParams exponential_increments(double lambda, double mean);
};

Model make_tcp_constant(const TcpConstantParams& params);
Model make_tcp_linear(const TcpLinearParams& params);
Model make_tcp_increasing(const TcpIncreasingParams& params);
Model make_storage(const StorageParams& params);
Model make_twisted_tcp_linear(double delta);

// rate(0) of an increasing-rate model's parameters.
double lambda_star(const TcpIncreasingParams& params);

// Weight 1 - exp(-x) used with the linear-rate TCP, and its derivative.
double tcp_linear_weight(double x);
double tcp_linear_weight_derivative(double x);

/*!
 * Chart of the weighted metric for the linear-rate TCP.
 *
 * twist(x) is the integral of weight^{-1/2} over [0, x]. It has the closed form
 * x + 2 log(1 + sqrt(1 - exp(-x))), and its inverse is 2 log cosh(z / 2).
 */
double twist(double x);
double twist_inverse(double z);

/*!
 * Draw from N(0,1) conditioned on exceeding x >= 0, returned as the excess over x.
 *
 * Uses half-normal rejection below x = 0.5 and the translated-exponential
 * proposal with optimal rate (x + sqrt(x^2 + 4)) / 2 above; the acceptance
 * probability of both branches is at least 0.6. tries, when non-null, receives
 * the number of proposals consumed.
 */
double sample_normal_tail_excess(double x, RandomStream& rng, int* tries = nullptr);

// Analytic acceptance probability of sample_normal_tail_excess at x.
double normal_tail_acceptance(double x);

// exp(x^2 / 2) * integral of exp(-s^2 / 2) over [x, inf), stable for large x.
double mills_ratio(double x);

// E[Z^k] for the post-jump invariant law of the constant-rate TCP, Z = R (Z + E / lambda).
double tcp_constant_invariant_moments(const TcpConstantParams& params, int k);

// Eigenvalue lambda (E[R^k] - 1) of the constant-rate TCP generator on polynomials.
double tcp_constant_spectrum(const TcpConstantParams& params, int k);

}  // namespace pdmp::models
