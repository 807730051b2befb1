#pragma once

#include <string>
#include <vector>

#include "pdmp/embedded.hpp"
#include "pdmp/model.hpp"

namespace pdmp::estimators
{

using embedded::EmpiricalMeasure;

// A test function with its exact derivative.
struct TestFunction
{
    ScalarFn f;
    ScalarFn df;
    std::string label;
};

// {x, x^2, exp(-x), sin(x), sin(3x), log(1+x), x*exp(-x)}.
std::vector<TestFunction> default_family();

// Member of the default family by label; throws DomainError listing the valid labels.
TestFunction test_function(const std::string& label);

// Central-difference check of df on n points of [lo, hi]; throws DomainError on mismatch.
void validate_derivative(const TestFunction& tf, double lo, double hi, int n = 200);

/*!
 * Variance of P_t f under mu_hat by nested Monte Carlo.
 *
 * Atom i estimates P_t f(x_i) from inner_n paths on rng.substream(i). The
 * inner sampling variance / inner_n is subtracted, which removes the
 * first-order upward bias of the plug-in estimator.
 */
Estimate variance_of_semigroup(const Model& model, const ScalarFn& f, const EmpiricalMeasure& mu_hat,
                               double t, std::size_t inner_n, const RandomStream& rng,
                               unsigned workers = 0);

/*!
 * Plug-in p-entropy of f under the weighted sample, p in [1, 2].
 *
 * p > 1: (mu f^2 - (mu |f|^{2/p})^p) / (p - 1);
 * p = 1: mu(f^2 log f^2) - mu f^2 log mu f^2, with 0 log 0 = 0.
 */
double entropy_p(const std::vector<double>& f_values, const std::vector<double>& weights, double p);
double entropy_p(const EmpiricalMeasure& mu_hat, const ScalarFn& f, double p);

/*!
 * Entropy Ent_1(P_t f) under mu_hat by nested Monte Carlo.
 *
 * Delta-method correction for the inner noise; standard error from 20
 * interleaved batches of atoms.
 */
Estimate entropy_of_semigroup(const Model& model, const ScalarFn& f, const EmpiricalMeasure& mu_hat,
                              double t, std::size_t inner_n, const RandomStream& rng,
                              unsigned workers = 0);

/*!
 * p-Wasserstein distance between two weighted samples on the line.
 *
 * Exact: integrates |F_A^{-1}(u) - F_B^{-1}(u)|^p over the merged partition of
 * the cumulative weights. With a chart, atoms are mapped first, which gives
 * the distance for the metric |chart(x) - chart(y)|.
 */
double wasserstein_1d(double p, const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                      const ScalarFn& chart = {});

// Raw form; values must be sorted and both weight vectors must have equal totals.
double wasserstein_1d(double p, const std::vector<double>& a_values,
                      const std::vector<double>& a_weights, const std::vector<double>& b_values,
                      const std::vector<double>& b_weights);

/*!
 * Weighted energy mu_hat(weight * ((P_t f)')^2).
 *
 * Per atom a coupled central difference with bump min(h, distance to the
 * lower domain end / 2); the paired variance / inner_n is subtracted from
 * each squared gradient. At t = 0 the exact derivative is used.
 */
Estimate energy_W(const Model& model, const TestFunction& f, const EmpiricalMeasure& mu_hat,
                  double t, double h, std::size_t inner_n, const RandomStream& rng,
                  unsigned workers = 0);

struct DecayPoint
{
    double t = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

struct DecayFit
{
    std::vector<double> times;
    std::vector<double> log_values;
    double fitted_rate = 0.0;
    double fitted_intercept = 0.0;
    double r_squared = 0.0;
    double rate_std_error = 0.0;
};

/*!
 * Weighted least squares of log(value) against t; rate is the negated slope.
 *
 * Points with non-positive values or relative error above max_relative_error
 * are dropped. Weights are (value / std_error)^2 (uniform when every error is
 * zero). The reported error is inflated by the reduced chi-square when that
 * exceeds one.
 */
DecayFit fit_decay_rate(const std::vector<DecayPoint>& series, double max_relative_error = 0.25);

struct InequalityRatio
{
    double value = 0.0;
    double std_error = 0.0;
    std::string witness;
};

/*!
 * max over the family of Ent_p(f) / mu_hat(weight * f'^2).
 *
 * A lower bound on the best constant of the corresponding inequality. The
 * error is for the maximizing function, from 20 interleaved atom batches.
 */
InequalityRatio empirical_inequality_ratio(const EmpiricalMeasure& mu_hat,
                                           const std::vector<TestFunction>& family,
                                           const ScalarFn& weight, double p);

}  // namespace pdmp::estimators
