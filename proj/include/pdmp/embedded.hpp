#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdmp/model.hpp"

namespace pdmp::embedded
{

enum class Provenance
{
    chain,
    reweighted,
    trajectory_time_average,
};

std::string to_string(Provenance p);

//---------------------------------------------------------------------------//
/*!
 * Weighted sample standing in for a probability measure on the line.
 *
 * Atoms are kept sorted by value with weights normalized to sum to one.
 */
class EmpiricalMeasure
{
  public:
    EmpiricalMeasure() = default;
    // Uniform weights.
    EmpiricalMeasure(std::vector<double> values, Provenance provenance);
    // Positive weights, normalized on construction.
    EmpiricalMeasure(std::vector<double> values, std::vector<double> weights,
                     Provenance provenance);

    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& weights() const { return weights_; }
    Provenance provenance() const { return provenance_; }

    double expect(const ScalarFn& f) const;
    double mean() const;
    double moment(int k) const;
    // Standard error of expect(f) treating atoms as independent draws.
    double std_error(const ScalarFn& f) const;
    // Left-continuous generalized inverse of the CDF, u in (0, 1].
    double quantile(double u) const;

    // Image measure under chart (re-sorted); provenance is kept.
    EmpiricalMeasure map(const ScalarFn& chart) const;

    // Header `value,weight`, 17 significant digits.
    void write_csv(std::ostream& os) const;

  private:
    std::vector<double> values_;
    std::vector<double> weights_;
    Provenance provenance_ = Provenance::chain;
};

// flow(x, T) with T the next jump time: a draw of K(x, .).
double kernel_K_sample(const Model& model, double x, RandomStream& rng);

/*!
 * flow(x, T~) with T~ drawn from the density exp(-cum_rate(x, t)) / h(x).
 *
 * Uses the model's size_biased_time sampler when present and otherwise
 * inverts the cumulative distribution computed by quadrature.
 */
double kernel_Ktilde_sample(const Model& model, double x, RandomStream& rng);

// One step of the embedded chain: flow to the jump, then jump.
double chain_step(const Model& model, double x, RandomStream& rng);

struct ChainOptions
{
    std::size_t n = 100'000;
    std::size_t burn_in = 1000;
    std::size_t thinning = 1;
    std::size_t chains = 1;
    double x0 = 0.0;
    unsigned workers = 0;
};

/*!
 * Post-burn-in, thinned states of the embedded chain.
 *
 * Chain c runs on rng.substream(c) and contributes its share of the n atoms;
 * shares are concatenated by chain index before sorting.
 */
EmpiricalMeasure chain_invariant_sample(const Model& model, const ChainOptions& options,
                                        const RandomStream& rng);

// The same atoms in simulation order (chain by chain), before sorting.
std::vector<double> chain_path(const Model& model, const ChainOptions& options,
                               const RandomStream& rng);

// h(x), the integral of exp(-cum_rate(x, t)) over t >= 0 (relative tolerance 1e-8).
double h_function(const Model& model, double x);

/*!
 * Law of the continuous-time process rebuilt from the chain law.
 *
 * Each chain atom x is reweighted by h(x) and moved to a draw of K~(x, .);
 * atom i uses rng.substream(i).
 */
EmpiricalMeasure reconstruct_mu(const Model& model, const EmpiricalMeasure& chain_measure,
                                const RandomStream& rng, unsigned workers = 0);

struct WeightedAtoms
{
    std::vector<double> values;
    std::vector<double> weights;
};

// reconstruct_mu on atoms in the given order; weights may be empty (uniform).
WeightedAtoms reconstruct_atoms(const Model& model, const std::vector<double>& xs,
                                const std::vector<double>& ws, const RandomStream& rng,
                                unsigned workers = 0);

/*!
 * Weighted mean of f over ordered, possibly autocorrelated atoms, with the
 * standard error taken from the spread of contiguous batch means.
 */
Estimate batch_means(const std::vector<double>& values, const std::vector<double>& weights,
                     const ScalarFn& f, std::size_t batches = 20);

// Normalizer C = chain_measure(h) with a bootstrap standard error over atoms.
Estimate normalizer_estimate(const Model& model, const EmpiricalMeasure& chain_measure,
                             const RandomStream& rng, std::size_t resamples = 200);

struct TimeAverageOptions
{
    std::size_t n = 100'000;
    double burn_in_time = 100.0;
    double spacing = 1.0;
    std::size_t chains = 1;
    double x0 = 0.0;
    unsigned workers = 0;
};

// States of long trajectories read every `spacing` time units after burn-in.
EmpiricalMeasure time_average_sample(const Model& model, const TimeAverageOptions& options,
                                     const RandomStream& rng);

// The same states in time order, chain by chain.
std::vector<double> time_average_path(const Model& model, const TimeAverageOptions& options,
                                      const RandomStream& rng);

}  // namespace pdmp::embedded
