#include "pdmp/embedded.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <numeric>
#include <ostream>

#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/quadrature.hpp"

namespace pdmp::embedded
{
namespace
{
// Split n atoms over chains; the first n % chains get one extra.
std::size_t share(std::size_t n, std::size_t chains, std::size_t c)
{
    return n / chains + (c < n % chains ? 1 : 0);
}

std::vector<std::vector<double>> run_chains(std::size_t n, std::size_t chains, unsigned workers,
                                            const std::function<void(std::size_t,
                                                                     std::vector<double>&)>& body)
{
    if (n == 0)
    {
        throw DomainError("sample size must be at least 1");
    }
    if (chains == 0)
    {
        throw DomainError("chain count must be at least 1");
    }
    chains = std::min(chains, n);
    std::vector<std::vector<double>> parts(chains);
    parallel_for(chains, workers, [&](std::size_t c) {
        parts[c].reserve(share(n, chains, c));
        body(c, parts[c]);
    });
    return parts;
}

std::vector<double> concatenate(const std::vector<std::vector<double>>& parts)
{
    std::vector<double> all;
    for (const auto& p : parts)
    {
        all.insert(all.end(), p.begin(), p.end());
    }
    return all;
}
}  // namespace

std::string to_string(Provenance p)
{
    switch (p)
    {
        case Provenance::chain:
            return "chain";
        case Provenance::reweighted:
            return "reweighted";
        case Provenance::trajectory_time_average:
            return "trajectory_time_average";
    }
    return "unknown";
}

//---------------------------------------------------------------------------//
// EmpiricalMeasure
//---------------------------------------------------------------------------//

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> values, Provenance provenance)
    : EmpiricalMeasure(values, std::vector<double>(values.size(), 1.0), provenance)
{
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> values, std::vector<double> weights,
                                   Provenance provenance)
    : provenance_(provenance)
{
    if (values.size() != weights.size())
    {
        throw DomainError(fmt::format("{} values but {} weights", values.size(),
                                      weights.size()));
    }
    if (values.empty())
    {
        throw DomainError("empirical measure needs at least one atom");
    }
    // Compensated total so the normalized weights sum to one at large n.
    double total = 0.0;
    double carry = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (!std::isfinite(values[i]))
        {
            throw DomainError(fmt::format("atom {} has non-finite value {}", i, values[i]));
        }
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
        {
            throw DomainError(fmt::format("atom {} has weight {}", i, weights[i]));
        }
        const double y = weights[i] - carry;
        const double next = total + y;
        carry = (next - total) - y;
        total = next;
    }

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    values_.resize(order.size());
    weights_.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
    {
        values_[i] = values[order[i]];
        weights_[i] = weights[order[i]] / total;
    }
}

double EmpiricalMeasure::expect(const ScalarFn& f) const
{
    double sum = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i)
    {
        sum += weights_[i] * f(values_[i]);
    }
    return sum;
}

double EmpiricalMeasure::mean() const
{
    return expect([](double x) { return x; });
}

double EmpiricalMeasure::moment(int k) const
{
    return expect([k](double x) { return std::pow(x, k); });
}

double EmpiricalMeasure::std_error(const ScalarFn& f) const
{
    std::vector<double> fx(values_.size());
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i)
    {
        fx[i] = f(values_[i]);
        m += weights_[i] * fx[i];
    }
    double s = 0.0;
    double w2 = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i)
    {
        s += weights_[i] * weights_[i] * (fx[i] - m) * (fx[i] - m);
        w2 += weights_[i] * weights_[i];
    }
    // Small-sample correction 1 / (1 - sum w^2), exact for uniform weights.
    return w2 < 1.0 ? std::sqrt(s / (1.0 - w2)) : 0.0;
}

double EmpiricalMeasure::quantile(double u) const
{
    if (!(u > 0.0 && u <= 1.0))
    {
        throw DomainError(fmt::format("quantile level {} must lie in (0, 1]", u));
    }
    double cum = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i)
    {
        cum += weights_[i];
        if (cum >= u * (1.0 - 1e-15))
        {
            return values_[i];
        }
    }
    return values_.back();
}

EmpiricalMeasure EmpiricalMeasure::map(const ScalarFn& chart) const
{
    std::vector<double> mapped(values_.size());
    std::transform(values_.begin(), values_.end(), mapped.begin(), chart);
    return EmpiricalMeasure(std::move(mapped), weights_, provenance_);
}

void EmpiricalMeasure::write_csv(std::ostream& os) const
{
    os << "value,weight\n";
    for (std::size_t i = 0; i < values_.size(); ++i)
    {
        fmt::print(os, "{:.17g},{:.17g}\n", values_[i], weights_[i]);
    }
}

//---------------------------------------------------------------------------//
// Kernels and chains
//---------------------------------------------------------------------------//

double kernel_K_sample(const Model& model, double x, RandomStream& rng)
{
    if (!model.contains(x))
    {
        throw DomainError(fmt::format("state {} is outside the domain of '{}'", x, model.name));
    }
    return model.flow(x, sample_jump_time(model, x, rng));
}

double h_function(const Model& model, double x)
{
    if (!model.contains(x))
    {
        throw DomainError(fmt::format("state {} is outside the domain of '{}'", x, model.name));
    }
    if (model.mean_holding)
    {
        return model.mean_holding(x);
    }
    const double r = model.rate(x);
    const double step = r > 1e-3 ? 1.0 / r : 1.0;
    const double value = quadrature::integrate_to_infinity(
        [&](double t) { return std::exp(-model.cum_rate(x, t)); }, 0.0, 1e-8, step);
    if (!(value > 0.0) || !std::isfinite(value))
    {
        throw DivergenceError(fmt::format("h({}) = {} for model '{}'", x, value, model.name));
    }
    return value;
}

double kernel_Ktilde_sample(const Model& model, double x, RandomStream& rng)
{
    if (!model.contains(x))
    {
        throw DomainError(fmt::format("state {} is outside the domain of '{}'", x, model.name));
    }
    if (model.size_biased_time)
    {
        return model.flow(x, model.size_biased_time(x, rng));
    }
    const double h = h_function(model, x);
    auto survival = [&](double t) { return std::exp(-model.cum_rate(x, t)); };
    // The top 1e-7 of probability mass is folded back so the quadrature
    // tolerance on h cannot leave the level out of reach.
    const double level = rng.uniform() * h * (1.0 - 1e-7);
    const double r = model.rate(x);
    const double t = quadrature::invert_nondecreasing(
        [&](double s) { return quadrature::integrate(survival, 0.0, s, 1e-12); }, level,
        r > 1e-3 ? 1.0 / r : 1.0, 1e-12, 1e15, survival);
    return model.flow(x, t);
}

double chain_step(const Model& model, double x, RandomStream& rng)
{
    const double pre = kernel_K_sample(model, x, rng);
    const double post = model.jump(pre, rng);
    if (!model.contains(post))
    {
        throw DomainError(fmt::format("jump from {} landed at {} outside the domain of '{}'",
                                      pre, post, model.name));
    }
    return post;
}

std::vector<double> chain_path(const Model& model, const ChainOptions& options,
                               const RandomStream& rng)
{
    if (options.thinning == 0)
    {
        throw DomainError("thinning must be at least 1");
    }
    if (!model.contains(options.x0))
    {
        throw DomainError(fmt::format("chain start {} is outside the domain", options.x0));
    }
    const std::size_t chains = std::min(options.chains, options.n);
    auto parts = run_chains(options.n, options.chains, options.workers,
                            [&](std::size_t c, std::vector<double>& out) {
                                RandomStream stream = rng.substream(c);
                                double x = options.x0;
                                for (std::size_t k = 0; k < options.burn_in; ++k)
                                {
                                    x = chain_step(model, x, stream);
                                }
                                const std::size_t want = share(options.n, chains, c);
                                while (out.size() < want)
                                {
                                    for (std::size_t k = 0; k < options.thinning; ++k)
                                    {
                                        x = chain_step(model, x, stream);
                                    }
                                    out.push_back(x);
                                }
                            });
    return concatenate(parts);
}

EmpiricalMeasure chain_invariant_sample(const Model& model, const ChainOptions& options,
                                        const RandomStream& rng)
{
    return EmpiricalMeasure(chain_path(model, options, rng), Provenance::chain);
}

EmpiricalMeasure reconstruct_mu(const Model& model, const EmpiricalMeasure& chain_measure,
                                const RandomStream& rng, unsigned workers)
{
    if (chain_measure.provenance() != Provenance::chain)
    {
        throw DomainError(fmt::format("reconstruction needs a chain measure, got '{}'",
                                      to_string(chain_measure.provenance())));
    }
    auto atoms = reconstruct_atoms(model, chain_measure.values(), chain_measure.weights(), rng,
                                   workers);
    return EmpiricalMeasure(std::move(atoms.values), std::move(atoms.weights),
                            Provenance::reweighted);
}

WeightedAtoms reconstruct_atoms(const Model& model, const std::vector<double>& xs,
                                const std::vector<double>& ws, const RandomStream& rng,
                                unsigned workers)
{
    if (!ws.empty() && ws.size() != xs.size())
    {
        throw DomainError("reconstruction weights and atoms differ in length");
    }
    WeightedAtoms out{std::vector<double>(xs.size()), std::vector<double>(xs.size())};
    parallel_for(xs.size(), workers, [&](std::size_t i) {
        RandomStream stream = rng.substream(i);
        out.weights[i] = (ws.empty() ? 1.0 : ws[i]) * h_function(model, xs[i]);
        out.values[i] = kernel_Ktilde_sample(model, xs[i], stream);
    });
    return out;
}

Estimate batch_means(const std::vector<double>& values, const std::vector<double>& weights,
                     const ScalarFn& f, std::size_t batches)
{
    const std::size_t n = values.size();
    if (batches < 2 || n < batches)
    {
        throw DomainError(fmt::format("batch means need 2 <= batches <= n, got {} and {}",
                                      batches, n));
    }
    auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
    double num = 0.0;
    double den = 0.0;
    std::vector<double> ratios(batches);
    for (std::size_t b = 0; b < batches; ++b)
    {
        double bn = 0.0;
        double bd = 0.0;
        for (std::size_t i = b * n / batches; i < (b + 1) * n / batches; ++i)
        {
            bn += weight(i) * f(values[i]);
            bd += weight(i);
        }
        ratios[b] = bn / bd;
        num += bn;
        den += bd;
    }
    const Estimate spread = mean_and_error(ratios);
    return {num / den, spread.std_error};
}

Estimate normalizer_estimate(const Model& model, const EmpiricalMeasure& chain_measure,
                             const RandomStream& rng, std::size_t resamples)
{
    if (resamples < 2)
    {
        throw DomainError("bootstrap needs at least 2 resamples");
    }
    const auto& xs = chain_measure.values();
    const auto& ws = chain_measure.weights();
    const std::size_t n = xs.size();
    std::vector<double> h(n);
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        h[i] = h_function(model, xs[i]);
        value += ws[i] * h[i];
    }

    // Resample atoms proportionally to their weights (alias-free: inverse CDF on cumulative weights).
    std::vector<double> cum(n);
    std::partial_sum(ws.begin(), ws.end(), cum.begin());
    std::vector<double> replicas(resamples);
    for (std::size_t b = 0; b < resamples; ++b)
    {
        RandomStream stream = rng.substream(b);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k)
        {
            const double u = stream.uniform() * cum.back();
            const std::size_t j = std::min<std::size_t>(
                n - 1, std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
            sum += h[j];
        }
        replicas[b] = sum / static_cast<double>(n);
    }
    const Estimate spread = mean_and_error(replicas);
    // mean_and_error returns the error of the replica mean; the bootstrap error is their spread.
    return {value, spread.std_error * std::sqrt(static_cast<double>(resamples))};
}

std::vector<double> time_average_path(const Model& model, const TimeAverageOptions& options,
                                      const RandomStream& rng)
{
    if (!(options.spacing > 0.0) || !(options.burn_in_time >= 0.0))
    {
        throw DomainError("time-average sampling needs spacing > 0 and burn_in_time >= 0");
    }
    if (!model.contains(options.x0))
    {
        throw DomainError(fmt::format("trajectory start {} is outside the domain", options.x0));
    }
    const std::size_t chains = std::min(options.chains, options.n);
    auto parts = run_chains(
        options.n, options.chains, options.workers, [&](std::size_t c, std::vector<double>& out) {
            RandomStream stream = rng.substream(c);
            RandomStream marks = stream.substream(0);
            RandomStream kicks = stream.substream(1);
            const std::size_t want = share(options.n, chains, c);
            // Walk the path once, reading the state at burn_in + j * spacing.
            double now = 0.0;
            double x = options.x0;
            double next_read = options.burn_in_time + options.spacing;
            std::size_t events = 0;
            while (out.size() < want)
            {
                const double wait = sample_jump_time(model, x, marks);
                while (out.size() < want && next_read <= now + wait)
                {
                    out.push_back(model.flow(x, next_read - now));
                    next_read = options.burn_in_time
                                + options.spacing * static_cast<double>(out.size() + 1);
                }
                if (out.size() == want)
                {
                    break;
                }
                now += wait;
                x = model.jump(model.flow(x, wait), kicks);
                if (++events > SimulationOptions{}.max_events * 10)
                {
                    throw ExplosionError("time-average trajectory exceeded its event budget");
                }
            }
        });
    return concatenate(parts);
}

EmpiricalMeasure time_average_sample(const Model& model, const TimeAverageOptions& options,
                                     const RandomStream& rng)
{
    return EmpiricalMeasure(time_average_path(model, options, rng),
                            Provenance::trajectory_time_average);
}

}  // namespace pdmp::embedded
