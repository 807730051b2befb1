#include "pdmp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"

namespace pdmp::estimators
{
namespace
{
constexpr std::size_t batches = 20;

void require_inner(std::size_t inner_n)
{
    if (inner_n < 2)
    {
        throw DomainError(fmt::format("inner_n = {} must be at least 2", inner_n));
    }
}

// Estimate of P_t f at every atom; atom i uses rng.substream(i).
std::vector<Estimate> inner_estimates(const Model& model, const ScalarFn& f,
                                      const EmpiricalMeasure& mu_hat, double t,
                                      std::size_t inner_n, const RandomStream& rng,
                                      unsigned workers)
{
    const auto& xs = mu_hat.values();
    std::vector<Estimate> out(xs.size());
    parallel_for(xs.size(), workers, [&](std::size_t i) {
        out[i] = semigroup_estimate(model, f, xs[i], t, inner_n, rng.substream(i), 1);
    });
    return out;
}

// Spread of a statistic over interleaved atom batches (atom i goes to batch i % batches).
template<class Statistic>
double batch_std_error(const std::vector<double>& weights, Statistic&& statistic)
{
    const std::size_t n = weights.size();
    const std::size_t b = std::min(batches, n);
    if (b < 2)
    {
        return 0.0;
    }
    std::vector<double> values(b);
    for (std::size_t k = 0; k < b; ++k)
    {
        std::vector<std::size_t> members;
        for (std::size_t i = k; i < n; i += b)
        {
            members.push_back(i);
        }
        values[k] = statistic(members);
    }
    return mean_and_error(values).std_error;
}

double plog(double y)
{
    return y > 0.0 ? y * std::log(y) : 0.0;
}
}  // namespace

//---------------------------------------------------------------------------//
// Test functions
//---------------------------------------------------------------------------//

std::vector<TestFunction> default_family()
{
    return {
        {[](double x) { return x; }, [](double) { return 1.0; }, "x"},
        {[](double x) { return x * x; }, [](double x) { return 2.0 * x; }, "x^2"},
        {[](double x) { return std::exp(-x); }, [](double x) { return -std::exp(-x); }, "exp(-x)"},
        {[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); }, "sin(x)"},
        {[](double x) { return std::sin(3.0 * x); },
         [](double x) { return 3.0 * std::cos(3.0 * x); }, "sin(3x)"},
        {[](double x) { return std::log1p(x); }, [](double x) { return 1.0 / (1.0 + x); },
         "log(1+x)"},
        {[](double x) { return x * std::exp(-x); },
         [](double x) { return (1.0 - x) * std::exp(-x); }, "x*exp(-x)"},
    };
}

TestFunction test_function(const std::string& label)
{
    std::vector<std::string> labels;
    for (auto& tf : default_family())
    {
        if (tf.label == label)
        {
            return tf;
        }
        labels.push_back(tf.label);
    }
    throw DomainError(fmt::format("unknown test function '{}' (known: {})", label,
                                  fmt::join(labels, ", ")));
}

void validate_derivative(const TestFunction& tf, double lo, double hi, int n)
{
    for (int i = 0; i <= n; ++i)
    {
        const double x = lo + (hi - lo) * i / n;
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        const double fd = (tf.f(x + h) - tf.f(x - h)) / (2.0 * h);
        const double exact = tf.df(x);
        if (!(std::abs(fd - exact) <= 1e-6 * (1.0 + std::abs(exact))))
        {
            throw DomainError(fmt::format(
                "derivative of '{}' at {} is {} but central difference gives {}", tf.label, x,
                exact, fd));
        }
    }
}

//---------------------------------------------------------------------------//
// Variance and entropies
//---------------------------------------------------------------------------//

Estimate variance_of_semigroup(const Model& model, const ScalarFn& f, const EmpiricalMeasure& mu_hat,
                               double t, std::size_t inner_n, const RandomStream& rng,
                               unsigned workers)
{
    require_inner(inner_n);
    const auto inner = inner_estimates(model, f, mu_hat, t, inner_n, rng, workers);
    const auto& w = mu_hat.weights();
    const std::size_t n = w.size();

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        mean += w[i] * inner[i].value;
    }
    double second = 0.0;
    double noise = 0.0;
    double noise_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        const double v = inner[i].std_error * inner[i].std_error;
        second += w[i] * (inner[i].value - mean) * (inner[i].value - mean);
        noise += w[i] * v;
        noise_sq += w[i] * w[i] * v;
    }
    const double value = second - noise + noise_sq;

    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        const double v = inner[i].std_error * inner[i].std_error;
        const double psi = (inner[i].value - mean) * (inner[i].value - mean) - v - value;
        spread += w[i] * w[i] * psi * psi;
    }
    return {value, std::sqrt(spread)};
}

double entropy_p(const std::vector<double>& f_values, const std::vector<double>& weights, double p)
{
    if (!(p >= 1.0 && p <= 2.0))
    {
        throw DomainError(fmt::format("p = {} must lie in [1, 2]", p));
    }
    if (f_values.size() != weights.size() || f_values.empty())
    {
        throw DomainError("entropy_p needs matching, nonempty values and weights");
    }
    double total = 0.0;
    double second = 0.0;
    for (std::size_t i = 0; i < f_values.size(); ++i)
    {
        total += weights[i];
        second += weights[i] * f_values[i] * f_values[i];
    }
    second /= total;

    if (p == 1.0)
    {
        double a = 0.0;
        for (std::size_t i = 0; i < f_values.size(); ++i)
        {
            a += weights[i] * plog(f_values[i] * f_values[i]);
        }
        return a / total - plog(second);
    }
    // p = 2 is the variance of f itself; below that f^{2/p} needs |f|.
    double inner = 0.0;
    for (std::size_t i = 0; i < f_values.size(); ++i)
    {
        inner += weights[i] * (p == 2.0 ? f_values[i] : std::pow(std::abs(f_values[i]), 2.0 / p));
    }
    inner /= total;
    if (inner < 0.0 && p != 2.0)
    {
        throw EstimationError(fmt::format("negative inner mean {} in entropy_p", inner));
    }
    return (second - std::pow(inner, p)) / (p - 1.0);
}

double entropy_p(const EmpiricalMeasure& mu_hat, const ScalarFn& f, double p)
{
    std::vector<double> fx(mu_hat.size());
    std::transform(mu_hat.values().begin(), mu_hat.values().end(), fx.begin(), f);
    return entropy_p(fx, mu_hat.weights(), p);
}

Estimate entropy_of_semigroup(const Model& model, const ScalarFn& f, const EmpiricalMeasure& mu_hat,
                              double t, std::size_t inner_n, const RandomStream& rng,
                              unsigned workers)
{
    require_inner(inner_n);
    const auto inner = inner_estimates(model, f, mu_hat, t, inner_n, rng, workers);
    const auto& w = mu_hat.weights();

    // E[g^2 log g^2] and E[g^2] of a noisy g pick up (log g^2 + 3) var and var.
    auto statistic = [&](const std::vector<std::size_t>& members) {
        double total = 0.0;
        double a = 0.0;
        double b = 0.0;
        for (std::size_t i : members)
        {
            const double g = inner[i].value;
            const double v = inner[i].std_error * inner[i].std_error;
            const double g2 = g * g;
            const double correction = v > 0.0 ? (std::log(std::max(g2, v)) + 3.0) * v : 0.0;
            total += w[i];
            a += w[i] * (plog(g2) - correction);
            b += w[i] * (g2 - v);
        }
        a /= total;
        b /= total;
        return a - plog(b);
    };

    std::vector<std::size_t> all(w.size());
    for (std::size_t i = 0; i < all.size(); ++i)
    {
        all[i] = i;
    }
    return {statistic(all), batch_std_error(w, statistic)};
}

//---------------------------------------------------------------------------//
// Wasserstein
//---------------------------------------------------------------------------//

double wasserstein_1d(double p, const std::vector<double>& a_values,
                      const std::vector<double>& a_weights, const std::vector<double>& b_values,
                      const std::vector<double>& b_weights)
{
    if (!(p >= 1.0) || !std::isfinite(p))
    {
        throw DomainError(fmt::format("Wasserstein order p = {} must be >= 1", p));
    }
    if (a_values.size() != a_weights.size() || b_values.size() != b_weights.size()
        || a_values.empty() || b_values.empty())
    {
        throw DomainError("Wasserstein inputs need matching, nonempty values and weights");
    }
    if (!std::is_sorted(a_values.begin(), a_values.end())
        || !std::is_sorted(b_values.begin(), b_values.end()))
    {
        throw DomainError("Wasserstein inputs must be sorted by value");
    }
    double ta = 0.0;
    double tb = 0.0;
    for (double x : a_weights)
    {
        ta += x;
    }
    for (double x : b_weights)
    {
        tb += x;
    }
    if (std::abs(ta - tb) > 1e-12 * std::max(ta, tb))
    {
        throw DomainError(fmt::format("total weights differ: {} vs {}", ta, tb));
    }

    std::size_t i = 0;
    std::size_t j = 0;
    double ca = a_weights[0];
    double cb = b_weights[0];
    double u = 0.0;
    double cost = 0.0;
    while (i < a_values.size() && j < b_values.size())
    {
        const double next = std::min(ca, cb);
        cost += (next - u) * std::pow(std::abs(a_values[i] - b_values[j]), p);
        u = next;
        if (ca == next && ++i < a_values.size())
        {
            ca += a_weights[i];
        }
        if (cb == next && ++j < b_values.size())
        {
            cb += b_weights[j];
        }
    }
    cost /= ta;
    return p == 1.0 ? cost : std::pow(cost, 1.0 / p);
}

double wasserstein_1d(double p, const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                      const ScalarFn& chart)
{
    if (chart)
    {
        const EmpiricalMeasure ma = a.map(chart);
        const EmpiricalMeasure mb = b.map(chart);
        return wasserstein_1d(p, ma.values(), ma.weights(), mb.values(), mb.weights());
    }
    return wasserstein_1d(p, a.values(), a.weights(), b.values(), b.weights());
}

//---------------------------------------------------------------------------//
// Energy
//---------------------------------------------------------------------------//

Estimate energy_W(const Model& model, const TestFunction& f, const EmpiricalMeasure& mu_hat,
                  double t, double h, std::size_t inner_n, const RandomStream& rng,
                  unsigned workers)
{
    require_inner(inner_n);
    if (!(h > 0.0))
    {
        throw DomainError(fmt::format("bump h = {} must be positive", h));
    }
    const auto& xs = mu_hat.values();
    const auto& w = mu_hat.weights();
    const std::size_t n = xs.size();
    std::vector<double> terms(n);

    if (t == 0.0)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            const double d = f.df(xs[i]);
            terms[i] = model.weight(xs[i]) * d * d;
        }
    }
    else
    {
        parallel_for(n, workers, [&](std::size_t i) {
            const double x = xs[i];
            double bump = std::min(h, 0.5 * (x - model.domain_low));
            Estimate g;
            if (bump > 0.0)
            {
                g = gradient_semigroup_estimate(model, f.f, x, t, bump, inner_n, rng.substream(i),
                                                1);
            }
            else
            {
                // Atom on the lower boundary: coupled forward difference.
                bump = h;
                const RandomStream base = rng.substream(i);
                std::vector<double> diffs(inner_n);
                for (std::size_t k = 0; k < inner_n; ++k)
                {
                    RandomStream up = base.substream(k);
                    RandomStream here = up;
                    diffs[k] = (f.f(simulate_endpoint(model, x + bump, t, up))
                                - f.f(simulate_endpoint(model, x, t, here)))
                               / bump;
                }
                g = mean_and_error(diffs);
            }
            terms[i] = model.weight(x) * (g.value * g.value - g.std_error * g.std_error);
        });
    }

    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        value += w[i] * terms[i];
    }
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        spread += w[i] * w[i] * (terms[i] - value) * (terms[i] - value);
    }
    return {value, std::sqrt(spread)};
}

//---------------------------------------------------------------------------//
// Decay fits
//---------------------------------------------------------------------------//

DecayFit fit_decay_rate(const std::vector<DecayPoint>& series, double max_relative_error)
{
    for (std::size_t k = 1; k < series.size(); ++k)
    {
        if (!(series[k].t > series[k - 1].t))
        {
            throw DomainError("decay series times must be strictly increasing");
        }
    }

    DecayFit fit;
    std::vector<double> rel;
    for (const auto& pt : series)
    {
        if (!(pt.value > 0.0) || !std::isfinite(pt.value) || !(pt.std_error >= 0.0))
        {
            continue;
        }
        const double r = pt.std_error / pt.value;
        if (r > max_relative_error)
        {
            continue;
        }
        fit.times.push_back(pt.t);
        fit.log_values.push_back(std::log(pt.value));
        rel.push_back(r);
    }
    const std::size_t n = fit.times.size();
    if (n < 3)
    {
        throw EstimationError(fmt::format("decay fit needs 3 usable points, found {}", n));
    }

    // Exact points dominate noisy ones; with no noise at all the fit is unweighted.
    double smallest = 0.0;
    for (double r : rel)
    {
        if (r > 0.0 && (smallest == 0.0 || r < smallest))
        {
            smallest = r;
        }
    }
    const bool known_errors = smallest > 0.0;
    std::vector<double> wt(n, 1.0);
    if (known_errors)
    {
        for (std::size_t k = 0; k < n; ++k)
        {
            const double r = rel[k] > 0.0 ? rel[k] : 1e-3 * smallest;
            wt[k] = 1.0 / (r * r);
        }
    }

    double sw = 0.0;
    double st = 0.0;
    double sy = 0.0;
    for (std::size_t k = 0; k < n; ++k)
    {
        sw += wt[k];
        st += wt[k] * fit.times[k];
        sy += wt[k] * fit.log_values[k];
    }
    const double tbar = st / sw;
    const double ybar = sy / sw;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t k = 0; k < n; ++k)
    {
        const double dt = fit.times[k] - tbar;
        const double dy = fit.log_values[k] - ybar;
        sxx += wt[k] * dt * dt;
        sxy += wt[k] * dt * dy;
        syy += wt[k] * dy * dy;
    }
    const double slope = sxy / sxx;
    fit.fitted_rate = -slope;
    fit.fitted_intercept = ybar - slope * tbar;

    double rss = 0.0;
    for (std::size_t k = 0; k < n; ++k)
    {
        const double resid = fit.log_values[k] - (fit.fitted_intercept + slope * fit.times[k]);
        rss += wt[k] * resid * resid;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
    const double reduced = rss / static_cast<double>(n - 2);
    fit.rate_std_error = known_errors ? std::sqrt(std::max(1.0, reduced) / sxx)
                                      : std::sqrt(reduced / sxx);
    return fit;
}

//---------------------------------------------------------------------------//
// Inequality ratios
//---------------------------------------------------------------------------//

InequalityRatio empirical_inequality_ratio(const EmpiricalMeasure& mu_hat,
                                           const std::vector<TestFunction>& family,
                                           const ScalarFn& weight, double p)
{
    if (family.empty())
    {
        throw DomainError("inequality ratio needs a nonempty test-function family");
    }
    const auto& xs = mu_hat.values();
    const auto& w = mu_hat.weights();
    const std::size_t n = xs.size();
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        a[i] = weight ? weight(xs[i]) : 1.0;
    }

    InequalityRatio best;
    bool first = true;
    for (const auto& tf : family)
    {
        std::vector<double> fx(n);
        std::vector<double> energy(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            fx[i] = tf.f(xs[i]);
            const double d = tf.df(xs[i]);
            energy[i] = a[i] * d * d;
        }
        auto ratio = [&](const std::vector<std::size_t>& members) {
            std::vector<double> fv;
            std::vector<double> wv;
            double den = 0.0;
            double total = 0.0;
            for (std::size_t i : members)
            {
                fv.push_back(fx[i]);
                wv.push_back(w[i]);
                den += w[i] * energy[i];
                total += w[i];
            }
            den /= total;
            if (!(den > 1e-300))
            {
                throw EstimationError(fmt::format(
                    "degenerate energy {} for test function '{}'", den, tf.label));
            }
            return entropy_p(fv, wv, p) / den;
        };
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            all[i] = i;
        }
        const double value = ratio(all);
        if (first || value > best.value)
        {
            best.value = value;
            best.std_error = batch_std_error(w, ratio);
            best.witness = tf.label;
            first = false;
        }
    }
    return best;
}

}  // namespace pdmp::estimators
