#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>

#include "pdmp/certificates.hpp"
#include "pdmp/cli.hpp"
#include "pdmp/embedded.hpp"
#include "pdmp/estimators.hpp"
#include "pdmp/models.hpp"
#include "pdmp/parallel.hpp"

namespace pdmp::cli
{
namespace
{
using certificates::Ledger;
using embedded::EmpiricalMeasure;
using estimators::DecayPoint;

// Fixed substream indices of the master seed.
enum Stream : std::uint64_t
{
    chain_stream = 1,
    reconstruct_stream = 2,
    time_average_stream = 3,
    nested_stream = 4,
    coupling_stream = 5,
    gradient_stream = 6,
    path_stream = 7,
    bootstrap_stream = 8,
};

struct SeriesRow
{
    std::string series;
    double t;
    double value;
    double std_error;
};

struct Outputs
{
    std::vector<SeriesRow> series;
    std::optional<EmpiricalMeasure> measure;
    Ledger ledger;
    std::vector<std::string> assertions;
    std::vector<std::string> notes;
    std::string stage = "setup";

    void check(bool ok, const std::string& name, const std::string& detail,
               const std::string& anchor)
    {
        assertions.push_back(
            fmt::format("{} {}: {} [{}]", ok ? "PASS" : "FAIL", name, detail, anchor));
    }
    void add_series(const std::string& name, const std::vector<DecayPoint>& pts)
    {
        for (const auto& p : pts)
        {
            series.push_back({name, p.t, p.value, p.std_error});
        }
    }
    void note_fit(const std::string& name, const estimators::DecayFit& fit)
    {
        notes.push_back(fmt::format("fit {}: {{\"rate\": {:.17g}, \"rate_se\": {:.17g}, \"r2\": {:.17g}}}",
                                    name, fit.fitted_rate, fit.rate_std_error, fit.r_squared));
    }
};

//---------------------------------------------------------------------------//
// Models from the config
//---------------------------------------------------------------------------//

models::TcpIncreasingParams increasing_params(const RunConfig& c)
{
    const double lam = c.lambda;
    const double q = c.rate_exponent;
    models::TcpIncreasingParams p;
    p.rate = [lam, q](double x) { return lam * std::pow(1.0 + x, q); };
    p.rate_derivative = [lam, q](double x) { return lam * q * std::pow(1.0 + x, q - 1.0); };
    p.kappa = c.kappa > 0.0 ? c.kappa : q;
    p.delta = c.delta;
    p.cum_rate = [lam, q](double x, double t) {
        return lam * (std::pow(1.0 + x + t, q + 1.0) - std::pow(1.0 + x, q + 1.0)) / (q + 1.0);
    };
    p.inv_cum_rate = [lam, q](double x, double u) {
        const double base = std::pow(1.0 + x, q + 1.0) + (q + 1.0) * u / lam;
        return std::max(0.0, std::pow(base, 1.0 / (q + 1.0)) - 1.0 - x);
    };
    return p;
}

Model build_model(const RunConfig& c)
{
    if (c.model == "tcp_constant")
    {
        return models::make_tcp_constant({c.lambda, models::JumpFactor::deterministic(c.delta)});
    }
    if (c.model == "tcp_linear")
    {
        return models::make_tcp_linear({c.delta});
    }
    if (c.model == "tcp_increasing")
    {
        return models::make_tcp_increasing(increasing_params(c));
    }
    return models::make_storage(models::StorageParams::exponential_increments(c.lambda,
                                                                              c.increment_mean));
}

double inequality_p(const RunConfig& c)
{
    if (c.p != 0.0)
    {
        return c.p;
    }
    return c.model == "tcp_linear" ? 1.0 : 2.0;
}

std::vector<estimators::TestFunction> functions_of(const std::vector<std::string>& labels)
{
    if (labels.empty())
    {
        return estimators::default_family();
    }
    std::vector<estimators::TestFunction> out;
    for (const auto& l : labels)
    {
        out.push_back(estimators::test_function(l));
    }
    return out;
}

EmpiricalMeasure chain_sample(const Model& model, const RunConfig& c, std::size_t n,
                              const RandomStream& master)
{
    embedded::ChainOptions o;
    o.n = n;
    o.burn_in = c.burn_in;
    o.thinning = c.thinning;
    o.chains = c.chains;
    o.workers = c.workers;
    return embedded::chain_invariant_sample(model, o, master.substream(chain_stream));
}

EmpiricalMeasure mu_sample(const Model& model, const RunConfig& c, std::size_t n,
                           const RandomStream& master)
{
    return embedded::reconstruct_mu(model, chain_sample(model, c, n, master),
                                    master.substream(reconstruct_stream), c.workers);
}

std::string fmt_num(double v)
{
    return fmt::format("{:.6g}", v);
}

void check_relative(Outputs& o, const std::string& name, double value, double target,
                    double tol, const std::string& anchor)
{
    const bool ok = std::abs(value - target) <= tol * std::abs(target);
    o.check(ok, name,
            fmt::format("value {} vs target {} (relative tolerance {})", fmt_num(value),
                        fmt_num(target), tol),
            anchor);
}

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//

void run_simulate(const RunConfig& c, const Model& model, const RandomStream& master, Outputs& o)
{
    o.stage = "embedded chain";
    embedded::ChainOptions chain_opts;
    chain_opts.n = c.chain_length;
    chain_opts.burn_in = c.burn_in;
    chain_opts.thinning = c.thinning;
    chain_opts.chains = c.chains;
    chain_opts.workers = c.workers;
    // Ordered paths keep the autocorrelation visible to the batch-means errors.
    const std::vector<double> chain_values =
        embedded::chain_path(model, chain_opts, master.substream(chain_stream));
    const EmpiricalMeasure chain(chain_values, embedded::Provenance::chain);
    o.stage = "reconstruction";
    auto atoms = embedded::reconstruct_atoms(model, chain_values, {},
                                             master.substream(reconstruct_stream), c.workers);
    o.stage = "trajectory time average";
    embedded::TimeAverageOptions ta_opts;
    ta_opts.n = c.chain_length;
    ta_opts.chains = c.chains;
    ta_opts.workers = c.workers;
    const std::vector<double> ta_values =
        embedded::time_average_path(model, ta_opts, master.substream(time_average_stream));
    const EmpiricalMeasure mu(atoms.values, atoms.weights, embedded::Provenance::reweighted);
    const EmpiricalMeasure ta(ta_values, embedded::Provenance::trajectory_time_average);

    auto id = [](double x) { return x; };
    auto sq = [](double x) { return x * x; };
    auto& l = o.ledger;
    const Estimate mu_mean = embedded::batch_means(atoms.values, atoms.weights, id);
    const Estimate ta_mean = embedded::batch_means(ta_values, {}, id);
    l.add("chain.mean", chain.mean(), "embedded chain sample");
    l.add("chain.second_moment", chain.moment(2), "embedded chain sample");
    l.add("mu.mean", mu_mean.value, "chain law reweighted by h and moved by the size-biased kernel");
    l.add("mu.mean_se", mu_mean.std_error, "batch means over the chain order");
    l.add("mu.second_moment", mu.moment(2), "reconstructed invariant law");
    l.add("time_average.mean", ta_mean.value, "long-trajectory time average");
    l.add("time_average.mean_se", ta_mean.std_error, "batch means over time");
    l.add("time_average.second_moment", ta.moment(2), "long-trajectory time average");
    o.stage = "normalizer";
    const Estimate norm = embedded::normalizer_estimate(model, chain,
                                                        master.substream(bootstrap_stream), 50);
    l.add("normalizer", norm.value, "chain-law mean of h, the mean inter-jump time");
    l.add("normalizer_se", norm.std_error, "bootstrap over chain atoms");

    o.stage = "two-estimator consistency";
    for (auto [f, label] : {std::pair{ScalarFn(id), "mean"}, std::pair{ScalarFn(sq), "second moment"}})
    {
        const Estimate a = embedded::batch_means(atoms.values, atoms.weights, f);
        const Estimate b = embedded::batch_means(ta_values, {}, f);
        const double tol = std::max(3.0 * std::hypot(a.std_error, b.std_error),
                                    0.02 * std::abs(b.value));
        o.check(std::abs(a.value - b.value) <= tol,
                fmt::format("reconstruction vs time average ({})", label),
                fmt::format("{} vs {}, allowed gap {}", fmt_num(a.value), fmt_num(b.value),
                            fmt_num(tol)),
                "the invariant law equals the chain law pushed through the size-biased kernel");
    }

    if (c.model == "tcp_constant")
    {
        const models::TcpConstantParams p{c.lambda, models::JumpFactor::deterministic(c.delta)};
        check_relative(o, "chain mean", chain.mean(), models::tcp_constant_invariant_moments(p, 1),
                       0.02, "chain fixed point Z = delta (Z + E / lambda)");
        check_relative(o, "invariant mean", mu.mean(), 1.0 / (c.lambda * (1.0 - c.delta)), 0.02,
                       "invariant law is the chain law plus an Exp(lambda) time");
    }
    else if (c.model == "tcp_linear")
    {
        const double d2 = c.delta * c.delta;
        check_relative(o, "chain second moment identity", (1.0 - d2) * chain.moment(2), 2.0 * d2,
                       0.02, "chain fixed point Y = delta sqrt(Y^2 + 2E)");
    }
    else if (c.model == "storage")
    {
        const double target = c.lambda * c.increment_mean;
        const double tol = std::max(3.0 * ta_mean.std_error, 0.02 * target);
        o.check(std::abs(ta_mean.value - target) <= tol, "invariant mean",
                fmt::format("time average {} vs {}, allowed gap {}", fmt_num(ta_mean.value),
                            fmt_num(target), fmt_num(tol)),
                "stationary balance of drift -x against jump input lambda E[U]");
    }

    o.stage = "sample trajectory";
    RandomStream path_rng = master.substream(path_stream);
    const Trajectory path = simulate_path(model, 0.0, std::max(20.0, c.times.back()), path_rng);
    for (const auto& e : path.events)
    {
        o.series.push_back({"pre_jump_state", e.time, e.pre_jump_state, 0.0});
        o.series.push_back({"post_jump_state", e.time, e.post_jump_state, 0.0});
    }
    o.measure = mu;
}

//---------------------------------------------------------------------------//
// certify
//---------------------------------------------------------------------------//

certificates::BalanceSpec balance_spec(const RunConfig& c, const Model& model)
{
    certificates::BalanceSpec s;
    s.rate = model.rate;
    s.jump_gradient_bound = model.jump_gradient_bound;
    s.drift = model.drift;
    s.weight = model.weight;
    if (c.model == "storage")
    {
        s.drift_jacobian = [](double) { return -1.0; };
        s.rate_derivative = [](double) { return 0.0; };
        s.grid = certificates::log_grid(1e-3, 50.0);
    }
    else if (c.model == "tcp_constant")
    {
        s.rate_derivative = [](double) { return 0.0; };
        s.grid = certificates::log_grid(1e-3, 50.0);
    }
    else if (c.model == "tcp_linear")
    {
        s.rate_derivative = [](double) { return 1.0; };
        s.weight_derivative = models::tcp_linear_weight_derivative;
        s.grid = certificates::log_grid(1e-3, 50.0);
        s.anchors = {std::log(0.5 * (3.0 + std::sqrt(5.0)))};
    }
    else
    {
        const auto p = increasing_params(c);
        s.rate_derivative = p.rate_derivative;
        s.grid = certificates::log_grid(1e-3, 50.0);
        s.grid.insert(s.grid.begin(), 0.0);
    }
    return s;
}

void run_certify(const RunConfig& c, const Model& model, const RandomStream& master, Outputs& o)
{
    const auto spec = balance_spec(c, model);
    if (c.model == "tcp_constant")
    {
        o.stage = "constant-rate certificate";
        auto cert = certificates::certify_tcp_constant(c.lambda, c.delta);
        const double closed = 4.0 / (c.lambda * c.lambda * (1.0 - c.delta * c.delta));
        const double eta = certificates::balance_eta(spec, std::nullopt);
        cert.ledger.add("balance_eta_grid", eta, "grid infimum of the balance expression");
        o.check(std::abs(cert.poincare_c - closed) <= 1e-12 * closed, "Poincare constant",
                fmt::format("profile algebra {} vs closed form {}", fmt_num(cert.poincare_c),
                            fmt_num(closed)),
                "invariant law satisfies Poincare with 4/(lambda^2 (1-delta^2))");
        o.check(std::abs(eta - cert.gradient_rate) <= 1e-12 * cert.gradient_rate,
                "gradient rate",
                fmt::format("grid balance {} vs lambda(1-delta^2) = {}", fmt_num(eta),
                            fmt_num(cert.gradient_rate)),
                "gradient sub-commutation with J_b = 0, M = E[R^2]");
        o.ledger = cert.ledger;
    }
    else if (c.model == "tcp_linear")
    {
        o.stage = "linear-rate certificate";
        std::optional<EmpiricalMeasure> chain;
        certificates::TcpLinearOptions opts;
        if (c.chain_length > 1)
        {
            chain = chain_sample(model, c, c.chain_length, master);
            opts.chain_sample = &*chain;
        }
        auto cert = certificates::certify_tcp_linear(c.delta, opts);
        const double eta_major = (1.0 - c.delta) * cert.theta - 1.0 / cert.beta_opt;
        const double eta = certificates::balance_eta(spec, cert.beta_opt);
        cert.ledger.add("balance_eta_grid", eta, "exact balance expression, grid infimum");
        o.check(std::isfinite(cert.entropy_c) && cert.entropy_c > 0.0, "entropy constant",
                fmt::format("c = {}", fmt_num(cert.entropy_c)), "entropy decays at an explicit rate");
        o.check(cert.rate_r > 0.0 && cert.rate_r < (1.0 - c.delta) * cert.theta, "entropy rate",
                fmt::format("r = {} in (0, {})", fmt_num(cert.rate_r),
                            fmt_num((1.0 - c.delta) * cert.theta)),
                "entropy decays at an explicit rate");
        o.check(eta >= eta_major - 1e-12, "balance majorant",
                fmt::format("grid infimum {} >= (1-delta) theta - 1/beta = {}", fmt_num(eta),
                            fmt_num(eta_major)),
                "weighted balance bounded below through theta");
        if (chain)
        {
            const auto& l = cert.ledger;
            o.check(l.value("empirical.mu_e(h)") <= l.value("normalizer_upper"),
                    "normalizer bound", fmt::format("{} <= {}", fmt_num(l.value("empirical.mu_e(h)")),
                                                    fmt_num(l.value("normalizer_upper"))),
                    "h is nonincreasing");
            o.check(l.value("empirical.mu_e(1/h)") <= l.value("h_ratio_bound")
                        && l.value("empirical.h0/h(median)") <= l.value("h_ratio_bound"),
                    "h ratio bounds",
                    fmt::format("mu_e(1/h) = {}, h(0)/h(m) = {} <= {}",
                                fmt_num(l.value("empirical.mu_e(1/h)")),
                                fmt_num(l.value("empirical.h0/h(median)")),
                                fmt_num(l.value("h_ratio_bound"))),
                    "bounds on h(0)/h(m_e) and mu_e(1/h)");
        }
        o.ledger = cert.ledger;
    }
    else if (c.model == "tcp_increasing")
    {
        o.stage = "increasing-rate certificate";
        const auto p = increasing_params(c);
        Ledger ledger;
        const auto cert = certificates::certify_tcp_increasing(
            c.lambda, c.delta, p.kappa, [&](double x) { return embedded::h_function(model, x); },
            &ledger);
        const double eta = certificates::balance_eta(spec, cert.beta);
        ledger.add("balance_eta_grid", eta, "exact balance expression, grid infimum");
        o.check(std::abs(cert.decay_rate * cert.prefactor - cert.eta) <= 1e-12 * cert.eta,
                "rate identity", "decay_rate * prefactor = eta",
                "W_t + beta V_t decays at eta/(1 + beta c)");
        o.check(eta >= cert.eta - 1e-12, "balance bound",
                fmt::format("grid infimum {} >= lambda_star(1-delta^2)/2 = {}", fmt_num(eta),
                            fmt_num(cert.eta)),
                "log-Lipschitz rate balance");
        o.ledger = ledger;
    }
    else
    {
        o.stage = "storage certificate";
        const double eta = certificates::balance_eta(spec, std::nullopt);
        o.ledger.add("lambda", c.lambda, "input");
        o.ledger.add("J_b", -1.0, "drift -x");
        o.ledger.add("M", 1.0, "translation jumps preserve gradients");
        o.ledger.add("gradient_rate", eta, "grid infimum of the balance expression");
        o.check(std::abs(eta - 2.0) <= 1e-12, "gradient rate",
                fmt::format("grid balance {} vs 2", fmt_num(eta)),
                "storage model gradient decays as e^{-2t}");
    }
}

//---------------------------------------------------------------------------//
// verify
//---------------------------------------------------------------------------//

// W1 between the laws started at a and b, with common random numbers per pair.
std::vector<DecayPoint> coupled_w1(const Model& model, const RunConfig& c, const RandomStream& base)
{
    std::vector<DecayPoint> out;
    for (double t : c.times)
    {
        const std::size_t n = c.coupling_n;
        std::vector<double> a(n), b(n), dist(n);
        parallel_for(n, c.workers, [&](std::size_t k) {
            RandomStream s = base.substream(k);
            RandomStream s2 = s;
            a[k] = simulate_endpoint(model, c.start_a, t, s);
            b[k] = simulate_endpoint(model, c.start_b, t, s2);
            dist[k] = std::abs(a[k] - b[k]);
        });
        const EmpiricalMeasure ma(a, embedded::Provenance::trajectory_time_average);
        const EmpiricalMeasure mb(b, embedded::Provenance::trajectory_time_average);
        out.push_back({t, estimators::wasserstein_1d(1.0, ma, mb), mean_and_error(dist).std_error});
    }
    return out;
}

void run_verify(const RunConfig& c, const Model& model, const RandomStream& master, Outputs& o)
{
    const auto fns = functions_of(c.functions);
    if (c.model == "tcp_constant")
    {
        o.stage = "Wasserstein decay";
        const auto w1 = coupled_w1(model, c, master.substream(coupling_stream));
        o.add_series("W1", w1);
        const auto fit = estimators::fit_decay_rate(w1, c.max_relative_error);
        o.note_fit("W1", fit);
        const double optimal = c.lambda * (1.0 - c.delta);
        const double certified = 0.5 * c.lambda * (1.0 - c.delta * c.delta);
        o.ledger.add("W1.rate", fit.fitted_rate, "weighted log-linear fit");
        o.ledger.add("W1.rate_se", fit.rate_std_error, "weighted log-linear fit");
        check_relative(o, "W1 rate vs optimal", fit.fitted_rate, optimal, 0.10,
                       "Wasserstein rate lambda(1-delta) is optimal");
        o.check(fit.fitted_rate >= certified - 3.0 * fit.rate_std_error, "W1 rate vs certificate",
                fmt::format("{} >= {} - 3 se", fmt_num(fit.fitted_rate), fmt_num(certified)),
                "Wasserstein contraction at half the gradient rate");

        o.stage = "gradient sub-commutation";
        const double eta = c.lambda * (1.0 - c.delta * c.delta);
        for (const auto& tf : fns)
        {
            for (double x : {0.5, 1.0, 2.0})
            {
                for (double t : c.times)
                {
                    if (t == 0.0)
                    {
                        continue;
                    }
                    const RandomStream s = master.substream(gradient_stream);
                    const Estimate g = gradient_semigroup_estimate(
                        model, tf.f, x, t, c.bump * std::max(1.0, x), c.coupling_n, s, c.workers);
                    const Estimate e = semigroup_estimate(
                        model, [&](double y) { return tf.df(y) * tf.df(y); }, x, t, c.coupling_n,
                        s, c.workers);
                    const double lhs = g.value * g.value;
                    const double rhs = std::exp(-eta * t) * e.value;
                    const double se = std::hypot(2.0 * std::abs(g.value) * g.std_error,
                                                 std::exp(-eta * t) * e.std_error);
                    o.check(lhs <= rhs + 3.0 * se,
                            fmt::format("gradient bound f={} x={} t={}", tf.label, x, t),
                            fmt::format("{} <= {} + 3 * {}", fmt_num(lhs), fmt_num(rhs),
                                        fmt_num(se)),
                            "|(P_t f)'|^2 <= e^{-lambda(1-delta^2) t} P_t |f'|^2");
                }
            }
        }

        o.stage = "variance decay";
        const EmpiricalMeasure mu = mu_sample(model, c, c.outer_n, master);
        const auto cert = certificates::certify_tcp_constant(c.lambda, c.delta);
        for (const auto& tf : fns)
        {
            std::vector<DecayPoint> v;
            const double energy = mu.expect([&](double y) { return tf.df(y) * tf.df(y); });
            for (double t : c.times)
            {
                const Estimate e = estimators::variance_of_semigroup(
                    model, tf.f, mu, t, c.inner_n, master.substream(nested_stream), c.workers);
                v.push_back({t, e.value, e.std_error});
                const double bound = cert.l2_prefactor * std::exp(-cert.l2_rate * t) * energy;
                o.check(e.value <= bound + 3.0 * e.std_error,
                        fmt::format("variance bound f={} t={}", tf.label, t),
                        fmt::format("{} <= {} + 3 * {}", fmt_num(e.value), fmt_num(bound),
                                    fmt_num(e.std_error)),
                        "variance of P_t f <= c e^{-lambda(1-delta^2) t} mu(f'^2)");
            }
            o.add_series("V_" + tf.label, v);
        }
        o.measure = mu;
    }
    else if (c.model == "storage")
    {
        o.stage = "coupling contraction";
        const double gap = c.start_b - c.start_a;
        double worst = 0.0;
        std::vector<DecayPoint> dist_series;
        for (double t : c.times)
        {
            const std::size_t n = std::min<std::size_t>(c.coupling_n, 10'000);
            std::vector<double> ulps(n);
            parallel_for(n, c.workers, [&](std::size_t k) {
                RandomStream s = master.substream(coupling_stream).substream(k);
                RandomStream s2 = s;
                const double xb = simulate_endpoint(model, c.start_b, t, s2);
                const double xa = simulate_endpoint(model, c.start_a, t, s);
                // Deviation in units of the rounding error of the states being subtracted.
                const double scale = std::numeric_limits<double>::epsilon()
                                     * std::max({std::abs(xa), std::abs(xb), 1e-300});
                ulps[k] = std::abs((xb - xa) - gap * std::exp(-t)) / scale;
            });
            worst = std::max(worst, *std::max_element(ulps.begin(), ulps.end()));
            dist_series.push_back({t, std::abs(gap) * std::exp(-t), 0.0});
        }
        o.add_series("coupling_distance", dist_series);
        o.ledger.add("coupling.max_ulp_deviation", worst, "coupled paths vs (b - a) e^{-t}, in ulps of the state");
        o.check(worst <= 64.0, "coupling distance",
                fmt::format("max deviation from (b-a) e^-t is {} ulps of the state (limit 64)", fmt_num(worst)),
                "synchronous coupling contracts exactly at rate 1");

        o.stage = "energy decay";
        embedded::TimeAverageOptions ta;
        ta.n = c.outer_n;
        ta.workers = c.workers;
        const EmpiricalMeasure mu =
            embedded::time_average_sample(model, ta, master.substream(time_average_stream));
        for (const auto& tf : fns)
        {
            std::vector<DecayPoint> w;
            for (double t : c.times)
            {
                const Estimate e = estimators::energy_W(model, tf, mu, t, c.bump, c.inner_n,
                                                        master.substream(nested_stream), c.workers);
                w.push_back({t, e.value, e.std_error});
            }
            o.add_series("W_" + tf.label, w);
            const auto fit = estimators::fit_decay_rate(w, c.max_relative_error);
            o.note_fit("W_" + tf.label, fit);
            o.ledger.add("W_" + tf.label + ".rate", fit.fitted_rate, "weighted log-linear fit");
            if (tf.label == "x")
            {
                o.check(std::abs(fit.fitted_rate - 2.0) <= 1e-3, "W_t rate f=x",
                        fmt::format("fitted {} vs 2", fmt_num(fit.fitted_rate)),
                        "|(P_t f)'|^2 <= e^{-2t} P_t |f'|^2, equality for f = x");
            }
            else
            {
                o.check(fit.fitted_rate >= 2.0 - 3.0 * fit.rate_std_error,
                        fmt::format("W_t rate f={}", tf.label),
                        fmt::format("fitted {} >= 2 - 3 se", fmt_num(fit.fitted_rate)),
                        "|(P_t f)'|^2 <= e^{-2t} P_t |f'|^2");
            }
        }
        o.measure = mu;
    }
    else if (c.model == "tcp_linear")
    {
        o.stage = "linear-rate certificate";
        const auto cert = certificates::certify_tcp_linear(c.delta);
        o.ledger = cert.ledger;
        o.stage = "entropy decay";
        const EmpiricalMeasure mu = mu_sample(model, c, c.outer_n, master);
        for (const auto& tf : fns)
        {
            std::vector<DecayPoint> ent;
            const double energy = mu.expect([&](double y) { return tf.df(y) * tf.df(y); });
            for (double t : c.times)
            {
                const Estimate e = estimators::entropy_of_semigroup(
                    model, tf.f, mu, t, c.inner_n, master.substream(nested_stream), c.workers);
                ent.push_back({t, e.value, e.std_error});
                const double bound = cert.entropy_c * std::exp(-cert.rate_r * t) * energy;
                o.check(e.value <= bound + 3.0 * e.std_error,
                        fmt::format("entropy bound f={} t={}", tf.label, t),
                        fmt::format("{} <= {} + 3 * {}", fmt_num(e.value), fmt_num(bound),
                                    fmt_num(e.std_error)),
                        "Ent(P_t f) <= c e^{-rt} mu(f'^2)");
            }
            o.add_series("Ent_" + tf.label, ent);
        }
        o.measure = mu;
    }
    else
    {
        o.stage = "increasing-rate certificate";
        const auto p = increasing_params(c);
        const auto cert = certificates::certify_tcp_increasing(
            c.lambda, c.delta, p.kappa, [&](double x) { return embedded::h_function(model, x); },
            &o.ledger);
        o.stage = "H1 decay";
        const EmpiricalMeasure mu = mu_sample(model, c, c.outer_n, master);
        for (const auto& tf : fns)
        {
            std::vector<DecayPoint> h1;
            double start = 0.0;
            for (double t : c.times)
            {
                const Estimate w = estimators::energy_W(model, tf, mu, t, c.bump, c.inner_n,
                                                        master.substream(gradient_stream),
                                                        c.workers);
                const Estimate v = estimators::variance_of_semigroup(
                    model, tf.f, mu, t, c.inner_n, master.substream(nested_stream), c.workers);
                const double value = w.value + cert.beta * v.value;
                const double se = std::hypot(w.std_error, cert.beta * v.std_error);
                h1.push_back({t, value, se});
                if (t == c.times.front())
                {
                    start = value;
                }
                const double bound = start * std::exp(-cert.decay_rate * (t - c.times.front()));
                o.check(value <= bound + 3.0 * se,
                        fmt::format("H1 bound f={} t={}", tf.label, t),
                        fmt::format("{} <= {} + 3 * {}", fmt_num(value), fmt_num(bound),
                                    fmt_num(se)),
                        "W_t + beta V_t <= (W_0 + beta V_0) e^{-eta t/(1 + beta c)}");
            }
            o.add_series("H1_" + tf.label, h1);
        }
        o.measure = mu;
    }
}

//---------------------------------------------------------------------------//
// inequality
//---------------------------------------------------------------------------//

void run_inequality(const RunConfig& c, const Model& model, const RandomStream& master, Outputs& o)
{
    const double p = inequality_p(c);
    o.stage = "invariant law";
    const EmpiricalMeasure mu = mu_sample(model, c, c.chain_length, master);
    o.stage = "inequality ratio";
    const auto family = functions_of(c.family);
    const auto ratio = estimators::empirical_inequality_ratio(mu, family, model.weight, p);
    o.ledger.add("p", p, "Beckner exponent");
    o.ledger.add("ratio", ratio.value, "max over the family, witness " + ratio.witness);
    o.ledger.add("ratio_se", ratio.std_error, "interleaved atom batches");

    std::optional<double> certified;
    std::string anchor;
    if (c.model == "tcp_constant" && p == 2.0)
    {
        certified = certificates::certify_tcp_constant(c.lambda, c.delta).poincare_c;
        anchor = "invariant law satisfies Poincare with 4/(lambda^2 (1-delta^2))";
    }
    else if (c.model == "tcp_linear")
    {
        certified = certificates::certify_tcp_linear(c.delta).weighted_logsob_c;
        anchor = "weighted log-Sobolev inequality for the linear-rate invariant law";
    }
    else if (c.model == "tcp_increasing" && p == 2.0)
    {
        const auto q = increasing_params(c);
        certified = certificates::certify_tcp_increasing(
                        c.lambda, c.delta, q.kappa,
                        [&](double x) { return embedded::h_function(model, x); })
                        .poincare_c;
        anchor = "Poincare inequality for increasing rates";
    }
    if (certified)
    {
        o.ledger.add("certified_c", *certified, anchor);
        o.check(ratio.value <= *certified + 3.0 * ratio.std_error, "empirical ratio",
                fmt::format("{} (witness {}) <= {} + 3 * {}", fmt_num(ratio.value), ratio.witness,
                            fmt_num(*certified), fmt_num(ratio.std_error)),
                anchor);
    }
    else
    {
        o.notes.push_back(fmt::format("no certified constant for model {} at p = {}", c.model, p));
    }
    o.measure = mu;
}

//---------------------------------------------------------------------------//
// Output
//---------------------------------------------------------------------------//

void write_outputs(const RunConfig& c, const std::filesystem::path& dir, const Outputs& o)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "series.csv");
        f << "series,t,value,std_error\n";
        for (const auto& r : o.series)
        {
            fmt::print(f, "{},{:.17g},{:.17g},{:.17g}\n", r.series, r.t, r.value, r.std_error);
        }
    }
    {
        std::ofstream f(dir / "measure.csv");
        if (o.measure)
        {
            o.measure->write_csv(f);
        }
        else
        {
            f << "value,weight\n";
        }
    }
    {
        std::ofstream f(dir / "ledger.csv");
        o.ledger.write_csv(f);
    }
    std::ofstream f(dir / "report.txt");
    fmt::print(f, "experiment: {}\nmodel: {}\nseed: {}\n\n[config]\n{}\n[ledger]\n", c.experiment,
               c.model, c.seed, serialize(c));
    o.ledger.write_text(f);
    f << "\n[assertions]\n";
    for (const auto& a : o.assertions)
    {
        f << a << '\n';
    }
    if (!o.notes.empty())
    {
        f << "\n[notes]\n";
        for (const auto& n : o.notes)
        {
            f << n << '\n';
        }
    }
}
}  // namespace

RunResult run_experiment(const RunConfig& config)
{
    validate(config);
    RunResult result;
    result.directory = std::filesystem::path(config.out) / config.experiment;
    Outputs o;
    int status = 0;
    try
    {
        const Model model = build_model(config);
        const RandomStream master(config.seed);
        if (config.experiment == "simulate")
        {
            run_simulate(config, model, master, o);
        }
        else if (config.experiment == "certify")
        {
            run_certify(config, model, master, o);
        }
        else if (config.experiment == "verify")
        {
            run_verify(config, model, master, o);
        }
        else
        {
            run_inequality(config, model, master, o);
        }
    }
    catch (const Error& e)
    {
        o.assertions.push_back(fmt::format("FAIL {}: {} [error raised during this step]", o.stage,
                                           e.what()));
        status = 2;
    }
    for (const auto& a : o.assertions)
    {
        if (a.rfind("PASS", 0) != 0 && status == 0)
        {
            status = 1;
        }
    }
    write_outputs(config, result.directory, o);
    result.exit_status = status;
    result.assertions = o.assertions;
    return result;
}

}  // namespace pdmp::cli
