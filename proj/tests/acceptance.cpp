// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pdmp/certificates.hpp"
#include "pdmp/cli.hpp"
#include "pdmp/embedded.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/estimators.hpp"
#include "pdmp/models.hpp"
#include "pdmp/parallel.hpp"

using namespace pdmp;
using embedded::EmpiricalMeasure;
using embedded::Provenance;
using estimators::DecayPoint;

namespace
{
struct Outcome
{
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        pass = pass && ok;
        if (!detail.empty())
        {
            detail += "; ";
        }
        detail += (ok ? "" : "NOT ") + what;
    }
};

Model constant_tcp()
{
    return models::make_tcp_constant({1.0, models::JumpFactor::deterministic(0.5)});
}

std::string num(double v)
{
    return fmt::format("{:.6g}", v);
}

Outcome certificate_algebra()
{
    Outcome o;
    const auto c = certificates::certify_tcp_constant(1.0, 0.5);
    o.require(std::abs(c.poincare_c - 16.0 / 3.0) <= 1e-12, "poincare_c " + num(c.poincare_c) + " = 16/3");
    o.require(std::abs(c.gradient_rate - 0.75) <= 1e-12, "gradient rate " + num(c.gradient_rate) + " = 0.75");
    const certificates::ConfiningProfile k{4.0, 1.0, 2.0}, q{0.0, 0.25, 2.0};
    const auto kq = certificates::compose(k, q);
    o.require(kq.c == 1.0 && kq.gamma == 0.25, "K then Q = (1, 1/4)");
    const double chain = certificates::fixed_point(kq);
    o.require(std::abs(chain - 4.0 / 3.0) <= 1e-12, "chain constant " + num(chain) + " = 4/3");
    const double mu = certificates::push_through(k, chain);
    o.require(std::abs(mu - 16.0 / 3.0) <= 1e-12, "pushed through K " + num(mu) + " = 16/3");
    return o;
}

Outcome invariant_moments()
{
    Outcome o;
    const std::size_t n = 1'000'000;
    const Model m = constant_tcp();
    embedded::ChainOptions opts;
    opts.n = n;
    const auto chain = embedded::chain_invariant_sample(m, opts, RandomStream(201));
    const auto mu = embedded::reconstruct_mu(m, chain, RandomStream(202));
    o.require(std::abs(mu.mean() - 1.0) <= 0.02,
              fmt::format("reconstructed mu mean {} within 2% of 1 (chain mean {}, "
                          "continuous-time mean 1/(lambda(1-delta)) = 2)",
                          num(mu.mean()), num(chain.mean())));
    const Model lin = models::make_tcp_linear({0.5});
    const auto y = embedded::chain_invariant_sample(lin, opts, RandomStream(203));
    const double lhs = 0.75 * y.moment(2);
    o.require(std::abs(lhs - 0.5) <= 0.02 * 0.5, fmt::format("(1-delta^2) E[Y^2] = {} within 2% of 0.5", num(lhs)));
    return o;
}

Outcome wasserstein_decay()
{
    Outcome o;
    const Model m = constant_tcp();
    const std::size_t n = 100'000;
    const RandomStream base(301);
    std::vector<DecayPoint> series;
    for (double t = 0; t <= 6; t += 1)
    {
        std::vector<double> a(n), b(n), d(n);
        parallel_for(n, 0, [&](std::size_t k) {
            RandomStream s = base.substream(k);
            RandomStream s2 = s;
            a[k] = simulate_endpoint(m, 0.0, t, s);
            b[k] = simulate_endpoint(m, 2.0, t, s2);
            d[k] = std::abs(a[k] - b[k]);
        });
        const double w = estimators::wasserstein_1d(1.0, EmpiricalMeasure(a, Provenance::chain),
                                                    EmpiricalMeasure(b, Provenance::chain));
        series.push_back({t, w, mean_and_error(d).std_error});
    }
    const auto fit = estimators::fit_decay_rate(series);
    o.require(std::abs(fit.fitted_rate - 0.5) <= 0.05,
              fmt::format("fitted rate {} (se {}) within 10% of 0.5", num(fit.fitted_rate),
                          num(fit.rate_std_error)));
    o.require(fit.fitted_rate >= 0.375 - 3.0 * fit.rate_std_error, "rate >= 0.375 - 3 se");
    return o;
}

Outcome storage_exactness()
{
    Outcome o;
    const Model m = models::make_storage(models::StorageParams::exponential_increments(1.0, 1.0));
    double worst = 0.0;
    for (double t : {0.5, 1.0, 2.0, 5.0, 10.0})
    {
        for (std::uint64_t k = 0; k < 1000; ++k)
        {
            RandomStream a(400 + k), b(400 + k);
            const double xb = simulate_endpoint(m, 3.0, t, b);
            const double xa = simulate_endpoint(m, 1.0, t, a);
            const double ulp = std::numeric_limits<double>::epsilon() * std::max(std::abs(xa), std::abs(xb));
            worst = std::max(worst, std::abs((xb - xa) - 2.0 * std::exp(-t)) / ulp);
        }
    }
    o.require(worst <= 64.0, "coupled distance - 2 e^-t at most " + num(worst) + " ulps of the state (limit 64)");

    std::vector<double> xs(2000);
    RandomStream rng(402);
    for (auto& x : xs)
    {
        x = rng.exponential();
    }
    const EmpiricalMeasure mu(xs, Provenance::trajectory_time_average);
    std::vector<DecayPoint> series;
    for (double t = 0; t <= 5; t += 1)
    {
        const auto w = estimators::energy_W(m, estimators::test_function("x"), mu, t, 1e-4, 50,
                                            RandomStream(403));
        series.push_back({t, w.value, w.std_error});
    }
    const auto fit = estimators::fit_decay_rate(series);
    o.require(std::abs(fit.fitted_rate - 2.0) <= 1e-3, "fitted W_t rate " + num(fit.fitted_rate) + " = 2 +- 1e-3");
    return o;
}

Outcome gradient_subcommutation()
{
    Outcome o;
    const Model m = constant_tcp();
    const std::size_t n = 1'000'000;
    for (double x : {0.5, 1.0, 2.0})
    {
        for (double t : {1.0, 2.0})
        {
            const RandomStream rng(500);
            const auto g = gradient_semigroup_estimate(m, [](double y) { return y; }, x, t,
                                                       default_bump(x), n, rng);
            const auto e = semigroup_estimate(m, [](double) { return 1.0; }, x, t, n, rng);
            const double lhs = g.value * g.value;
            const double rhs = std::exp(-0.75 * t) * e.value;
            const double se = std::hypot(2.0 * std::abs(g.value) * g.std_error,
                                         std::exp(-0.75 * t) * e.std_error);
            o.require(lhs <= rhs + 3.0 * se, fmt::format("x={} t={}: {} <= {}", x, t, num(lhs), num(rhs)));
        }
    }
    return o;
}

Outcome muckenhoupt()
{
    Outcome o;
    const auto e1 = certificates::muckenhoupt_bound([](double x) { return std::exp(-x); }, std::log(2.0));
    o.require(std::abs(e1.B - 1.0) <= 1e-6, "Exp(1) B = " + fmt::format("{:.12g}", e1.B));
    o.require(e1.lower <= 4.0 && 4.0 <= e1.upper, fmt::format("[{}, {}] contains 4", e1.lower, e1.upper));
    const auto e2 = certificates::muckenhoupt_bound([](double x) { return std::exp(-2.0 * x); },
                                                    std::log(2.0) / 2.0);
    o.require(std::abs(e2.B - 0.25) <= 1e-6, "Exp(2) B = " + fmt::format("{:.12g}", e2.B));
    return o;
}

Outcome inequality_vs_certificate()
{
    Outcome o;
    embedded::ChainOptions opts;
    opts.n = 200'000;
    const Model m = constant_tcp();
    const auto mu = embedded::reconstruct_mu(m, embedded::chain_invariant_sample(m, opts, RandomStream(701)),
                                             RandomStream(702));
    const auto r = estimators::empirical_inequality_ratio(mu, estimators::default_family(),
                                                          [](double) { return 1.0; }, 2.0);
    o.require(r.value <= 16.0 / 3.0 + 3.0 * r.std_error,
              fmt::format("constant rate: Poincare ratio {} ({}) <= 16/3", num(r.value), r.witness));

    const Model lin = models::make_tcp_linear({0.5});
    const auto mul = embedded::reconstruct_mu(
        lin, embedded::chain_invariant_sample(lin, opts, RandomStream(703)), RandomStream(704));
    const auto rl = estimators::empirical_inequality_ratio(mul, estimators::default_family(),
                                                           models::tcp_linear_weight, 1.0);
    const double c = certificates::certify_tcp_linear(0.5).ledger.value("weighted_logsob_c");
    o.require(rl.value <= c + 3.0 * rl.std_error,
              fmt::format("linear rate: weighted log-Sobolev ratio {} ({}) <= {}", num(rl.value),
                          rl.witness, num(c)));
    return o;
}

Outcome entropy_decay()
{
    Outcome o;
    const double delta = 0.5;
    const auto cert = certificates::certify_tcp_linear(delta);
    o.require(std::isfinite(cert.entropy_c) && cert.entropy_c > 0.0, "c = " + num(cert.entropy_c));
    o.require(cert.rate_r > 0.0 && cert.rate_r < (1.0 - delta) * cert.theta,
              fmt::format("r = {} in (0, {})", num(cert.rate_r), num((1.0 - delta) * cert.theta)));
    o.require(std::abs(cert.theta - 1.5804) <= 1e-4, "theta = " + fmt::format("{:.6f}", cert.theta));

    const Model m = models::make_tcp_linear({delta});
    embedded::ChainOptions opts;
    opts.n = 10'000;
    const auto mu = embedded::reconstruct_mu(m, embedded::chain_invariant_sample(m, opts, RandomStream(801)),
                                             RandomStream(802));
    int violations = 0;
    double worst = -1e300;
    for (const char* label : {"x", "sin(x)"})
    {
        const auto tf = estimators::test_function(label);
        const double energy = mu.expect([&](double y) { return tf.df(y) * tf.df(y); });
        for (double t = 0; t <= 5; t += 1)
        {
            const auto e = estimators::entropy_of_semigroup(m, tf.f, mu, t, 1000, RandomStream(803));
            const double bound = cert.entropy_c * std::exp(-cert.rate_r * t) * energy;
            violations += e.value > bound + 3.0 * e.std_error;
            worst = std::max(worst, e.value / bound);
        }
    }
    o.require(violations == 0, fmt::format("Ent_1 bound holds at all 12 points (max Ent/bound {})", num(worst)));
    return o;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome property_suites()
{
    Outcome o;
    RandomStream gen(901);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * gen.uniform(); };

    int w_bad = 0;
    for (int trial = 0; trial < 200; ++trial)
    {
        std::vector<double> xs(5), ys(5);
        for (int i = 0; i < 5; ++i)
        {
            xs[i] = uniform(-5, 5);
            ys[i] = uniform(-5, 5);
        }
        std::vector<int> perm = {0, 1, 2, 3, 4};
        double best = 1e300;
        do
        {
            double cost = 0.0;
            for (int i = 0; i < 5; ++i)
            {
                cost += std::abs(xs[i] - ys[perm[i]]) / 5.0;
            }
            best = std::min(best, cost);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const double w = estimators::wasserstein_1d(1.0, EmpiricalMeasure(xs, Provenance::chain),
                                                    EmpiricalMeasure(ys, Provenance::chain));
        w_bad += std::abs(w - best) > 1e-12 * std::max(1.0, best);
    }
    o.require(w_bad == 0, fmt::format("W1 = assignment optimum on 200 instances ({} mismatches)", w_bad));

    int ent_bad = 0;
    for (int trial = 0; trial < 100; ++trial)
    {
        const std::size_t n = 2 + static_cast<std::size_t>(uniform(0, 30));
        std::vector<double> f(n), w(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            f[i] = uniform(0, 3);
            w[i] = uniform(0.1, 1);
        }
        double previous = estimators::entropy_p(f, w, 1.0);
        for (int k = 1; k <= 10; ++k)
        {
            const double e = estimators::entropy_p(f, w, 1.0 + k / 10.0);
            ent_bad += e > previous * (1.0 + 1e-12) + 1e-14;
            previous = e;
        }
    }
    o.require(ent_bad == 0, "Ent_p nonincreasing in p on 100 samples");

    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial)
    {
        const certificates::ConfiningProfile a{uniform(0, 10), uniform(0, 2), 2.0},
            b{uniform(0, 10), uniform(0, 2), 2.0}, c{uniform(0, 10), uniform(0, 2), 2.0};
        const auto l = certificates::compose(certificates::compose(a, b), c);
        const auto r = certificates::compose(a, certificates::compose(b, c));
        worst = std::max({worst, std::abs(l.c - r.c) / std::max(1.0, l.c), std::abs(l.gamma - r.gamma)});
    }
    o.require(worst <= 1e-15, "compose associative (max deviation " + num(worst) + ")");

    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "pdmp_acceptance";
    cli::RunConfig cfg;
    cfg.experiment = "verify";
    cfg.model = "tcp_constant";
    cfg.seed = 42;
    cfg.chain_length = 5000;
    cfg.outer_n = 200;
    cfg.inner_n = 50;
    cfg.coupling_n = 5000;
    cfg.workers = 1;
    cfg.out = (root / "a").string();
    auto again = cfg;
    again.out = (root / "b").string();
    auto threaded = cfg;
    threaded.out = (root / "c").string();
    threaded.workers = 4;
    const auto ra = cli::run_experiment(cfg);
    const auto rb = cli::run_experiment(again);
    const auto rc = cli::run_experiment(threaded);
    bool replay = true, workers = true;
    for (const char* f : {"series.csv", "measure.csv", "ledger.csv"})
    {
        const auto ref = slurp(ra.directory / f);
        replay = replay && !ref.empty() && ref == slurp(rb.directory / f);
        workers = workers && ref == slurp(rc.directory / f);
    }
    o.require(replay, "seed replay byte-identical");
    o.require(workers, "1 and 4 workers byte-identical");
    fs::remove_all(root);
    return o;
}
}  // namespace

int main()
{
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"certificate algebra", certificate_algebra},
        {"invariant-moment oracle", invariant_moments},
        {"Wasserstein decay", wasserstein_decay},
        {"storage-model exactness", storage_exactness},
        {"gradient sub-commutation", gradient_subcommutation},
        {"Muckenhoupt bracket", muckenhoupt},
        {"empirical inequality vs certificate", inequality_vs_certificate},
        {"entropy decay end to end", entropy_decay},
        {"property suites", property_suites},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = criteria[i].second();
        }
        catch (const std::exception& e)
        {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        fmt::print("{} {} {}: {} ({:.1f}s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                   o.detail, secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
