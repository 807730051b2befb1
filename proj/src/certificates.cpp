#include "pdmp/certificates.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <numbers>
#include <ostream>

#include "pdmp/errors.hpp"
#include "pdmp/models.hpp"
#include "pdmp/quadrature.hpp"

namespace pdmp::certificates
{
namespace
{
constexpr int brent_bits = 40;

double maximize(const std::function<double(double)>& f, double lo, double hi)
{
    if (!(hi > lo))
    {
        return f(lo);
    }
    auto r = boost::math::tools::brent_find_minima([&](double x) { return -f(x); }, lo, hi,
                                                   brent_bits);
    return -r.second;
}

double minimize(const std::function<double(double)>& f, double lo, double hi)
{
    if (!(hi > lo))
    {
        return f(lo);
    }
    auto r = boost::math::tools::brent_find_minima(f, lo, hi, brent_bits);
    return r.second;
}

void require(bool ok, const std::string& message)
{
    if (!ok)
    {
        throw DomainError(message);
    }
}
}  // namespace

//---------------------------------------------------------------------------//
// Ledger
//---------------------------------------------------------------------------//

void Ledger::add(std::string quantity, double value, std::string provenance)
{
    entries_.push_back({std::move(quantity), value, std::move(provenance)});
}

bool Ledger::contains(const std::string& quantity) const
{
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const LedgerEntry& e) { return e.quantity == quantity; });
}

double Ledger::value(const std::string& quantity) const
{
    for (const auto& e : entries_)
    {
        if (e.quantity == quantity)
        {
            return e.value;
        }
    }
    throw DomainError(fmt::format("ledger has no entry '{}'", quantity));
}

void Ledger::write_text(std::ostream& os) const
{
    std::size_t width = 0;
    for (const auto& e : entries_)
    {
        width = std::max(width, e.quantity.size());
    }
    for (const auto& e : entries_)
    {
        fmt::print(os, "{:<{}} = {:<24.17g} [{}]\n", e.quantity, width, e.value, e.provenance);
    }
}

void Ledger::write_csv(std::ostream& os) const
{
    os << "quantity,value,provenance\n";
    for (const auto& e : entries_)
    {
        std::string prov = e.provenance;
        std::replace(prov.begin(), prov.end(), '"', '\'');
        fmt::print(os, "{},{:.17g},\"{}\"\n", e.quantity, e.value, prov);
    }
}

//---------------------------------------------------------------------------//
// Balance condition
//---------------------------------------------------------------------------//

std::vector<double> log_grid(double lo, double hi, std::size_t n)
{
    require(lo > 0.0 && hi > lo && n >= 2,
            fmt::format("log grid needs 0 < lo < hi and n >= 2, got [{}, {}], n = {}", lo, hi, n));
    std::vector<double> grid(n);
    const double step = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
    {
        grid[i] = lo * std::exp(step * static_cast<double>(i));
    }
    grid.back() = hi;
    return grid;
}

double balance_eta(const BalanceSpec& spec, std::optional<double> beta)
{
    require(static_cast<bool>(spec.rate) && static_cast<bool>(spec.jump_gradient_bound),
            "balance condition needs the rate and the jump gradient bound");
    require(!spec.grid.empty() || !spec.anchors.empty(), "balance condition needs a grid");
    if (beta)
    {
        require(*beta > 0.0, fmt::format("beta = {} must be positive", *beta));
        require(static_cast<bool>(spec.rate_derivative),
                "balance condition with beta needs the rate derivative");
    }
    if (spec.weight_derivative)
    {
        require(static_cast<bool>(spec.drift), "a weighted balance condition needs the drift");
    }

    auto term = [&](double x) {
        const double jac = spec.drift_jacobian ? spec.drift_jacobian(x) : 0.0;
        const double lam = spec.rate(x);
        const double a = spec.weight ? spec.weight(x) : 1.0;
        const double da = spec.weight_derivative ? spec.weight_derivative(x) : 0.0;
        double value = 2.0 * jac + lam * (spec.jump_gradient_bound(x) - 1.0);
        if (beta)
        {
            if (!(lam > 0.0))
            {
                throw DomainError(fmt::format("rate vanishes at grid point {}", x));
            }
            const double dl = spec.rate_derivative(x);
            value += a * dl * dl / (*beta * lam);
        }
        else if (spec.rate_derivative && spec.rate_derivative(x) != 0.0)
        {
            throw DomainError(fmt::format(
                "rate is not constant (derivative {} at {}); pass beta", spec.rate_derivative(x),
                x));
        }
        if (da != 0.0)
        {
            value -= spec.drift(x) * da / a;
        }
        if (!std::isfinite(value))
        {
            throw DomainError(fmt::format("balance expression is not finite at {}", x));
        }
        return -value;
    };

    std::vector<double> pts = spec.grid;
    pts.insert(pts.end(), spec.anchors.begin(), spec.anchors.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    std::size_t best = 0;
    double eta = term(pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i)
    {
        const double v = term(pts[i]);
        if (v < eta)
        {
            eta = v;
            best = i;
        }
    }
    if (best > 0 && best + 1 < pts.size())
    {
        eta = std::min(eta, minimize(term, pts[best - 1], pts[best + 1]));
    }
    return eta;
}

double theta_constant()
{
    const double phi2 = 0.5 * (3.0 + std::sqrt(5.0));
    return 1.0 / (phi2 - 1.0) + std::log(phi2);
}

//---------------------------------------------------------------------------//
// Confining profiles
//---------------------------------------------------------------------------//

void validate(const ConfiningProfile& profile)
{
    require(profile.c >= 0.0 && std::isfinite(profile.c),
            fmt::format("profile constant c = {} must be finite and nonnegative", profile.c));
    require(profile.gamma >= 0.0 && std::isfinite(profile.gamma),
            fmt::format("profile factor gamma = {} must be finite and nonnegative",
                        profile.gamma));
    require(profile.p >= 1.0 && profile.p <= 2.0,
            fmt::format("profile exponent p = {} must lie in [1, 2]", profile.p));
}

ConfiningProfile compose(const ConfiningProfile& first, const ConfiningProfile& second)
{
    validate(first);
    validate(second);
    require(first.p == second.p,
            fmt::format("cannot compose profiles with p = {} and p = {}", first.p, second.p));
    return {second.c + second.gamma * first.c, first.gamma * second.gamma, first.p};
}

double fixed_point(const ConfiningProfile& profile)
{
    validate(profile);
    require(profile.gamma < 1.0,
            fmt::format("fixed point needs gamma < 1, got {}", profile.gamma));
    return profile.c / (1.0 - profile.gamma);
}

double push_through(const ConfiningProfile& profile, double input_c)
{
    validate(profile);
    return profile.c + profile.gamma * input_c;
}

//---------------------------------------------------------------------------//
// Muckenhoupt and perturbations
//---------------------------------------------------------------------------//

MuckenhouptBound muckenhoupt_bound(const ScalarFn& density, double median, double quad_tol)
{
    require(median > 0.0 && std::isfinite(median),
            fmt::format("median {} must be positive and finite", median));
    const quadrature::Integrand rho = [&](double t) { return density(t); };
    const quadrature::Integrand inv = [&](double t) { return 1.0 / density(t); };
    auto integral = [&](const quadrature::Integrand& f, double a, double b) {
        const double v = quadrature::integrate(f, a, b, quad_tol);
        if (!std::isfinite(v))
        {
            throw DivergenceError(fmt::format("Muckenhoupt integral over [{}, {}] diverges", a, b));
        }
        return v;
    };

    // Left branch on (0, m).
    constexpr std::size_t n = 512;
    std::vector<double> xs(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
    {
        xs[k] = median * static_cast<double>(k) / n;
    }
    std::vector<double> mass(n + 1, 0.0);
    std::vector<double> inner(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k)
    {
        mass[k] = mass[k - 1] + integral(rho, xs[k - 1], xs[k]);
        inner[n - k] = inner[n - k + 1] + integral(inv, xs[n - k], xs[n - k + 1]);
    }
    std::size_t arg = 0;
    double left = 0.0;
    for (std::size_t k = 0; k <= n; ++k)
    {
        const double v = mass[k] * inner[k];
        if (v > left)
        {
            left = v;
            arg = k;
        }
    }
    if (arg > 0 && arg < n)
    {
        left = std::max(left, maximize(
                                  [&](double x) {
                                      return integral(rho, 0.0, x) * integral(inv, x, median);
                                  },
                                  xs[arg - 1], xs[arg + 1]));
    }

    // Right branch on (m, m + L), L doubled until the supremum settles.
    double right = -1.0;
    double extent = std::max(median, 1.0);
    constexpr std::size_t m_pts = 1024;
    for (int doubling = 0;; ++doubling, extent *= 2.0)
    {
        if (doubling > 40)
        {
            throw DivergenceError("Muckenhoupt right branch keeps growing");
        }
        std::vector<double> rx(m_pts + 1);
        for (std::size_t k = 0; k <= m_pts; ++k)
        {
            rx[k] = median + extent * static_cast<double>(k) / m_pts;
        }
        const double tail_end = quadrature::integrate_to_infinity(rho, rx.back(), 1e-10, extent);
        std::vector<double> tail(m_pts + 1);
        std::vector<double> acc(m_pts + 1, 0.0);
        tail[m_pts] = tail_end;
        for (std::size_t k = m_pts; k-- > 0;)
        {
            tail[k] = tail[k + 1] + integral(rho, rx[k], rx[k + 1]);
        }
        for (std::size_t k = 1; k <= m_pts; ++k)
        {
            acc[k] = acc[k - 1] + integral(inv, rx[k - 1], rx[k]);
        }
        std::size_t best = 0;
        double sup = 0.0;
        for (std::size_t k = 0; k <= m_pts; ++k)
        {
            const double v = tail[k] * acc[k];
            if (!std::isfinite(v))
            {
                throw DivergenceError(fmt::format(
                    "Muckenhoupt right branch is not finite at {}", rx[k]));
            }
            if (v > sup)
            {
                sup = v;
                best = k;
            }
        }
        if (best > 0 && best < m_pts)
        {
            sup = std::max(sup, maximize(
                                    [&](double x) {
                                        return (integral(rho, x, rx.back()) + tail_end)
                                               * integral(inv, median, x);
                                    },
                                    rx[best - 1], rx[best + 1]));
        }
        if (right >= 0.0 && std::abs(sup - right) <= 1e-9 * std::max(sup, 1e-300))
        {
            right = std::max(right, sup);
            break;
        }
        right = sup;
    }

    MuckenhouptBound out;
    out.left_sup = left;
    out.right_sup = right;
    out.B = std::max(left, right);
    out.lower = 0.5 * out.B;
    out.upper = 4.0 * out.B;
    return out;
}

double perturb_poincare(double c1, double g_ratio)
{
    require(c1 >= 0.0 && std::isfinite(c1), fmt::format("c1 = {} must be nonnegative", c1));
    require(g_ratio >= 1.0,
            fmt::format("g(0)/g(m) = {} must be at least 1 for a nonincreasing g", g_ratio));
    return 8.0 * g_ratio * c1;
}

double perturb_logsob(double c1, double kappa, double epsilon, double g_ratio,
                      double nu_g_power_mean)
{
    require(c1 >= 0.0 && std::isfinite(c1), fmt::format("c1 = {} must be nonnegative", c1));
    require(kappa >= 0.0, fmt::format("kappa = {} must be nonnegative", kappa));
    require(epsilon > 0.0 && epsilon < 1.0,
            fmt::format("epsilon = {} must lie in (0, 1)", epsilon));
    require(g_ratio >= 1.0,
            fmt::format("g(0)/g(m) = {} must be at least 1 for a nonincreasing g", g_ratio));
    require(nu_g_power_mean >= 1.0 && std::isfinite(nu_g_power_mean),
            fmt::format("nu(g^(1-1/eps)) = {} must be finite and at least 1", nu_g_power_mean));
    const double gamma = (0.5 * c1 * kappa * kappa + epsilon * std::log(nu_g_power_mean))
                         / (1.0 - epsilon);
    return (2.0 / (1.0 - epsilon) + 8.0 * g_ratio * (2.0 + gamma)) * c1;
}

PerturbedLogSob perturb_logsob(double c1, double kappa, double g_ratio,
                               const std::function<double(double)>& nu_g_power_mean)
{
    PerturbedLogSob best{std::numeric_limits<double>::infinity(), 0.0};
    for (int k = 1; k <= 9; ++k)
    {
        const double eps = 0.1 * k;
        const double c2 = perturb_logsob(c1, kappa, eps, g_ratio, nu_g_power_mean(eps));
        if (c2 < best.c2)
        {
            best = {c2, eps};
        }
    }
    return best;
}

//---------------------------------------------------------------------------//
// Model certificates
//---------------------------------------------------------------------------//

RateCertificate make_rate_certificate(double eta, double beta, double poincare_c)
{
    require(eta > 0.0, fmt::format("eta = {} must be positive", eta));
    require(beta > 0.0, fmt::format("beta = {} must be positive", beta));
    require(poincare_c > 0.0, fmt::format("Poincare constant {} must be positive", poincare_c));
    RateCertificate r;
    r.eta = eta;
    r.beta = beta;
    r.poincare_c = poincare_c;
    r.prefactor = 1.0 + beta * poincare_c;
    r.decay_rate = eta / r.prefactor;
    return r;
}

TcpConstantCertificate certify_tcp_constant(double lambda, double delta)
{
    require(lambda > 0.0 && std::isfinite(lambda),
            fmt::format("lambda = {} must be positive", lambda));
    require(delta >= 0.0 && delta < 1.0, fmt::format("delta must lie in [0,1), got {}", delta));

    TcpConstantCertificate out;
    out.jump_time_kernel = {4.0 / (lambda * lambda), 1.0, 2.0};
    out.jump_kernel = {0.0, delta * delta, 2.0};
    out.chain_kernel = compose(out.jump_time_kernel, out.jump_kernel);
    out.chain_c = fixed_point(out.chain_kernel);
    out.poincare_c = push_through(out.jump_time_kernel, out.chain_c);
    out.gradient_rate = lambda * (1.0 - delta * delta);
    out.l2_rate = out.gradient_rate;
    out.l2_prefactor = out.poincare_c;

    auto& l = out.ledger;
    l.add("lambda", lambda, "input");
    l.add("delta", delta, "input");
    l.add("K.c", out.jump_time_kernel.c, "jump-time kernel: Exp(lambda) shift satisfies B(2, 4/lambda^2)");
    l.add("K.gamma", out.jump_time_kernel.gamma, "jump-time kernel commutes with derivatives");
    l.add("Q.c", out.jump_kernel.c, "deterministic jump has no local variance");
    l.add("Q.gamma", out.jump_kernel.gamma, "jump x -> delta x contracts gradients by delta^2");
    l.add("KQ.c", out.chain_kernel.c, "composition of confining kernels");
    l.add("KQ.gamma", out.chain_kernel.gamma, "composition of confining kernels");
    l.add("chain_poincare_c", out.chain_c, "fixed point c/(1-gamma) for the chain law");
    l.add("poincare_c", out.poincare_c, "chain law pushed through K: 4/(lambda^2 (1-delta^2))");
    l.add("gradient_rate", out.gradient_rate, "balance condition lambda (1 - E[R^2])");
    l.add("l2_rate", out.l2_rate, "variance decay rate");
    l.add("l2_prefactor", out.l2_prefactor, "variance bound prefactor, equal to poincare_c");
    return out;
}

RateCertificate certify_tcp_increasing(double lambda_star, double delta, double kappa,
                                       const ScalarFn& h_at, Ledger* ledger)
{
    require(lambda_star > 0.0, fmt::format("lambda_star = {} must be positive", lambda_star));
    require(delta > 0.0 && delta < 1.0, fmt::format("delta must lie in (0,1), got {}", delta));
    require(kappa > 0.0,
            fmt::format("kappa = {} gives beta = 0; constant rates use certify_tcp_constant",
                        kappa));
    require(static_cast<bool>(h_at), "certify_tcp_increasing needs h");

    const double d2 = delta * delta;
    const double beta = 2.0 * kappa * kappa / (1.0 - d2);
    const double eta = lambda_star * (1.0 - d2) / 2.0;
    const ConfiningProfile k{4.0 / (lambda_star * lambda_star), 1.0, 2.0};
    const ConfiningProfile q{0.0, d2, 2.0};
    const double chain_c = fixed_point(compose(k, q));
    const double median_bound = 2.0 * delta / (lambda_star * (1.0 - delta));
    const double h_m = h_at(median_bound);
    if (!(h_m > 0.0) || !std::isfinite(h_m))
    {
        throw DivergenceError(fmt::format("h({}) = {} is not positive and finite", median_bound,
                                          h_m));
    }
    const double g_ratio_bound = 1.0 / (lambda_star * h_m);
    const double c_prime = perturb_poincare(chain_c, std::max(1.0, g_ratio_bound));
    const double c = push_through(k, c_prime);
    RateCertificate r = make_rate_certificate(eta, beta, c);

    if (ledger)
    {
        ledger->add("lambda_star", lambda_star, "input");
        ledger->add("delta", delta, "input");
        ledger->add("kappa", kappa, "input: Lipschitz constant of ln(rate)");
        ledger->add("beta", beta, "2 kappa^2 / (1 - delta^2)");
        ledger->add("eta", eta, "lambda_star (1 - delta^2) / 2 from the log-Lipschitz balance");
        ledger->add("chain_poincare_c", chain_c, "fixed point of K=(4/lambda_star^2,1,2) then Q=(0,delta^2,2)");
        ledger->add("median_bound", median_bound, "Markov bound on the chain median via the constant-rate comparison");
        ledger->add("h_at_median_bound", h_m, "quadrature of h at the median bound");
        ledger->add("g_ratio_bound", g_ratio_bound, "h(0)/h(m) <= 1/(lambda_star h(m))");
        ledger->add("c_prime", c_prime, "8 g_ratio_bound chain_poincare_c: perturbed chain law");
        ledger->add("poincare_c", c, "c' pushed through the size-biased kernel (4/lambda_star^2, 1, 2)");
        ledger->add("decay_rate", r.decay_rate, "eta / (1 + beta c)");
        ledger->add("prefactor", r.prefactor, "1 + beta c");
    }
    return r;
}

TcpLinearCertificate certify_tcp_linear(double delta, const TcpLinearOptions& options)
{
    require(delta > 0.0 && delta < 1.0, fmt::format("delta must lie in (0,1), got {}", delta));
    TcpLinearCertificate out;
    auto& l = out.ledger;
    l.add("delta", delta, "input");

    const double sd = std::sqrt(delta);
    out.theta = theta_constant();
    l.add("theta", out.theta, "minimum of 1/(e^x - 1) + x at x = ln((3+sqrt5)/2)");

    // Twisted chain: K_psi = (4,1,1), Q_psi = (0, sqrt(delta), 1).
    const ConfiningProfile k{4.0, 1.0, 1.0};
    const ConfiningProfile q{0.0, sd, 1.0};
    const ConfiningProfile chain = compose(k, q);
    out.chain_logsob_c = fixed_point(chain);
    l.add("twisted_chain.c", chain.c, "K_psi=(4,1,1) then Q_psi=(0,sqrt(delta),1)");
    l.add("twisted_chain.gamma", chain.gamma, "K_psi=(4,1,1) then Q_psi=(0,sqrt(delta),1)");
    l.add("c_nu", out.chain_logsob_c, "log-Sobolev constant of the twisted chain law 4 sqrt(delta)/(1 - sqrt(delta))");

    // Perturbation by g = h o psi^{-1}, normalized to nu(g) = 1.
    const double h0 = models::mills_ratio(0.0);
    const double kappa_g = std::sqrt(2.0 / std::numbers::pi);
    const double hbound = 3.0 * (1.0 + delta / std::sqrt(1.0 - delta * delta));
    const double g_ratio = hbound;
    // nu(g~^{-1}) = mu_e(h) mu_e(1/h) <= h(0) * hbound since h is nonincreasing.
    const double nu_inv = std::max(1.0, h0 * hbound);
    const double epsilon = 0.5;
    l.add("h0", h0, "h(0) = sqrt(pi/2)");
    l.add("kappa_g", kappa_g, "ln g is sqrt(2/pi)-Lipschitz");
    l.add("h_ratio_bound", hbound, "max(h(0)/h(m_e), mu_e(1/h)) <= 3(1 + delta/sqrt(1-delta^2))");
    l.add("g_ratio", g_ratio, "g(0)/g(m) bounded by h_ratio_bound (normalization cancels)");
    l.add("normalizer_upper", h0, "mu_e(h) <= h(0)");
    l.add("nu_g_inverse", nu_inv, "nu(g~^{-1}) = mu_e(h) mu_e(1/h) <= h(0) * h_ratio_bound");
    l.add("epsilon", epsilon, "fixed so that nu(g^{1-1/eps}) = nu(g^{-1})");

    out.perturbed_logsob_c = perturb_logsob(out.chain_logsob_c, kappa_g, epsilon, g_ratio, nu_inv);
    l.add("c2", out.perturbed_logsob_c, "log-Sobolev constant of the perturbed twisted chain law");
    out.weighted_logsob_c = push_through(k, out.perturbed_logsob_c);
    l.add("weighted_logsob_c", out.weighted_logsob_c, "c2 pushed through K~_psi=(4,1,1): weighted log-Sobolev constant of mu");
    out.weighted_poincare_c = out.weighted_logsob_c;
    l.add("weighted_poincare_c", out.weighted_poincare_c, "log-Sobolev implies Poincare with the same constant");

    const double a = (1.0 - delta) * out.theta;
    const double c1 = out.weighted_poincare_c;
    auto rate = [&](double beta) { return (a - 1.0 / beta) / (1.0 + beta * c1); };
    const double lo = 1.01 / a;
    const double hi = 1e3;
    // Unimodal in beta; search in log(beta).
    auto r = boost::math::tools::brent_find_minima(
        [&](double lb) { return -rate(std::exp(lb)); }, std::log(lo), std::log(hi), 52);
    out.beta_opt = std::exp(r.first);
    out.rate_r = rate(out.beta_opt);
    l.add("beta_lower", lo, "search bracket 1.01/((1-delta) theta)");
    l.add("beta_opt", out.beta_opt, "maximizer of ((1-delta) theta - 1/beta)/(1 + beta c1)");
    l.add("eta", a - 1.0 / out.beta_opt, "(1-delta) theta - 1/beta");
    l.add("rate_r", out.rate_r, "entropy decay rate");

    out.entropy_c = out.weighted_logsob_c * (1.0 + out.beta_opt * c1);
    l.add("entropy_c", out.entropy_c, "weighted_logsob_c (1 + beta c1)");

    out.rate = make_rate_certificate(a - 1.0 / out.beta_opt, out.beta_opt, c1);
    out.rate.entropy_c = out.weighted_logsob_c;
    out.rate.entropy_prefactor = out.entropy_c;

    if (options.chain_sample)
    {
        const auto& mu_e = *options.chain_sample;
        const double mean_h = mu_e.expect(models::mills_ratio);
        const double mean_inv_h = mu_e.expect([](double x) { return 1.0 / models::mills_ratio(x); });
        const double median = mu_e.quantile(0.5);
        l.add("empirical.mu_e(h)", mean_h, "chain-sample cross-check, must not exceed h0");
        l.add("empirical.mu_e(1/h)", mean_inv_h, "chain-sample cross-check, must not exceed h_ratio_bound");
        l.add("empirical.median", median, "chain-sample median");
        l.add("empirical.h0/h(median)", h0 / models::mills_ratio(median),
              "chain-sample cross-check, must not exceed h_ratio_bound");
        l.add("empirical.nu_g_inverse", mean_h * mean_inv_h, "chain-sample cross-check, must not exceed nu_g_inverse");
    }
    return out;
}

double generalized_poincare_alpha(double q)
{
    require(q >= 0.0 && q <= 1.0, fmt::format("q = {} must lie in [0, 1]", q));
    return 2.0 * q / (q + 1.0);
}

}  // namespace pdmp::certificates
