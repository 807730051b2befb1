#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pdmp/errors.hpp"
#include "pdmp/models.hpp"
#include "pdmp/quadrature.hpp"
#include "support.hpp"

using namespace pdmp;
using namespace pdmp::models;
using test_support::sample_mean;
using test_support::within_se;

TEST_CASE("constant-rate TCP")
{
    const TcpConstantParams p{1.0, JumpFactor::deterministic(0.5)};
    const Model m = make_tcp_constant(p);
    RandomStream rng(1);
    CHECK(m.inv_cum_rate(0.3, 2.0) == doctest::Approx(2.0));
    CHECK(m.jump(4.0, rng) == 2.0);
    CHECK(m.jump_gradient_bound(1.0) == 0.25);
    CHECK(m.mean_holding(5.0) == 1.0);

    CHECK(tcp_constant_spectrum(p, 0) == 0.0);
    CHECK(tcp_constant_spectrum(p, 1) == doctest::Approx(-0.5));
    CHECK(tcp_constant_spectrum(p, 2) == doctest::Approx(-0.75));

    CHECK(tcp_constant_invariant_moments(p, 0) == 1.0);
    CHECK(tcp_constant_invariant_moments(p, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(tcp_constant_invariant_moments(p, 2) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));

    // Recursion oracle Z <- delta (Z + E).
    RandomStream r(2);
    double z = 0.0;
    for (int i = 0; i < 1000; ++i)
    {
        z = 0.5 * (z + r.exponential());
    }
    std::vector<double> z1(10'000'000), z2(z1.size());
    for (std::size_t i = 0; i < z1.size(); ++i)
    {
        z = 0.5 * (z + r.exponential());
        z1[i] = z;
        z2[i] = z * z;
    }
    // Successive states are correlated (coefficient 1/2), so allow 2% rather than 3 naive s.e.
    CHECK(mean_and_error(z1).value == doctest::Approx(1.0).epsilon(0.01));
    CHECK(mean_and_error(z2).value == doctest::Approx(4.0 / 3.0).epsilon(0.01));

    SUBCASE("random jump factor")
    {
        const TcpConstantParams u{2.0, JumpFactor::uniform(0.0, 1.0)};
        CHECK(u.jump_factor.moment(1) == doctest::Approx(0.5));
        CHECK(u.jump_factor.moment(2) == doctest::Approx(1.0 / 3.0));
        const Model mu = make_tcp_constant(u);
        CHECK(mu.jump_gradient_bound(0.0) == doctest::Approx(1.0 / 3.0));
        CHECK(tcp_constant_spectrum(u, 1) == doctest::Approx(-1.0));
        CHECK_THROWS_AS(u.jump_factor.delta(), DomainError);
        RandomStream s(3);
        const auto mean = sample_mean(100'000, [&] { return u.jump_factor.sample(s); });
        CHECK(within_se(mean, 0.5));
    }

    SUBCASE("parameter checks")
    {
        CHECK_THROWS_AS(make_tcp_constant({0.0, JumpFactor::deterministic(0.5)}), DomainError);
        CHECK_THROWS_WITH_AS(JumpFactor::deterministic(1.2), doctest::Contains("[0,1)"), DomainError);
        CHECK_THROWS_AS(JumpFactor::uniform(0.5, 0.2), DomainError);
    }
}

TEST_CASE("linear-rate TCP")
{
    const Model m = make_tcp_linear({0.5});
    CHECK(m.inv_cum_rate(0.0, 2.0) == doctest::Approx(2.0));
    CHECK(m.cum_rate(1.0, 2.0) == doctest::Approx(4.0));
    CHECK(m.inv_cum_rate(1.0, 4.0) == doctest::Approx(2.0));
    CHECK(m.inv_cum_rate(1e8, 1.0) == doctest::Approx(1e-8).epsilon(1e-12));
    CHECK(m.weight(std::log(2.0)) == doctest::Approx(0.5));
    CHECK(tcp_linear_weight_derivative(0.0) == 1.0);
    for (double x = 0.0; x < 20.0; x += 0.1)
    {
        for (double d : {0.1, 0.5, 0.9})
        {
            CHECK(tcp_linear_weight(d * x) >= d * tcp_linear_weight(x) - 1e-15);
        }
    }
}

TEST_CASE("increasing-rate TCP")
{
    TcpIncreasingParams p;
    p.rate = [](double x) { return 1.0 + x; };
    p.rate_derivative = [](double) { return 1.0; };
    p.kappa = 1.0;
    p.delta = 0.5;
    const Model m = make_tcp_increasing(p);
    CHECK(lambda_star(p) == 1.0);
    for (double t : {0.1, 1.0, 3.0, 7.5})
    {
        CHECK(std::abs(m.cum_rate(0.0, t) - (t + t * t / 2)) <= 1e-10);
        CHECK(m.inv_cum_rate(0.0, t + t * t / 2) == doctest::Approx(t).epsilon(1e-10));
    }
    CHECK(m.jump_gradient_bound(0.0) == 0.25);

    // Size-biased times: mean against quadrature of t exp(-cum) / h.
    const double h = quadrature::integrate_to_infinity([](double t) { return std::exp(-t - t * t / 2); }, 0.0);
    const double mt = quadrature::integrate_to_infinity(
        [](double t) { return t * std::exp(-t - t * t / 2); }, 0.0) / h;
    RandomStream rng(4);
    const auto mean = sample_mean(200'000, [&] { return m.size_biased_time(0.0, rng); });
    CHECK(within_se(mean, mt));

    TcpIncreasingParams bad = p;
    bad.kappa = 0.5;
    CHECK_THROWS_AS(make_tcp_increasing(bad), DomainError);
    bad = p;
    bad.rate = [](double x) { return 2.0 - x / 100.0; };
    bad.rate_derivative = {};
    CHECK_THROWS_AS(make_tcp_increasing(bad), DomainError);
    bad = p;
    bad.rate = [](double x) { return x; };
    CHECK_THROWS_AS(make_tcp_increasing(bad), DomainError);
}

TEST_CASE("storage model")
{
    const Model m = make_storage(StorageParams::exponential_increments(1.0, 1.0));
    CHECK(m.flow(1.0, std::log(2.0)) == doctest::Approx(0.5));
    CHECK(m.jump_gradient_bound(3.0) == 1.0);
    CHECK(m.drift(2.0) == -2.0);
    RandomStream rng(5);
    CHECK(m.jump(1.0, rng) > 1.0);
}

TEST_CASE("twist chart")
{
    CHECK(twist(0.0) == 0.0);
    double previous = 0.0;
    for (double x = 0.01; x < 60.0; x += 0.37)
    {
        const double z = twist(x);
        CHECK(z > previous);
        previous = z;
        CHECK(twist_inverse(z) == doctest::Approx(x).epsilon(1e-12));
    }
    // Closed form against quadrature of a^{-1/2}; s = u^2 removes the 1/sqrt(s) singularity.
    auto smoothed = [](double u) { return 2.0 * u / std::sqrt(-std::expm1(-u * u)); };
    for (double x : {0.01, 0.5, 2.0, 10.0})
    {
        const double oracle = quadrature::integrate(smoothed, 0.0, std::sqrt(x), 1e-13);
        CHECK(twist(x) == doctest::Approx(oracle).epsilon(1e-11));
    }
    const double c = quadrature::integrate([&](double u) { return smoothed(u) - 2.0 * u; }, 0.0, 1.0, 1e-13)
                     + quadrature::integrate_to_infinity(
                         [](double s) { return 1.0 / std::sqrt(-std::expm1(-s)) - 1.0; }, 1.0, 1e-12);
    CHECK(twist(50.0) >= 50.0);
    CHECK(twist(50.0) <= 50.0 + c + 1e-9);
    CHECK(c == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-7));
}

TEST_CASE("twisted jump contracts gradients by sqrt(delta)")
{
    const double delta = 0.5;
    const Model twisted = make_twisted_tcp_linear(delta);
    RandomStream rng(6);
    CHECK(twisted.jump_gradient_bound(1.0) == doctest::Approx(delta));
    for (double z = 0.01; z < 20.0; z += 0.13)
    {
        const double h = 1e-6;
        const double slope = (twisted.jump(z + h, rng) - twisted.jump(z - h, rng)) / (2 * h);
        CHECK(std::abs(slope) <= std::sqrt(delta) + 1e-6);
        CHECK(twisted.jump(z, rng) == doctest::Approx(twist(delta * twist_inverse(z))));
    }
}

TEST_CASE("normal tail sampler and Mills ratio")
{
    for (double x : {0.0, 0.3, 1.0, 4.0, 10.0, 40.0})
    {
        const double oracle = quadrature::integrate_to_infinity(
            [x](double s) { return std::exp(-(s * s - x * x) / 2); }, x, 1e-12, 1.0 / (1.0 + x));
        CHECK(mills_ratio(x) == doctest::Approx(oracle).epsilon(1e-9));
    }
    CHECK(mills_ratio(1e4) == doctest::Approx(1e-4).epsilon(1e-7));

    for (double x = 0.0; x <= 10.0; x += 0.25)
    {
        CHECK(normal_tail_acceptance(x) >= 0.5);
    }
    for (double x : {0.0, 0.4, 0.5, 2.0, 6.0})
    {
        RandomStream rng(7);
        std::vector<double> excess(100'000);
        long tries = 0;
        for (auto& e : excess)
        {
            int t = 0;
            e = sample_normal_tail_excess(x, rng, &t);
            tries += t;
        }
        const double accept = excess.size() / static_cast<double>(tries);
        CHECK(accept == doctest::Approx(normal_tail_acceptance(x)).epsilon(0.02));
        // E[N - x | N > x] = 1/R(x) - x.
        CHECK(within_se(mean_and_error(excess), 1.0 / mills_ratio(x) - x, 4.0));
    }
}
