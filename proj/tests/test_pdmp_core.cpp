#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pdmp/errors.hpp"
#include "pdmp/models.hpp"
#include "pdmp/quadrature.hpp"
#include "support.hpp"

using namespace pdmp;
using test_support::sample_mean;
using test_support::within_se;

namespace
{
Model constant_tcp(double lambda = 1.0, double delta = 0.5)
{
    return models::make_tcp_constant({lambda, models::JumpFactor::deterministic(delta)});
}

// Storage flow with the jump clock switched off.
Model frozen_storage()
{
    Model m = models::make_storage(models::StorageParams::exponential_increments(1.0, 1.0));
    m.rate = [](double) { return 0.0; };
    m.cum_rate = [](double, double) { return 0.0; };
    m.inv_cum_rate = [](double, double) { return std::numeric_limits<double>::infinity(); };
    return m;
}
}  // namespace

TEST_CASE("jump times invert the cumulative rate")
{
    CHECK(constant_tcp(2.0).inv_cum_rate(3.0, 1.0) == doctest::Approx(0.5));
    const Model lin = models::make_tcp_linear({0.5});
    CHECK(lin.inv_cum_rate(0.0, 2.0) == doctest::Approx(2.0).epsilon(1e-14));

    // Mean of the first jump time from 0 against a quadrature oracle.
    const double oracle = quadrature::integrate_to_infinity(
        [](double t) { return t * t * std::exp(-t * t / 2); }, 0.0);
    CHECK(oracle == doctest::Approx(std::sqrt(std::numbers::pi / 2)).epsilon(1e-8));
    RandomStream rng(5);
    const auto mean = sample_mean(1'000'000, [&] { return sample_jump_time(lin, 0.0, rng); });
    CHECK(within_se(mean, oracle));
}

TEST_CASE("trajectories")
{
    const Model m = constant_tcp();
    RandomStream rng(1);
    const auto empty = simulate_path(m, 1.5, 0.0, rng);
    CHECK(empty.events.empty());
    CHECK(empty.end_state == 1.5);

    RandomStream r2(2);
    const auto flow_only = simulate_path(frozen_storage(), 1.0, 1.0, r2);
    CHECK(flow_only.events.empty());
    CHECK(flow_only.end_state == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    // Jumps of a rate-1 clock form a renewal process with unit mean spacing.
    RandomStream r3(3);
    const auto long_path = simulate_path(m, 0.0, 1e4, r3);
    CHECK(long_path.events.size() / 1e4 == doctest::Approx(1.0).epsilon(0.02));
    for (const auto& e : long_path.events)
    {
        CHECK_MESSAGE(e.post_jump_state == doctest::Approx(0.5 * e.pre_jump_state), e.time);
    }

    SUBCASE("replay and endpoint agree bit for bit")
    {
        RandomStream a(9), b(9), c(9);
        const auto p1 = simulate_path(m, 0.3, 50.0, a);
        const auto p2 = simulate_path(m, 0.3, 50.0, b);
        REQUIRE(p1.events.size() == p2.events.size());
        for (std::size_t i = 0; i < p1.events.size(); ++i)
        {
            CHECK(p1.events[i].time == p2.events[i].time);
            CHECK(p1.events[i].post_jump_state == p2.events[i].post_jump_state);
        }
        CHECK(simulate_endpoint(m, 0.3, 50.0, c) == p1.end_state);
    }

    SUBCASE("errors")
    {
        RandomStream r(4);
        CHECK_THROWS_AS(simulate_path(m, -1.0, 1.0, r), DomainError);
        CHECK_THROWS_AS(simulate_path(m, 0.0, 1e4, r, SimulationOptions{10}), ExplosionError);
        Model broken = m;
        broken.inv_cum_rate = [](double, double) { return std::nan(""); };
        CHECK_THROWS_AS(simulate_path(broken, 0.0, 1.0, r), UnboundedSearchError);
    }
}

TEST_CASE("semigroup estimates")
{
    const Model m = constant_tcp();
    const RandomStream rng(17);
    const auto one = semigroup_estimate(m, [](double) { return 1.0; }, 0.7, 3.0, 100, rng, 1);
    CHECK(one.value == 1.0);
    CHECK(one.std_error == 0.0);
    const auto at_zero = semigroup_estimate(m, [](double x) { return x * x; }, 3.0, 0.0, 10, rng, 1);
    CHECK(at_zero.value == 9.0);

    // Long-time limit is the continuous-time invariant mean 1/(lambda (1 - delta)) = 2.
    const auto ergodic = semigroup_estimate(m, [](double x) { return x; }, 0.0, 20.0, 1'000'000, rng);
    CHECK(within_se(ergodic, 2.0));

    const auto w1 = semigroup_estimate(m, [](double x) { return std::sin(x); }, 1.0, 2.0, 5000, rng, 1);
    const auto w3 = semigroup_estimate(m, [](double x) { return std::sin(x); }, 1.0, 2.0, 5000, rng, 3);
    CHECK(w1.value == w3.value);
    CHECK(w1.std_error == w3.std_error);
}

TEST_CASE("coupled gradient estimates")
{
    const RandomStream rng(23);
    const Model m = constant_tcp();
    const auto affine = gradient_semigroup_estimate(m, [](double x) { return 3 * x + 1; }, 1.0, 0.0,
                                                    1e-4, 10, rng);
    CHECK(affine.value == doctest::Approx(3.0).epsilon(1e-10));

    const Model storage = models::make_storage(models::StorageParams::exponential_increments(1.0, 1.0));
    for (double t : {0.5, 1.0, 3.0})
    {
        const auto g = gradient_semigroup_estimate(storage, [](double x) { return x; }, 2.0, t,
                                                   1e-4, 1000, rng);
        CHECK(g.value == doctest::Approx(std::exp(-t)).epsilon(1e-9));
        CHECK(g.std_error < 1e-10);
    }

    const std::size_t n = 1'000'000;
    const auto g = gradient_semigroup_estimate(m, [](double x) { return x; }, 1.0, 2.0,
                                               default_bump(1.0), n, rng);
    const double bound = std::exp(-0.75 * 2.0);
    CHECK(g.value * g.value <= bound + 3.0 * 2.0 * std::abs(g.value) * g.std_error);
}
