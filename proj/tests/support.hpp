#pragma once

#include <cmath>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/random.hpp"

namespace test_support
{

// Hand-rolled generators for the property tests.
struct Gen
{
    pdmp::RandomStream rng;

    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng.uniform() * n); }

    std::vector<double> values(std::size_t n, double lo, double hi)
    {
        std::vector<double> out(n);
        for (auto& v : out)
        {
            v = uniform(lo, hi);
        }
        return out;
    }
};

// |estimate - target| within k standard errors.
inline bool within_se(const pdmp::Estimate& e, double target, double k = 3.0)
{
    return std::abs(e.value - target) <= k * e.std_error;
}

template<class Draw>
pdmp::Estimate sample_mean(std::size_t n, Draw&& draw)
{
    std::vector<double> xs(n);
    for (auto& x : xs)
    {
        x = draw();
    }
    return pdmp::mean_and_error(xs);
}

}  // namespace test_support
