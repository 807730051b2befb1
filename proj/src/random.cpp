#include "pdmp/random.hpp"

#include <cmath>

namespace pdmp
{
namespace
{
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t rotl(std::uint64_t x, int k)
{
    return (x << k) | (x >> (64 - k));
}
}  // namespace

std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : key_(seed)
{
    std::uint64_t s = seed;
    for (auto& word : state_)
    {
        s += kGolden;
        word = mix64(s);
    }
}

std::uint64_t RandomStream::next_u64()
{
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RandomStream::uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::exponential()
{
    return -std::log1p(-uniform());
}

double RandomStream::normal()
{
    for (;;)
    {
        const double u = 2.0 * uniform() - 1.0;
        const double v = 2.0 * uniform() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0)
        {
            return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

RandomStream RandomStream::substream(std::uint64_t index) const
{
    // Two rounds so that (key, index) and (key + 1, index - 1) do not collide.
    const std::uint64_t child = mix64(key_ ^ mix64(index * kGolden + 0x632be59bd9b4e019ull));
    return RandomStream(mix64(child + kGolden));
}

}  // namespace pdmp
