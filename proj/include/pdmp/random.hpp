#pragma once

#include <array>
#include <cstdint>

namespace pdmp
{

//---------------------------------------------------------------------------//
/*!
 * Seeded random stream with deterministic sub-stream derivation.
 *
 * The generator is xoshiro256** seeded through SplitMix64. Each stream also
 * carries an immutable 64-bit key; substream(i) derives a child from the key
 * only, so children do not depend on how many draws the parent has made.
 * Every variate is produced by code in this file (no std distributions), which
 * keeps outputs bit-identical across standard library implementations.
 */
class RandomStream
{
  public:
    explicit RandomStream(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 random bits.
    double uniform();

    // Standard exponential, -log(1 - U).
    double exponential();

    // Standard normal by the Marsaglia polar method (second variate discarded).
    double normal();

    RandomStream substream(std::uint64_t index) const;

    std::uint64_t key() const { return key_; }

  private:
    std::uint64_t key_;
    std::array<std::uint64_t, 4> state_;
};

// SplitMix64 finalizer, exposed for key derivation.
std::uint64_t mix64(std::uint64_t z);

}  // namespace pdmp
