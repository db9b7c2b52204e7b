// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace citynav
{

/// Seeded generator with portable draws: mt19937_64 output is fixed by the
/// standard, and the conversions below avoid the implementation-defined
/// std distributions.
class Rng
{
  public:
    explicit Rng(std::uint64_t seed): _engine(seed) {}

    std::uint64_t next() { return _engine(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(_engine() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, n). n must be positive.
    std::size_t index(std::size_t n)
    {
        const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

  private:
    std::mt19937_64 _engine;
};

} // namespace citynav
