#pragma once

#include <array>
#include <cstdint>

namespace phacklab {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stateless: a block of four 32-bit words is a pure function of a 64-bit key
/// and a 128-bit counter, so any (seed, trajectory, period) draw can be
/// produced independently of every other one.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Key key, Block counter);
};

/// Uniform double in [0, 1) with 53 random bits for (seed, stream, index).
double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace phacklab
