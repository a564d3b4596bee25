#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace brownent {

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept;
};

/// Independent random streams, one per (seed, stream id, domain).
enum class StreamDomain : std::uint8_t {
  StepNoise = 0,
  InitialCondition = 1,
};

/// Standard normal draws addressed by position rather than by generator
/// state: the draws for (seed, stream, domain, step) are always the same,
/// whichever thread asks and in whatever order. Normals come from Box-Muller
/// on 53-bit uniforms so results do not depend on the standard library.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream_id,
               StreamDomain domain = StreamDomain::StepNoise) noexcept;

  /// Fills out with the standard normals of counter position `step`.
  void normals(std::uint64_t step, std::span<double> out) const noexcept;

  /// Uniforms in the open interval (0, 1), two per counter block.
  void uniforms(std::uint64_t step, std::span<double> out) const noexcept;

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_;
  std::uint32_t domain_bits_;
};

}  // namespace brownent
