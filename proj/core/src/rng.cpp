#include "brownent/rng.hpp"

#include <cmath>
#include <numbers>

namespace brownent {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline Philox4x32::Counter round(const Philox4x32::Counter& c, const Philox4x32::Key& k) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

constexpr std::uint32_t kBlockMask = 0x00FFFFFFu;

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    ctr = round(ctr, key);
  }
  return ctr;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint32_t stream_id, StreamDomain domain) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_(stream_id),
      domain_bits_(static_cast<std::uint32_t>(domain) << 24) {}

void NormalStream::uniforms(std::uint64_t step, std::span<double> out) const noexcept {
  const auto step_lo = static_cast<std::uint32_t>(step);
  const auto step_hi = static_cast<std::uint32_t>(step >> 32);
  for (std::size_t i = 0, block = 0; i < out.size(); i += 2, ++block) {
    const Philox4x32::Counter ctr{domain_bits_ | (static_cast<std::uint32_t>(block) & kBlockMask),
                                  step_lo, step_hi, stream_};
    const auto r = Philox4x32::generate(ctr, key_);
    out[i] = to_open_unit(r[0], r[1]);
    if (i + 1 < out.size()) out[i + 1] = to_open_unit(r[2], r[3]);
  }
}

void NormalStream::normals(std::uint64_t step, std::span<double> out) const noexcept {
  const auto step_lo = static_cast<std::uint32_t>(step);
  const auto step_hi = static_cast<std::uint32_t>(step >> 32);
  for (std::size_t i = 0, block = 0; i < out.size(); i += 2, ++block) {
    const Philox4x32::Counter ctr{domain_bits_ | (static_cast<std::uint32_t>(block) & kBlockMask),
                                  step_lo, step_hi, stream_};
    const auto r = Philox4x32::generate(ctr, key_);
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] = radius * std::cos(angle);
    if (i + 1 < out.size()) out[i + 1] = radius * std::sin(angle);
  }
}

}  // namespace brownent
