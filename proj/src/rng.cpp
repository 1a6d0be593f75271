#include "rbse/rng.hpp"

#include <bit>

namespace rbse {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = mix64(base + 0x9e3779b97f4a7c15ull);
  for (std::uint64_t w : words) h = mix64(h ^ (w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
  return h;
}

std::uint64_t content_hash(std::span<const double> values) noexcept {
  std::uint64_t h = mix64(0x243f6a8885a308d3ull ^ values.size());
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    h = mix64(h ^ (bits + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
  }
  return h;
}

}  // namespace rbse
