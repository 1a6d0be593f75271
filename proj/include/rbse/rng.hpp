#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace rbse {

// Finalizer from SplitMix64. Bijective, well mixed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Derives an independent stream seed by absorbing tag words into a hash chain.
// Used everywhere a reproducible sub-stream is split off a run seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) noexcept;

// Order-sensitive hash of a real vector's bit patterns. Chains seeded by
// content (not batch position) make duplicated batch entries reproduce the
// same chain exactly.
std::uint64_t content_hash(std::span<const double> values) noexcept;

// xoshiro256++ with SplitMix64 state initialization. All stochastic code in
// the library draws through this engine and the converters below; standard
// library distributions are not used because their output sequences are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& w : s_) {
      sm += 0x9e3779b97f4a7c15ull;
      w = mix64(sm);
    }
  }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0,1), 53-bit resolution.
  double uniform() noexcept { return double(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe under log().
  double uniform_pos() noexcept { return double((next() >> 11) + 1) * 0x1.0p-53; }

  // True with probability p. Exact at the endpoints: p <= 0 never, p >= 1 always.
  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Uniform integer on [0, n); rejection keeps it exactly uniform.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t min = (0 - n) % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x < min);
    return x % n;
  }

  // Box-Muller; always consumes exactly two words. std = 0 returns mean exactly.
  double normal(double mean, double std) noexcept {
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double a = 6.283185307179586476925286766559 * uniform();
    return mean + std * (r * std::cos(a));
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Paired engines for one Gibbs chain. Parameter draws consume from a separate
// stream so degenerate ensembles (which may skip draws) cannot shift the state
// stream; this is what makes the deterministic-limit comparison exact.
struct ChainRng {
  Rng state;
  Rng theta;
  explicit ChainRng(std::uint64_t chain_seed) noexcept
      : state(derive_seed(chain_seed, {1})), theta(derive_seed(chain_seed, {2})) {}
};

}  // namespace rbse
