#ifndef RAREIS_RNG_HPP
#define RAREIS_RNG_HPP

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rareis {

/// 64-bit avalanche finalizer (splitmix64 output function).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a sequence of 64-bit words into a seed. Each word is injected with
/// its position so permuted tuples hash differently. The mapping is part of
/// the reproducibility contract and must not change between versions.
constexpr std::uint64_t mix_words(std::uint64_t master, std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = mix64(master ^ 0x5851f42d4c957f2dULL);
  std::uint64_t position = 0;
  for (const auto w : words) {
    h = mix64(h ^ mix64(w + 0x632be59bd9b4e019ULL * ++position));
  }
  return h;
}

inline std::uint64_t word_of(double x) noexcept { return std::bit_cast<std::uint64_t>(x); }

/// Random stream with an explicit seed. Child streams are derived by hashing
/// (seed, stream index), so a chunk of work always sees the same numbers no
/// matter which thread runs it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_{seed}, engine_{seed} {}

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  [[nodiscard]] Rng derive(std::uint64_t stream) const { return Rng{mix_words(seed_, {stream})}; }

  /// Draws a fresh 64-bit value from this stream and returns it as a seed for
  /// a family of derived sub-streams.
  std::uint64_t next_seed() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

  double normal() { return normal_(engine_); }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u = 0.0;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{};
};

}  // namespace rareis

#endif
