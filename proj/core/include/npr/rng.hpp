#pragma once

#include <cstdint>

namespace npr {

/// Counter-free splitmix64 stream.  Chosen over std::mt19937_64 +
/// std::uniform_real_distribution because the distribution mapping is
/// implementation-defined, while every draw here must be reproducible
/// byte-for-byte from a (seed, purpose, step, element) key alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + next_unit() * (hi - lo); }

 private:
  std::uint64_t state_;
};

/// Well-separated sub-stream keys.  Mixing is the splitmix64 finalizer, so
/// nearby (seed, tag, step, element) tuples land in unrelated states.
namespace rng_tag {
inline constexpr std::uint64_t init = 0x01;       // parameter initialization
inline constexpr std::uint64_t train = 0x02;      // per-step training batches
inline constexpr std::uint64_t refresh = 0x03;    // loss-weight refresh batches
inline constexpr std::uint64_t eval = 0x04;       // held-out evaluation ICs
inline constexpr std::uint64_t finetune = 0x05;   // fine-tuning collocation
}  // namespace rng_tag

inline std::uint64_t mix_u64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive a stream seed for (base seed, purpose tag, step, element).
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag,
                                   std::uint64_t step = 0, std::uint64_t element = 0) {
  std::uint64_t h = mix_u64(seed + 0x9e3779b97f4a7c15ULL * tag);
  h = mix_u64(h ^ (0xd1b54a32d192ed03ULL * (step + 1)));
  h = mix_u64(h ^ (0x8bb84b93962eacc9ULL * (element + 1)));
  return h;
}

}  // namespace npr
