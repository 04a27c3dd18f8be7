#pragma once

#include <cmath>
#include <cstdint>

namespace oam {

// Seedable pseudo-random generator shared by every module.
//
// The generator is SplitMix64 (Steele, Lea & Flood / Vigna). It is fully
// specified here so any implementation, in any language, reproduces the same
// streams bit for bit:
//
//   state' = state + 0x9E3779B97F4A7C15            (mod 2^64)
//   z = state'
//   z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9     (mod 2^64)
//   z = (z XOR (z >> 27)) * 0x94D049BB133111EB     (mod 2^64)
//   next_u64 = z XOR (z >> 31)
//
// Check values from seed 0: first three outputs are
//   0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F.
//
// Derived draws:
//   unit()      = (next_u64 >> 11) * 2^-53                    in [0, 1)
//   unit_open() = ((next_u64 >> 11) + 1) * 2^-53              in (0, 1]
//   normal()    = sqrt(-2 ln u1) * cos(2 pi u2) with u1 = unit_open(),
//                 u2 = unit(); exactly two draws per call, no cached spare
//   below(n)    = next_u64 mod n   (modulo reduction; the tiny bias is
//                 accepted in exchange for cross-language reproducibility)
//
// Splitting: derive(tag) returns an independent child stream without
// advancing the parent. The child state is
//   mix(state XOR (0x9E3779B97F4A7C15 * (tag + 1)))
// where mix is the finalizer (the three lines after state' above). Streams
// derived with distinct tags from the same parent are independent for all
// practical purposes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Standard normal via the trigonometric Box-Muller transform. Consumes
  // exactly two uniforms; the companion value is discarded.
  double normal() {
    const double u1 = unit_open();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Child stream keyed by tag; does not advance this generator.
  Rng derive(std::uint64_t tag) const {
    return Rng(mix(state_ ^ (0x9E3779B97F4A7C15ULL * (tag + 1))));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace oam
