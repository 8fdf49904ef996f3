#pragma once

#include <cmath>
#include <cstdint>

namespace meanfield {

// Counter-based noise: every (seed, purpose, id, step) tuple names an
// independent substream. Draws are a pure function of the tuple and the
// draw index, so a parallel sweep over particles produces bit-identical
// noise to a serial one, in any order.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class StreamPurpose : std::uint64_t {
  kInit = 1,
  kNoise = 2,
  kData = 3,
  kSampler = 4,
  kProbe = 5,
};

class Substream {
 public:
  Substream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t id = 0,
            std::uint64_t step = 0) {
    std::uint64_t s = mix64(seed ^ 0x8f1bbcdcbfa53e0bULL);
    s = mix64(s ^ static_cast<std::uint64_t>(purpose));
    s = mix64(s ^ id);
    state_ = mix64(s ^ step);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0,1); never returns an endpoint.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. One draw consumes two uniforms.
  double next_normal() {
    double u1 = next_uniform();
    double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace meanfield
