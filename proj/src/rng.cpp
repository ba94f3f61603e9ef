#include "warpco/rng.hpp"

#include <cmath>

#include "warpco/error.hpp"

namespace warpco {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// splitmix64 finalizer (Stafford mix 13).
std::uint64_t fin(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

std::uint64_t stream_base(std::uint64_t seed, std::uint64_t stream_id) {
  return fin(fin(seed + kGolden) ^ fin(~stream_id));
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  std::uint64_t v = fin(stream_base(seed, stream_id) + counter * kGolden);
  ++counter;
  return v;
}

double RngStream::next_uniform() {
  // 53 mantissa bits, shifted into (0, 1] so log() below is always finite.
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
}

double RngStream::next_gaussian(double variance) {
  if (!(variance > 0.0))
    throw ConfigError("gaussian variance must be positive");
  double u1 = next_uniform();
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  return std::sqrt(variance) * r * std::cos(6.283185307179586476925286766559 * u2);
}

RngStream RngStream::derived(std::uint64_t sub_id) const {
  return RngStream{seed, fin(stream_id * kGolden + sub_id + 1), 0};
}

std::vector<double> gaussian_sequence(RngStream& stream, std::size_t n,
                                      double variance) {
  if (!(variance > 0.0))
    throw ConfigError("gaussian variance must be positive");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = stream.next_gaussian(variance);
  return out;
}

}  // namespace warpco
