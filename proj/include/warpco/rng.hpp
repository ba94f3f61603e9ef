#ifndef WARPCO_RNG_HPP_
#define WARPCO_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace warpco {

// Counter-based pseudo-random stream. Draw i of stream (seed, stream_id) is
// fin(base + i * golden) with fin the splitmix64 finalizer, so a sequence is
// addressable by counter alone and is bit-identical across runs and
// platforms. Streams are plain values: copies advance independently and no
// shared state exists.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;

  std::uint64_t next_u64();

  // Uniform draw in (0, 1]; consumes one u64.
  double next_uniform();

  // Zero-mean Gaussian with the given variance; consumes exactly two u64
  // draws (Box-Muller, cosine branch). variance <= 0 is a ConfigError.
  double next_gaussian(double variance);

  // Independent child stream, e.g. one per sketch row or per channel.
  RngStream derived(std::uint64_t sub_id) const;
};

// n i.i.d. Gaussian draws with the given variance, advancing the stream.
std::vector<double> gaussian_sequence(RngStream& stream, std::size_t n,
                                      double variance);

}  // namespace warpco

#endif  // WARPCO_RNG_HPP_
