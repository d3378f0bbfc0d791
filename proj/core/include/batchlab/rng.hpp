#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "batchlab/tensor.hpp"

namespace batchlab {

// Counter-based pseudo-random stream (Philox 4x32-10).
//
// The generator is a pure function of (seed, stream, block counter), so a
// stream can be replayed from its identity alone and two streams with
// different ids never share output blocks: the stream id occupies its own
// counter words. That is what makes per-walker / per-sample randomness
// reproducible independent of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform in [0, 1), 53 random bits.
  double next_double();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via the Marsaglia polar method.
  double normal();

  // Derived stream with an independent output sequence. Children of distinct
  // (parent, tag) pairs get distinct stream ids, hence disjoint counter
  // spaces under the same seed.
  Rng child(std::uint64_t tag) const;

  // k child streams, pairwise non-overlapping.
  std::vector<Rng> split(std::size_t k) const;

  // Raw Philox block, exposed for tests against reference vectors.
  static std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                                 std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  double spare_normal_ = 0.0;
  bool have_spare_normal_ = false;
};

// One-shot standard normal keyed by (seed, stream, index): deterministic in
// the key and independent of any evaluation order. Used for lazily generated
// random fields where values must not depend on visit order.
double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Tensor of i.i.d. N(mean, std^2) samples. std must be >= 0; std == 0 yields
// a constant tensor.
Tensor gaussian(Rng& rng, std::vector<std::size_t> shape, double mean, double std);

// Tensor of i.i.d. uniform samples in [lo, hi).
Tensor uniform_tensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi);

}  // namespace batchlab
