#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace avalanche {

// Philox4x32-10 counter-based generator. A stream is fully determined by
// (key, stream id); the block counter advances with each call.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t key, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Raw bijection, exposed for known-answer tests.
  static Block encrypt(Block ctr, Key key);

  std::uint64_t blocks_used() const { return block_; }

 private:
  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buf_{};
  int pos_ = 4;
};

using Rng = Philox4x32;

// Independent stream for one replicate. `purpose` separates unrelated uses
// of the same seed (for instance different grid points of a campaign).
Rng make_stream(std::uint64_t master_seed, std::uint64_t replicate_index,
                std::uint64_t purpose = 0);

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool bernoulli(Rng& rng, double prob);
std::int64_t binomial(Rng& rng, std::int64_t trials, double prob);
std::int64_t poisson(Rng& rng, double mean);
double normal(Rng& rng, double mean, double sd);

}  // namespace avalanche
