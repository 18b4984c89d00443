#include "avalanche/rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace avalanche {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t key, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      stream_(stream) {}

Philox4x32::Block Philox4x32::encrypt(Block ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

Philox4x32::result_type Philox4x32::operator()() {
  if (pos_ >= 4) {
    Block ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
              static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    buf_ = encrypt(ctr, key_);
    ++block_;
    pos_ = 0;
  }
  std::uint64_t v = (static_cast<std::uint64_t>(buf_[pos_]) << 32) | buf_[pos_ + 1];
  pos_ += 2;
  return v;
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t replicate_index, std::uint64_t purpose) {
  std::uint64_t key = purpose == 0 ? master_seed : splitmix64(master_seed ^ splitmix64(purpose));
  return Rng(key, replicate_index);
}

bool bernoulli(Rng& rng, double prob) {
  if (prob <= 0.0) return false;
  if (prob >= 1.0) return true;
  return uniform01(rng) < prob;
}

std::int64_t binomial(Rng& rng, std::int64_t trials, double prob) {
  if (trials < 0) throw std::invalid_argument("binomial: negative trial count");
  if (trials == 0 || prob <= 0.0) return 0;
  if (prob >= 1.0) return trials;
  std::binomial_distribution<std::int64_t> dist(trials, prob);
  return dist(rng);
}

std::int64_t poisson(Rng& rng, double mean) {
  if (mean < 0.0 || !std::isfinite(mean)) throw std::invalid_argument("poisson: bad mean");
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

double normal(Rng& rng, double mean, double sd) {
  if (sd == 0.0) return mean;
  std::normal_distribution<double> dist(mean, sd);
  return dist(rng);
}

}  // namespace avalanche
