#include "opfdl/rng.hpp"

namespace opfdl {
namespace {

uint64_t splitmix_next(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

Rng::Rng(uint64_t seed, std::string_view stream) {
  state_ = seed ^ fnv1a(stream);
  // A couple of warmup mixes decorrelate nearby seeds and stream hashes.
  splitmix_next(state_);
  splitmix_next(state_);
}

Rng::Rng(uint64_t seed, std::string_view stream, uint64_t index)
    : Rng(seed ^ (0x9E3779B97F4A7C15ull * (index + 1)), stream) {}

uint64_t Rng::next_u64() { return splitmix_next(state_); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

uint64_t Rng::below(uint64_t n) {
  // Lemire's multiply-shift; bias is negligible for n << 2^64 and the result
  // is fully deterministic, which is what matters here.
  return static_cast<uint64_t>(
      (static_cast<__uint128_t>(next_u64()) * n) >> 64);
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace opfdl
