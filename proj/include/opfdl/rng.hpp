#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace opfdl {

// SplitMix64 stream. One master seed fans out into independent named streams
// ("dataset", "init", "shuffle", ...) so adding a consumer never perturbs the
// draws of another. All distributions are hand-rolled on top of next_u64 to
// keep byte-identical behaviour across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  Rng(uint64_t seed, std::string_view stream);
  Rng(uint64_t seed, std::string_view stream, uint64_t index);

  uint64_t next_u64();
  // [0, 1)
  double uniform01();
  double uniform(double lo, double hi);
  // [0, n), n > 0
  uint64_t below(uint64_t n);

 private:
  uint64_t state_;
};

// Fisher-Yates with Rng::below; deterministic for a given stream.
void shuffle_indices(std::vector<int>& idx, Rng& rng);

}  // namespace opfdl
