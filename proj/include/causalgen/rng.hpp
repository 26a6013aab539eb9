#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace causalgen {

// All randomness flows from one root seed. Independent sub-streams are
// derived by hashing a stream name into the seed, so adding a stream never
// disturbs the draws of existing ones. Uniform doubles are built from raw
// mt19937_64 output instead of std::uniform_real_distribution to keep the
// sequence identical across standard library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform();
  double uniform(double lo, double hi);
  // [0, n)
  std::int64_t uniform_int(std::int64_t n);
  // standard normal via Box-Muller
  double normal();

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace causalgen
