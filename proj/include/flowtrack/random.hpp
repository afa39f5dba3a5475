#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace flowtrack {

// mt19937_64 has a fully specified output sequence; the distributions below are written
// out so that samples are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  std::uint64_t index(std::uint64_t bound);  // [0, bound), bound > 0
  bool bernoulli(double p) { return uniform() < p; }
  double normal();  // standard normal
  std::uint64_t poisson(double mean);

  void shuffle(std::vector<std::size_t>& items);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace flowtrack
