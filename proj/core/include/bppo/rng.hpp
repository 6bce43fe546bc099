#pragma once

#include <cstdint>
#include <initializer_list>

namespace bppo {

// Deterministic splitmix64 generator. All randomness in the library flows
// through this class so results are reproducible across platforms; std::
// distributions are deliberately not used (their output is unspecified).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();

  // uniform in [0, 1) with 53 random bits
  double next_double();

  // uniform integer in [0, n), n > 0, via rejection sampling (unbiased)
  uint64_t below(uint64_t n);

  // standard normal via Box-Muller; caches the spare sample
  double next_gaussian();

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Mixes an ordered list of integers into a single stream seed. Used to derive
// independent child streams, e.g. (global_seed, prompt_index, response_index).
uint64_t derive_seed(std::initializer_list<uint64_t> parts);

}  // namespace bppo
