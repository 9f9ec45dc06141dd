// Copyright 2026 The CDVM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CDVM_RNG_H_
#define CDVM_RNG_H_

#include <cstdint>
#include <limits>
#include <string_view>

namespace cdvm {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Child seed for the index-th task of a run seeded with `master`.
std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t index);

// Child seed for a named purpose, e.g. DeriveSeed(seed, "msr").
std::uint64_t DeriveSeed(std::uint64_t master, std::string_view purpose);

// Counter-based generator: the k-th output is a pure function of (key, k),
// so streams can be split by key and skipped ahead without state.
// Satisfies UniformRandomBitGenerator; the distribution helpers below are
// used instead of <random> distributions so that draws are identical across
// standard library implementations.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(Mix64(key ^ 0x6A09E667F3BCC909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    return Mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
  }

  std::uint64_t counter() const { return counter_; }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform();

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t UniformInt(std::uint64_t bound);

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via Box-Muller; caches the second variate.
  double Normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cdvm

#endif  // CDVM_RNG_H_
