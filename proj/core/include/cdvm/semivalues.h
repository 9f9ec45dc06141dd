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
#ifndef CDVM_SEMIVALUES_H_
#define CDVM_SEMIVALUES_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdvm/dataset.h"
#include "cdvm/games.h"
#include "cdvm/learner.h"

namespace cdvm {

// One score per training player.
struct ValueVector {
  std::vector<double> values;
  // Per-player standard error for sampled estimators; empty when exact.
  std::vector<double> std_errors;
  // Players whose value could not be estimated (stored as 0); empty if none.
  std::vector<std::uint8_t> undefined;
  std::string estimator;
  std::size_t num_samples = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return values.size(); }
  bool is_undefined(std::size_t i) const { return !undefined.empty() && undefined[i] != 0; }
};

// Largest player count accepted by the enumeration estimators.
inline constexpr std::size_t kMaxExactPlayers = 20;

// values[i] = v(D) - v(D \ {i}).
ValueVector Loo(const Game& game, int threads = 0);

// Exact Shapley value by enumerating all 2^n coalitions. Throws
// std::invalid_argument when n > kMaxExactPlayers.
ValueVector ExactShapley(const Game& game, int threads = 0);

// Exact Banzhaf value: the unweighted mean of the 2^(n-1) marginals.
ValueVector ExactBanzhaf(const Game& game, int threads = 0);

// u_k / n_k for every player of cluster k.
ValueVector ClusterShapleyClosedForm(const ClusteredGame& game);

// u_k / 2^(n_k - 1) for every player of cluster k.
ValueVector ClusterBanzhafClosedForm(const ClusteredGame& game);

struct McShapleyOptions {
  std::size_t permutations = 1000;
  std::uint64_t seed = 0;
  // Pairs every sampled permutation with its reverse; the pair average is
  // one sample, and permutations/2 (rounded up) pairs are drawn.
  bool antithetic = false;
  int threads = 0;
};

// Permutation-sampling Shapley estimate with per-player standard errors.
// Identical output for any thread count.
ValueVector McShapley(const Game& game, const McShapleyOptions& options);

struct DataOobOptions {
  std::size_t num_bootstraps = 1000;
  std::uint64_t seed = 0;
  int threads = 0;
};

// Out-of-bag value: mean correctness of training point i over the
// bootstrap models (bags of size n drawn with replacement) that did not see
// it. Points that are never out of bag get value 0 and an undefined flag.
ValueVector DataOob(const LabeledDataset& data, const LearnerSpec& spec,
                    const DataOobOptions& options);

// CSV with header index,value,stderr; stderr is empty for exact estimators.
void SaveValuesCsv(const ValueVector& values, const std::string& path);
ValueVector LoadValuesCsv(const std::string& path);

}  // namespace cdvm

#endif  // CDVM_SEMIVALUES_H_
