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
#ifndef CDVM_GAMES_H_
#define CDVM_GAMES_H_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cdvm/dataset.h"
#include "cdvm/learner.h"

namespace cdvm {

// Cooperative game over players 0 .. num_players()-1. Implementations must be
// deterministic and safe to evaluate concurrently.
class Game {
 public:
  virtual ~Game() = default;
  virtual std::size_t num_players() const = 0;
  // `members` is sorted, duplicate-free and in range.
  virtual double Value(std::span<const std::size_t> members) const = 0;
};

// Largest player count for which subsets are addressed by bitmask.
inline constexpr std::size_t kMaxMaskPlayers = 24;

std::vector<std::size_t> MaskMembers(std::uint64_t mask);

// v(S) for an arbitrary player list; sorts and deduplicates it first. Throws
// std::out_of_range on a player id >= num_players().
double CharValue(const Game& game, std::span<const std::size_t> subset);

// v(S u {i}) - v(S). Throws std::invalid_argument if i is already in S.
double Marginal(const Game& game, std::span<const std::size_t> subset, std::size_t player);

// v(S) = sum of u_k over the clusters C_k that S intersects.
class ClusteredGame final : public Game {
 public:
  // Players are assigned to clusters contiguously: the first sizes[0] players
  // form C_1 and so on.
  ClusteredGame(std::vector<std::size_t> cluster_sizes, std::vector<double> utilities);
  // Explicit player -> cluster map; every cluster id in [0, utilities.size())
  // must be used at least once.
  static ClusteredGame FromAssignment(std::vector<int> cluster_of, std::vector<double> utilities);

  // Accuracy utility: u_k = lambda1 * m_k. lambda1 <= 0 selects 1/m, the
  // normalised accuracy, so that v(D) = 1.
  static ClusteredGame FromTestSizes(std::vector<std::size_t> cluster_sizes,
                                     const std::vector<std::size_t>& test_sizes,
                                     double lambda1 = 0.0);
  // Train and test equally distributed over clusters: m_k = lambda2 * n_k and
  // u_k = lambda1 * m_k.
  static ClusteredGame EqualDistribution(std::vector<std::size_t> cluster_sizes, double lambda1,
                                         double lambda2);

  std::size_t num_players() const override { return cluster_of_.size(); }
  double Value(std::span<const std::size_t> members) const override;

  std::size_t num_clusters() const { return utilities_.size(); }
  const std::vector<std::size_t>& cluster_sizes() const { return sizes_; }
  const std::vector<double>& utilities() const { return utilities_; }
  const std::vector<int>& cluster_of() const { return cluster_of_; }

  // {"cluster_sizes": [...], "utilities": [...]} (contiguous assignment).
  std::string ToJson() const;
  static ClusteredGame FromJson(const std::string& json);

 private:
  struct AssignmentTag {};
  ClusteredGame(AssignmentTag, std::vector<int> cluster_of, std::vector<double> utilities);

  std::vector<std::size_t> sizes_;
  std::vector<double> utilities_;
  std::vector<int> cluster_of_;
};

// v(S) = sum of weights[i] over i in S.
class AdditiveGame final : public Game {
 public:
  explicit AdditiveGame(std::vector<double> weights) : weights_(std::move(weights)) {}
  std::size_t num_players() const override { return weights_.size(); }
  double Value(std::span<const std::size_t> members) const override;

 private:
  std::vector<double> weights_;
};

// Explicit value table indexed by bitmask (bit i set <=> player i in S).
class TabularGame final : public Game {
 public:
  TabularGame(std::size_t num_players, std::vector<double> table);
  std::size_t num_players() const override { return n_; }
  double Value(std::span<const std::size_t> members) const override;

 private:
  std::size_t n_;
  std::vector<double> table_;
};

// v(S) = accuracy on the evaluation split of the learner trained on S; the
// empty coalition scores the majority-class model.
class LearnerGame final : public Game {
 public:
  LearnerGame(const LabeledDataset& data, LearnerSpec spec, Split split = Split::kValidation);
  std::size_t num_players() const override { return data_->num_train(); }
  double Value(std::span<const std::size_t> members) const override;

 private:
  const LabeledDataset* data_;
  LearnerSpec spec_;
  Split split_;
};

// Caches every evaluation of a game with at most kMaxMaskPlayers players.
// Concurrent lookups and inserts are safe; entries are written at most once
// per distinct value.
class MemoizedGame final : public Game {
 public:
  explicit MemoizedGame(const Game& inner);
  std::size_t num_players() const override { return inner_->num_players(); }
  double Value(std::span<const std::size_t> members) const override;
  double ValueMask(std::uint64_t mask) const;

 private:
  const Game* inner_;
  std::unique_ptr<std::atomic<double>[]> cache_;
};

}  // namespace cdvm

#endif  // CDVM_GAMES_H_
