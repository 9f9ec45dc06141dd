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
#include "cdvm/games.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace cdvm {
namespace {

std::uint64_t MembersMask(std::span<const std::size_t> members) {
  std::uint64_t mask = 0;
  for (std::size_t i : members) mask |= std::uint64_t{1} << i;
  return mask;
}

void CheckUtilities(const std::vector<double>& u) {
  if (u.empty()) throw std::invalid_argument("a clustered game needs at least one cluster");
  for (double x : u) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("cluster utilities must be positive and finite");
    }
  }
}

}  // namespace

std::vector<std::size_t> MaskMembers(std::uint64_t mask) {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(std::popcount(mask)));
  while (mask != 0) {
    out.push_back(static_cast<std::size_t>(std::countr_zero(mask)));
    mask &= mask - 1;
  }
  return out;
}

double CharValue(const Game& game, std::span<const std::size_t> subset) {
  std::vector<std::size_t> members(subset.begin(), subset.end());
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (!members.empty() && members.back() >= game.num_players()) {
    throw std::out_of_range("player " + std::to_string(members.back()) + " out of range");
  }
  return game.Value(members);
}

double Marginal(const Game& game, std::span<const std::size_t> subset, std::size_t player) {
  if (std::find(subset.begin(), subset.end(), player) != subset.end()) {
    throw std::invalid_argument("player already in subset");
  }
  std::vector<std::size_t> with(subset.begin(), subset.end());
  with.push_back(player);
  return CharValue(game, with) - CharValue(game, subset);
}

ClusteredGame::ClusteredGame(std::vector<std::size_t> cluster_sizes,
                             std::vector<double> utilities)
    : sizes_(std::move(cluster_sizes)), utilities_(std::move(utilities)) {
  CheckUtilities(utilities_);
  if (sizes_.size() != utilities_.size()) {
    throw std::invalid_argument("cluster_sizes and utilities differ in length");
  }
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (sizes_[k] == 0) throw std::invalid_argument("every cluster needs at least one player");
    cluster_of_.insert(cluster_of_.end(), sizes_[k], static_cast<int>(k));
  }
}

ClusteredGame ClusteredGame::FromAssignment(std::vector<int> cluster_of,
                                            std::vector<double> utilities) {
  return ClusteredGame(AssignmentTag{}, std::move(cluster_of), std::move(utilities));
}

ClusteredGame::ClusteredGame(AssignmentTag, std::vector<int> cluster_of,
                             std::vector<double> utilities)
    : utilities_(std::move(utilities)), cluster_of_(std::move(cluster_of)) {
  CheckUtilities(utilities_);
  sizes_.assign(utilities_.size(), 0);
  for (int c : cluster_of_) {
    if (c < 0 || static_cast<std::size_t>(c) >= utilities_.size()) {
      throw std::invalid_argument("cluster id out of range");
    }
    ++sizes_[c];
  }
  for (std::size_t s : sizes_) {
    if (s == 0) throw std::invalid_argument("every cluster needs at least one player");
  }
}

ClusteredGame ClusteredGame::FromTestSizes(std::vector<std::size_t> cluster_sizes,
                                           const std::vector<std::size_t>& test_sizes,
                                           double lambda1) {
  if (test_sizes.size() != cluster_sizes.size()) {
    throw std::invalid_argument("test_sizes and cluster_sizes differ in length");
  }
  const double m = static_cast<double>(std::accumulate(test_sizes.begin(), test_sizes.end(),
                                                       std::size_t{0}));
  if (lambda1 <= 0.0) lambda1 = 1.0 / m;
  std::vector<double> u(test_sizes.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = lambda1 * static_cast<double>(test_sizes[k]);
  return ClusteredGame(std::move(cluster_sizes), std::move(u));
}

ClusteredGame ClusteredGame::EqualDistribution(std::vector<std::size_t> cluster_sizes,
                                               double lambda1, double lambda2) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) {
    throw std::invalid_argument("lambda1 and lambda2 must be positive");
  }
  std::vector<double> u(cluster_sizes.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    u[k] = lambda1 * (lambda2 * static_cast<double>(cluster_sizes[k]));
  }
  return ClusteredGame(std::move(cluster_sizes), std::move(u));
}

double ClusteredGame::Value(std::span<const std::size_t> members) const {
  std::vector<std::uint8_t> hit(utilities_.size(), 0);
  for (std::size_t i : members) hit[cluster_of_[i]] = 1;
  double v = 0.0;
  for (std::size_t k = 0; k < hit.size(); ++k) {
    if (hit[k]) v += utilities_[k];
  }
  return v;
}

std::string ClusteredGame::ToJson() const {
  nlohmann::json j;
  j["cluster_sizes"] = sizes_;
  j["utilities"] = utilities_;
  return j.dump();
}

ClusteredGame ClusteredGame::FromJson(const std::string& json) {
  try {
    const auto j = nlohmann::json::parse(json);
    return ClusteredGame(j.at("cluster_sizes").get<std::vector<std::size_t>>(),
                         j.at("utilities").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad clustered game JSON: ") + e.what());
  }
}

double AdditiveGame::Value(std::span<const std::size_t> members) const {
  double v = 0.0;
  for (std::size_t i : members) v += weights_[i];
  return v;
}

TabularGame::TabularGame(std::size_t num_players, std::vector<double> table)
    : n_(num_players), table_(std::move(table)) {
  if (n_ > kMaxMaskPlayers) throw std::invalid_argument("too many players for a value table");
  if (table_.size() != (std::size_t{1} << n_)) {
    throw std::invalid_argument("value table must have 2^n entries");
  }
}

double TabularGame::Value(std::span<const std::size_t> members) const {
  return table_[MembersMask(members)];
}

LearnerGame::LearnerGame(const LabeledDataset& data, LearnerSpec spec, Split split)
    : data_(&data), spec_(spec), split_(split) {
  spec_.Validate();
}

double LearnerGame::Value(std::span<const std::size_t> members) const {
  return SubsetAccuracy(*data_, members, spec_, split_);
}

MemoizedGame::MemoizedGame(const Game& inner) : inner_(&inner) {
  if (inner.num_players() > kMaxMaskPlayers) {
    throw std::invalid_argument("memoization supports at most 24 players");
  }
  const std::size_t size = std::size_t{1} << inner.num_players();
  cache_ = std::make_unique<std::atomic<double>[]>(size);
  for (std::size_t i = 0; i < size; ++i) {
    cache_[i].store(std::numeric_limits<double>::quiet_NaN(), std::memory_order_relaxed);
  }
}

double MemoizedGame::ValueMask(std::uint64_t mask) const {
  const double cached = cache_[mask].load(std::memory_order_acquire);
  if (!std::isnan(cached)) return cached;
  const auto members = MaskMembers(mask);
  const double v = inner_->Value(members);
  cache_[mask].store(v, std::memory_order_release);
  return v;
}

double MemoizedGame::Value(std::span<const std::size_t> members) const {
  return ValueMask(MembersMask(members));
}

}  // namespace cdvm
