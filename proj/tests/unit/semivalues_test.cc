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
#include "cdvm/semivalues.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "cdvm/dataset.h"
#include "cdvm/games.h"
#include "cdvm/learner.h"
#include "cdvm/rng.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace cdvm {
namespace {

ClusteredGame Fig1Game() { return ClusteredGame({3, 2, 2, 1}, {1, 1, 1, 1}); }

TEST(LooTest, OnlyTheSingletonClusterHasValue) {
  const auto v = Loo(Fig1Game());
  const std::vector<double> expected = {0, 0, 0, 0, 0, 0, 0, 1};
  EXPECT_EQ(v.values, expected);
}

TEST(LooTest, DuplicatesAreWorthless) {
  const TabularGame g(2, {0.0, 1.0, 1.0, 1.0});
  const auto v = Loo(g);
  EXPECT_EQ(v.values, (std::vector<double>{0.0, 0.0}));
}

TEST(LooTest, AdditiveGameGivesWeights) {
  const auto v = Loo(AdditiveGame({1, 1, 1, 1, 1}));
  for (double x : v.values) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(ExactShapleyTest, Fig1ClusteredGame) {
  const auto v = ExactShapley(Fig1Game());
  const std::vector<double> expected = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.5, 0.5, 0.5, 0.5, 1.0};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(v.values[i], expected[i], 1e-12);
}

TEST(ExactShapleyTest, SinglePlayer) {
  const TabularGame g(1, {0.0, 2.5});
  EXPECT_DOUBLE_EQ(ExactShapley(g).values[0], 2.5);
  EXPECT_DOUBLE_EQ(ExactBanzhaf(g).values[0], 2.5);
}

TEST(ExactShapleyTest, MatchesPermutationEnumerationOnRandomGames) {
  CounterRng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> table(1 << 6);
    for (double& v : table) v = rng.Uniform() * 4 - 2;
    const TabularGame g(6, table);
    const auto oracle = oracle::ShapleyByPermutations(g);
    const auto v = ExactShapley(g);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(v.values[i], oracle[i], 1e-12);
    const double total = std::accumulate(v.values.begin(), v.values.end(), 0.0);
    EXPECT_NEAR(total, table[63] - table[0], 1e-12);
  }
}

TEST(ExactBanzhafTest, MatchesSubsetEnumerationOnRandomGames) {
  CounterRng rng(202);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> table(1 << 5);
    for (double& v : table) v = rng.Uniform();
    const TabularGame g(5, table);
    const auto oracle = oracle::BanzhafBySubsets(g);
    const auto v = ExactBanzhaf(g);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(v.values[i], oracle[i], 1e-12);
  }
}

TEST(ExactBanzhafTest, ClusterValues) {
  const auto v = ExactBanzhaf(Fig1Game());
  EXPECT_NEAR(v.values[0], 0.25, 1e-12);
  EXPECT_NEAR(v.values[3], 0.5, 1e-12);
  EXPECT_NEAR(v.values[7], 1.0, 1e-12);
}

TEST(ExactEnumerationTest, RejectsTooManyPlayers) {
  const AdditiveGame big(std::vector<double>(kMaxExactPlayers + 1, 1.0));
  EXPECT_THROW(ExactShapley(big), std::invalid_argument);
  EXPECT_THROW(ExactBanzhaf(big), std::invalid_argument);
}

TEST(ExactEnumerationTest, ThreadCountDoesNotChangeValues) {
  CounterRng rng(7);
  std::vector<double> table(1 << 10);
  for (double& v : table) v = rng.Uniform();
  const TabularGame g(10, table);
  EXPECT_EQ(ExactShapley(g, 1).values, ExactShapley(g, 4).values);
  EXPECT_EQ(ExactBanzhaf(g, 1).values, ExactBanzhaf(g, 4).values);
}

TEST(ClosedFormTest, ShapleyAndBanzhaf) {
  const auto g = Fig1Game();
  const auto s = ClusterShapleyClosedForm(g);
  const auto b = ClusterBanzhafClosedForm(g);
  EXPECT_DOUBLE_EQ(s.values[0], 1.0 / 3);
  EXPECT_DOUBLE_EQ(s.values[7], 1.0);
  EXPECT_DOUBLE_EQ(b.values[0], 0.25);
  EXPECT_DOUBLE_EQ(b.values[5], 0.5);
  const ClusteredGame singletons({1, 1, 1}, {0.5, 2.0, 3.0});
  EXPECT_EQ(ClusterShapleyClosedForm(singletons).values, singletons.utilities());
  EXPECT_EQ(ClusterBanzhafClosedForm(singletons).values, singletons.utilities());
}

TEST(ClosedFormTest, EqualDistributionCollapse) {
  const double l1 = 0.05;
  const double l2 = 1.5;
  const auto g = ClusteredGame::EqualDistribution({4, 3, 2, 1, 5}, l1, l2);
  for (double v : ExactShapley(g).values) EXPECT_NEAR(v, l1 * l2, 1e-12);
  for (double v : ClusterShapleyClosedForm(g).values) EXPECT_NEAR(v, l1 * l2, 1e-12);
  const auto b = ExactBanzhaf(g);
  for (std::size_t i = 0; i < g.num_players(); ++i) {
    const double nk = static_cast<double>(g.cluster_sizes()[g.cluster_of()[i]]);
    EXPECT_NEAR(b.values[i], l1 * l2 * nk / std::pow(2.0, nk - 1), 1e-12);
  }
}

TEST(ClosedFormTest, AgreesWithEnumerationOnRandomClusteredGames) {
  CounterRng rng(303);
  for (int trial = 0; trial < 60; ++trial) {
    const auto c = oracle::DrawClusters(rng, 12, 5);
    const ClusteredGame g(c.sizes, c.utilities);
    const auto es = ExactShapley(g);
    const auto eb = ExactBanzhaf(g);
    const auto cs = ClusterShapleyClosedForm(g);
    const auto cb = ClusterBanzhafClosedForm(g);
    double total = 0.0;
    for (std::size_t i = 0; i < g.num_players(); ++i) {
      EXPECT_NEAR(es.values[i], cs.values[i], 1e-12);
      EXPECT_NEAR(eb.values[i], cb.values[i], 1e-12);
      total += cs.values[i];
    }
    const double v_full = std::accumulate(c.utilities.begin(), c.utilities.end(), 0.0);
    EXPECT_NEAR(total, v_full, 1e-9);
  }
}

TEST(ClosedFormTest, SmallerClustersRankStrictlyHigher) {
  const ClusteredGame g({5, 3, 3, 2, 1}, {1, 1, 1, 1, 1});
  for (const auto& v : {ExactShapley(g), ExactBanzhaf(g)}) {
    for (std::size_t i = 0; i < g.num_players(); ++i) {
      for (std::size_t j = 0; j < g.num_players(); ++j) {
        const auto ni = g.cluster_sizes()[g.cluster_of()[i]];
        const auto nj = g.cluster_sizes()[g.cluster_of()[j]];
        if (ni < nj) EXPECT_GT(v.values[i], v.values[j]);
        if (ni == nj) EXPECT_DOUBLE_EQ(v.values[i], v.values[j]);
      }
    }
  }
}

TEST(McShapleyTest, AdditiveGameIsExactAfterOnePermutation) {
  const AdditiveGame g({0.5, -1.0, 2.0, 3.0});
  const auto v = McShapley(g, {.permutations = 1, .seed = 4});
  EXPECT_EQ(v.values, (std::vector<double>{0.5, -1.0, 2.0, 3.0}));
}

TEST(McShapleyTest, ClusteredGameWithinThreeStandardErrors) {
  const auto g = ClusteredGame({3, 2, 2, 1}, {1.0, 0.7, 2.0, 1.3});
  const auto closed = ClusterShapleyClosedForm(g);
  const auto v = McShapley(g, {.permutations = 50000, .seed = 11, .threads = 4});
  ASSERT_EQ(v.std_errors.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_LE(std::abs(v.values[i] - closed.values[i]), 3 * v.std_errors[i] + 1e-12) << i;
  }
}

TEST(McShapleyTest, DeterministicAcrossRunsAndThreads) {
  const auto g = ClusteredGame({4, 3, 1}, {1.0, 2.0, 0.5});
  McShapleyOptions opt{.permutations = 3000, .seed = 5, .threads = 1};
  const auto a = McShapley(g, opt);
  opt.threads = 6;
  const auto b = McShapley(g, opt);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.std_errors, b.std_errors);
  opt.antithetic = true;
  const auto c = McShapley(g, opt);
  opt.threads = 1;
  EXPECT_EQ(McShapley(g, opt).values, c.values);
}

TEST(McShapleyTest, AntitheticIsStillUnbiased) {
  const auto g = ClusteredGame({3, 2, 2, 1}, {1, 1, 1, 1});
  const auto v = McShapley(g, {.permutations = 40000, .seed = 2, .antithetic = true});
  const auto closed = ClusterShapleyClosedForm(g);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_LE(std::abs(v.values[i] - closed.values[i]), 3 * v.std_errors[i] + 1e-12);
  }
}

// Well separated clusters with one distinct label each, so a 1-NN model
// predicts a cluster correctly exactly when some member is in the bag.
LabeledDataset DistinctLabelClusters(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  ClusteredSpec spec;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    spec.centers.push_back({10.0 * static_cast<double>(k), 0.0});
    spec.labels.push_back(static_cast<int>(k));
    spec.test_sizes.push_back(2);
  }
  spec.sizes = sizes;
  spec.sigma = 0.1;
  return GenerateClustered(spec, seed);
}

TEST(DataOobTest, MatchesBootstrapInclusionOdds) {
  const std::vector<std::size_t> sizes = {5, 4, 3, 1};
  const auto data = DistinctLabelClusters(sizes, 3);
  const auto v = DataOob(data, LearnerSpec{}, {.num_bootstraps = 4000, .seed = 9, .threads = 4});
  const double n = 13.0;
  std::size_t pos = 0;
  for (std::size_t nk : sizes) {
    // Given i is out of bag, the n draws come from the other n - 1 points;
    // the cluster is lost when all of them miss its n_k - 1 other members.
    const double expected = 1.0 - std::pow((n - static_cast<double>(nk)) / (n - 1.0), n);
    for (std::size_t r = 0; r < nk; ++r, ++pos) {
      EXPECT_FALSE(v.is_undefined(pos));
      EXPECT_LE(std::abs(v.values[pos] - expected), 4 * v.std_errors[pos] + 1e-12)
          << "position " << pos << " expected " << expected;
    }
  }
}

TEST(DataOobTest, LargeCleanClustersScoreNearOne) {
  const auto data = DistinctLabelClusters({12, 10, 14}, 4);
  const auto v = DataOob(data, LearnerSpec{}, {.num_bootstraps = 1000, .seed = 1});
  for (double x : v.values) EXPECT_GT(x, 0.97);
}

TEST(DataOobTest, MislabeledPointScoresNearZero) {
  // Seven points at the origin region labelled 0, one of them flipped to 1,
  // and a far cluster of class 1.
  std::vector<double> x;
  std::vector<int> y;
  CounterRng rng(8);
  for (int i = 0; i < 7; ++i) {
    x.push_back(0.1 * rng.Normal());
    x.push_back(0.1 * rng.Normal());
    y.push_back(i == 3 ? 1 : 0);
  }
  for (int i = 0; i < 5; ++i) {
    x.push_back(8.0 + 0.1 * rng.Normal());
    x.push_back(0.1 * rng.Normal());
    y.push_back(1);
  }
  x.insert(x.end(), {0.0, 0.0});
  y.push_back(0);
  std::vector<std::size_t> train(12);
  std::iota(train.begin(), train.end(), std::size_t{0});
  const LabeledDataset data(2, 2, x, y, train, {12}, {});
  const auto v = DataOob(data, LearnerSpec{}, {.num_bootstraps = 2000, .seed = 3});
  EXPECT_LT(v.values[3], 0.02);
  for (std::size_t i = 7; i < 12; ++i) EXPECT_GT(v.values[i], 0.9);
}

TEST(DataOobTest, AlwaysInBagIsFlagged) {
  const std::vector<double> x = {0.0, 1.0};
  const LabeledDataset data(1, 2, x, {0, 1}, {0}, {1}, {});
  const auto v = DataOob(data, LearnerSpec{}, {.num_bootstraps = 50, .seed = 1});
  EXPECT_TRUE(v.is_undefined(0));
  EXPECT_EQ(v.values[0], 0.0);
}

TEST(DataOobTest, DeterministicAcrossThreads) {
  const auto data = GenerateClustered(Fig1Spec(0.6), 2);
  const DataOobOptions a{.num_bootstraps = 300, .seed = 5, .threads = 1};
  const DataOobOptions b{.num_bootstraps = 300, .seed = 5, .threads = 7};
  EXPECT_EQ(DataOob(data, LearnerSpec{}, a).values, DataOob(data, LearnerSpec{}, b).values);
}

TEST(ValuesCsvTest, RoundTrip) {
  ValueVector v;
  v.values = {0.1, -1.0 / 3.0, 2.5e-300};
  v.std_errors = {0.01, 0.0, 1.0 / 7.0};
  const auto path = (std::filesystem::temp_directory_path() / "cdvm_values.csv").string();
  SaveValuesCsv(v, path);
  const auto back = LoadValuesCsv(path);
  EXPECT_EQ(back.values, v.values);
  EXPECT_EQ(back.std_errors, v.std_errors);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace cdvm
