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
#include "cdvm/attribution.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cdvm/dataset.h"
#include "cdvm/error.h"
#include "cdvm/rng.h"
#include "cdvm/semivalues.h"
#include "gtest/gtest.h"

namespace cdvm {
namespace {

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cdvm_attr_" + name)).string();
}

std::vector<int> Contiguous(const std::vector<std::size_t>& sizes) {
  std::vector<int> out;
  for (std::size_t k = 0; k < sizes.size(); ++k) out.insert(out.end(), sizes[k], static_cast<int>(k));
  return out;
}

// Expected T_ij for i in C_k and j in T_k under the knockout utility, given
// that empty subsets are redrawn: E[correct | i in S] = 1 and
// P(incorrect | i not in S) = q^{n_k-1} (1 - q^{n-n_k}) / (1 - q^{n-1}).
double KnockoutExpectation(double p, std::size_t nk, std::size_t n) {
  const double q = 1.0 - p;
  return std::pow(q, static_cast<double>(nk - 1)) *
         (1.0 - std::pow(q, static_cast<double>(n - nk))) /
         (1.0 - std::pow(q, static_cast<double>(n - 1)));
}

TEST(AttributionMatrixTest, BuildersValidateAndQuery) {
  const auto t = AttributionMatrix::FromEntries(2, 3, {{1, 2, 0.5}, {0, 0, -1.0}, {0, 1, 0.0}});
  EXPECT_EQ(t.nnz(), 2u);
  EXPECT_EQ(t.at(1, 2), 0.5);
  EXPECT_EQ(t.at(0, 1), 0.0);
  EXPECT_EQ(t.MaxEntry(), 0.5);
  EXPECT_DOUBLE_EQ(t.MeanEntry(), -0.5 / 6.0);
  EXPECT_THROW(AttributionMatrix::FromEntries(2, 3, {{2, 0, 0.1}}), std::invalid_argument);
  EXPECT_THROW(AttributionMatrix::FromEntries(2, 3, {{0, 0, 1.5}}), std::invalid_argument);
  EXPECT_THROW(AttributionMatrix::FromEntries(2, 3, {{0, 0, 0.1}, {0, 0, 0.2}}),
               std::invalid_argument);
  const std::vector<double> dense = {0.1, 0.2, 0.3, 0.0, 0.5, 0.6};
  const auto d = AttributionMatrix::FromDense(2, 3, dense);
  EXPECT_TRUE(d.is_dense());
  EXPECT_EQ(d.at(1, 2), 0.6);
  EXPECT_EQ(d.nnz(), 5u);
}

TEST(MsrTest, IdentityUtilityRecoversDiagonal) {
  const std::size_t n = 10;
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  MsrConfig cfg;
  cfg.p = 0.5;
  cfg.num_models = 5000;
  cfg.seed = 12;
  const auto t = MsrEstimate(KnockoutEvaluator(ids, ids), n, n, cfg);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(t.at(i, j), i == j ? 1.0 : 0.0, 0.05) << i << "," << j;
    }
  }
}

TEST(MsrTest, ConstantPredictionsGiveZeroMatrix) {
  const SubsetEvaluator constant = [](std::span<const std::size_t>) {
    return std::vector<double>{1.0, 0.0, 1.0};
  };
  MsrConfig cfg;
  cfg.num_models = 500;
  const auto t = MsrEstimate(constant, 6, 3, cfg);
  EXPECT_EQ(t.nnz(), 0u);

  // A single-class training set makes every learner constant.
  ClusteredSpec spec;
  spec.centers = {{0.0}, {5.0}};
  spec.sizes = {3, 3};
  spec.labels = {0, 0};
  spec.test_sizes = {2, 2};
  const auto data = GenerateClustered(spec, 1);
  MsrConfig learner_cfg;
  learner_cfg.p = 0.4;
  learner_cfg.num_models = 300;
  EXPECT_EQ(MsrEstimate(data, learner_cfg).nnz(), 0u);
}

TEST(MsrTest, KnockoutBlocksConvergeToAnalyticValue) {
  const std::vector<std::size_t> sizes = {3, 3, 3};
  const auto train = Contiguous(sizes);
  const std::vector<int> val = {0, 0, 1, 1, 2, 2};
  const double expected = KnockoutExpectation(0.5, 3, 9);
  ASSERT_NEAR(expected, 0.25, 0.005);
  double err[2] = {0.0, 0.0};
  const std::size_t models[2] = {5000, 20000};
  for (int r = 0; r < 2; ++r) {
    MsrConfig cfg;
    cfg.p = 0.5;
    cfg.num_models = models[r];
    cfg.seed = 77;
    const auto t = MsrEstimate(KnockoutEvaluator(train, val), 9, 6, cfg);
    for (std::size_t i = 0; i < 9; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        const bool block = train[i] == val[j];
        const double d = std::abs(t.at(i, j) - (block ? expected : 0.0));
        EXPECT_LT(d, 0.05);
        if (block) err[r] += d / 27.0;
      }
    }
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[1], 0.02);
}

TEST(MsrTest, DeterministicAcrossThreadsAndCountsInvariant) {
  const auto data = GenerateClustered(Fig1Spec(0.5), 4);
  MsrConfig cfg;
  cfg.p = 0.3;
  cfg.num_models = 1200;
  cfg.seed = 99;
  cfg.threads = 1;
  const auto a = MsrEstimate(data, cfg);
  cfg.threads = 8;
  const auto b = MsrEstimate(data, cfg);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.Nonzeros(), b.Nonzeros());
  EXPECT_EQ(a.counts_in, b.counts_in);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    EXPECT_EQ(a.counts_in[i] + a.counts_out[i], cfg.num_models);
  }
  a.ForEachNonzero([](std::size_t, std::size_t, double v) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  });
}

TEST(MsrTest, UnsampledRowsAreFlagged) {
  MsrConfig cfg;
  cfg.num_models = 1;
  cfg.p = 0.5;
  const std::vector<int> ids = {0, 1, 2};
  const auto t = MsrEstimate(KnockoutEvaluator(ids, ids), 3, 3, cfg);
  EXPECT_EQ(t.num_undefined_rows(), 3u);
  EXPECT_EQ(t.nnz(), 0u);
}

TEST(MsrTest, RejectsBadConfigurations) {
  MsrConfig cfg;
  cfg.num_models = 0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg.num_models = 10;
  cfg.p = 1.0;
  EXPECT_THROW(cfg.Validate(), std::invalid_argument);
  cfg.p = 0.5;
  const std::vector<double> x = {0.0, 1.0};
  const LabeledDataset no_val(1, 2, x, {0, 1}, {0, 1}, {}, {});
  EXPECT_THROW(MsrEstimate(no_val, cfg), std::invalid_argument);
}

TEST(BanzhafFromTTest, RowMeans) {
  EXPECT_EQ(BanzhafFromT(AttributionMatrix(3, 4)).values, std::vector<double>(3, 0.0));
  const std::vector<double> col = {0.25, -0.5, 0.75};
  EXPECT_EQ(BanzhafFromT(AttributionMatrix::FromDense(3, 1, col)).values, col);
  CounterRng rng(3);
  std::vector<double> dense(7 * 5);
  for (double& v : dense) v = rng.Uniform() < 0.4 ? rng.Uniform() * 2 - 1 : 0.0;
  const auto t = AttributionMatrix::FromDense(7, 5, dense);
  const auto v = BanzhafFromT(t);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += dense[i * 5 + j];
    EXPECT_EQ(v.values[i], s / 5.0);
  }
}

TEST(BanzhafFromTTest, RankingMatchesExactBanzhafOfKnockoutGame) {
  const std::vector<std::size_t> sizes = {4, 2, 1, 3};
  const auto train = Contiguous(sizes);
  const std::vector<int> val = {0, 0, 1, 1, 2, 2, 3, 3};
  MsrConfig cfg;
  cfg.p = 0.5;
  cfg.num_models = 5000;
  cfg.seed = 5;
  const auto v = BanzhafFromT(MsrEstimate(KnockoutEvaluator(train, val), 10, 8, cfg));
  const auto exact = ExactBanzhaf(ClusteredGame(sizes, {0.25, 0.25, 0.25, 0.25}));
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) {
      if (exact.values[i] > exact.values[j] + 1e-12) EXPECT_GT(v.values[i], v.values[j]);
    }
  }
}

TEST(SparsifyTest, KeepAllIsIdentity) {
  CounterRng rng(1);
  std::vector<double> dense(20);
  for (double& v : dense) v = rng.Uniform() - 0.5;
  const auto t = AttributionMatrix::FromDense(4, 5, dense);
  EXPECT_EQ(Sparsify(t, 1.0).Nonzeros(), t.Nonzeros());
}

TEST(SparsifyTest, SingleEntrySurvives) {
  const auto t = AttributionMatrix::FromEntries(30, 40, {{7, 9, -0.01}});
  const auto s = Sparsify(t, 0.005);
  ASSERT_EQ(s.nnz(), 1u);
  EXPECT_EQ(s.at(7, 9), -0.01);
}

TEST(SparsifyTest, KeepsLargestMagnitudesAgainstSortOracle) {
  CounterRng rng(8);
  const std::size_t n = 20;
  const std::size_t m = 30;
  std::vector<double> dense(n * m);
  for (double& v : dense) v = (rng.Uniform() * 2 - 1) * 0.999 + 0.0005;
  const auto s = Sparsify(AttributionMatrix::FromDense(n, m, dense), 0.1);
  ASSERT_EQ(s.nnz(), 60u);
  double min_kept = 2.0;
  double max_dropped = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double v = s.at(i, j);
      if (v != 0.0) {
        EXPECT_EQ(v, dense[i * m + j]);
        min_kept = std::min(min_kept, std::abs(v));
      } else {
        max_dropped = std::max(max_dropped, std::abs(dense[i * m + j]));
      }
    }
  }
  EXPECT_GE(min_kept, max_dropped);
}

TEST(SparsifyTest, TiesBreakLexicographically) {
  const std::vector<double> dense(9, 0.5);
  const auto s = Sparsify(AttributionMatrix::FromDense(3, 3, dense), 0.3);
  const std::vector<AttributionMatrix::Entry> expected = {{0, 0, 0.5}, {0, 1, 0.5}, {0, 2, 0.5}};
  EXPECT_EQ(s.Nonzeros(), expected);
  EXPECT_THROW(Sparsify(s, 0.0), std::invalid_argument);
  EXPECT_THROW(Sparsify(s, 1.5), std::invalid_argument);
}

TEST(SaveLoadTest, RoundTripIsBitExact) {
  CounterRng rng(2);
  std::vector<double> dense(6 * 4);
  for (double& v : dense) v = rng.Uniform() < 0.3 ? (rng.Uniform() * 2 - 1) / 3.0 : 0.0;
  auto t = AttributionMatrix::FromDense(6, 4, dense);
  t.p = 0.03;
  t.num_models = 5000;
  t.seed = 0xFFFFFFFFFFFFFFFFULL;
  const auto path = TempPath("rt.txt");
  SaveT(t, path);
  const auto back = LoadT(path);
  EXPECT_TRUE(back == t);
  EXPECT_EQ(back.p, 0.03);
  EXPECT_EQ(back.seed, t.seed);

  for (const auto& empty : {AttributionMatrix(3, 4), AttributionMatrix(0, 0)}) {
    SaveT(empty, path);
    EXPECT_TRUE(LoadT(path) == empty);
  }
  std::filesystem::remove(path);
}

TEST(SaveLoadTest, MillionEntryRoundTripPreservesTriplets) {
  const std::size_t n = 2000;
  const std::size_t m = 1500;
  std::vector<AttributionMatrix::Entry> entries;
  CounterRng rng(31);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (rng.UniformInt(3) == 0) entries.push_back({i, j, rng.Uniform() * 2 - 1});
    }
  }
  entries.resize(std::min<std::size_t>(entries.size(), 1000000));
  ASSERT_EQ(entries.size(), 1000000u);
  auto hash = [](const std::vector<AttributionMatrix::Entry>& es) {
    std::uint64_t h = 0;
    for (const auto& e : es) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &e.value, sizeof bits);
      h = Mix64(h ^ Mix64(e.i * 1000003ULL + e.j) ^ bits);
    }
    return h;
  };
  const auto t = AttributionMatrix::FromEntries(n, m, entries);
  const auto path = TempPath("big.txt");
  SaveT(t, path);
  const auto back = LoadT(path);
  EXPECT_EQ(back.nnz(), 1000000u);
  EXPECT_EQ(hash(back.Nonzeros()), hash(t.Nonzeros()));
  std::filesystem::remove(path);
}

TEST(SaveLoadTest, RejectsMalformedFiles) {
  const auto path = TempPath("bad.txt");
  auto write = [&](const std::string& text) {
    std::ofstream out(path);
    out << text;
  };
  write("CDVM-T v2 1 1 0 0.5 10 0\n");
  EXPECT_THROW(LoadT(path), std::invalid_argument);
  write("hello\n");
  EXPECT_THROW(LoadT(path), std::invalid_argument);
  write("CDVM-T v1 2 2 1 0.5 10 0\n0 1 1.5\n");
  EXPECT_THROW(LoadT(path), std::invalid_argument);
  write("CDVM-T v1 2 2 2 0.5 10 0\n0 1 0.5\n");
  EXPECT_THROW(LoadT(path), std::invalid_argument);
  write("CDVM-T v1 2 2 1 0.5 10 0\n0 x 0.5\n");
  EXPECT_THROW(LoadT(path), std::invalid_argument);
  std::filesystem::remove(path);
  EXPECT_THROW(LoadT(path), IoError);
}

}  // namespace
}  // namespace cdvm
