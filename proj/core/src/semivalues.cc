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

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <system_error>

#include "cdvm/error.h"
#include "cdvm/parallel.h"
#include "cdvm/rng.h"

namespace cdvm {
namespace {

constexpr std::size_t kMasksPerTask = 4096;
constexpr std::size_t kSamplesPerTask = 64;

void CheckEnumerable(const Game& game) {
  if (game.num_players() > kMaxExactPlayers) {
    throw std::invalid_argument("exact enumeration supports at most 20 players, got " +
                                std::to_string(game.num_players()));
  }
}

// v(S) for every bitmask S.
std::vector<double> ValueTable(const Game& game, int threads) {
  const std::size_t size = std::size_t{1} << game.num_players();
  std::vector<double> table(size);
  const std::size_t tasks = (size + kMasksPerTask - 1) / kMasksPerTask;
  ParallelFor(tasks, threads, [&](std::size_t t) {
    const std::size_t end = std::min(size, (t + 1) * kMasksPerTask);
    for (std::size_t mask = t * kMasksPerTask; mask < end; ++mask) {
      table[mask] = game.Value(MaskMembers(mask));
    }
  });
  return table;
}

// sums[i][s] = sum over |S| = s, i not in S, of v(S u {i}) - v(S).
std::vector<std::vector<double>> MarginalSumsBySize(const std::vector<double>& table,
                                                    std::size_t n, int threads) {
  std::vector<std::vector<double>> sums(n, std::vector<double>(n, 0.0));
  ParallelFor(n, threads, [&](std::size_t i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    for (std::uint64_t mask = 0; mask < table.size(); ++mask) {
      if (mask & bit) continue;
      sums[i][static_cast<std::size_t>(std::popcount(mask))] += table[mask | bit] - table[mask];
    }
  });
  return sums;
}

std::string FormatDouble(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

ValueVector Loo(const Game& game, int threads) {
  const std::size_t n = game.num_players();
  if (n == 0) throw std::invalid_argument("LOO needs at least one player");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double full = game.Value(all);
  ValueVector out;
  out.estimator = "loo";
  out.values.resize(n);
  ParallelFor(n, threads, [&](std::size_t i) {
    std::vector<std::size_t> rest;
    rest.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) rest.push_back(j);
    }
    out.values[i] = full - game.Value(rest);
  });
  return out;
}

ValueVector ExactShapley(const Game& game, int threads) {
  CheckEnumerable(game);
  const std::size_t n = game.num_players();
  ValueVector out;
  out.estimator = "exact-shapley";
  if (n == 0) return out;
  const auto table = ValueTable(game, threads);
  const auto sums = MarginalSumsBySize(table, n, threads);
  // Weight of a coalition of size s is 1 / (n * C(n-1, s)).
  std::vector<double> weight(n);
  double binom = 1.0;
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = 1.0 / (static_cast<double>(n) * binom);
    binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
  }
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double phi = 0.0;
    for (std::size_t s = 0; s < n; ++s) phi += weight[s] * sums[i][s];
    out.values[i] = phi;
  }
  return out;
}

ValueVector ExactBanzhaf(const Game& game, int threads) {
  CheckEnumerable(game);
  const std::size_t n = game.num_players();
  ValueVector out;
  out.estimator = "exact-banzhaf";
  if (n == 0) return out;
  const auto table = ValueTable(game, threads);
  const auto sums = MarginalSumsBySize(table, n, threads);
  const double scale = std::ldexp(1.0, -static_cast<int>(n - 1));
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = scale * std::accumulate(sums[i].begin(), sums[i].end(), 0.0);
  }
  return out;
}

ValueVector ClusterShapleyClosedForm(const ClusteredGame& game) {
  ValueVector out;
  out.estimator = "cluster-shapley";
  out.values.resize(game.num_players());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const int k = game.cluster_of()[i];
    out.values[i] = game.utilities()[k] / static_cast<double>(game.cluster_sizes()[k]);
  }
  return out;
}

ValueVector ClusterBanzhafClosedForm(const ClusteredGame& game) {
  ValueVector out;
  out.estimator = "cluster-banzhaf";
  out.values.resize(game.num_players());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const int k = game.cluster_of()[i];
    out.values[i] =
        std::ldexp(game.utilities()[k], -static_cast<int>(game.cluster_sizes()[k] - 1));
  }
  return out;
}

ValueVector McShapley(const Game& game, const McShapleyOptions& options) {
  if (options.permutations == 0) throw std::invalid_argument("permutations must be >= 1");
  const std::size_t n = game.num_players();
  const std::size_t samples =
      options.antithetic ? (options.permutations + 1) / 2 : options.permutations;
  const std::size_t tasks = (samples + kSamplesPerTask - 1) / kSamplesPerTask;
  std::vector<std::vector<double>> sum(tasks, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> sum_sq(tasks, std::vector<double>(n, 0.0));

  // Marginal of each player along one permutation, added into `into`.
  auto walk = [&](const std::vector<std::size_t>& order, std::vector<double>& into) {
    std::vector<std::size_t> prefix;
    prefix.reserve(n);
    double prev = game.Value(prefix);
    for (std::size_t player : order) {
      prefix.insert(std::upper_bound(prefix.begin(), prefix.end(), player), player);
      const double cur = game.Value(prefix);
      into[player] += cur - prev;
      prev = cur;
    }
  };

  ParallelFor(tasks, options.threads, [&](std::size_t t) {
    std::vector<std::size_t> order(n);
    std::vector<double> sample(n);
    const std::size_t end = std::min(samples, (t + 1) * kSamplesPerTask);
    for (std::size_t s = t * kSamplesPerTask; s < end; ++s) {
      CounterRng rng(DeriveSeed(options.seed, s));
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.UniformInt(i)]);
      }
      std::fill(sample.begin(), sample.end(), 0.0);
      walk(order, sample);
      if (options.antithetic) {
        std::reverse(order.begin(), order.end());
        walk(order, sample);
        for (double& x : sample) x *= 0.5;
      }
      for (std::size_t i = 0; i < n; ++i) {
        sum[t][i] += sample[i];
        sum_sq[t][i] += sample[i] * sample[i];
      }
    }
  });

  ValueVector out;
  out.estimator = options.antithetic ? "mc-shapley-antithetic" : "mc-shapley";
  out.num_samples = samples;
  out.seed = options.seed;
  out.values.assign(n, 0.0);
  out.std_errors.assign(n, 0.0);
  std::vector<double> total_sq(n, 0.0);
  for (std::size_t t = 0; t < tasks; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      out.values[i] += sum[t][i];
      total_sq[i] += sum_sq[t][i];
    }
  }
  const double count = static_cast<double>(samples);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = out.values[i] / count;
    out.values[i] = mean;
    if (samples > 1) {
      const double var = std::max(0.0, (total_sq[i] - count * mean * mean) / (count - 1.0));
      out.std_errors[i] = std::sqrt(var / count);
    }
  }
  return out;
}

ValueVector DataOob(const LabeledDataset& data, const LearnerSpec& spec,
                    const DataOobOptions& options) {
  if (options.num_bootstraps == 0) throw std::invalid_argument("num_bootstraps must be >= 1");
  spec.Validate();
  const std::size_t n = data.num_train();
  if (n == 0) throw std::invalid_argument("DataOob needs training data");
  // -1: in bag, 0/1: out-of-bag correctness.
  std::vector<std::vector<std::int8_t>> outcome(options.num_bootstraps);
  ParallelFor(options.num_bootstraps, options.threads, [&](std::size_t b) {
    CounterRng rng(DeriveSeed(options.seed, b));
    std::vector<std::size_t> bag(n);
    std::vector<std::int8_t>& row = outcome[b];
    row.assign(n, 0);
    for (auto& pos : bag) {
      pos = rng.UniformInt(n);
      row[pos] = -1;
    }
    LearnerSpec local = spec;
    local.seed = DeriveSeed(spec.seed, b);
    const Model model = TrainLearner(data, bag, local);
    for (std::size_t i = 0; i < n; ++i) {
      if (row[i] == -1) continue;
      row[i] = model.Predict(data.row(data.train_row(i))) == data.train_label(i) ? 1 : 0;
    }
  });

  ValueVector out;
  out.estimator = "dataoob";
  out.num_samples = options.num_bootstraps;
  out.seed = options.seed;
  out.values.assign(n, 0.0);
  out.std_errors.assign(n, 0.0);
  out.undefined.assign(n, 0);
  std::vector<std::size_t> oob(n, 0);
  std::vector<std::size_t> hits(n, 0);
  for (const auto& row : outcome) {
    for (std::size_t i = 0; i < n; ++i) {
      if (row[i] < 0) continue;
      ++oob[i];
      hits[i] += static_cast<std::size_t>(row[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (oob[i] == 0) {
      out.undefined[i] = 1;
      continue;
    }
    const double p = static_cast<double>(hits[i]) / static_cast<double>(oob[i]);
    out.values[i] = p;
    out.std_errors[i] = std::sqrt(p * (1.0 - p) / static_cast<double>(oob[i]));
  }
  return out;
}

void SaveValuesCsv(const ValueVector& values, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "index,value,stderr\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << i << ',' << FormatDouble(values.values[i]) << ',';
    if (!values.std_errors.empty()) out << FormatDouble(values.std_errors[i]);
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

ValueVector LoadValuesCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "index,value,stderr") {
    throw std::invalid_argument(path + ": expected header index,value,stderr");
  }
  ValueVector out;
  out.estimator = "loaded";
  bool any_stderr = false;
  std::vector<double> errs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::invalid_argument(path + ": malformed row '" + line + "'");
    }
    std::size_t index = 0;
    double value = 0.0;
    double err = 0.0;
    auto r1 = std::from_chars(line.data(), line.data() + c1, index);
    auto r2 = std::from_chars(line.data() + c1 + 1, line.data() + c2, value);
    if (r1.ec != std::errc() || r2.ec != std::errc() || index != out.values.size()) {
      throw std::invalid_argument(path + ": malformed row '" + line + "'");
    }
    if (c2 + 1 < line.size()) {
      auto r3 = std::from_chars(line.data() + c2 + 1, line.data() + line.size(), err);
      if (r3.ec != std::errc()) throw std::invalid_argument(path + ": bad stderr");
      any_stderr = true;
    }
    out.values.push_back(value);
    errs.push_back(err);
  }
  if (any_stderr) out.std_errors = std::move(errs);
  return out;
}

}  // namespace cdvm
