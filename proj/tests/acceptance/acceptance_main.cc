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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cdvm/attribution.h"
#include "cdvm/bench.h"
#include "cdvm/cdvm.h"
#include "cdvm/dataset.h"
#include "cdvm/games.h"
#include "cdvm/learner.h"
#include "cdvm/rng.h"
#include "cdvm/semivalues.h"
#include "cli.h"
#include "oracles.h"

namespace cdvm {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string Fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

std::vector<int> Contiguous(const std::vector<std::size_t>& sizes) {
  std::vector<int> out;
  for (std::size_t k = 0; k < sizes.size(); ++k) out.insert(out.end(), sizes[k], static_cast<int>(k));
  return out;
}

Outcome ClosedFormShapley() {
  const Timer timer;
  const auto phi = ExactShapley(ClusteredGame({3, 2, 2, 1}, {1, 1, 1, 1}));
  const double secs = timer.Seconds();
  const std::vector<double> expected = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.5, 0.5, 0.5, 0.5, 1.0};
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    worst = std::max(worst, std::abs(phi.values.at(i) - expected[i]));
  }
  return {phi.size() == 8 && worst <= 1e-12 && secs < 1.0,
          Fmt("max error %.3g, %.3f s", worst, secs)};
}

Outcome ClosedFormBanzhaf() {
  const Timer timer;
  CounterRng rng(DeriveSeed(2, "acceptance"));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto layout = oracle::DrawClusters(rng, 12, 5);
    const ClusteredGame game(layout.sizes, layout.utilities);
    const auto phi = ExactBanzhaf(game);
    for (std::size_t i = 0; i < game.num_players(); ++i) {
      const auto k = static_cast<std::size_t>(game.cluster_of()[i]);
      const double expected =
          layout.utilities[k] / std::ldexp(1.0, static_cast<int>(layout.sizes[k]) - 1);
      worst = std::max(worst, std::abs(phi.values[i] - expected));
    }
  }
  const double secs = timer.Seconds();
  return {worst <= 1e-12 && secs < 30.0, Fmt("100 games, max error %.3g, %.3f s", worst, secs)};
}

Outcome EqualDistributionCollapse() {
  const double lambda1 = 0.05;
  const double lambda2 = 2.0;
  const std::vector<std::size_t> sizes = {1, 2, 3, 4, 5};
  const auto game = ClusteredGame::EqualDistribution(sizes, lambda1, lambda2);
  const auto shapley = ExactShapley(game);
  const auto banzhaf = ExactBanzhaf(game);
  double worst = 0.0;
  for (double v : shapley.values) worst = std::max(worst, std::abs(v - lambda1 * lambda2));
  // Banzhaf per cluster, read off the first member.
  std::vector<double> per_cluster;
  std::size_t first = 0;
  for (std::size_t size : sizes) {
    per_cluster.push_back(banzhaf.values[first]);
    first += size;
  }
  bool decreasing = true;
  for (std::size_t k = 2; k < per_cluster.size(); ++k) {
    decreasing = decreasing && per_cluster[k] < per_cluster[k - 1];
  }
  return {worst <= 1e-12 && decreasing,
          Fmt("Shapley max deviation %.3g; Banzhaf n_k=2..5 strictly decreasing: %g", worst,
              decreasing ? 1.0 : 0.0)};
}

Outcome BlockCoverage() {
  CounterRng rng(DeriveSeed(4, "acceptance"));
  std::size_t lp_violations = 0;
  std::size_t optimum_violations = 0;
  std::size_t optima = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = oracle::DrawBlockInstance(rng, 5, 4, 12);
    const double kappa = inst.model.min_tau();
    const auto sol = SolveLp(BuildProblem(inst.t, inst.budget, 0.5, kappa));
    if (!VerifyClusterCoverage(sol.selected, inst.train_cluster).all_covered) ++lp_violations;
    const auto best = oracle::BestBinary(inst.t, inst.budget, 0.5, kappa);
    for (const auto& opt : best.optima) {
      ++optima;
      if (!VerifyClusterCoverage(opt, inst.train_cluster).all_covered) ++optimum_violations;
    }
  }
  return {lp_violations == 0 && optimum_violations == 0,
          Fmt("200 instances, %g rounded-LP violations, %g of %g enumerated optima uncovered",
              static_cast<double>(lp_violations), static_cast<double>(optimum_violations),
              static_cast<double>(optima))};
}

double LpResidual(const AttributionMatrix& t, std::size_t budget, double kappa,
                  const CdvmSolution& sol) {
  double worst = std::abs(std::accumulate(sol.w.begin(), sol.w.end(), 0.0) -
                          static_cast<double>(budget));
  for (double w : sol.w) worst = std::max({worst, -w, w - 1.0});
  for (std::size_t j = 0; j < t.cols(); ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) v += t.at(i, j) * sol.w[i];
    worst = std::max({worst, std::abs(v - sol.v[j]), -sol.t[j], v - kappa - sol.t[j]});
  }
  return worst;
}

Outcome LpOracleEquivalence() {
  CounterRng rng(DeriveSeed(5, "acceptance"));
  std::size_t below = 0;
  std::size_t mismatched = 0;
  std::size_t integral = 0;
  double residual = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.UniformInt(9);
    const std::size_t m = 1 + rng.UniformInt(6);
    std::vector<double> dense(n * m, 0.0);
    for (double& v : dense) {
      if (rng.Uniform() < 0.7) v = rng.Uniform() * 2.0 - 1.0;
    }
    const auto t = AttributionMatrix::FromDense(n, m, dense);
    const std::size_t budget = 1 + rng.UniformInt(n);
    const double alpha = rng.Uniform();
    const double kappa = rng.Uniform() * 1.5;
    const auto sol = SolveLp(BuildProblem(t, budget, alpha, kappa));
    const auto best = oracle::BestBinary(t, budget, alpha, kappa);
    if (sol.objective < best.objective - 1e-9) ++below;
    if (sol.fractional_count == 0) {
      ++integral;
      if (std::abs(sol.objective - best.objective) > 1e-9) ++mismatched;
    }
    residual = std::max(residual, LpResidual(t, budget, kappa, sol));
  }
  return {below == 0 && mismatched == 0 && residual <= 1e-7,
          Fmt("LP below optimum %g times; %g integral solutions, %g mismatched", static_cast<double>(below),
              static_cast<double>(integral), static_cast<double>(mismatched)) +
              Fmt("; max residual %.3g", residual)};
}

Outcome MsrConvergence() {
  const std::vector<std::size_t> sizes = {3, 3, 3};
  const auto train = Contiguous(sizes);
  const std::vector<int> val = {0, 0, 1, 1, 2, 2};
  const double target = 0.25;
  double block_err[2] = {0.0, 0.0};
  double off_err = 0.0;
  const std::size_t models[2] = {5000, 20000};
  for (int r = 0; r < 2; ++r) {
    MsrConfig cfg;
    cfg.p = 0.5;
    cfg.num_models = models[r];
    cfg.seed = DeriveSeed(6, "acceptance");
    const auto t = MsrEstimate(KnockoutEvaluator(train, val), train.size(), val.size(), cfg);
    for (std::size_t i = 0; i < train.size(); ++i) {
      for (std::size_t j = 0; j < val.size(); ++j) {
        if (train[i] == val[j]) {
          block_err[r] = std::max(block_err[r], std::abs(t.at(i, j) - target));
        } else {
          off_err = std::max(off_err, std::abs(t.at(i, j)));
        }
      }
    }
  }
  return {block_err[0] <= 0.05 && block_err[1] <= 0.02 && off_err <= 0.05,
          Fmt("max block error %.4f at 5000 models, %.4f at 20000; max off-block %.4f",
              block_err[0], block_err[1], off_err)};
}

std::size_t FirstDrop(const RemovalCurve& curve) {
  for (std::size_t k = 0; k < curve.accuracies.size(); ++k) {
    if (curve.accuracies[k] < 1.0) return k;
  }
  return curve.accuracies.size();
}

// The fig1 preset as produced by "cdvm gen --preset fig1 --seed <seed>".
LabeledDataset Fig1Draw(std::uint64_t seed) { return GenerateClustered(Fig1Spec(), DeriveSeed(seed, "gen")); }

// CDVM at budget S = 4 on MSR estimates with p = 0.2, alpha/kappa chosen by
// validation accuracy over the default grid; returns test accuracy.
double CdvmFig1Accuracy(const LabeledDataset& data, std::uint64_t seed,
                        std::vector<std::size_t>* selected) {
  const LearnerSpec spec;
  MsrConfig cfg;
  cfg.p = 0.2;
  cfg.num_models = 5000;
  cfg.seed = DeriveSeed(seed, "msr");
  cfg.learner = spec;
  const auto t = MsrEstimate(data, cfg);
  const SubsetScorer scorer = [&](std::span<const std::size_t> s) {
    return SubsetAccuracy(data, s, spec, Split::kValidation);
  };
  const auto best = GridSearch(t, 4, DefaultAlphaGrid(), DefaultKappaGrid(t, 4), scorer);
  if (selected) *selected = best.solution.selected;
  return SubsetAccuracy(data, best.solution.selected, spec, Split::kTest);
}

Outcome Fig1Reproduction() {
  const LearnerSpec spec;
  const auto data = Fig1Draw(0);
  std::vector<std::size_t> all(data.num_train());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double full = SubsetAccuracy(data, all, spec, Split::kTest);

  // C_1 = {0,1,2}, C_2 = {3,4}, C_3 = {5,6}, C_4 = {7}.
  const std::vector<std::size_t> optimal = {0, 1, 3, 5, 4, 2, 6, 7};
  const auto best = ComputeRemovalCurve(data, spec, optimal);
  const auto shapley = ExactShapley(ClusteredGame({3, 2, 2, 1}, {1, 1, 1, 1}));
  const auto order = PruningOrderFromValues(shapley.values, RemovalDirection::kLowFirst);
  const auto curve = ComputeRemovalCurve(data, spec, order);
  const std::size_t best_drop = FirstDrop(best);
  const std::size_t shapley_drop = FirstDrop(curve);

  std::vector<std::size_t> selected;
  const double cdvm = CdvmFig1Accuracy(data, 0, &selected);
  const auto cov = VerifyClusterCoverage(selected, *data.cluster_of());

  const bool pass = full == 1.0 && best_drop > 4 && shapley_drop < best_drop && cdvm == 1.0;
  return {pass, Fmt("optimal order first drop at step %g, Shapley order at step %g", static_cast<double>(best_drop),
                    static_cast<double>(shapley_drop)) +
                    Fmt("; CDVM S=4 test accuracy %.3f, clusters covered %g/4", cdvm,
                        static_cast<double>(std::count_if(cov.counts.begin(), cov.counts.end(),
                                                          [](std::size_t c) { return c > 0; })))};
}

// Same CDVM pipeline over 50 preset draws; reported, not scored.
std::string Fig1Robustness() {
  const LearnerSpec spec;
  int clean = 0;
  int perfect = 0;
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto data = Fig1Draw(seed);
    std::vector<std::size_t> all(data.num_train());
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (SubsetAccuracy(data, all, spec, Split::kTest) < 1.0) continue;
    ++clean;
    std::vector<std::size_t> selected;
    if (CdvmFig1Accuracy(data, seed, &selected) == 1.0) ++perfect;
    if (VerifyClusterCoverage(selected, *data.cluster_of()).all_covered) ++covered;
  }
  return Fmt("%g of 50 draws separable by the full set; CDVM S=4 reaches 1.0 on %g and covers all clusters on %g",
             clean, perfect, covered);
}

Outcome LooRedundancy() {
  const auto loo = Loo(ClusteredGame({3, 2, 2, 1}, {1, 1, 1, 1}));
  bool pass = true;
  for (std::size_t i = 0; i < 8; ++i) pass = pass && ((i == 7) == (loo.values[i] != 0.0));
  const auto data = Fig1Draw(0);
  const auto learned = Loo(LearnerGame(data, LearnerSpec{}, Split::kTest));
  bool learned_pass = true;
  for (std::size_t i = 0; i < 8; ++i) learned_pass = learned_pass && ((i == 7) == (learned.values[i] != 0.0));
  return {pass && learned_pass,
          Fmt("clustered game LOO(C_4) = %.3f, learner game LOO(C_4) = %.3f, all other values zero: %g",
              loo.values[7], learned.values[7], pass && learned_pass ? 1.0 : 0.0)};
}

Outcome DefaultKappaFormula() {
  CounterRng rng(DeriveSeed(9, "acceptance"));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.UniformInt(30);
    const std::size_t m = 1 + rng.UniformInt(30);
    std::vector<double> dense(n * m, 0.0);
    for (double& v : dense) {
      if (rng.Uniform() < 0.5) v = rng.Uniform() * 2.0 - 1.0;
    }
    const auto t = AttributionMatrix::FromDense(n, m, dense);
    const std::size_t budget = 1 + rng.UniformInt(n);
    const double max = *std::max_element(dense.begin(), dense.end());
    const double mean = std::accumulate(dense.begin(), dense.end(), 0.0) / static_cast<double>(dense.size());
    worst = std::max(worst, std::abs(DefaultKappa(t, budget) - (max + static_cast<double>(budget) * mean)));
  }
  return {worst <= 1e-12, Fmt("100 matrices, max error %.3g", worst)};
}

std::map<std::string, std::string> ReadCsvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[entry.path().filename().string()] = ss.str();
  }
  return out;
}

int RunBench(const fs::path& dir, int threads) {
  std::ostringstream out;
  std::ostringstream err;
  return cli::Run({"cdvm", "--threads", std::to_string(threads), "bench", "--preset", "fig1", "--seeds", "5",
                   "--seed", "10", "--p", "0.2", "--models", "2000", "--bootstraps", "200",
                   "--out-dir", dir.string()},
                  out, err);
}

Outcome Determinism(const fs::path& workdir) {
  const fs::path a = workdir / "bench_a";
  const fs::path b = workdir / "bench_b";
  const fs::path c = workdir / "bench_threads8";
  for (const auto& d : {a, b, c}) fs::remove_all(d);
  const int codes = RunBench(a, 1) | RunBench(b, 1) | RunBench(c, 8);
  if (codes != 0) return {false, "bench exited with a non-zero code"};
  const auto fa = ReadCsvs(a);
  const auto fb = ReadCsvs(b);
  const auto fc = ReadCsvs(c);
  const bool same = !fa.empty() && fa == fb;
  const bool threads = fa == fc;
  return {same && threads, Fmt("%g CSV files; repeat identical: %g; threads 1 vs 8 identical: %g",
                               static_cast<double>(fa.size()), same ? 1.0 : 0.0, threads ? 1.0 : 0.0)};
}

Outcome Normalization() {
  // Setting sums: best = 0.9 + 0.8 = 1.7, worst = 0.5 + 0.4 = 0.9.
  const std::map<std::string, std::vector<double>> scores = {
      {"a", {0.9, 0.8}}, {"b", {0.5, 0.6}}, {"c", {0.7, 0.4}}};
  const auto n = NormalizePerformance(scores);
  const std::map<std::string, std::vector<double>> spread = {
      {"best", {0.9, 0.9}}, {"worst", {0.1, 0.2}}, {"mid", {0.5, 0.3}}};
  const auto m = NormalizePerformance(spread);
  const double errors[] = {std::abs(n.at("a") - 1.0), std::abs(n.at("b") - 0.25),
                           std::abs(n.at("c") - 0.25), std::abs(m.at("best") - 1.0),
                           std::abs(m.at("worst") - 0.0), std::abs(m.at("mid") - 0.5 / 1.5)};
  const double worst = *std::max_element(std::begin(errors), std::end(errors));
  return {worst <= 1e-12, Fmt("max error against hand-computed values %.3g", worst)};
}

}  // namespace
}  // namespace cdvm

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  fs::path workdir = fs::temp_directory_path() / "cdvm_acceptance";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--workdir") workdir = argv[i + 1];
  }
  fs::create_directories(workdir);

  using cdvm::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closed-form Shapley", cdvm::ClosedFormShapley},
      {"closed-form Banzhaf", cdvm::ClosedFormBanzhaf},
      {"equal-distribution collapse", cdvm::EqualDistributionCollapse},
      {"cluster coverage", cdvm::BlockCoverage},
      {"LP oracle equivalence", cdvm::LpOracleEquivalence},
      {"MSR convergence", cdvm::MsrConvergence},
      {"Fig1 reproduction", cdvm::Fig1Reproduction},
      {"LOO redundancy bias", cdvm::LooRedundancy},
      {"default kappa formula", cdvm::DefaultKappaFormula},
      {"determinism", [&] { return cdvm::Determinism(workdir); }},
      {"performance normalization", cdvm::Normalization},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (k + 1) << " (" << criteria[k].first
              << "): " << o.detail << '\n';
    if (k == 6) std::cout << "INFO criterion 7 robustness: " << cdvm::Fig1Robustness() << '\n';
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << '\n';
  return failures == 0 ? 0 : 1;
}
