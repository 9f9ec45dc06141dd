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
#ifndef CDVM_BENCH_H_
#define CDVM_BENCH_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdvm/attribution.h"
#include "cdvm/dataset.h"
#include "cdvm/learner.h"
#include "cdvm/semivalues.h"

namespace cdvm {

struct RemovalCurve {
  // Removal order over training positions.
  std::vector<std::size_t> order;
  // accuracies[k] is the accuracy after removing order[0..k); size n + 1.
  std::vector<double> accuracies;
  std::uint64_t seed = 0;
};

// Retrains on the survivors after every removal step and records accuracy on
// `split`. Removing everything leaves the majority-class model. Throws
// std::invalid_argument unless order is a permutation of the positions.
RemovalCurve ComputeRemovalCurve(const LabeledDataset& data, const LearnerSpec& spec,
                                 std::span<const std::size_t> order, Split split = Split::kTest,
                                 int threads = 0);

enum class RemovalDirection { kLowFirst, kHighFirst };

// Removal order by value; equal values are removed in ascending position.
std::vector<std::size_t> PruningOrderFromValues(std::span<const double> values,
                                                RemovalDirection direction);

// Keeps the `budget` highest-valued points (drops the low-first prefix).
std::vector<std::size_t> RetainTopValues(std::span<const double> values, std::size_t budget);

// Retained positions for a budget; must have exactly `budget` distinct entries.
using Selector = std::function<std::vector<std::size_t>(std::size_t budget)>;

// A pruning method. prepare() runs once per (dataset, seed) and may do the
// expensive work (valuation, attribution) shared by all retention levels.
struct SelectionStrategy {
  std::string name;
  std::function<Selector(const LabeledDataset& data, std::uint64_t seed)> prepare;
};

SelectionStrategy RandomStrategy();

using Valuer = std::function<ValueVector(const LabeledDataset& data, std::uint64_t seed)>;
SelectionStrategy ValueOrderStrategy(std::string name, Valuer valuer);

using AttributionSource =
    std::function<AttributionMatrix(const LabeledDataset& data, std::uint64_t seed)>;

struct CdvmStrategyOptions {
  double alpha = 0.5;
  // Used when use_default_kappa is false.
  double kappa = 0.0;
  bool use_default_kappa = true;
  // Non-empty grids switch to grid search scored on validation accuracy.
  std::vector<double> alpha_grid;
  std::vector<double> kappa_grid;
  // Grid search over DefaultAlphaGrid x DefaultKappaGrid; overrides the grids above.
  bool default_grid = false;
  LearnerSpec learner;
};

// Solves CDVM independently for every budget on the seed's attribution matrix.
SelectionStrategy CdvmStrategy(std::string name, AttributionSource source,
                               CdvmStrategyOptions options);

// Budget for a retention fraction: round(level * n), clamped to [1, n].
std::size_t BudgetForLevel(double level, std::size_t n);

std::vector<double> DefaultRetentionLevels();

struct ReportCell {
  std::string method;
  double level = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct SummaryCell {
  std::string method;
  double level = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

struct RetentionReport {
  std::vector<double> levels;
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  // Ordered by (method, level, seed) in the order given.
  std::vector<ReportCell> cells;
  std::vector<SummaryCell> summary;
  // retained[method][level][seed], each ascending.
  std::vector<std::vector<std::vector<std::vector<std::size_t>>>> retained;

  const SummaryCell& Summary(std::string_view method, double level) const;
};

// Runs every strategy at every level for every seed and records test
// accuracy. Levels must be strictly decreasing fractions in (0, 1].
RetentionReport RetentionEval(const LabeledDataset& data, const LearnerSpec& spec,
                              std::span<const SelectionStrategy> strategies,
                              std::span<const double> levels,
                              std::span<const std::uint64_t> seeds, int threads = 0);

// |A n B| / min(|A|, |B|). Throws std::invalid_argument on an empty set.
double OverlapCoefficient(std::span<const std::size_t> a, std::span<const std::size_t> b);

enum class OverlapPairing {
  // Off-diagonal cells pair seed s at one level with seed s at the other.
  kSameSeed,
  // Off-diagonal cells average over all seed pairs s != s'.
  kCrossSeed,
};

// sets[level][seed]. Diagonal cells always average over distinct seed pairs
// (1 when only one seed exists).
std::vector<std::vector<double>> OverlapMatrix(
    const std::vector<std::vector<std::vector<std::size_t>>>& sets, OverlapPairing pairing);

// f(i, level) = fraction of seeds whose retained set at that level contains i.
std::vector<std::vector<double>> SelectionFrequencies(
    const std::vector<std::vector<std::vector<std::size_t>>>& sets, std::size_t n);

enum class SpectrumClass {
  kBudgetSpecific,
  kUsefulPoolLow,
  kUsefulPoolHigh,
  kStableCore,
  kApproaching,
  kOccasional,
  kRare,
  kVirtuallyNever,
};

std::string_view SpectrumClassName(SpectrumClass c);

struct SpectrumEntry {
  SpectrumClass cls;
  double peak_frequency = 0.0;
  std::size_t majority_levels = 0;
};

// Classifies each instance from its per-level frequencies. Majority-selected
// (f > 0.5 somewhere) instances are banded by how many levels they are
// majority at: 1, 2-3, 4 up to all-but-one, all. The rest are banded by peak
// frequency: [0.3, 0.5), [0.1, 0.3), [0.01, 0.1), below 0.01.
std::vector<SpectrumEntry> FrequencySpectrum(const std::vector<std::vector<double>>& frequencies);

// (P_m - P_min) / (P_max - P_min), with P_m the sum of method m's scores and
// P_max / P_min the sums of the per-setting best / worst scores.
std::map<std::string, double> NormalizePerformance(
    const std::map<std::string, std::vector<double>>& scores);

void WriteReportCsv(const RetentionReport& report, const std::string& path);
void WriteCurveCsv(const RemovalCurve& curve, const std::string& path);
void WriteSpectrumCsv(std::span<const SpectrumEntry> spectrum, const std::string& path);
void WriteOverlapCsv(const std::vector<std::vector<double>>& overlap,
                     std::span<const double> levels, const std::string& path);

// method,level,seed,indices (indices space-separated).
void WriteRetainedCsv(const RetentionReport& report, const std::string& path);
// Reads the retained sets back into report.methods/levels/seeds/retained.
RetentionReport ReadRetainedCsv(const std::string& path);

}  // namespace cdvm

#endif  // CDVM_BENCH_H_
