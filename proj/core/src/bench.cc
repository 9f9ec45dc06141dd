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
#include "cdvm/bench.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cdvm/cdvm.h"
#include "cdvm/error.h"
#include "cdvm/parallel.h"
#include "cdvm/rng.h"

namespace cdvm {
namespace {

std::string Fmt(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void CheckWritten(const std::ofstream& out, const std::string& path) {
  if (!out) throw IoError("write to '" + path + "' failed");
}

void CheckSelection(const std::string& method, std::vector<std::size_t>& set, std::size_t budget,
                    std::size_t n) {
  std::sort(set.begin(), set.end());
  const bool unique = std::adjacent_find(set.begin(), set.end()) == set.end();
  if (set.size() != budget || !unique || (!set.empty() && set.back() >= n)) {
    throw std::invalid_argument("strategy '" + method + "' returned " +
                                std::to_string(set.size()) + " positions for budget " +
                                std::to_string(budget));
  }
}

}  // namespace

RemovalCurve ComputeRemovalCurve(const LabeledDataset& data, const LearnerSpec& spec,
                                 std::span<const std::size_t> order, Split split, int threads) {
  const std::size_t n = data.num_train();
  std::vector<std::uint8_t> seen(n, 0);
  if (order.size() != n) throw std::invalid_argument("removal order is not a permutation");
  for (std::size_t i : order) {
    if (i >= n || seen[i]++) throw std::invalid_argument("removal order is not a permutation");
  }
  RemovalCurve curve;
  curve.order.assign(order.begin(), order.end());
  curve.seed = spec.seed;
  curve.accuracies.assign(n + 1, 0.0);
  ParallelFor(n + 1, threads, [&](std::size_t k) {
    std::vector<std::size_t> survivors(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(survivors.begin(), survivors.end());
    curve.accuracies[k] = SubsetAccuracy(data, survivors, spec, split);
  });
  return curve;
}

std::vector<std::size_t> PruningOrderFromValues(std::span<const double> values,
                                                RemovalDirection direction) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("values must be finite");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (direction == RemovalDirection::kLowFirst) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  }
  return order;
}

std::vector<std::size_t> RetainTopValues(std::span<const double> values, std::size_t budget) {
  auto order = PruningOrderFromValues(values, RemovalDirection::kLowFirst);
  budget = std::min(budget, order.size());
  std::vector<std::size_t> kept(order.end() - static_cast<std::ptrdiff_t>(budget), order.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

SelectionStrategy RandomStrategy() {
  return {"random", [](const LabeledDataset& data, std::uint64_t seed) -> Selector {
            const std::size_t n = data.num_train();
            return [n, seed](std::size_t budget) {
              CounterRng rng(DeriveSeed(DeriveSeed(seed, "random"), budget));
              std::vector<std::size_t> perm(n);
              std::iota(perm.begin(), perm.end(), std::size_t{0});
              for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.UniformInt(i)]);
              perm.resize(std::min(budget, n));
              std::sort(perm.begin(), perm.end());
              return perm;
            };
          }};
}

SelectionStrategy ValueOrderStrategy(std::string name, Valuer valuer) {
  return {std::move(name),
          [valuer = std::move(valuer)](const LabeledDataset& data, std::uint64_t seed) -> Selector {
            auto values = std::make_shared<const ValueVector>(valuer(data, seed));
            return [values](std::size_t budget) { return RetainTopValues(values->values, budget); };
          }};
}

SelectionStrategy CdvmStrategy(std::string name, AttributionSource source,
                               CdvmStrategyOptions options) {
  return {std::move(name), [source = std::move(source), options](const LabeledDataset& data,
                                                                 std::uint64_t seed) -> Selector {
            auto t = std::make_shared<const AttributionMatrix>(source(data, seed));
            return [t, options, &data](std::size_t budget) {
              const SubsetScorer scorer = [&](std::span<const std::size_t> selected) {
                return SubsetAccuracy(data, selected, options.learner, Split::kValidation);
              };
              if (options.default_grid) {
                return GridSearch(*t, budget, DefaultAlphaGrid(), DefaultKappaGrid(*t, budget),
                                  scorer)
                    .solution.selected;
              }
              if (!options.alpha_grid.empty() && !options.kappa_grid.empty()) {
                return GridSearch(*t, budget, options.alpha_grid, options.kappa_grid, scorer)
                    .solution.selected;
              }
              const double kappa =
                  options.use_default_kappa ? DefaultKappa(*t, budget) : options.kappa;
              return SolveLp(BuildProblem(*t, budget, options.alpha, kappa)).selected;
            };
          }};
}

std::size_t BudgetForLevel(double level, std::size_t n) {
  if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("retention level outside (0, 1]");
  const auto b = static_cast<std::size_t>(std::llround(level * static_cast<double>(n)));
  return std::clamp<std::size_t>(b, 1, n);
}

std::vector<double> DefaultRetentionLevels() { return {0.30, 0.25, 0.20, 0.15, 0.10, 0.05}; }

const SummaryCell& RetentionReport::Summary(std::string_view method, double level) const {
  for (const auto& s : summary) {
    if (s.method == method && s.level == level) return s;
  }
  throw std::out_of_range("no summary cell for " + std::string(method));
}

RetentionReport RetentionEval(const LabeledDataset& data, const LearnerSpec& spec,
                              std::span<const SelectionStrategy> strategies,
                              std::span<const double> levels,
                              std::span<const std::uint64_t> seeds, int threads) {
  if (strategies.empty() || levels.empty() || seeds.empty()) {
    throw std::invalid_argument("retention evaluation needs methods, levels and seeds");
  }
  for (std::size_t l = 0; l < levels.size(); ++l) {
    BudgetForLevel(levels[l], 1);
    if (l > 0 && !(levels[l] < levels[l - 1])) {
      throw std::invalid_argument("retention levels must be strictly decreasing");
    }
  }
  const std::size_t n = data.num_train();
  const std::size_t num_m = strategies.size();
  const std::size_t num_l = levels.size();
  const std::size_t num_s = seeds.size();

  RetentionReport report;
  report.levels.assign(levels.begin(), levels.end());
  report.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& s : strategies) report.methods.push_back(s.name);
  report.retained.assign(num_m, std::vector<std::vector<std::vector<std::size_t>>>(
                                    num_l, std::vector<std::vector<std::size_t>>(num_s)));
  std::vector<double> acc(num_m * num_l * num_s, 0.0);

  ParallelFor(num_m * num_s, threads, [&](std::size_t task) {
    const std::size_t mi = task / num_s;
    const std::size_t si = task % num_s;
    const Selector select = strategies[mi].prepare(data, seeds[si]);
    for (std::size_t li = 0; li < num_l; ++li) {
      const std::size_t budget = BudgetForLevel(levels[li], n);
      std::vector<std::size_t> set = select(budget);
      CheckSelection(strategies[mi].name, set, budget, n);
      LearnerSpec local = spec;
      local.seed = DeriveSeed(spec.seed, seeds[si]);
      acc[(mi * num_l + li) * num_s + si] = SubsetAccuracy(data, set, local, Split::kTest);
      report.retained[mi][li][si] = std::move(set);
    }
  });

  for (std::size_t mi = 0; mi < num_m; ++mi) {
    for (std::size_t li = 0; li < num_l; ++li) {
      SummaryCell sum{report.methods[mi], levels[li], 0.0, 0.0, num_s};
      for (std::size_t si = 0; si < num_s; ++si) {
        const double a = acc[(mi * num_l + li) * num_s + si];
        report.cells.push_back({report.methods[mi], levels[li], seeds[si], a});
        sum.mean += a;
      }
      sum.mean /= static_cast<double>(num_s);
      if (num_s > 1) {
        double ss = 0.0;
        for (std::size_t si = 0; si < num_s; ++si) {
          const double d = acc[(mi * num_l + li) * num_s + si] - sum.mean;
          ss += d * d;
        }
        sum.sd = std::sqrt(ss / static_cast<double>(num_s - 1));
      }
      report.summary.push_back(sum);
    }
  }
  return report;
}

double OverlapCoefficient(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("overlap of an empty set");
  std::vector<std::size_t> sa(a.begin(), a.end());
  std::vector<std::size_t> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  std::vector<std::size_t> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(std::min(sa.size(), sb.size()));
}

std::vector<std::vector<double>> OverlapMatrix(
    const std::vector<std::vector<std::vector<std::size_t>>>& sets, OverlapPairing pairing) {
  const std::size_t num_l = sets.size();
  std::vector<std::vector<double>> out(num_l, std::vector<double>(num_l, 0.0));
  for (std::size_t a = 0; a < num_l; ++a) {
    for (std::size_t b = 0; b < num_l; ++b) {
      const std::size_t sa = sets[a].size();
      const std::size_t sb = sets[b].size();
      double total = 0.0;
      std::size_t pairs = 0;
      const bool same_seed = a != b && pairing == OverlapPairing::kSameSeed;
      for (std::size_t s = 0; s < sa; ++s) {
        for (std::size_t t = 0; t < sb; ++t) {
          if (same_seed ? s != t : s == t) continue;
          total += OverlapCoefficient(sets[a][s], sets[b][t]);
          ++pairs;
        }
      }
      out[a][b] = pairs > 0 ? total / static_cast<double>(pairs) : 1.0;
    }
  }
  return out;
}

std::vector<std::vector<double>> SelectionFrequencies(
    const std::vector<std::vector<std::vector<std::size_t>>>& sets, std::size_t n) {
  std::vector<std::vector<double>> freq(n, std::vector<double>(sets.size(), 0.0));
  for (std::size_t l = 0; l < sets.size(); ++l) {
    if (sets[l].empty()) continue;
    for (const auto& set : sets[l]) {
      for (std::size_t i : set) {
        if (i >= n) throw std::out_of_range("retained position out of range");
        freq[i][l] += 1.0;
      }
    }
    for (std::size_t i = 0; i < n; ++i) freq[i][l] /= static_cast<double>(sets[l].size());
  }
  return freq;
}

std::string_view SpectrumClassName(SpectrumClass c) {
  switch (c) {
    case SpectrumClass::kBudgetSpecific:
      return "budget-specific";
    case SpectrumClass::kUsefulPoolLow:
      return "useful-pool-low";
    case SpectrumClass::kUsefulPoolHigh:
      return "useful-pool-high";
    case SpectrumClass::kStableCore:
      return "stable-core";
    case SpectrumClass::kApproaching:
      return "approaching";
    case SpectrumClass::kOccasional:
      return "occasional";
    case SpectrumClass::kRare:
      return "rare";
    case SpectrumClass::kVirtuallyNever:
      return "virtually-never";
  }
  return "?";
}

std::vector<SpectrumEntry> FrequencySpectrum(const std::vector<std::vector<double>>& frequencies) {
  std::vector<SpectrumEntry> out;
  out.reserve(frequencies.size());
  for (const auto& row : frequencies) {
    SpectrumEntry e{SpectrumClass::kVirtuallyNever, 0.0, 0};
    for (double f : row) {
      if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("frequency outside [0, 1]");
      e.peak_frequency = std::max(e.peak_frequency, f);
      if (f > 0.5) ++e.majority_levels;
    }
    if (e.majority_levels > 0) {
      if (e.majority_levels == row.size()) {
        e.cls = SpectrumClass::kStableCore;
      } else if (e.majority_levels == 1) {
        e.cls = SpectrumClass::kBudgetSpecific;
      } else if (e.majority_levels <= 3) {
        e.cls = SpectrumClass::kUsefulPoolLow;
      } else {
        e.cls = SpectrumClass::kUsefulPoolHigh;
      }
    } else if (e.peak_frequency >= 0.3) {
      e.cls = SpectrumClass::kApproaching;
    } else if (e.peak_frequency >= 0.1) {
      e.cls = SpectrumClass::kOccasional;
    } else if (e.peak_frequency >= 0.01) {
      e.cls = SpectrumClass::kRare;
    }
    out.push_back(e);
  }
  return out;
}

std::map<std::string, double> NormalizePerformance(
    const std::map<std::string, std::vector<double>>& scores) {
  if (scores.size() < 2) throw std::invalid_argument("normalization needs at least two methods");
  const std::size_t settings = scores.begin()->second.size();
  for (const auto& [name, s] : scores) {
    if (s.size() != settings) {
      throw std::invalid_argument("method '" + name + "' covers a different number of settings");
    }
  }
  double p_max = 0.0;
  double p_min = 0.0;
  for (std::size_t s = 0; s < settings; ++s) {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [name, v] : scores) {
      hi = std::max(hi, v[s]);
      lo = std::min(lo, v[s]);
    }
    p_max += hi;
    p_min += lo;
  }
  if (!(p_max > p_min)) throw std::invalid_argument("degenerate normalization: P_max == P_min");
  std::map<std::string, double> out;
  for (const auto& [name, v] : scores) {
    const double p = std::accumulate(v.begin(), v.end(), 0.0);
    out[name] = (p - p_min) / (p_max - p_min);
  }
  return out;
}

void WriteReportCsv(const RetentionReport& report, const std::string& path) {
  auto out = OpenOut(path);
  out << "method,level,seed,accuracy\n";
  for (const auto& c : report.cells) {
    out << c.method << ',' << Fmt(c.level) << ',' << c.seed << ',' << Fmt(c.accuracy) << '\n';
  }
  CheckWritten(out, path);
}

void WriteCurveCsv(const RemovalCurve& curve, const std::string& path) {
  auto out = OpenOut(path);
  out << "step,removed_index,accuracy\n";
  for (std::size_t k = 0; k < curve.accuracies.size(); ++k) {
    out << k << ',';
    if (k > 0) out << curve.order[k - 1];
    out << ',' << Fmt(curve.accuracies[k]) << '\n';
  }
  CheckWritten(out, path);
}

void WriteSpectrumCsv(std::span<const SpectrumEntry> spectrum, const std::string& path) {
  auto out = OpenOut(path);
  out << "instance,class,peak_frequency,majority_levels\n";
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    out << i << ',' << SpectrumClassName(spectrum[i].cls) << ','
        << Fmt(spectrum[i].peak_frequency) << ',' << spectrum[i].majority_levels << '\n';
  }
  CheckWritten(out, path);
}

void WriteOverlapCsv(const std::vector<std::vector<double>>& overlap,
                     std::span<const double> levels, const std::string& path) {
  auto out = OpenOut(path);
  out << "level_a,level_b,overlap\n";
  for (std::size_t a = 0; a < overlap.size(); ++a) {
    for (std::size_t b = 0; b < overlap[a].size(); ++b) {
      out << Fmt(levels[a]) << ',' << Fmt(levels[b]) << ',' << Fmt(overlap[a][b]) << '\n';
    }
  }
  CheckWritten(out, path);
}

void WriteRetainedCsv(const RetentionReport& report, const std::string& path) {
  auto out = OpenOut(path);
  out << "method,level,seed,indices\n";
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    for (std::size_t l = 0; l < report.levels.size(); ++l) {
      for (std::size_t s = 0; s < report.seeds.size(); ++s) {
        out << report.methods[m] << ',' << Fmt(report.levels[l]) << ',' << report.seeds[s] << ',';
        const auto& set = report.retained[m][l][s];
        for (std::size_t k = 0; k < set.size(); ++k) out << (k ? " " : "") << set[k];
        out << '\n';
      }
    }
  }
  CheckWritten(out, path);
}

RetentionReport ReadRetainedCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "method,level,seed,indices") {
    throw std::invalid_argument(path + ": expected header method,level,seed,indices");
  }
  RetentionReport report;
  auto index_of = [](auto& vec, const auto& value) {
    const auto it = std::find(vec.begin(), vec.end(), value);
    if (it != vec.end()) return static_cast<std::size_t>(it - vec.begin());
    vec.push_back(value);
    return vec.size() - 1;
  };
  struct Row {
    std::size_t m, l, s;
    std::vector<std::size_t> set;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string method, level, seed, indices;
    if (!std::getline(ls, method, ',') || !std::getline(ls, level, ',') ||
        !std::getline(ls, seed, ',')) {
      throw std::invalid_argument(path + ": malformed row '" + line + "'");
    }
    std::getline(ls, indices);
    Row row;
    try {
      row.m = index_of(report.methods, method);
      row.l = index_of(report.levels, std::stod(level));
      row.s = index_of(report.seeds, static_cast<std::uint64_t>(std::stoull(seed)));
    } catch (const std::logic_error&) {
      throw std::invalid_argument(path + ": malformed row '" + line + "'");
    }
    std::istringstream is(indices);
    std::size_t i;
    while (is >> i) row.set.push_back(i);
    rows.push_back(std::move(row));
  }
  report.retained.assign(report.methods.size(),
                         std::vector<std::vector<std::vector<std::size_t>>>(
                             report.levels.size(),
                             std::vector<std::vector<std::size_t>>(report.seeds.size())));
  for (auto& r : rows) report.retained[r.m][r.l][r.s] = std::move(r.set);
  return report;
}

}  // namespace cdvm
