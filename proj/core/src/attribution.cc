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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "cdvm/error.h"
#include "cdvm/parallel.h"
#include "cdvm/rng.h"

namespace cdvm {
namespace {

constexpr std::size_t kModelsPerBlock = 256;

bool InRange(double v) { return v >= -1.0 && v <= 1.0; }

// Number of entries kept for a fraction of `total`; products that land on
// an integer up to rounding error are not bumped to the next one.
std::size_t KeepCount(double fraction, std::size_t total) {
  const double x = fraction * static_cast<double>(total);
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

}  // namespace

void AttributionMatrix::Build(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Entry& e = entries[k];
    if (e.i >= rows_ || e.j >= cols_) throw std::invalid_argument("entry index out of range");
    if (!InRange(e.value)) throw std::invalid_argument("entry value outside [-1, 1]");
    if (k > 0 && entries[k - 1].i == e.i && entries[k - 1].j == e.j) {
      throw std::invalid_argument("duplicate entry");
    }
  }
  std::erase_if(entries, [](const Entry& e) { return e.value == 0.0; });

  const std::size_t total = rows_ * cols_;
  dense_ = total > 0 && 2 * entries.size() > total;
  row_ptr_.clear();
  col_.clear();
  values_.clear();
  if (dense_) {
    values_.assign(total, 0.0);
    for (const Entry& e : entries) values_[e.i * cols_ + e.j] = e.value;
    return;
  }
  row_ptr_.assign(rows_ + 1, 0);
  col_.reserve(entries.size());
  values_.reserve(entries.size());
  for (const Entry& e : entries) {
    ++row_ptr_[e.i + 1];
    col_.push_back(e.j);
    values_.push_back(e.value);
  }
  std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
}

AttributionMatrix AttributionMatrix::FromEntries(std::size_t rows, std::size_t cols,
                                                 std::vector<Entry> entries) {
  AttributionMatrix t(rows, cols);
  t.Build(std::move(entries));
  return t;
}

AttributionMatrix AttributionMatrix::FromDense(std::size_t rows, std::size_t cols,
                                               std::span<const double> values) {
  if (values.size() != rows * cols) throw std::invalid_argument("dense size mismatch");
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = values[i * cols + j];
      if (v != 0.0 || !InRange(v)) entries.push_back({i, j, v});
    }
  }
  return FromEntries(rows, cols, std::move(entries));
}

std::size_t AttributionMatrix::nnz() const {
  if (!dense_) return values_.size();
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return v != 0.0; }));
}

double AttributionMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) throw std::out_of_range("attribution index out of range");
  if (dense_) return values_[i * cols_ + j];
  const auto begin = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto end = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - col_.begin())];
}

std::vector<AttributionMatrix::Entry> AttributionMatrix::Nonzeros() const {
  std::vector<Entry> out;
  out.reserve(nnz());
  ForEachNonzero([&](std::size_t i, std::size_t j, double v) { out.push_back({i, j, v}); });
  return out;
}

std::vector<double> AttributionMatrix::RowSums() const {
  std::vector<double> sums(rows_, 0.0);
  ForEachNonzero([&](std::size_t i, std::size_t, double v) { sums[i] += v; });
  return sums;
}

double AttributionMatrix::MaxEntry() const {
  if (rows_ * cols_ == 0) return 0.0;
  double best = nnz() < rows_ * cols_ ? 0.0 : -1.0;
  ForEachNonzero([&](std::size_t, std::size_t, double v) { best = std::max(best, v); });
  return best;
}

double AttributionMatrix::MeanEntry() const {
  if (rows_ * cols_ == 0) return 0.0;
  double sum = 0.0;
  ForEachNonzero([&](std::size_t, std::size_t, double v) { sum += v; });
  return sum / static_cast<double>(rows_ * cols_);
}

std::size_t AttributionMatrix::num_undefined_rows() const {
  return static_cast<std::size_t>(std::count(undefined_rows.begin(), undefined_rows.end(), 1));
}

bool operator==(const AttributionMatrix& a, const AttributionMatrix& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.p == b.p &&
         a.num_models == b.num_models && a.seed == b.seed && a.Nonzeros() == b.Nonzeros();
}

SubsetEvaluator LearnerEvaluator(const LabeledDataset& data, const LearnerSpec& spec) {
  spec.Validate();
  return [&data, spec](std::span<const std::size_t> subset) {
    const Model model =
        subset.empty() ? MajorityClassModel(data) : TrainLearner(data, subset, spec);
    const auto correct = CorrectnessVector(model, data, Split::kValidation);
    return std::vector<double>(correct.begin(), correct.end());
  };
}

SubsetEvaluator KnockoutEvaluator(std::vector<int> train_cluster, std::vector<int> val_cluster) {
  return [train_cluster = std::move(train_cluster),
          val_cluster = std::move(val_cluster)](std::span<const std::size_t> subset) {
    int num_clusters = 0;
    for (int c : train_cluster) num_clusters = std::max(num_clusters, c + 1);
    for (int c : val_cluster) num_clusters = std::max(num_clusters, c + 1);
    std::vector<std::uint8_t> present(static_cast<std::size_t>(num_clusters), 0);
    for (std::size_t i : subset) present[train_cluster[i]] = 1;
    std::vector<double> perf(val_cluster.size());
    for (std::size_t j = 0; j < perf.size(); ++j) perf[j] = present[val_cluster[j]];
    return perf;
  };
}

void MsrConfig::Validate() const {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("MSR inclusion probability must lie in (0, 1)");
  if (num_models == 0) throw std::invalid_argument("MSR needs at least one model");
  learner.Validate();
}

AttributionMatrix MsrEstimate(const SubsetEvaluator& evaluate, std::size_t num_train,
                              std::size_t num_val, const MsrConfig& config) {
  config.Validate();
  if (num_train == 0) throw std::invalid_argument("MSR needs training points");
  if (num_val == 0) throw std::invalid_argument("MSR needs a non-empty validation split");

  std::vector<double> sum_in(num_train * num_val, 0.0);
  std::vector<double> total(num_val, 0.0);
  std::vector<std::size_t> count_in(num_train, 0);

  std::vector<std::vector<std::size_t>> subsets(kModelsPerBlock);
  std::vector<std::vector<double>> perf(kModelsPerBlock);
  for (std::size_t first = 0; first < config.num_models; first += kModelsPerBlock) {
    const std::size_t block = std::min(kModelsPerBlock, config.num_models - first);
    ParallelFor(block, config.threads, [&](std::size_t b) {
      const std::size_t model = first + b;
      auto& subset = subsets[b];
      // Redraw until non-empty; attempt k of model t has its own stream.
      for (std::uint64_t attempt = 0;; ++attempt) {
        CounterRng rng(DeriveSeed(DeriveSeed(config.seed, model), attempt));
        subset.clear();
        for (std::size_t i = 0; i < num_train; ++i) {
          if (rng.Bernoulli(config.p)) subset.push_back(i);
        }
        if (!subset.empty()) break;
      }
      perf[b] = evaluate(subset);
      if (perf[b].size() != num_val) {
        throw std::invalid_argument("evaluator returned the wrong number of scores");
      }
      for (double s : perf[b]) {
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("evaluator score outside [0, 1]");
      }
    });
    // Reduction in model order.
    for (std::size_t b = 0; b < block; ++b) {
      const auto& scores = perf[b];
      for (std::size_t j = 0; j < num_val; ++j) total[j] += scores[j];
      for (std::size_t i : subsets[b]) {
        ++count_in[i];
        double* row = sum_in.data() + i * num_val;
        for (std::size_t j = 0; j < num_val; ++j) row[j] += scores[j];
      }
    }
  }

  AttributionMatrix::Entry e{};
  std::vector<AttributionMatrix::Entry> entries;
  std::vector<std::uint8_t> undefined(num_train, 0);
  std::vector<std::size_t> count_out(num_train);
  for (std::size_t i = 0; i < num_train; ++i) {
    count_out[i] = config.num_models - count_in[i];
    if (count_in[i] == 0 || count_out[i] == 0) {
      undefined[i] = 1;
      continue;
    }
    const double in = static_cast<double>(count_in[i]);
    const double out = static_cast<double>(count_out[i]);
    for (std::size_t j = 0; j < num_val; ++j) {
      const double s = sum_in[i * num_val + j];
      e = {i, j, std::clamp(s / in - (total[j] - s) / out, -1.0, 1.0)};
      if (e.value != 0.0) entries.push_back(e);
    }
  }
  AttributionMatrix t = AttributionMatrix::FromEntries(num_train, num_val, std::move(entries));
  t.p = config.p;
  t.num_models = config.num_models;
  t.seed = config.seed;
  t.counts_in = std::move(count_in);
  t.counts_out = std::move(count_out);
  t.undefined_rows = std::move(undefined);
  return t;
}

AttributionMatrix MsrEstimate(const LabeledDataset& data, const MsrConfig& config) {
  return MsrEstimate(LearnerEvaluator(data, config.learner), data.num_train(),
                     data.rows_of(Split::kValidation).size(), config);
}

ValueVector BanzhafFromT(const AttributionMatrix& t) {
  ValueVector out;
  out.estimator = "banzhaf-from-T";
  out.num_samples = t.num_models;
  out.seed = t.seed;
  out.values = t.RowSums();
  if (t.cols() > 0) {
    for (double& v : out.values) v /= static_cast<double>(t.cols());
  }
  out.undefined = t.undefined_rows;
  return out;
}

AttributionMatrix Sparsify(const AttributionMatrix& t, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("keep_fraction must lie in (0, 1]");
  }
  auto entries = t.Nonzeros();
  const std::size_t keep = KeepCount(keep_fraction, t.rows() * t.cols());
  if (keep < entries.size()) {
    // Nonzeros() is already in (i, j) order, so a stable sort keeps that tie rule.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return std::abs(a.value) > std::abs(b.value); });
    entries.resize(keep);
  }
  AttributionMatrix out = AttributionMatrix::FromEntries(t.rows(), t.cols(), std::move(entries));
  out.p = t.p;
  out.num_models = t.num_models;
  out.seed = t.seed;
  out.counts_in = t.counts_in;
  out.counts_out = t.counts_out;
  out.undefined_rows = t.undefined_rows;
  return out;
}

void SaveT(const AttributionMatrix& t, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const auto entries = t.Nonzeros();
  std::fprintf(f, "CDVM-T v1 %zu %zu %zu %.17g %zu %llu\n", t.rows(), t.cols(), entries.size(),
               t.p, t.num_models, static_cast<unsigned long long>(t.seed));
  for (const auto& e : entries) std::fprintf(f, "%zu %zu %.17g\n", e.i, e.j, e.value);
  const bool failed = std::ferror(f) != 0;
  if (std::fclose(f) != 0 || failed) throw IoError("write to '" + path + "' failed");
}

AttributionMatrix LoadT(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version, p_text;
  std::size_t n = 0, m = 0, nnz = 0, models = 0;
  unsigned long long seed = 0;
  if (!(hs >> magic >> version >> n >> m >> nnz >> p_text >> models >> seed) ||
      magic != "CDVM-T" || version != "v1") {
    throw std::invalid_argument(path + ": malformed CDVM-T header");
  }
  double p = 0.0;
  if (std::from_chars(p_text.data(), p_text.data() + p_text.size(), p).ec != std::errc()) {
    throw std::invalid_argument(path + ": malformed p in header");
  }

  std::vector<AttributionMatrix::Entry> entries;
  entries.reserve(nnz);
  std::string line;
  while (entries.size() < nnz && std::getline(in, line)) {
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    AttributionMatrix::Entry e{};
    auto skip = [&] {
      while (cur < end && *cur == ' ') ++cur;
    };
    auto r1 = std::from_chars(cur, end, e.i);
    cur = r1.ptr;
    skip();
    auto r2 = std::from_chars(cur, end, e.j);
    cur = r2.ptr;
    skip();
    auto r3 = std::from_chars(cur, end, e.value);
    if (r1.ec != std::errc() || r2.ec != std::errc() || r3.ec != std::errc() || r3.ptr != end) {
      throw std::invalid_argument(path + ": malformed entry '" + line + "'");
    }
    if (!InRange(e.value)) {
      throw std::invalid_argument(path + ": entry outside [-1, 1] in '" + line + "'");
    }
    entries.push_back(e);
  }
  if (entries.size() != nnz) throw std::invalid_argument(path + ": fewer entries than declared");
  AttributionMatrix t = AttributionMatrix::FromEntries(n, m, std::move(entries));
  t.p = p;
  t.num_models = models;
  t.seed = seed;
  return t;
}

}  // namespace cdvm
