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
#ifndef CDVM_ATTRIBUTION_H_
#define CDVM_ATTRIBUTION_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdvm/dataset.h"
#include "cdvm/learner.h"
#include "cdvm/semivalues.h"

namespace cdvm {

// Sparse n_train x n_val matrix of per-validation-point influence estimates,
// every entry in [-1, 1]. Entries are kept as row-major triplets; above 50%
// density the matrix switches to dense storage. Either way, absent entries
// read as exactly 0.
class AttributionMatrix {
 public:
  struct Entry {
    std::size_t i;
    std::size_t j;
    double value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  AttributionMatrix() = default;
  AttributionMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  // Duplicate (i, j) pairs, out-of-range indices and values outside [-1, 1]
  // are rejected with std::invalid_argument. Explicit zeros are dropped.
  static AttributionMatrix FromEntries(std::size_t rows, std::size_t cols,
                                       std::vector<Entry> entries);
  // Row-major dense values.
  static AttributionMatrix FromDense(std::size_t rows, std::size_t cols,
                                     std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const;
  bool is_dense() const { return dense_; }

  double at(std::size_t i, std::size_t j) const;

  // Non-zero entries in (i, j) lexicographic order.
  std::vector<Entry> Nonzeros() const;

  template <typename F>
  void ForEachNonzero(F&& f) const {
    if (dense_) {
      for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
          const double v = values_[i * cols_ + j];
          if (v != 0.0) f(i, j, v);
        }
      }
    } else {
      for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) f(i, col_[k], values_[k]);
      }
    }
  }

  std::vector<double> RowSums() const;
  // Max and mean over all rows*cols entries, implicit zeros included.
  double MaxEntry() const;
  double MeanEntry() const;

  // Estimation metadata.
  double p = 0.0;
  std::size_t num_models = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> counts_in;
  std::vector<std::size_t> counts_out;
  // Rows never sampled in (or never out); their entries are zero-filled.
  std::vector<std::uint8_t> undefined_rows;

  std::size_t num_undefined_rows() const;

  friend bool operator==(const AttributionMatrix& a, const AttributionMatrix& b);

 private:
  void Build(std::vector<Entry> entries);

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool dense_ = false;
  std::vector<std::size_t> row_ptr_ = {0};
  std::vector<std::size_t> col_;
  std::vector<double> values_;
};

// Performance of the model trained on `subset` for each validation point,
// each in [0, 1]: 0/1 correctness, or a continuous score.
using SubsetEvaluator = std::function<std::vector<double>(std::span<const std::size_t> subset)>;

// Trains spec on the subset and reports 0/1 correctness on the validation split.
SubsetEvaluator LearnerEvaluator(const LabeledDataset& data, const LearnerSpec& spec);

// Analytic knockout utility: validation point j is correct iff the subset
// contains a training point of cluster val_cluster[j].
SubsetEvaluator KnockoutEvaluator(std::vector<int> train_cluster, std::vector<int> val_cluster);

struct MsrConfig {
  double p = 0.03;
  std::size_t num_models = 5000;
  std::uint64_t seed = 0;
  LearnerSpec learner;
  int threads = 0;

  // Throws std::invalid_argument unless 0 < p < 1 and num_models >= 1.
  void Validate() const;
};

// Maximum-sample-reuse estimate. Draws num_models subsets, each training
// point included independently with probability p (empty draws are redrawn),
// evaluates every subset once, and sets
//   T_ij = mean perf_j over subsets with i  -  mean perf_j over subsets without i.
// Bit-identical for any thread count.
AttributionMatrix MsrEstimate(const SubsetEvaluator& evaluate, std::size_t num_train,
                              std::size_t num_val, const MsrConfig& config);

// MSR with the configured learner on `data`, scored on its validation split.
AttributionMatrix MsrEstimate(const LabeledDataset& data, const MsrConfig& config);

// Row means of T (zeros included): the Banzhaf-style scalar value per point.
ValueVector BanzhafFromT(const AttributionMatrix& t);

// Keeps the ceil(keep_fraction * rows * cols) entries of largest magnitude;
// ties go to the lexicographically smaller (i, j).
AttributionMatrix Sparsify(const AttributionMatrix& t, double keep_fraction);

// Text format: "CDVM-T v1 n m nnz p num_models seed", then one "i j value"
// line per stored entry with 17 significant digits.
void SaveT(const AttributionMatrix& t, const std::string& path);
AttributionMatrix LoadT(const std::string& path);

}  // namespace cdvm

#endif  // CDVM_ATTRIBUTION_H_
