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
#ifndef CDVM_DATASET_H_
#define CDVM_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdvm {

enum class Split { kTrain, kValidation, kTest };

// Accepts "train", "val"/"validation" and "test".
Split ParseSplit(std::string_view name);
std::string_view SplitName(Split split);

// Feature/label table with a train/validation/test partition of its rows.
//
// Training points are addressed by their *position* in the train split
// (0 .. num_train()-1); these positions are the players of every game and
// the row indices of every attribution matrix. Immutable once constructed.
class LabeledDataset {
 public:
  // Validates every invariant: splits are disjoint and cover all rows, labels
  // lie in [0, num_classes), and cluster_of (when present) has one entry per
  // training point. Throws std::invalid_argument otherwise.
  LabeledDataset(std::size_t dim, int num_classes, std::vector<double> features,
                 std::vector<int> labels, std::vector<std::size_t> train,
                 std::vector<std::size_t> validation, std::vector<std::size_t> test,
                 std::optional<std::vector<int>> cluster_of = std::nullopt);

  std::size_t dim() const { return dim_; }
  int num_classes() const { return num_classes_; }
  std::size_t num_rows() const { return labels_.size(); }

  std::span<const double> row(std::size_t r) const {
    return {features_.data() + r * dim_, dim_};
  }
  int label(std::size_t r) const { return labels_[r]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<double>& features() const { return features_; }

  const std::vector<std::size_t>& rows_of(Split split) const;
  std::size_t num_train() const { return train_.size(); }

  // Row index of the training point at position `pos`.
  std::size_t train_row(std::size_t pos) const { return train_[pos]; }
  int train_label(std::size_t pos) const { return labels_[train_[pos]]; }

  const std::optional<std::vector<int>>& cluster_of() const { return cluster_of_; }
  // Number of distinct clusters (max id + 1), 0 without cluster information.
  int num_clusters() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::size_t dim_;
  int num_classes_;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> validation_;
  std::vector<std::size_t> test_;
  std::optional<std::vector<int>> cluster_of_;
};

// Gaussian clusters: cluster k contributes sizes[k] training points and
// val_sizes[k] / test_sizes[k] held-out points drawn from
// N(centers[k], sigma^2 I), all labelled labels[k].
struct ClusteredSpec {
  std::vector<std::vector<double>> centers;
  std::vector<std::size_t> sizes;
  std::vector<int> labels;
  double sigma = 0.1;
  std::vector<std::size_t> test_sizes;
  // Empty means "same as test_sizes".
  std::vector<std::size_t> val_sizes;
};

// Rows are laid out train, validation, test; each split cluster by cluster.
LabeledDataset GenerateClustered(const ClusteredSpec& spec, std::uint64_t seed);

// The eight-point, four-cluster two-class layout: C1 (-2, 0.5) and
// C2 (2.5, 0) are class 0, C3 (-2.5, -0.5) and C4 (2, 0) are class 1, with
// 3, 2, 2 and 1 training points. Five validation and five test points per
// cluster.
ClusteredSpec Fig1Spec(double sigma = 0.1);

// CSV with header x0,...,x{d-1},label,split,cluster. Doubles are written in
// shortest round-trip form, so save/load is bit-exact.
void SaveDatasetCsv(const LabeledDataset& data, const std::string& path);
LabeledDataset LoadDatasetCsv(const std::string& path);

}  // namespace cdvm

#endif  // CDVM_DATASET_H_
