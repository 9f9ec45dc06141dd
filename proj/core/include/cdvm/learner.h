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
#ifndef CDVM_LEARNER_H_
#define CDVM_LEARNER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cdvm/dataset.h"

namespace cdvm {

enum class LearnerKind {
  // 1-nearest-neighbour over the training subset (ties: lowest position).
  kNearestNeighbor,
  // One centroid per class present in the subset.
  kNearestCentroid,
  // Softmax regression fitted by full-batch gradient descent.
  kMultinomialLogistic,
};

LearnerKind ParseLearnerKind(std::string_view name);
std::string_view LearnerKindName(LearnerKind kind);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::kNearestNeighbor;
  double learning_rate = 0.5;
  int iterations = 200;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument unless iterations >= 1 and learning_rate > 0.
  void Validate() const;
};

class Model {
 public:
  int Predict(std::span<const double> x) const;
  int num_classes() const { return num_classes_; }

 private:
  friend Model TrainLearner(const LabeledDataset&, std::span<const std::size_t>,
                            const LearnerSpec&);
  friend Model MajorityClassModel(const LabeledDataset&);

  enum class Kind { kConstant, kPrototypes, kLinear };

  Kind kind_ = Kind::kConstant;
  int num_classes_ = 0;
  std::size_t dim_ = 0;
  int constant_ = 0;
  // Prototypes (neighbours or centroids), row-major, with their labels.
  std::vector<double> points_;
  std::vector<int> point_labels_;
  // Linear scores: num_classes x (dim + 1), bias last.
  std::vector<double> weights_;
};

// Trains on the given training positions. Repeated positions act as sample
// weights (bootstrap bags). Deterministic in (subset, spec). Throws
// std::invalid_argument on an empty subset or out-of-range position.
Model TrainLearner(const LabeledDataset& data, std::span<const std::size_t> subset,
                   const LearnerSpec& spec);

// Predicts the most frequent training label (ties: smallest label). This is
// the model for an empty training set.
Model MajorityClassModel(const LabeledDataset& data);

// Entry j is 1 iff the prediction for the j-th row of `split` equals its label.
std::vector<std::uint8_t> CorrectnessVector(const Model& model, const LabeledDataset& data,
                                            Split split);

double Accuracy(const Model& model, const LabeledDataset& data, Split split);

// Accuracy on `split` after training on `subset`; the majority-class model
// stands in when the subset is empty.
double SubsetAccuracy(const LabeledDataset& data, std::span<const std::size_t> subset,
                      const LearnerSpec& spec, Split split);

}  // namespace cdvm

#endif  // CDVM_LEARNER_H_
