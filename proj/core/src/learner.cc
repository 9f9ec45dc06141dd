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
#include "cdvm/learner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cdvm/rng.h"

namespace cdvm {
namespace {

double SquaredDistance(std::span<const double> a, const double* b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace

LearnerKind ParseLearnerKind(std::string_view name) {
  if (name == "nearest-neighbor" || name == "1nn") return LearnerKind::kNearestNeighbor;
  if (name == "nearest-centroid") return LearnerKind::kNearestCentroid;
  if (name == "multinomial-logistic" || name == "logistic") {
    return LearnerKind::kMultinomialLogistic;
  }
  throw std::invalid_argument("unknown learner '" + std::string(name) + "'");
}

std::string_view LearnerKindName(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kNearestNeighbor:
      return "nearest-neighbor";
    case LearnerKind::kNearestCentroid:
      return "nearest-centroid";
    case LearnerKind::kMultinomialLogistic:
      return "multinomial-logistic";
  }
  return "?";
}

void LearnerSpec::Validate() const {
  if (iterations < 1) throw std::invalid_argument("learner iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

int Model::Predict(std::span<const double> x) const {
  switch (kind_) {
    case Kind::kConstant:
      return constant_;
    case Kind::kPrototypes: {
      int best = point_labels_[0];
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < point_labels_.size(); ++p) {
        const double d = SquaredDistance(x, points_.data() + p * dim_);
        if (d < best_d) {
          best_d = d;
          best = point_labels_[p];
        }
      }
      return best;
    }
    case Kind::kLinear: {
      int best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < num_classes_; ++c) {
        const double* w = weights_.data() + static_cast<std::size_t>(c) * (dim_ + 1);
        double s = w[dim_];
        for (std::size_t d = 0; d < dim_; ++d) s += w[d] * x[d];
        if (s > best_score) {
          best_score = s;
          best = c;
        }
      }
      return best;
    }
  }
  return constant_;
}

Model MajorityClassModel(const LabeledDataset& data) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(data.num_classes()), 0);
  for (std::size_t pos = 0; pos < data.num_train(); ++pos) ++counts[data.train_label(pos)];
  Model m;
  m.kind_ = Model::Kind::kConstant;
  m.num_classes_ = data.num_classes();
  m.dim_ = data.dim();
  m.constant_ = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  return m;
}

Model TrainLearner(const LabeledDataset& data, std::span<const std::size_t> subset,
                   const LearnerSpec& spec) {
  spec.Validate();
  if (subset.empty()) throw std::invalid_argument("cannot train on an empty subset");
  for (std::size_t pos : subset) {
    if (pos >= data.num_train()) throw std::invalid_argument("training position out of range");
  }
  const std::size_t dim = data.dim();
  const int k = data.num_classes();
  Model m;
  m.num_classes_ = k;
  m.dim_ = dim;

  switch (spec.kind) {
    case LearnerKind::kNearestNeighbor: {
      // Sorted, deduplicated positions make the tie rule "lowest position".
      std::vector<std::size_t> uniq(subset.begin(), subset.end());
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      m.kind_ = Model::Kind::kPrototypes;
      m.points_.reserve(uniq.size() * dim);
      for (std::size_t pos : uniq) {
        const auto x = data.row(data.train_row(pos));
        m.points_.insert(m.points_.end(), x.begin(), x.end());
        m.point_labels_.push_back(data.train_label(pos));
      }
      break;
    }
    case LearnerKind::kNearestCentroid: {
      std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
      std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
      for (std::size_t pos : subset) {
        const int y = data.train_label(pos);
        const auto x = data.row(data.train_row(pos));
        for (std::size_t d = 0; d < dim; ++d) sums[static_cast<std::size_t>(y) * dim + d] += x[d];
        ++counts[y];
      }
      m.kind_ = Model::Kind::kPrototypes;
      // Classes absent from the subset get no centroid and are never predicted.
      for (int c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t d = 0; d < dim; ++d) {
          m.points_.push_back(sums[static_cast<std::size_t>(c) * dim + d] /
                              static_cast<double>(counts[c]));
        }
        m.point_labels_.push_back(c);
      }
      break;
    }
    case LearnerKind::kMultinomialLogistic: {
      m.kind_ = Model::Kind::kLinear;
      const std::size_t stride = dim + 1;
      m.weights_.assign(static_cast<std::size_t>(k) * stride, 0.0);
      CounterRng rng(spec.seed);
      for (double& w : m.weights_) w = 0.01 * rng.Normal();
      std::vector<double> grad(m.weights_.size());
      std::vector<double> prob(static_cast<std::size_t>(k));
      const double scale = spec.learning_rate / static_cast<double>(subset.size());
      for (int it = 0; it < spec.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t pos : subset) {
          const auto x = data.row(data.train_row(pos));
          double max_s = -std::numeric_limits<double>::infinity();
          for (int c = 0; c < k; ++c) {
            const double* w = m.weights_.data() + static_cast<std::size_t>(c) * stride;
            double s = w[dim];
            for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
            prob[c] = s;
            max_s = std::max(max_s, s);
          }
          double z = 0.0;
          for (double& p : prob) {
            p = std::exp(p - max_s);
            z += p;
          }
          const int y = data.train_label(pos);
          for (int c = 0; c < k; ++c) {
            const double r = prob[c] / z - (c == y ? 1.0 : 0.0);
            double* g = grad.data() + static_cast<std::size_t>(c) * stride;
            for (std::size_t d = 0; d < dim; ++d) g[d] += r * x[d];
            g[dim] += r;
          }
        }
        for (std::size_t i = 0; i < grad.size(); ++i) m.weights_[i] -= scale * grad[i];
      }
      break;
    }
  }
  return m;
}

std::vector<std::uint8_t> CorrectnessVector(const Model& model, const LabeledDataset& data,
                                            Split split) {
  const auto& rows = data.rows_of(split);
  std::vector<std::uint8_t> out(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out[j] = model.Predict(data.row(rows[j])) == data.label(rows[j]) ? 1 : 0;
  }
  return out;
}

double Accuracy(const Model& model, const LabeledDataset& data, Split split) {
  const auto correct = CorrectnessVector(model, data, split);
  if (correct.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(correct.size());
}

double SubsetAccuracy(const LabeledDataset& data, std::span<const std::size_t> subset,
                      const LearnerSpec& spec, Split split) {
  if (subset.empty()) return Accuracy(MajorityClassModel(data), data, split);
  return Accuracy(TrainLearner(data, subset, spec), data, split);
}

}  // namespace cdvm
