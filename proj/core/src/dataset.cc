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
#include "cdvm/dataset.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "cdvm/error.h"
#include "cdvm/rng.h"

namespace cdvm {
namespace {

std::string FormatDouble(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double ParseDouble(std::string_view s) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return x;
}

long long ParseInt(std::string_view s) {
  long long x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  }
  return x;
}

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val" || name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

LabeledDataset::LabeledDataset(std::size_t dim, int num_classes, std::vector<double> features,
                               std::vector<int> labels, std::vector<std::size_t> train,
                               std::vector<std::size_t> validation,
                               std::vector<std::size_t> test,
                               std::optional<std::vector<int>> cluster_of)
    : dim_(dim),
      num_classes_(num_classes),
      features_(std::move(features)),
      labels_(std::move(labels)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      test_(std::move(test)),
      cluster_of_(std::move(cluster_of)) {
  if (dim_ == 0) throw std::invalid_argument("dataset dimension must be positive");
  if (num_classes_ < 1) throw std::invalid_argument("num_classes must be positive");
  if (features_.size() != labels_.size() * dim_) {
    throw std::invalid_argument("feature matrix does not match label count");
  }
  for (int y : labels_) {
    if (y < 0 || y >= num_classes_) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, num_classes)");
    }
  }
  std::vector<std::uint8_t> seen(labels_.size(), 0);
  for (const auto* split : {&train_, &validation_, &test_}) {
    for (std::size_t r : *split) {
      if (r >= labels_.size()) throw std::invalid_argument("split row index out of range");
      if (seen[r]++) throw std::invalid_argument("splits are not disjoint");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw std::invalid_argument("splits do not cover all rows");
  }
  if (cluster_of_) {
    if (cluster_of_->size() != train_.size()) {
      throw std::invalid_argument("cluster_of must cover exactly the training points");
    }
    for (int c : *cluster_of_) {
      if (c < 0) throw std::invalid_argument("negative cluster id");
    }
  }
}

const std::vector<std::size_t>& LabeledDataset::rows_of(Split split) const {
  switch (split) {
    case Split::kTrain:
      return train_;
    case Split::kValidation:
      return validation_;
    case Split::kTest:
      return test_;
  }
  throw std::invalid_argument("unknown split");
}

int LabeledDataset::num_clusters() const {
  if (!cluster_of_ || cluster_of_->empty()) return 0;
  return *std::max_element(cluster_of_->begin(), cluster_of_->end()) + 1;
}

LabeledDataset GenerateClustered(const ClusteredSpec& spec, std::uint64_t seed) {
  const std::size_t k = spec.centers.size();
  const auto& val_sizes = spec.val_sizes.empty() ? spec.test_sizes : spec.val_sizes;
  if (k == 0) throw std::invalid_argument("at least one cluster is required");
  if (spec.sizes.size() != k || spec.labels.size() != k || spec.test_sizes.size() != k ||
      val_sizes.size() != k) {
    throw std::invalid_argument("centers, sizes, labels and test_sizes must have equal length");
  }
  if (!(spec.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const std::size_t dim = spec.centers[0].size();
  if (dim == 0) throw std::invalid_argument("centers must be non-empty points");
  for (const auto& c : spec.centers) {
    if (c.size() != dim) throw std::invalid_argument("centers differ in dimension");
  }
  int num_classes = 0;
  for (int y : spec.labels) {
    if (y < 0) throw std::invalid_argument("labels must be non-negative");
    num_classes = std::max(num_classes, y + 1);
  }

  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::size_t> rows[3];
  std::vector<int> cluster_of;
  const std::vector<std::size_t>* counts[3] = {&spec.sizes, &val_sizes, &spec.test_sizes};

  // One independent stream per (split, cluster) so that changing the test
  // size of one cluster leaves every other point unchanged.
  for (int s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < k; ++c) {
      CounterRng rng(DeriveSeed(seed, 3 * c + static_cast<std::size_t>(s)));
      for (std::size_t p = 0; p < (*counts[s])[c]; ++p) {
        rows[s].push_back(labels.size());
        for (std::size_t d = 0; d < dim; ++d) {
          features.push_back(spec.centers[c][d] + spec.sigma * rng.Normal());
        }
        labels.push_back(spec.labels[c]);
        if (s == 0) cluster_of.push_back(static_cast<int>(c));
      }
    }
  }
  return LabeledDataset(dim, num_classes, std::move(features), std::move(labels),
                        std::move(rows[0]), std::move(rows[1]), std::move(rows[2]),
                        std::move(cluster_of));
}

ClusteredSpec Fig1Spec(double sigma) {
  ClusteredSpec spec;
  spec.centers = {{-2.0, 0.5}, {2.5, 0.0}, {-2.5, -0.5}, {2.0, 0.0}};
  spec.sizes = {3, 2, 2, 1};
  spec.labels = {0, 0, 1, 1};
  spec.sigma = sigma;
  spec.test_sizes = {5, 5, 5, 5};
  spec.val_sizes = {5, 5, 5, 5};
  return spec;
}

void SaveDatasetCsv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t d = 0; d < data.dim(); ++d) out << 'x' << d << ',';
  out << "label,split,cluster\n";

  std::vector<Split> split_of(data.num_rows(), Split::kTrain);
  std::vector<int> cluster(data.num_rows(), -1);
  for (Split s : {Split::kValidation, Split::kTest}) {
    for (std::size_t r : data.rows_of(s)) split_of[r] = s;
  }
  if (data.cluster_of()) {
    for (std::size_t pos = 0; pos < data.num_train(); ++pos) {
      cluster[data.train_row(pos)] = (*data.cluster_of())[pos];
    }
  }
  // Rows are emitted split by split so that positions survive a reload.
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    for (std::size_t r : data.rows_of(s)) {
      for (double x : data.row(r)) out << FormatDouble(x) << ',';
      out << data.label(r) << ',' << SplitName(s) << ',';
      if (cluster[r] >= 0) out << cluster[r];
      out << '\n';
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

LabeledDataset LoadDatasetCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  const auto header = SplitCommas(line);
  if (header.size() < 4 || header[header.size() - 3] != "label" ||
      header[header.size() - 2] != "split" || header.back() != "cluster") {
    throw std::invalid_argument(path + ": header must be x0,...,label,split,cluster");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t d = 0; d < dim; ++d) {
    if (header[d] != "x" + std::to_string(d)) {
      throw std::invalid_argument(path + ": unexpected column '" + std::string(header[d]) + "'");
    }
  }

  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::size_t> rows[3];
  std::vector<int> clusters;
  std::size_t with_cluster = 0;
  int num_classes = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitCommas(line);
    if (cells.size() != dim + 3) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": wrong column count");
    }
    try {
      for (std::size_t d = 0; d < dim; ++d) features.push_back(ParseDouble(cells[d]));
      const int y = static_cast<int>(ParseInt(cells[dim]));
      const Split s = ParseSplit(cells[dim + 1]);
      rows[static_cast<int>(s)].push_back(labels.size());
      labels.push_back(y);
      num_classes = std::max(num_classes, y + 1);
      if (s == Split::kTrain) {
        if (cells[dim + 2].empty()) {
          clusters.push_back(-1);
        } else {
          clusters.push_back(static_cast<int>(ParseInt(cells[dim + 2])));
          ++with_cluster;
        }
      } else if (!cells[dim + 2].empty()) {
        throw std::invalid_argument("cluster given for a non-train row");
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::optional<std::vector<int>> cluster_of;
  if (with_cluster > 0) {
    if (with_cluster != clusters.size()) {
      throw std::invalid_argument(path + ": cluster must be given for all train rows or none");
    }
    cluster_of = std::move(clusters);
  }
  return LabeledDataset(dim, std::max(num_classes, 1), std::move(features), std::move(labels),
                        std::move(rows[0]), std::move(rows[1]), std::move(rows[2]),
                        std::move(cluster_of));
}

}  // namespace cdvm
