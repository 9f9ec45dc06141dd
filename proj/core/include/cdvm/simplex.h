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
#ifndef CDVM_SIMPLEX_H_
#define CDVM_SIMPLEX_H_

#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace cdvm::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

//   maximize    cost' x
//   subject to  A x = b,  lower <= x <= upper.
// Every lower bound must be finite; upper bounds may be kInfinity.
struct LinearProgram {
  Eigen::SparseMatrix<double> a;  // column-major, rows x cols
  std::vector<double> b;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> cost;

  std::size_t num_rows() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t num_cols() const { return static_cast<std::size_t>(a.cols()); }
  // Throws std::invalid_argument on inconsistent dimensions or bounds.
  void Validate() const;
};

enum class VarState : unsigned char { kBasic, kAtLower, kAtUpper };

// basic[r] is the column basic in row r; state has one entry per column.
struct Basis {
  std::vector<std::size_t> basic;
  std::vector<VarState> state;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

std::string_view LpStatusName(LpStatus status);

struct SimplexOptions {
  double primal_tolerance = 1e-9;
  double dual_tolerance = 1e-9;
  double pivot_tolerance = 1e-11;
  std::size_t max_iterations = 200000;
  // Consecutive degenerate pivots after which pricing switches from the
  // largest reduced cost to Bland's smallest-index rule.
  std::size_t degenerate_limit = 50;
  // Pivots between refactorizations of the basis inverse.
  std::size_t refactor_interval = 64;
};

struct LpResult {
  LpStatus status = LpStatus::kIterationLimit;
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool warm_started = false;
  bool used_bland = false;
  Basis basis;
};

// Bounded-variable primal simplex with an explicit dense basis inverse.
// Nonbasic variables sit at one of their bounds; entering variables may
// flip between bounds without a basis change. Deterministic: pricing ties
// and ratio-test ties are broken by index.
class BoundedSimplex {
 public:
  explicit BoundedSimplex(const LinearProgram& lp, SimplexOptions options = {});

  // True when `start` is a non-singular basis whose basic solution respects
  // every bound within the primal tolerance.
  bool IsFeasibleStart(const Basis& start) const;

  // Starts from `start` when it is a feasible basis; otherwise runs a
  // phase 1 on artificial variables from the all-at-lower-bound point.
  LpResult Solve(const Basis* start = nullptr) const;

 private:
  const LinearProgram* lp_;
  SimplexOptions options_;
};

}  // namespace cdvm::lp

#endif  // CDVM_SIMPLEX_H_
