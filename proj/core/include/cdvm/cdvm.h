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
#ifndef CDVM_CDVM_H_
#define CDVM_CDVM_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdvm/attribution.h"
#include "cdvm/simplex.h"

namespace cdvm {

enum class Integrality { kRelaxed, kExactEnumeration };

// Retain S of the n training points so as to
//   maximize   alpha * sum_j v_j - (1 - alpha) * sum_j t_j
//   subject to v = T' w,  sum_i w_i = S,  t_j >= 0,  t_j >= v_j - kappa,
// with w binary (exact) or in [0, 1] (relaxed). The matrix is borrowed and
// must outlive the problem.
struct CdvmProblem {
  const AttributionMatrix* t = nullptr;
  std::size_t budget = 0;
  double alpha = 0.5;
  double kappa = 0.0;
  Integrality integrality = Integrality::kRelaxed;

  std::size_t n() const { return t->rows(); }
  std::size_t m() const { return t->cols(); }
};

// Throws std::invalid_argument unless 1 <= S <= n, 0 <= alpha <= 1 and
// kappa >= 0.
CdvmProblem BuildProblem(const AttributionMatrix& t, std::size_t budget, double alpha,
                         double kappa, Integrality integrality = Integrality::kRelaxed);

enum class SolverStatus { kOptimal, kInfeasible, kIterationLimit };

std::string_view SolverStatusName(SolverStatus status);

struct CdvmSolution {
  std::vector<double> w;
  std::vector<double> v;
  std::vector<double> t;
  double objective = 0.0;
  // Retained training positions after top-S rounding, ascending.
  std::vector<std::size_t> selected;
  std::size_t fractional_count = 0;
  SolverStatus status = SolverStatus::kOptimal;
  std::size_t iterations = 0;
  bool warm_started = false;
};

// Objective of a fixed w, with t_j = max(v_j - kappa, 0).
double CdvmObjective(const CdvmProblem& problem, std::span<const double> w);

// The S positions with the largest w; ties go to the smaller position.
std::vector<std::size_t> RoundTopS(std::span<const double> w, std::size_t budget);

// Entries of w strictly inside (tol, 1 - tol).
std::size_t FractionalCount(std::span<const double> w, double tol = 1e-9);

// Holds the LP constraint matrix for one (T, S) pair so that it can be
// re-solved for many (alpha, kappa) without rebuilding. Each solve starts
// from `warm` when that basis is still primal feasible, and otherwise from
// a crash basis at the greedy integral selection for the given (alpha, kappa).
class CdvmSolver {
 public:
  CdvmSolver(const AttributionMatrix& t, std::size_t budget, lp::SimplexOptions options = {});

  CdvmSolution Solve(double alpha, double kappa, const lp::Basis* warm = nullptr);

  // Optimal basis of the most recent solve (empty before the first).
  const lp::Basis& last_basis() const { return last_basis_; }

 private:
  lp::Basis CrashBasis(double alpha, double kappa) const;

  const AttributionMatrix* t_;
  std::size_t budget_;
  lp::SimplexOptions options_;
  lp::LinearProgram lp_;
  std::vector<double> row_sums_;
  lp::Basis last_basis_;
};

// Solves the relaxed LP and rounds. Throws SolverError on iteration limit.
CdvmSolution SolveLp(const CdvmProblem& problem);

// Greedy integral selection: adds, S times, the point with the largest gain
// in CdvmObjective (ties: smaller position). Returned ascending.
std::vector<std::size_t> GreedySelection(const CdvmProblem& problem);

struct IntegralOptimum {
  double objective = 0.0;
  // Every optimal selection (within 1e-9), each ascending, in lexicographic order.
  std::vector<std::vector<std::size_t>> optima;
};

// Enumerates all C(n, S) binary w. Requires n <= 20.
IntegralOptimum SolveExactIntegral(const CdvmProblem& problem);

// Dispatches on problem.integrality. In exact mode the first optimum is
// returned as an integral solution.
CdvmSolution Solve(const CdvmProblem& problem);

// kappa = max_ij T_ij + S * mean_ij T_ij, over all n*m entries.
double DefaultKappa(const AttributionMatrix& t, std::size_t budget);

// Alpha values {0.5, 0.75, 1} for the default grid.
std::vector<double> DefaultAlphaGrid();

// DefaultKappa(t, budget) scaled by 1/32, 1/16, 1/8, 1/4, 1/2 and 1.
std::vector<double> DefaultKappaGrid(const AttributionMatrix& t, std::size_t budget);

// Validation score of a retained subset (higher is better).
using SubsetScorer = std::function<double(std::span<const std::size_t> selected)>;

struct GridCell {
  double alpha = 0.0;
  double kappa = 0.0;
  double score = 0.0;
  std::size_t fractional_count = 0;
};

struct GridResult {
  double alpha = 0.0;
  double kappa = 0.0;
  double score = 0.0;
  CdvmSolution solution;
  // Every evaluated point, kappa-major in the order given.
  std::vector<GridCell> cells;
};

// Solves every (alpha, kappa) pair on one cached problem, scores each rounded
// subset, and returns the best; ties prefer smaller kappa, then larger alpha.
GridResult GridSearch(const AttributionMatrix& t, std::size_t budget,
                      std::span<const double> alphas, std::span<const double> kappas,
                      const SubsetScorer& scorer);

// Block-structured instance: training cluster k (n_k points) influences
// each of its m_k test points by tau_k and nothing else.
struct BlockModel {
  std::vector<std::size_t> train_sizes;
  std::vector<std::size_t> test_sizes;
  std::vector<double> tau;

  std::size_t num_clusters() const { return tau.size(); }
  double min_tau() const;
};

// sum_k m_k * min(tau_k * s_k, kappa). Requires 0 <= s_k <= n_k.
double SurrogateObjective(const BlockModel& model, std::span<const std::size_t> s, double kappa);

// Block matrix for the given assignment of training rows and test columns
// to clusters.
AttributionMatrix BlockMatrix(const BlockModel& model, std::span<const int> train_cluster,
                              std::span<const int> test_cluster);

struct CoverageReport {
  std::vector<std::size_t> counts;
  bool all_covered = false;
};

// Per-cluster counts of selected positions. num_clusters = 0 infers it from
// the largest id in cluster_of.
CoverageReport VerifyClusterCoverage(std::span<const std::size_t> selected,
                                     std::span<const int> cluster_of, std::size_t num_clusters = 0);

// {"S":..., "alpha":..., "kappa":..., "objective":..., "selected":[...],
//  "fractional_count":...}
std::string SolutionToJson(const CdvmSolution& solution, std::size_t budget, double alpha,
                           double kappa);

}  // namespace cdvm

#endif  // CDVM_CDVM_H_
