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
#include "cdvm/cdvm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "cdvm/error.h"
#include "json.hpp"

namespace cdvm {
namespace {

using RowList = std::vector<std::vector<std::pair<std::size_t, double>>>;

RowList Rows(const AttributionMatrix& t) {
  RowList rows(t.rows());
  t.ForEachNonzero([&](std::size_t i, std::size_t j, double v) { rows[i].emplace_back(j, v); });
  return rows;
}

double Excess(double v, double kappa) { return std::max(v - kappa, 0.0); }

std::vector<std::size_t> Greedy(const RowList& rows, std::size_t m, std::size_t budget,
                                double alpha, double kappa) {
  const std::size_t n = rows.size();
  std::vector<double> v(m, 0.0);
  std::vector<std::uint8_t> taken(n, 0);
  std::vector<std::size_t> selected;
  selected.reserve(budget);
  for (std::size_t step = 0; step < budget; ++step) {
    std::size_t best_i = n;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      double gain = 0.0;
      for (const auto& [j, tij] : rows[i]) {
        gain += alpha * tij - (1.0 - alpha) * (Excess(v[j] + tij, kappa) - Excess(v[j], kappa));
      }
      if (gain > best_gain + 1e-12) {
        best_gain = gain;
        best_i = i;
      }
    }
    taken[best_i] = 1;
    selected.push_back(best_i);
    for (const auto& [j, tij] : rows[best_i]) v[j] += tij;
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

double ObjectiveOf(const RowList& rows, std::size_t m, std::span<const std::size_t> selected,
                   double alpha, double kappa, std::vector<double>& v) {
  v.assign(m, 0.0);
  for (std::size_t i : selected) {
    for (const auto& [j, tij] : rows[i]) v[j] += tij;
  }
  double total = 0.0;
  double excess = 0.0;
  for (double vj : v) {
    total += vj;
    excess += Excess(vj, kappa);
  }
  return alpha * total - (1.0 - alpha) * excess;
}

SolverStatus FromLp(lp::LpStatus s) {
  switch (s) {
    case lp::LpStatus::kOptimal:
      return SolverStatus::kOptimal;
    case lp::LpStatus::kIterationLimit:
      return SolverStatus::kIterationLimit;
    default:
      return SolverStatus::kInfeasible;
  }
}

}  // namespace

CdvmProblem BuildProblem(const AttributionMatrix& t, std::size_t budget, double alpha,
                         double kappa, Integrality integrality) {
  if (budget < 1 || budget > t.rows()) {
    throw std::invalid_argument("budget S=" + std::to_string(budget) + " outside [1, " +
                                std::to_string(t.rows()) + "]");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");
  return CdvmProblem{&t, budget, alpha, kappa, integrality};
}

std::string_view SolverStatusName(SolverStatus status) {
  switch (status) {
    case SolverStatus::kOptimal:
      return "optimal";
    case SolverStatus::kInfeasible:
      return "infeasible";
    case SolverStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "?";
}

double CdvmObjective(const CdvmProblem& problem, std::span<const double> w) {
  std::vector<double> v(problem.m(), 0.0);
  problem.t->ForEachNonzero([&](std::size_t i, std::size_t j, double tij) { v[j] += tij * w[i]; });
  double total = 0.0;
  double excess = 0.0;
  for (double vj : v) {
    total += vj;
    excess += Excess(vj, problem.kappa);
  }
  return problem.alpha * total - (1.0 - problem.alpha) * excess;
}

std::vector<std::size_t> RoundTopS(std::span<const double> w, std::size_t budget) {
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  order.resize(std::min(budget, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

std::size_t FractionalCount(std::span<const double> w, double tol) {
  return static_cast<std::size_t>(
      std::count_if(w.begin(), w.end(), [tol](double x) { return x > tol && x < 1.0 - tol; }));
}

CdvmSolver::CdvmSolver(const AttributionMatrix& t, std::size_t budget,
                       lp::SimplexOptions options)
    : t_(&t), budget_(budget), options_(options), row_sums_(t.RowSums()) {
  BuildProblem(t, budget, 0.5, 0.0);  // range checks
  const std::size_t n = t.rows();
  const std::size_t m = t.cols();
  const auto rows = static_cast<Eigen::Index>(m + 1);
  const auto cols = static_cast<Eigen::Index>(n + 2 * m);
  // Columns: w_0..w_{n-1}, t_0..t_{m-1}, s_0..s_{m-1}.
  // Row 0:      sum_i w_i = S.
  // Row 1 + j:  -sum_i T_ij w_i + t_j - s_j = -kappa.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n + t.nnz() + 2 * m);
  for (std::size_t i = 0; i < n; ++i) triplets.emplace_back(0, static_cast<int>(i), 1.0);
  t.ForEachNonzero([&](std::size_t i, std::size_t j, double v) {
    triplets.emplace_back(static_cast<int>(j + 1), static_cast<int>(i), -v);
  });
  for (std::size_t j = 0; j < m; ++j) {
    triplets.emplace_back(static_cast<int>(j + 1), static_cast<int>(n + j), 1.0);
    triplets.emplace_back(static_cast<int>(j + 1), static_cast<int>(n + m + j), -1.0);
  }
  lp_.a.resize(rows, cols);
  lp_.a.setFromTriplets(triplets.begin(), triplets.end());
  lp_.a.makeCompressed();
  lp_.b.assign(m + 1, 0.0);
  lp_.b[0] = static_cast<double>(budget);
  lp_.lower.assign(n + 2 * m, 0.0);
  lp_.upper.assign(n + 2 * m, lp::kInfinity);
  std::fill(lp_.upper.begin(), lp_.upper.begin() + static_cast<std::ptrdiff_t>(n), 1.0);
  lp_.cost.assign(n + 2 * m, 0.0);
}

lp::Basis CdvmSolver::CrashBasis(double alpha, double kappa) const {
  const std::size_t n = t_->rows();
  const std::size_t m = t_->cols();
  const RowList rows = Rows(*t_);
  const auto selected = Greedy(rows, m, budget_, alpha, kappa);
  std::vector<double> v;
  ObjectiveOf(rows, m, selected, alpha, kappa, v);

  lp::Basis basis;
  basis.state.assign(n + 2 * m, lp::VarState::kAtLower);
  basis.basic.resize(m + 1);
  for (std::size_t i : selected) basis.state[i] = lp::VarState::kAtUpper;
  // The first selected point carries the budget row (basic at its upper bound).
  basis.basic[0] = selected.front();
  basis.state[selected.front()] = lp::VarState::kBasic;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t col = v[j] > kappa ? n + j : n + m + j;
    basis.basic[j + 1] = col;
    basis.state[col] = lp::VarState::kBasic;
  }
  return basis;
}

CdvmSolution CdvmSolver::Solve(double alpha, double kappa, const lp::Basis* warm) {
  BuildProblem(*t_, budget_, alpha, kappa);
  const std::size_t n = t_->rows();
  const std::size_t m = t_->cols();
  for (std::size_t i = 0; i < n; ++i) lp_.cost[i] = alpha * row_sums_[i];
  for (std::size_t j = 0; j < m; ++j) {
    lp_.cost[n + j] = -(1.0 - alpha);
    lp_.b[j + 1] = -kappa;
  }

  const lp::BoundedSimplex simplex(lp_, options_);
  lp::LpResult r;
  if (warm && simplex.IsFeasibleStart(*warm)) {
    r = simplex.Solve(warm);
  } else {
    const lp::Basis crash = CrashBasis(alpha, kappa);
    r = simplex.Solve(&crash);
    r.warm_started = false;
  }

  CdvmSolution sol;
  sol.status = FromLp(r.status);
  sol.iterations = r.iterations;
  sol.warm_started = r.warm_started;
  sol.w.assign(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(n));
  for (double& x : sol.w) x = std::clamp(x, 0.0, 1.0);
  sol.t.assign(r.x.begin() + static_cast<std::ptrdiff_t>(n),
               r.x.begin() + static_cast<std::ptrdiff_t>(n + m));
  for (double& x : sol.t) x = std::max(x, 0.0);
  sol.v.assign(m, 0.0);
  t_->ForEachNonzero([&](std::size_t i, std::size_t j, double v) { sol.v[j] += v * sol.w[i]; });
  double total = 0.0;
  double slack = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    total += sol.v[j];
    slack += sol.t[j];
  }
  sol.objective = alpha * total - (1.0 - alpha) * slack;
  sol.selected = RoundTopS(sol.w, budget_);
  sol.fractional_count = FractionalCount(sol.w);
  if (r.status == lp::LpStatus::kOptimal) last_basis_ = r.basis;
  return sol;
}

CdvmSolution SolveLp(const CdvmProblem& problem) {
  CdvmSolver solver(*problem.t, problem.budget);
  CdvmSolution sol = solver.Solve(problem.alpha, problem.kappa);
  if (sol.status != SolverStatus::kOptimal) {
    throw SolverError(std::string("CDVM LP did not reach optimality: ") +
                      std::string(SolverStatusName(sol.status)));
  }
  return sol;
}

std::vector<std::size_t> GreedySelection(const CdvmProblem& problem) {
  return Greedy(Rows(*problem.t), problem.m(), problem.budget, problem.alpha, problem.kappa);
}

IntegralOptimum SolveExactIntegral(const CdvmProblem& problem) {
  const std::size_t n = problem.n();
  const std::size_t s = problem.budget;
  if (n > 20) throw std::invalid_argument("exact enumeration supports n <= 20");
  const RowList rows = Rows(*problem.t);
  IntegralOptimum best;
  best.objective = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> combo(s);
  std::iota(combo.begin(), combo.end(), std::size_t{0});
  std::vector<double> v;
  for (;;) {
    const double obj = ObjectiveOf(rows, problem.m(), combo, problem.alpha, problem.kappa, v);
    const double tol = 1e-9 * std::max(1.0, std::abs(obj));
    if (obj > best.objective + tol) {
      best.objective = obj;
      best.optima.assign(1, combo);
    } else if (obj >= best.objective - tol) {
      best.optima.push_back(combo);
    }
    // Next combination in lexicographic order.
    std::size_t k = s;
    while (k > 0 && combo[k - 1] == n - s + k - 1) --k;
    if (k == 0) break;
    ++combo[k - 1];
    for (std::size_t r = k; r < s; ++r) combo[r] = combo[r - 1] + 1;
  }
  return best;
}

CdvmSolution Solve(const CdvmProblem& problem) {
  if (problem.integrality == Integrality::kRelaxed) return SolveLp(problem);
  const IntegralOptimum opt = SolveExactIntegral(problem);
  CdvmSolution sol;
  sol.selected = opt.optima.front();
  sol.w.assign(problem.n(), 0.0);
  for (std::size_t i : sol.selected) sol.w[i] = 1.0;
  const RowList rows = Rows(*problem.t);
  sol.objective = ObjectiveOf(rows, problem.m(), sol.selected, problem.alpha, problem.kappa, sol.v);
  sol.t.resize(sol.v.size());
  for (std::size_t j = 0; j < sol.v.size(); ++j) sol.t[j] = Excess(sol.v[j], problem.kappa);
  return sol;
}

double DefaultKappa(const AttributionMatrix& t, std::size_t budget) {
  if (t.rows() * t.cols() == 0) throw std::invalid_argument("default kappa needs a non-empty T");
  return t.MaxEntry() + static_cast<double>(budget) * t.MeanEntry();
}

std::vector<double> DefaultAlphaGrid() { return {0.5, 0.75, 1.0}; }

std::vector<double> DefaultKappaGrid(const AttributionMatrix& t, std::size_t budget) {
  const double base = DefaultKappa(t, budget);
  std::vector<double> grid;
  for (double f : {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0}) grid.push_back(base * f);
  return grid;
}

GridResult GridSearch(const AttributionMatrix& t, std::size_t budget,
                      std::span<const double> alphas, std::span<const double> kappas,
                      const SubsetScorer& scorer) {
  if (alphas.empty() || kappas.empty()) throw std::invalid_argument("grid search needs non-empty grids");
  CdvmSolver solver(t, budget);
  GridResult result;
  bool have = false;
  for (double kappa : kappas) {
    for (double alpha : alphas) {
      const lp::Basis* warm = solver.last_basis().basic.empty() ? nullptr : &solver.last_basis();
      CdvmSolution sol = solver.Solve(alpha, kappa, warm);
      if (sol.status != SolverStatus::kOptimal) {
        throw SolverError("grid point did not reach optimality");
      }
      const double score = scorer(sol.selected);
      result.cells.push_back({alpha, kappa, score, sol.fractional_count});
      bool better = !have || score > result.score + 1e-12;
      if (have && std::abs(score - result.score) <= 1e-12) {
        better = kappa < result.kappa || (kappa == result.kappa && alpha > result.alpha);
      }
      if (better) {
        have = true;
        result.alpha = alpha;
        result.kappa = kappa;
        result.score = score;
        result.solution = std::move(sol);
      }
    }
  }
  return result;
}

double BlockModel::min_tau() const {
  if (tau.empty()) throw std::invalid_argument("block model has no clusters");
  return *std::min_element(tau.begin(), tau.end());
}

double SurrogateObjective(const BlockModel& model, std::span<const std::size_t> s, double kappa) {
  const std::size_t k = model.num_clusters();
  if (s.size() != k || model.train_sizes.size() != k || model.test_sizes.size() != k) {
    throw std::invalid_argument("selection counts do not match the cluster count");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (s[c] > model.train_sizes[c]) throw std::invalid_argument("s_k exceeds n_k");
    total += static_cast<double>(model.test_sizes[c]) *
             std::min(model.tau[c] * static_cast<double>(s[c]), kappa);
  }
  return total;
}

AttributionMatrix BlockMatrix(const BlockModel& model, std::span<const int> train_cluster,
                              std::span<const int> test_cluster) {
  std::vector<AttributionMatrix::Entry> entries;
  for (std::size_t i = 0; i < train_cluster.size(); ++i) {
    for (std::size_t j = 0; j < test_cluster.size(); ++j) {
      if (train_cluster[i] == test_cluster[j]) {
        entries.push_back({i, j, model.tau[static_cast<std::size_t>(train_cluster[i])]});
      }
    }
  }
  return AttributionMatrix::FromEntries(train_cluster.size(), test_cluster.size(),
                                        std::move(entries));
}

CoverageReport VerifyClusterCoverage(std::span<const std::size_t> selected,
                                     std::span<const int> cluster_of, std::size_t num_clusters) {
  if (num_clusters == 0) {
    for (int c : cluster_of) num_clusters = std::max(num_clusters, static_cast<std::size_t>(c) + 1);
  }
  CoverageReport report;
  report.counts.assign(num_clusters, 0);
  for (std::size_t i : selected) {
    if (i >= cluster_of.size()) throw std::out_of_range("selected position has no cluster");
    ++report.counts[static_cast<std::size_t>(cluster_of[i])];
  }
  report.all_covered =
      num_clusters > 0 && std::all_of(report.counts.begin(), report.counts.end(),
                                      [](std::size_t c) { return c >= 1; });
  return report;
}

std::string SolutionToJson(const CdvmSolution& solution, std::size_t budget, double alpha,
                           double kappa) {
  nlohmann::json j;
  j["S"] = budget;
  j["alpha"] = alpha;
  j["kappa"] = kappa;
  j["objective"] = solution.objective;
  j["selected"] = solution.selected;
  j["fractional_count"] = solution.fractional_count;
  return j.dump(2);
}

}  // namespace cdvm
