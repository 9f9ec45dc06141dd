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
#include "cdvm/simplex.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace cdvm::lp {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Working state of one solve. Columns [0, n) are structural; columns
// [n, n + rows) are phase-1 artificials (artificial r is sign[r] * e_r).
class Engine {
 public:
  Engine(const LinearProgram& lp, const SimplexOptions& options)
      : lp_(lp), opt_(options), rows_(lp.num_rows()), n_(lp.num_cols()) {
    lower_ = lp.lower;
    upper_ = lp.upper;
    lower_.resize(n_ + rows_, 0.0);
    upper_.resize(n_ + rows_, 0.0);
    sign_.assign(rows_, 1.0);
    x_.assign(n_ + rows_, 0.0);
    state_.assign(n_ + rows_, VarState::kAtLower);
    basic_.assign(rows_, 0);
  }

  // Installs a basis over structural columns. Returns false when singular.
  bool LoadBasis(const Basis& basis) {
    if (basis.basic.size() != rows_ || basis.state.size() != n_) return false;
    std::vector<std::uint8_t> used(n_, 0);
    for (std::size_t c : basis.basic) {
      if (c >= n_ || used[c]++) return false;
      if (basis.state[c] != VarState::kBasic) return false;
    }
    for (std::size_t j = 0; j < n_; ++j) {
      state_[j] = basis.state[j];
      if (state_[j] == VarState::kBasic && !used[j]) return false;
      if (state_[j] == VarState::kAtUpper && !std::isfinite(upper_[j])) return false;
      if (state_[j] != VarState::kBasic) {
        x_[j] = state_[j] == VarState::kAtUpper ? upper_[j] : lower_[j];
      }
    }
    for (std::size_t r = 0; r < rows_; ++r) state_[n_ + r] = VarState::kAtLower;
    basic_ = basis.basic;
    return Refactor();
  }

  bool BasicFeasible() const {
    for (std::size_t r = 0; r < rows_; ++r) {
      const std::size_t c = basic_[r];
      if (x_[c] < lower_[c] - opt_.primal_tolerance) return false;
      if (x_[c] > upper_[c] + opt_.primal_tolerance) return false;
    }
    return true;
  }

  // Artificial basis at the point where every structural sits at its lower bound.
  void LoadArtificialBasis() {
    VectorXd residual = VectorXd::Map(lp_.b.data(), static_cast<Eigen::Index>(rows_));
    for (std::size_t j = 0; j < n_; ++j) {
      state_[j] = VarState::kAtLower;
      x_[j] = lower_[j];
      if (x_[j] != 0.0) residual -= lp_.a.col(static_cast<Eigen::Index>(j)) * x_[j];
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      sign_[r] = residual[static_cast<Eigen::Index>(r)] >= 0.0 ? 1.0 : -1.0;
      const std::size_t c = n_ + r;
      upper_[c] = kInfinity;
      basic_[r] = c;
      state_[c] = VarState::kBasic;
      x_[c] = std::abs(residual[static_cast<Eigen::Index>(r)]);
    }
    binv_ = MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) {
      binv_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) = sign_[r];
    }
  }

  // Artificials may no longer move once phase 1 is done.
  void FixArtificials() {
    for (std::size_t r = 0; r < rows_; ++r) upper_[n_ + r] = 0.0;
  }

  // Runs primal simplex iterations on the given cost vector (length n + rows).
  LpStatus Iterate(const std::vector<double>& cost, std::size_t& iterations, bool& used_bland) {
    std::size_t degenerate_run = 0;
    bool bland = false;
    std::size_t since_refactor = 0;
    const auto rows = static_cast<Eigen::Index>(rows_);
    VectorXd cb(rows);
    VectorXd column(rows);
    for (;;) {
      if (iterations >= opt_.max_iterations) return LpStatus::kIterationLimit;
      if (since_refactor >= opt_.refactor_interval) {
        if (!Refactor()) throw std::runtime_error("basis became singular during simplex");
        since_refactor = 0;
      }
      for (std::size_t r = 0; r < rows_; ++r) cb[static_cast<Eigen::Index>(r)] = cost[basic_[r]];
      const VectorXd y = binv_.transpose() * cb;

      // Pricing.
      std::optional<std::size_t> entering;
      double best = 0.0;
      for (std::size_t j = 0; j < n_ + rows_; ++j) {
        if (state_[j] == VarState::kBasic || upper_[j] <= lower_[j]) continue;
        const double d = cost[j] - Dot(y, j);
        const bool improves = (state_[j] == VarState::kAtLower && d > opt_.dual_tolerance) ||
                              (state_[j] == VarState::kAtUpper && d < -opt_.dual_tolerance);
        if (!improves) continue;
        if (bland) {
          entering = j;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
        }
      }
      if (!entering) return LpStatus::kOptimal;
      const std::size_t q = *entering;
      const double dir = state_[q] == VarState::kAtLower ? 1.0 : -1.0;
      Column(q, column);
      const VectorXd alpha = binv_ * column;

      // Ratio test: x_B(theta) = x_B - dir * theta * alpha.
      double theta = upper_[q] - lower_[q];
      std::optional<std::size_t> leave_row;
      bool leave_to_upper = false;
      double leave_pivot = 0.0;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double delta = -dir * alpha[static_cast<Eigen::Index>(r)];
        if (std::abs(delta) <= opt_.pivot_tolerance) continue;
        const std::size_t c = basic_[r];
        double limit;
        bool to_upper;
        if (delta < 0.0) {
          limit = (x_[c] - lower_[c]) / -delta;
          to_upper = false;
        } else {
          if (!std::isfinite(upper_[c])) continue;
          limit = (upper_[c] - x_[c]) / delta;
          to_upper = true;
        }
        limit = std::max(limit, 0.0);
        bool take = !leave_row.has_value() ? limit < theta : limit < theta - 1e-12;
        if (!take && leave_row && std::abs(limit - theta) <= 1e-12) {
          // Tie: Bland takes the smallest column, otherwise the largest pivot.
          take = bland ? c < basic_[*leave_row] : std::abs(delta) > leave_pivot;
        }
        if (take) {
          theta = limit;
          leave_row = r;
          leave_to_upper = to_upper;
          leave_pivot = std::abs(delta);
        }
      }
      if (!std::isfinite(theta)) return LpStatus::kUnbounded;

      ++iterations;
      ++since_refactor;
      if (theta <= opt_.primal_tolerance) {
        if (++degenerate_run >= opt_.degenerate_limit && !bland) {
          bland = true;
          used_bland = true;
        }
      } else {
        degenerate_run = 0;
      }

      for (std::size_t r = 0; r < rows_; ++r) {
        x_[basic_[r]] -= dir * theta * alpha[static_cast<Eigen::Index>(r)];
      }
      x_[q] += dir * theta;

      if (!leave_row) {
        // Bound flip.
        state_[q] = dir > 0 ? VarState::kAtUpper : VarState::kAtLower;
        x_[q] = dir > 0 ? upper_[q] : lower_[q];
        continue;
      }
      const std::size_t r = *leave_row;
      const std::size_t out = basic_[r];
      state_[out] = leave_to_upper ? VarState::kAtUpper : VarState::kAtLower;
      x_[out] = leave_to_upper ? upper_[out] : lower_[out];
      basic_[r] = q;
      state_[q] = VarState::kBasic;
      Pivot(static_cast<Eigen::Index>(r), alpha);
    }
  }

  double ArtificialSum() const {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) s += x_[n_ + r];
    return s;
  }

  // Replaces basic artificials (at zero) by structural columns where a
  // non-zero pivot exists; rows without one are redundant and keep theirs.
  void DriveOutArtificials() {
    const auto rows = static_cast<Eigen::Index>(rows_);
    VectorXd column(rows);
    for (std::size_t r = 0; r < rows_; ++r) {
      if (basic_[r] < n_) continue;
      for (std::size_t j = 0; j < n_; ++j) {
        if (state_[j] == VarState::kBasic) continue;
        Column(j, column);
        const VectorXd alpha = binv_ * column;
        if (std::abs(alpha[static_cast<Eigen::Index>(r)]) < 1e-7) continue;
        const std::size_t out = basic_[r];
        state_[out] = VarState::kAtLower;
        x_[out] = 0.0;
        basic_[r] = j;
        state_[j] = VarState::kBasic;
        Pivot(static_cast<Eigen::Index>(r), alpha);
        break;
      }
    }
  }

  Basis ExportBasis() const {
    Basis b;
    b.basic = basic_;
    b.state.assign(state_.begin(), state_.begin() + static_cast<std::ptrdiff_t>(n_));
    return b;
  }

  bool HasArtificialInBasis() const {
    return std::any_of(basic_.begin(), basic_.end(), [&](std::size_t c) { return c >= n_; });
  }

  std::vector<double> Structural() const {
    return std::vector<double>(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
  }

  std::size_t num_cols() const { return n_; }

 private:
  double Dot(const VectorXd& y, std::size_t j) const {
    if (j >= n_) return y[static_cast<Eigen::Index>(j - n_)] * sign_[j - n_];
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(lp_.a, static_cast<Eigen::Index>(j)); it;
         ++it) {
      s += y[it.row()] * it.value();
    }
    return s;
  }

  void Column(std::size_t j, VectorXd& out) const {
    out.setZero();
    if (j >= n_) {
      out[static_cast<Eigen::Index>(j - n_)] = sign_[j - n_];
      return;
    }
    for (Eigen::SparseMatrix<double>::InnerIterator it(lp_.a, static_cast<Eigen::Index>(j)); it;
         ++it) {
      out[it.row()] = it.value();
    }
  }

  // Product-form update of the inverse after column `alpha` enters row r.
  void Pivot(Eigen::Index r, const VectorXd& alpha) {
    const double piv = alpha[r];
    binv_.row(r) /= piv;
    for (Eigen::Index i = 0; i < binv_.rows(); ++i) {
      if (i == r || alpha[i] == 0.0) continue;
      binv_.row(i) -= alpha[i] * binv_.row(r);
    }
  }

  // Rebuilds the inverse from scratch and recomputes x_B from the nonbasics.
  bool Refactor() {
    const auto rows = static_cast<Eigen::Index>(rows_);
    MatrixXd basis(rows, rows);
    VectorXd column(rows);
    for (std::size_t r = 0; r < rows_; ++r) {
      Column(basic_[r], column);
      basis.col(static_cast<Eigen::Index>(r)) = column;
    }
    Eigen::FullPivLU<MatrixXd> lu(basis);
    if (!lu.isInvertible()) return false;
    binv_ = lu.inverse();
    VectorXd rhs = VectorXd::Map(lp_.b.data(), rows);
    for (std::size_t j = 0; j < n_ + rows_; ++j) {
      if (state_[j] == VarState::kBasic || x_[j] == 0.0) continue;
      Column(j, column);
      rhs -= column * x_[j];
    }
    const VectorXd xb = binv_ * rhs;
    for (std::size_t r = 0; r < rows_; ++r) x_[basic_[r]] = xb[static_cast<Eigen::Index>(r)];
    return true;
  }

  const LinearProgram& lp_;
  const SimplexOptions& opt_;
  std::size_t rows_;
  std::size_t n_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> sign_;
  std::vector<double> x_;
  std::vector<VarState> state_;
  std::vector<std::size_t> basic_;
  MatrixXd binv_;
};

}  // namespace

void LinearProgram::Validate() const {
  const std::size_t n = num_cols();
  if (b.size() != num_rows()) throw std::invalid_argument("LP: b has wrong length");
  if (lower.size() != n || upper.size() != n || cost.size() != n) {
    throw std::invalid_argument("LP: bounds or cost have wrong length");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(lower[j])) throw std::invalid_argument("LP: lower bounds must be finite");
    if (upper[j] < lower[j]) throw std::invalid_argument("LP: upper bound below lower bound");
  }
}

std::string_view LpStatusName(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal:
      return "optimal";
    case LpStatus::kInfeasible:
      return "infeasible";
    case LpStatus::kUnbounded:
      return "unbounded";
    case LpStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "?";
}

BoundedSimplex::BoundedSimplex(const LinearProgram& lp, SimplexOptions options)
    : lp_(&lp), options_(options) {
  lp.Validate();
}

bool BoundedSimplex::IsFeasibleStart(const Basis& start) const {
  Engine engine(*lp_, options_);
  return engine.LoadBasis(start) && engine.BasicFeasible();
}

LpResult BoundedSimplex::Solve(const Basis* start) const {
  Engine engine(*lp_, options_);
  LpResult result;
  const std::size_t n = lp_->num_cols();
  const std::size_t rows = lp_->num_rows();
  std::vector<double> cost = lp_->cost;
  cost.resize(n + rows, 0.0);

  if (start && engine.LoadBasis(*start) && engine.BasicFeasible()) {
    result.warm_started = true;
  } else {
    engine.LoadArtificialBasis();
    std::vector<double> phase1(n + rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) phase1[n + r] = -1.0;
    const LpStatus s = engine.Iterate(phase1, result.iterations, result.used_bland);
    if (s == LpStatus::kIterationLimit) {
      result.status = s;
      result.x = engine.Structural();
      return result;
    }
    const double scale = 1.0 + std::accumulate(lp_->b.begin(), lp_->b.end(), 0.0,
                                               [](double a, double v) { return a + std::abs(v); });
    if (engine.ArtificialSum() > options_.primal_tolerance * scale) {
      result.status = LpStatus::kInfeasible;
      result.x = engine.Structural();
      return result;
    }
    engine.FixArtificials();
    engine.DriveOutArtificials();
  }

  result.status = engine.Iterate(cost, result.iterations, result.used_bland);
  result.x = engine.Structural();
  result.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) result.objective += lp_->cost[j] * result.x[j];
  if (!engine.HasArtificialInBasis()) result.basis = engine.ExportBasis();
  return result;
}

}  // namespace cdvm::lp
