#include "weakkam/simplex.hpp"

#include "weakkam/error.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace weakkam {

namespace {

// Revised simplex over [A I]; columns n..n+m-1 are the phase-one artificials.
// The basis is refactored from scratch at every pivot, so no rounding error
// accumulates across the (possibly long) degenerate runs of Bland's rule.
class RevisedSimplex {
 public:
  RevisedSimplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const SimplexOptions& opts)
      : A_(A), b_(b), m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())), opts_(opts) {
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
    refactor();
  }

  Eigen::VectorXd column(int j) const {
    if (j < n_) return A_.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = 1.0;
    return e;
  }

  void refactor() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
    lu_.compute(B);
    lu_t_.compute(B.transpose());
    xb_ = lu_.solve(b_);
  }

  // Minimizes cost (length n + m) with entering candidates restricted to the
  // first `columns` columns.
  void run(const Eigen::VectorXd& cost, int columns) {
    const double scale = 1.0 + cost.head(columns).cwiseAbs().maxCoeff();
    while (true) {
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
      const Eigen::VectorXd y = lu_t_.solve(cb);
      const Eigen::VectorXd reduced = cost.head(columns) - (A_.leftCols(std::min(columns, n_)).transpose() * y);
      // Dantzig pricing; after a run of degenerate pivots, Bland's first
      // improving column, which cannot cycle.
      const bool bland = degenerate_run_ >= kDegenerateRun;
      int enter = -1;
      double most = -opts_.tolerance * scale;
      for (int j = 0; j < columns; ++j)
        if (reduced[j] < most) {
          enter = j;
          if (bland) break;
          most = reduced[j];
        }
      if (enter < 0) return;
      const Eigen::VectorXd u = lu_.solve(column(enter));
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (u[i] <= opts_.tolerance) continue;
        const double ratio = std::max(xb_[i], 0.0) / u[i];
        // Bland: ties broken by the smallest basic variable index.
        if (ratio < best - opts_.tolerance || (ratio <= best + opts_.tolerance && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) throw Error(ErrorKind::NoConvergence, "linear program is unbounded");
      degenerate_run_ = best <= opts_.tolerance ? degenerate_run_ + 1 : 0;
      pivot(leave, enter);
    }
  }

  void pivot(int row, int col) {
    if (++pivots_ > opts_.max_pivots) throw Error(ErrorKind::NoConvergence, "simplex pivot limit reached");
    basis_[row] = col;
    refactor();
  }

  // Replaces artificials still in the basis by original columns where the
  // row allows it; the remaining ones sit on redundant rows at level zero.
  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
      e[i] = 1.0;
      const Eigen::VectorXd row = A_.transpose() * lu_t_.solve(e);
      for (int j = 0; j < n_; ++j)
        if (std::abs(row[j]) > 1e3 * opts_.tolerance) {
          pivot(i, j);
          break;
        }
    }
  }

  // Moves b so that the current basic solution becomes x_B + delta with
  // delta > 0 small; the vertex is then nondegenerate.
  void perturb_rhs(double size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    Eigen::VectorXd delta(m_);
    for (int i = 0; i < m_; ++i) delta[i] = size * u(rng);
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(m_);
    for (int i = 0; i < m_; ++i) shift += delta[i] * column(basis_[i]);
    b_ += shift;
    refactor();
  }

  void set_rhs(const Eigen::VectorXd& b) {
    b_ = b;
    refactor();
  }

  // Dual simplex: the basis is dual feasible for `cost`; pivots until the
  // basic solution is nonnegative.
  void restore_primal(const Eigen::VectorXd& cost, int columns) {
    const double scale = 1.0 + b_.cwiseAbs().maxCoeff();
    while (true) {
      int row = -1;
      for (int i = 0; i < m_; ++i)
        if (xb_[i] < -opts_.tolerance * scale && (row < 0 || xb_[i] < xb_[row])) row = i;
      if (row < 0) return;
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
      const Eigen::VectorXd y = lu_t_.solve(cb);
      Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
      e[row] = 1.0;
      const Eigen::VectorXd alpha = A_.leftCols(std::min(columns, n_)).transpose() * lu_t_.solve(e);
      int enter = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < columns; ++j) {
        if (alpha[j] >= -opts_.tolerance) continue;
        const double reduced = std::max(cost[j] - A_.col(j).dot(y), 0.0);
        const double ratio = reduced / -alpha[j];
        if (ratio < best) {
          best = ratio;
          enter = j;
        }
      }
      if (enter < 0) throw Error(ErrorKind::LPInfeasible, "no nonnegative solution of the constraints");
      pivot(row, enter);
    }
  }

  const std::vector<int>& basis() const { return basis_; }
  const Eigen::VectorXd& basic_values() const { return xb_; }
  long pivots() const { return pivots_; }

 private:
  const Eigen::MatrixXd& A_;
  Eigen::VectorXd b_;
  int m_, n_;
  SimplexOptions opts_;
  std::vector<int> basis_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_, lu_t_;
  Eigen::VectorXd xb_;
  long pivots_ = 0;
  int degenerate_run_ = 0;
  static constexpr int kDegenerateRun = 1000;
};

}  // namespace

LPSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opts) {
  const int m = static_cast<int>(lp.A.rows());
  const int n = static_cast<int>(lp.A.cols());
  if (lp.b.size() != m || lp.c.size() != n) throw Error(ErrorKind::BadInput, "linear program shape mismatch");

  // Rows with negative right-hand side are negated so the artificial basis
  // starts feasible.
  Eigen::MatrixXd A = lp.A;
  Eigen::VectorXd b = lp.b;
  for (int i = 0; i < m; ++i)
    if (b[i] < 0.0) {
      A.row(i) *= -1.0;
      b[i] = -b[i];
    }

  RevisedSimplex sx(A, b, opts);
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  sx.run(phase1, n);
  double infeasibility = 0.0;
  for (int i = 0; i < m; ++i)
    if (sx.basis()[i] >= n) infeasibility += std::max(sx.basic_values()[i], 0.0);
  if (infeasibility > opts.tolerance * (1.0 + b.cwiseAbs().sum()))
    throw Error(ErrorKind::LPInfeasible, "no nonnegative solution of the constraints");
  sx.expel_artificials();

  // Phase two runs on a perturbed right-hand side, which removes the long
  // degenerate pivot runs at vertices like a Dirac mass; the exact b is then
  // restored and any tiny infeasibility repaired by dual simplex.
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = lp.c;
  sx.perturb_rhs(1e-7 * (1.0 + b.cwiseAbs().maxCoeff()), 1);
  sx.run(phase2, n);
  sx.set_rhs(b);
  sx.restore_primal(phase2, n);
  sx.run(phase2, n);

  LPSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    const int j = sx.basis()[i];
    if (j < n) sol.x[j] = std::max(sx.basic_values()[i], 0.0);
  }
  sol.value = lp.c.dot(sol.x);
  sol.pivots = sx.pivots();
  return sol;
}

}  // namespace weakkam
