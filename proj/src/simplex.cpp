#include "fads/simplex.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fads {

namespace {

constexpr double kCostTol = 1e-9;
constexpr double kPivotTol = 1e-10;

struct Tableau {
  Eigen::MatrixXd T;        // m x (ncols+1), last column is the rhs
  Eigen::RowVectorXd obj;   // reduced-cost row, same width as T
  std::vector<int> basis;   // basic column per row
  int ncols = 0;

  int m() const { return static_cast<int>(T.rows()); }
  int rhs() const { return ncols; }

  void price(const Eigen::VectorXd& cost) {
    obj.setZero(ncols + 1);
    obj.head(ncols) = cost.transpose();
    for (int i = 0; i < m(); ++i)
      if (cost[basis[i]] != 0.0) obj -= cost[basis[i]] * T.row(i);
  }

  void pivot(int row, int col) {
    T.row(row) /= T(row, col);
    for (int i = 0; i < m(); ++i) {
      if (i == row) continue;
      const double f = T(i, col);
      if (f != 0.0) T.row(i) -= f * T.row(row);
    }
    const double f = obj[col];
    if (f != 0.0) obj -= f * T.row(row);
    basis[row] = col;
  }

  // Runs simplex pivots until optimal for the currently priced objective.
  // `allowed` masks columns permitted to enter the basis.
  bool optimize(const std::vector<bool>& allowed, int& iters, int max_iters) {
    int stall = 0;
    for (;;) {
      int enter = -1;
      if (stall <= 100) {
        double best = -kCostTol;
        for (int j = 0; j < ncols; ++j)
          if (allowed[j] && obj[j] < best) {
            best = obj[j];
            enter = j;
          }
      } else {  // Bland's rule: lowest-index negative column; no cycling possible
        for (int j = 0; j < ncols; ++j)
          if (allowed[j] && obj[j] < -kCostTol) {
            enter = j;
            break;
          }
      }
      if (enter < 0) return true;

      int leave = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < m(); ++i) {
        if (T(i, enter) > kPivotTol) {
          const double ratio = T(i, rhs()) / T(i, enter);
          if (leave < 0 || ratio < best_ratio - 1e-12 ||
              (ratio < best_ratio + 1e-12 && basis[i] < basis[leave])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) return false;  // unbounded direction

      stall = (best_ratio <= 1e-12) ? stall + 1 : 0;
      pivot(leave, enter);
      if (++iters > max_iters) throw std::runtime_error("simplex: iteration limit exceeded");
    }
  }
};

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  int max_iterations) {
  const int m = static_cast<int>(A.rows());
  const int nv = static_cast<int>(A.cols());
  if (b.size() != m) throw std::invalid_argument("solve_lp: length of b != rows(A)");
  if (c.size() != nv) throw std::invalid_argument("solve_lp: length of c != cols(A)");
  if (!A.allFinite() || !b.allFinite() || !c.allFinite())
    throw std::invalid_argument("solve_lp: nonfinite input");

  LpResult res;
  if (m == 0) {  // only x >= 0 remains; bounded iff c >= 0, optimum at the origin
    for (int j = 0; j < nv; ++j)
      if (c[j] < 0.0) throw std::runtime_error("simplex: objective unbounded");
    res.feasible = true;
    res.x = Eigen::VectorXd::Zero(nv);
    return res;
  }

  // Rows with negative rhs are negated so rhs >= 0; those rows get an
  // artificial variable, the rest start with their slack basic.
  std::vector<int> art_row;
  for (int i = 0; i < m; ++i)
    if (b[i] < 0.0) art_row.push_back(i);
  const int na = static_cast<int>(art_row.size());

  Tableau tab;
  tab.ncols = nv + m + na;
  tab.T.setZero(m, tab.ncols + 1);
  tab.basis.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    const double sign = (b[i] < 0.0) ? -1.0 : 1.0;
    tab.T.row(i).head(nv) = sign * A.row(i);
    tab.T(i, nv + i) = sign;  // slack
    tab.T(i, tab.rhs()) = sign * b[i];
    tab.basis[i] = nv + i;
  }
  for (int k = 0; k < na; ++k) {
    tab.T(art_row[k], nv + m + k) = 1.0;
    tab.basis[art_row[k]] = nv + m + k;
  }

  int iters = 0;
  std::vector<bool> allowed(tab.ncols, true);

  if (na > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(tab.ncols);
    phase1.tail(na).setOnes();
    tab.price(phase1);
    if (!tab.optimize(allowed, iters, max_iterations))
      throw std::runtime_error("simplex: phase 1 unbounded");  // impossible: objective >= 0
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (-tab.obj[tab.rhs()] > 1e-7 * scale) {
      res.iterations = iters;
      return res;  // infeasible
    }

    // Drive surviving artificials out of the basis; rows that cannot release
    // one are redundant combinations of other constraints and are dropped.
    std::vector<int> keep;
    for (int i = 0; i < tab.m(); ++i) {
      if (tab.basis[i] < nv + m) {
        keep.push_back(i);
        continue;
      }
      int col = -1;
      for (int j = 0; j < nv + m; ++j)
        if (std::abs(tab.T(i, j)) > kPivotTol) {
          col = j;
          break;
        }
      if (col >= 0) {
        tab.pivot(i, col);
        keep.push_back(i);
      }
    }
    if (static_cast<int>(keep.size()) < tab.m()) {
      Eigen::MatrixXd T2(keep.size(), tab.ncols + 1);
      std::vector<int> b2;
      for (size_t r = 0; r < keep.size(); ++r) {
        T2.row(r) = tab.T.row(keep[r]);
        b2.push_back(tab.basis[keep[r]]);
      }
      tab.T = std::move(T2);
      tab.basis = std::move(b2);
    }
    for (int k = 0; k < na; ++k) allowed[nv + m + k] = false;
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(tab.ncols);
  phase2.head(nv) = c;
  tab.price(phase2);
  if (!tab.optimize(allowed, iters, max_iterations))
    throw std::runtime_error("simplex: objective unbounded");

  res.feasible = true;
  res.iterations = iters;
  res.x = Eigen::VectorXd::Zero(nv);
  for (int i = 0; i < tab.m(); ++i)
    if (tab.basis[i] < nv) res.x[tab.basis[i]] = tab.T(i, tab.rhs());
  res.objective = c.dot(res.x);
  return res;
}

}  // namespace fads
