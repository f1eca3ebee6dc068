#include "fads/projection.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "fads/simplex.hpp"

namespace fads {

namespace {

struct ColumnSolution {
  Eigen::VectorXd w;
  double feasibility = 0.0;
  int iterations = 0;
};

ColumnSolution solve_column(const Eigen::MatrixXd& h_bb, const Eigen::VectorXd& h, double lambda2,
                            double tol, int col) {
  const int d = static_cast<int>(h_bb.rows());
  ColumnSolution sol;
  const double h_inf = h.lpNorm<Eigen::Infinity>();
  if (h_inf <= lambda2) {  // zero is feasible, and nothing has smaller l1 norm
    sol.w = Eigen::VectorXd::Zero(d);
    sol.feasibility = h_inf;
    return sol;
  }

  // Split variables: x = (w+, w-), minimize 1'x subject to
  //   h_bb w <= lambda2 + h   and   -h_bb w <= lambda2 - h.
  Eigen::MatrixXd A(2 * d, 2 * d);
  A.topLeftCorner(d, d) = h_bb;
  A.topRightCorner(d, d) = -h_bb;
  A.bottomLeftCorner(d, d) = -h_bb;
  A.bottomRightCorner(d, d) = h_bb;
  Eigen::VectorXd b(2 * d);
  b.head(d) = Eigen::VectorXd::Constant(d, lambda2) + h;
  b.tail(d) = Eigen::VectorXd::Constant(d, lambda2) - h;
  const Eigen::VectorXd c = Eigen::VectorXd::Ones(2 * d);

  const LpResult lp = solve_lp(A, b, c);
  sol.iterations = lp.iterations;
  if (!lp.feasible) {
    std::ostringstream msg;
    msg << "projection column " << col << " infeasible at lambda2 = " << lambda2
        << "; best known residual (at w = 0) is " << h_inf;
    throw std::runtime_error(msg.str());
  }

  sol.w = lp.x.head(d) - lp.x.tail(d);
  sol.feasibility = (h - h_bb * sol.w).lpNorm<Eigen::Infinity>();
  if (sol.feasibility > lambda2 + tol) {
    std::ostringstream msg;
    msg << "projection column " << col << " residual " << sol.feasibility
        << " exceeds lambda2 + tol = " << lambda2 + tol;
    throw std::runtime_error(msg.str());
  }
  return sol;
}

}  // namespace

ProjectionMatrix estimate_projection(const Eigen::MatrixXd& h_bb, const Eigen::MatrixXd& h_bg,
                                     double lambda2, double tol, int threads) {
  const int d = static_cast<int>(h_bb.rows());
  const int k = static_cast<int>(h_bg.cols());
  if (h_bb.cols() != d) throw std::invalid_argument("estimate_projection: h_bb must be square");
  if (h_bg.rows() != d) throw std::invalid_argument("estimate_projection: rows(h_bg) != rows(h_bb)");
  if (!(lambda2 > 0.0)) throw std::invalid_argument("estimate_projection: lambda2 must be positive");
  if (!(tol >= 0.0)) throw std::invalid_argument("estimate_projection: tol must be nonnegative");
  if (!h_bb.allFinite() || !h_bg.allFinite())
    throw std::invalid_argument("estimate_projection: nonfinite input");

  ProjectionMatrix proj;
  proj.lambda2 = lambda2;
  proj.w.resize(d, k);
  proj.feasibility.resize(k);
  proj.l1_norms.resize(k);

  std::vector<ColumnSolution> sols(k);
  if (threads <= 1 || k <= 1) {
    for (int j = 0; j < k; ++j) sols[j] = solve_column(h_bb, h_bg.col(j), lambda2, tol, j);
  } else {
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr err;
    auto work = [&] {
      for (;;) {
        const int j = next.fetch_add(1);
        if (j >= k) return;
        try {
          sols[j] = solve_column(h_bb, h_bg.col(j), lambda2, tol, j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int nt = std::min(threads, k);
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
  }

  for (int j = 0; j < k; ++j) {
    proj.w.col(j) = sols[j].w;
    proj.feasibility[j] = sols[j].feasibility;
    proj.l1_norms[j] = sols[j].w.lpNorm<1>();
    proj.lp_iterations += sols[j].iterations;
  }
  return proj;
}

double lambda2_rate(int n, int p_m, int d, double c) {
  if (n < 2 || p_m < 1 || d < 1) throw std::invalid_argument("lambda2_rate: need n >= 2, p_m >= 1, d >= 1");
  const double ln = std::log(static_cast<double>(n));
  const double lpm = std::log(static_cast<double>(p_m));
  const double ld = std::log(static_cast<double>(d));
  return c * (std::sqrt(lpm * ln / n) + std::sqrt(ln / p_m) + 1.0) * std::sqrt(ld / n);
}

}  // namespace fads
