#include "fads/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "fads/parallel.hpp"
#include "fads/rng.hpp"
#include "fads/special_functions.hpp"

namespace fads {

namespace {

constexpr double kArCorrelation = 0.5;
constexpr std::uint64_t kCalibrationStream = 1000000;
constexpr std::uint64_t kLoadingsStream = 2000000;

void validate_design(const SimConfig& config) {
  if (config.case_id < 1 || config.case_id > 3)
    throw std::invalid_argument("sim: case must be 1, 2, or 3");
  if (config.n < 2) throw std::invalid_argument("sim: n must be >= 2");
  if (config.p < 4 || config.p % 2 != 0)
    throw std::invalid_argument("sim: p must be even and >= 4 (two equal groups)");
  const int p1 = config.p / 2;
  if (config.case_id == 1 && (config.k_true < 1 || config.k_true >= std::min(config.n, p1)))
    throw std::invalid_argument("sim: k_true must lie in [1, min(n, p/2))");
  if (config.case_id == 3 && p1 < 10)
    throw std::invalid_argument("sim: case 3 coupling needs at least 10 columns per group");
  if (!(config.target_censoring >= 0.0 && config.target_censoring < 1.0))
    throw std::invalid_argument("sim: target_censoring must lie in [0, 1)");
}

Eigen::MatrixXd normal_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

// Rows are AR(1) with correlation rho: x_j = rho x_{j-1} + sqrt(1-rho^2) e_j,
// the exact stationary construction (unit marginal variance, no Cholesky).
Eigen::MatrixXd ar_rows(int rows, int cols, double rho, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double innovation = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double prev = gauss(rng);
    m(i, 0) = prev;
    for (int j = 1; j < cols; ++j) {
      prev = rho * prev + innovation * gauss(rng);
      m(i, j) = prev;
    }
  }
  return m;
}

Eigen::MatrixXd uniform_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = unif(rng);
  return m;
}

double positive_uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u;
  do {
    u = unif(rng);
  } while (u <= 0.0);
  return u;
}

// P(C < T | eta) for T ~ Exp(exp(eta)), C ~ U(0, c): (1 - e^{-c mu}) / (c mu).
double conditional_censoring(double c, double mu) {
  const double x = c * mu;
  if (x < 1e-8) return 1.0 - 0.5 * x;
  return (1.0 - std::exp(-x)) / x;
}

}  // namespace

Eigen::VectorXd beta1_truth(const SimConfig& config, double b0) {
  const int p1 = config.p / 2;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p1);
  const int support = (config.alternative == SimConfig::Alternative::sparse) ? std::min(5, p1) : p1;
  beta.head(support).setConstant(b0);
  return beta;
}

Eigen::VectorXd beta2_truth(const SimConfig& config) {
  const int p2 = config.p / 2;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p2);
  beta.head(std::min(2, p2)).setConstant(config.beta2_signal);
  return beta;
}

CaseOneLoadings draw_loadings(const SimConfig& config, std::mt19937_64& rng) {
  validate_design(config);
  const int p1 = config.p / 2;
  return {uniform_matrix(p1, config.k_true, rng), uniform_matrix(p1, config.k_true, rng)};
}

CovariateDraw generate_covariates(const SimConfig& config, std::mt19937_64& rng,
                                  const CaseOneLoadings* loadings) {
  validate_design(config);
  const int n = config.n;
  const int p1 = config.p / 2;
  const int p2 = p1;

  CovariateDraw draw;
  switch (config.case_id) {
    case 1: {
      const int k = config.k_true;
      const CaseOneLoadings own = loadings ? CaseOneLoadings{} : draw_loadings(config, rng);
      const Eigen::MatrixXd& b1 = loadings ? loadings->b1 : own.b1;
      const Eigen::MatrixXd& b2 = loadings ? loadings->b2 : own.b2;
      if (b1.rows() != p1 || b1.cols() != k || b2.rows() != p2 || b2.cols() != k)
        throw std::invalid_argument("generate_covariates: loadings shape mismatch");
      const Eigen::MatrixXd f1 = normal_matrix(n, k, rng);
      draw.x1 = f1 * b1.transpose() + ar_rows(n, p1, kArCorrelation, rng);
      const Eigen::MatrixXd f2 = normal_matrix(n, k, rng);
      draw.x2 = f2 * b2.transpose() + ar_rows(n, p2, kArCorrelation, rng);
      draw.factors1 = f1;
      draw.loadings1 = b1;
      draw.factors2 = f2;
      draw.loadings2 = b2;
      break;
    }
    case 2: {
      draw.x1 = ar_rows(n, p1, kArCorrelation, rng);
      draw.x2 = ar_rows(n, p2, kArCorrelation, rng);
      break;
    }
    case 3: {
      // x1 = P' x2 + eps where the only nonzero block of P couples the last
      // ten columns of x2, with weight 0.5, to the first five and last five
      // columns of x1.
      draw.x2 = ar_rows(n, p2, kArCorrelation, rng);
      draw.x1 = ar_rows(n, p1, kArCorrelation, rng);
      const Eigen::VectorXd shared = 0.5 * draw.x2.rightCols(10).rowwise().sum();
      for (int j = 0; j < 5; ++j) draw.x1.col(j) += shared;
      for (int j = p1 - 5; j < p1; ++j) draw.x1.col(j) += shared;
      break;
    }
  }
  return draw;
}

SurvivalDraw simulate_survival(const Eigen::VectorXd& eta, double c_max, std::mt19937_64& rng) {
  const int n = static_cast<int>(eta.size());
  if (n < 1) throw std::invalid_argument("simulate_survival: empty eta");
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(eta[i])) throw std::invalid_argument("simulate_survival: nonfinite eta");

  const bool censoring = std::isfinite(c_max);
  SurvivalDraw draw;
  draw.times.resize(n);
  draw.events.assign(n, false);

  auto draw_subject = [&](int i) {
    const double t = -std::log(positive_uniform(rng)) * std::exp(-eta[i]);
    double c = std::numeric_limits<double>::infinity();
    if (censoring) {
      if (c_max > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, c_max);
        c = unif(rng);
      } else {
        c = std::max(c_max, 0.0);
      }
    }
    draw.times[i] = std::min(t, c);
    draw.events[i] = (t <= c);
  };
  for (int i = 0; i < n; ++i) draw_subject(i);

  // Exact float collisions between event times would be rejected downstream;
  // they carry zero probability, so colliding subjects are simply redrawn.
  for (int pass = 0; pass < 100; ++pass) {
    std::unordered_map<double, int> seen;
    std::vector<int> redraw;
    for (int i = 0; i < n; ++i) {
      if (!draw.events[i]) continue;
      auto [it, inserted] = seen.emplace(draw.times[i], i);
      if (!inserted) redraw.push_back(i);
    }
    if (redraw.empty()) return draw;
    for (int i : redraw) draw_subject(i);
  }
  throw std::runtime_error("simulate_survival: persistent event-time collisions");
}

CensoringCalibration calibrate_censoring(const SimConfig& config, double b0, std::mt19937_64& rng,
                                         int mc_size, const CaseOneLoadings* loadings) {
  validate_design(config);
  if (mc_size < 10000) throw std::invalid_argument("calibrate_censoring: mc_size must be >= 10000");
  const double target = config.target_censoring;

  const Eigen::VectorXd beta1 = beta1_truth(config, b0);
  const Eigen::VectorXd beta2 = beta2_truth(config);
  std::vector<double> mu;  // exp(eta) over the Monte Carlo pool
  mu.reserve(mc_size + config.n);
  while (static_cast<int>(mu.size()) < mc_size) {
    const CovariateDraw draw = generate_covariates(config, rng, loadings);
    const Eigen::VectorXd eta = draw.x1 * beta1 + draw.x2 * beta2;
    for (int i = 0; i < eta.size(); ++i) mu.push_back(std::exp(eta[i]));
  }
  mu.resize(mc_size);

  auto rate = [&](double c) {
    double s = 0.0;
    for (double m : mu) s += conditional_censoring(c, m);
    return s / mc_size;
  };

  double lo = 1e-3, hi = 1e3;
  if (target < rate(hi)) return {hi, true};  // even the largest bound censors too much
  if (target > rate(lo)) {
    std::ostringstream msg;
    msg << "calibrate_censoring: target " << target << " exceeds the rate " << rate(lo)
        << " reachable at c = " << lo;
    throw std::runtime_error(msg.str());
  }

  for (int iter = 0; iter < 200 && hi - lo > 1e-10 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (rate(mid) > target)
      lo = mid;  // too much censoring: increase c
    else
      hi = mid;
  }
  return {0.5 * (lo + hi), false};
}

SimReport run_power_study(const SimConfig& config) {
  validate_design(config);
  if (config.replicates < 1) throw std::invalid_argument("run_power_study: replicates must be >= 1");
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw std::invalid_argument("run_power_study: alpha must lie in (0, 1)");
  if (config.b0_grid.empty()) throw std::invalid_argument("run_power_study: empty b0 grid");
  for (size_t i = 0; i < config.b0_grid.size(); ++i) {
    if (config.b0_grid[i] < 0.0) throw std::invalid_argument("run_power_study: b0 must be nonnegative");
    if (i > 0 && config.b0_grid[i] < config.b0_grid[i - 1])
      throw std::invalid_argument("run_power_study: b0 grid must be ascending");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const int p1 = config.p / 2;
  const std::vector<GroupSpec> groups = {{"1", 0, p1}, {"2", p1, config.p}};
  const Eigen::VectorXd beta2 = beta2_truth(config);

  // Case 1 loadings are design parameters: one draw for the whole study.
  std::optional<CaseOneLoadings> fixed;
  if (config.case_id == 1) {
    std::mt19937_64 loadings_rng = substream(config.seed, kLoadingsStream, 0);
    fixed = draw_loadings(config, loadings_rng);
  }
  const CaseOneLoadings* loadings = fixed ? &*fixed : nullptr;

  SimReport report;
  report.config = config;

  struct Replicate {
    bool done = false;
    bool reject = false;
    double censored = 0.0;
  };

  std::map<double, CensoringCalibration> calibration_cache;
  double censored_sum = 0.0;
  int censored_count = 0;

  for (size_t g = 0; g < config.b0_grid.size(); ++g) {
    const double b0 = config.b0_grid[g];

    auto cal_it = calibration_cache.find(b0);
    if (cal_it == calibration_cache.end()) {
      std::mt19937_64 cal_rng = substream(config.seed, kCalibrationStream, g);
      cal_it =
          calibration_cache.emplace(b0, calibrate_censoring(config, b0, cal_rng, 20000, loadings))
              .first;
      if (cal_it->second.at_bracket_bound) {
        std::ostringstream msg;
        msg << "b0 = " << b0 << ": censoring target unreachable; using bracket bound c = "
            << cal_it->second.c_max;
        report.warnings.push_back(msg.str());
      }
    }
    const double c_max = cal_it->second.c_max;
    const Eigen::VectorXd beta1 = beta1_truth(config, b0);

    std::vector<Replicate> reps(config.replicates);
    parallel_for(config.replicates, config.threads, [&](int r) {
      std::mt19937_64 rng = substream(config.seed, g, static_cast<std::uint64_t>(r));
      try {
        const CovariateDraw draw = generate_covariates(config, rng, loadings);
        const Eigen::VectorXd eta = draw.x1 * beta1 + draw.x2 * beta2;
        const SurvivalDraw surv = simulate_survival(eta, c_max, rng);

        Eigen::MatrixXd x(config.n, config.p);
        x.leftCols(p1) = draw.x1;
        x.rightCols(p1) = draw.x2;
        SurvivalDataset data(surv.times, surv.events, std::move(x), groups);

        TestConfig tc = config.test;
        tc.alpha = config.alpha;
        tc.threads = 1;  // parallelism lives at the replicate level
        tc.seed = rng();
        const TestResult res = run_fads_test(data, "1", tc);
        if (!res.p_value) return;  // degenerate: no decision, counted as failure

        reps[r].done = true;
        reps[r].reject = (*res.p_value <= config.alpha);
        reps[r].censored = data.censoring_rate();
      } catch (...) {
        // counted below as a failed replicate
      }
    });

    int done = 0, rejected = 0, failed = 0;
    for (const auto& rep : reps) {
      if (!rep.done) {
        ++failed;
        continue;
      }
      ++done;
      rejected += rep.reject ? 1 : 0;
      censored_sum += rep.censored;
      ++censored_count;
    }

    report.b0.push_back(b0);
    report.rejections.push_back(rejected);
    report.completed.push_back(done);
    report.failures.push_back(failed);
    report.c_max.push_back(c_max);
    const double rate = (done > 0) ? static_cast<double>(rejected) / done
                                   : std::numeric_limits<double>::quiet_NaN();
    report.rejection_rate.push_back(rate);
    report.mc_std_error.push_back((done > 0) ? std::sqrt(rate * (1.0 - rate) / done)
                                             : std::numeric_limits<double>::quiet_NaN());
    if (failed > 0.05 * config.replicates) {
      report.valid = false;
      std::ostringstream msg;
      msg << "b0 = " << b0 << ": " << failed << " of " << config.replicates
          << " replicates failed (over the 5% budget)";
      report.warnings.push_back(msg.str());
    }
  }

  report.censoring_rate_observed = (censored_count > 0) ? censored_sum / censored_count : 0.0;
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

double theoretical_power(const Eigen::VectorXd& c_mn, const Eigen::MatrixXd& sigma_star, int n,
                         double alpha) {
  const int k = static_cast<int>(sigma_star.rows());
  if (sigma_star.cols() != k || c_mn.size() != k)
    throw std::invalid_argument("theoretical_power: dimension mismatch");
  if (n < 1) throw std::invalid_argument("theoretical_power: n must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("theoretical_power: alpha must lie in (0, 1)");
  const double scale = std::max(1.0, sigma_star.cwiseAbs().maxCoeff());
  if ((sigma_star - sigma_star.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("theoretical_power: sigma_star must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_star);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("theoretical_power: sigma_star must be positive definite");

  const double h = n * c_mn.dot(sigma_star * c_mn);
  const double critical = chi_square_upper_quantile(k, alpha);
  return chi_square_sf_nc(critical, k, h);
}

}  // namespace fads
