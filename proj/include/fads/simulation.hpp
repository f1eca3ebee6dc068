#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fads/fads_test.hpp"
#include "fads/survival.hpp"

namespace fads {

/**
 * Two-group synthetic designs for the size/power studies.
 *
 * Case 1: each group follows an exact factor model X = F B' + U with
 *         k_true standard-normal factors, U(-1,1) loadings, and AR(0.5)
 *         idiosyncratic rows. The loadings are parameters of the design:
 *         a power study draws them once and holds them fixed across
 *         replicates, redrawing only factors and noise.
 * Case 2: plain Gaussian covariates with AR(0.5) covariance per group.
 * Case 3: group 2 Gaussian AR(0.5); group 1 = P' x_2 + eps with a sparse
 *         0.5-valued coupling block tying the last ten columns of group 2
 *         to the first and last five columns of group 1.
 */
struct SimConfig {
  int case_id = 1;
  int n = 150;
  int p = 300;  // split evenly: p1 = p2 = p/2
  int k_true = 2;
  double beta2_signal = 1.0;  // loaded on the first two coordinates of group 2

  enum class Alternative { sparse, dense };
  Alternative alternative = Alternative::sparse;
  std::vector<double> b0_grid = {0.0};

  double target_censoring = 0.40;
  int replicates = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 1;

  TestConfig test;  // tuning forwarded to every replicate's test run
};

struct CovariateDraw {
  Eigen::MatrixXd x1, x2;
  // Exact factor structure, available for Case 1 only.
  std::optional<Eigen::MatrixXd> factors1, loadings1;
  std::optional<Eigen::MatrixXd> factors2, loadings2;
};

struct CaseOneLoadings {
  Eigen::MatrixXd b1, b2;  // p/2 x k_true each
};

struct SurvivalDraw {
  Eigen::VectorXd times;
  std::vector<bool> events;
};

struct CensoringCalibration {
  double c_max = 0.0;
  bool at_bracket_bound = false;  // target unreachable; bound returned instead
};

struct SimReport {
  std::vector<double> b0;
  std::vector<double> rejection_rate;  // among completed replicates
  std::vector<double> mc_std_error;    // sqrt(r (1 - r) / completed)
  std::vector<int> rejections;
  std::vector<int> completed;
  std::vector<int> failures;
  std::vector<double> c_max;  // calibrated censoring bound per b0

  double censoring_rate_observed = 0.0;  // mean over all completed replicates
  bool valid = true;                     // false if any b0 exceeds 5% failures
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;
  SimConfig config;
};

/** True regression vector for group 1 at signal strength b0. */
Eigen::VectorXd beta1_truth(const SimConfig& config, double b0);
/** True regression vector for group 2 (fixed two-coordinate signal). */
Eigen::VectorXd beta2_truth(const SimConfig& config);

/** Draws fresh Case 1 loading matrices (study-level parameters). */
CaseOneLoadings draw_loadings(const SimConfig& config, std::mt19937_64& rng);

/**
 * Draws one covariate replicate. For Case 1, fixed loading matrices can be
 * supplied; omitting them draws fresh ones from rng.
 */
CovariateDraw generate_covariates(const SimConfig& config, std::mt19937_64& rng,
                                  const CaseOneLoadings* loadings = nullptr);

/**
 * Event times are unit-rate exponentials scaled by exp(-eta); censoring is
 * U(0, c_max). A nonfinite c_max disables censoring; exact float collisions
 * between event times are redrawn.
 */
SurvivalDraw simulate_survival(const Eigen::VectorXd& eta, double c_max, std::mt19937_64& rng);

/**
 * Chooses c_max so the expected censoring fraction under the config's design
 * at signal b0 matches target_censoring within 0.01, by bisection on the
 * analytic conditional censoring probability averaged over mc_size draws of
 * the linear predictor. Unreachably low targets return the bracket bound
 * with at_bracket_bound set.
 */
CensoringCalibration calibrate_censoring(const SimConfig& config, double b0, std::mt19937_64& rng,
                                         int mc_size = 20000,
                                         const CaseOneLoadings* loadings = nullptr);

/**
 * Full Monte Carlo study: for every b0 in the grid, generate replicates on
 * independent substreams, test group 1, and tally rejections at alpha.
 * Replicates that fail (degenerate variance, no events, ...) are excluded
 * and counted; any grid point with more than 5% failures marks the report
 * invalid. Identical configs (including seed) produce identical reports.
 */
SimReport run_power_study(const SimConfig& config);

/**
 * Asymptotic local power: P{chi^2(K, h) > upper-alpha critical value} with
 * noncentrality h = n c' sigma_star c.
 */
double theoretical_power(const Eigen::VectorXd& c_mn, const Eigen::MatrixXd& sigma_star, int n,
                         double alpha);

}  // namespace fads
