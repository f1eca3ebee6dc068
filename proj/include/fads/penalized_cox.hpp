/**
 * LASSO-penalized Cox partial likelihood over an arbitrary feature assembly:
 * proximal Newton with cyclic coordinate descent on the local quadratic model
 * and Armijo backtracking, plus a KKT certificate, the regularization-path
 * lambda_max, cross-validation for lambda1, and the rate-based default.
 * Factor-labeled columns are conventionally unpenalized (weight 0).
 */
#pragma once

#include "fads/survival.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace fads {

struct PenalizedFit {
  Eigen::VectorXd coefs;         // all coefficients, feature-column order
  Eigen::VectorXd beta_minus_m;  // covariate-labeled coefficients, in order
  Eigen::VectorXd gamma_m;       // factor-labeled coefficients, in order
  double lambda1 = 0.0;
  double objective = 0.0;     // neg log partial likelihood + lambda1 * weighted l1
  double kkt_residual = 0.0;  // max stationarity violation at coefs
  int iterations = 0;         // outer proximal-Newton steps taken
  bool converged = false;
  std::vector<double> objective_history;  // objective after each outer step
};

struct CvReport {
  Eigen::VectorXd lambda_path;    // descending
  Eigen::VectorXd cv_deviance;    // mean held-out neg log partial likelihood per lambda
  Eigen::MatrixXd fold_deviance;  // folds x path, NaN where a fold was skipped
  double selected_lambda = 0.0;
  int fold_count = 0;  // folds that contributed
  std::vector<std::string> warnings;
};

/**
 * Minimizes neg_log_partial_likelihood(coefs) + lambda1 * sum_j w_j |coefs_j|
 * to KKT residual <= tol. penalty_weights must be nonnegative, one per
 * feature column (0 = unpenalized). Optional offset joins the linear
 * predictor; optional init warm-starts the solve. max_iter exceeded returns
 * the best iterate with converged = false.
 */
PenalizedFit fit_lasso_cox(const SurvivalDataset& data, const FeatureAssembly& features,
                           const Eigen::VectorXd& penalty_weights, double lambda1,
                           double tol = 1e-7, int max_iter = 200,
                           const Eigen::VectorXd& offset = Eigen::VectorXd(),
                           const Eigen::VectorXd& init = Eigen::VectorXd());

/**
 * Smallest lambda1 at which every penalized coefficient is 0: unpenalized
 * coordinates are profiled out (fit with penalized coordinates pinned at 0),
 * then lambda_max = max_j |grad_j| / w_j over penalized j.
 */
double lasso_lambda_max(const SurvivalDataset& data, const FeatureAssembly& features,
                        const Eigen::VectorXd& penalty_weights, double tol = 1e-8,
                        const Eigen::VectorXd& offset = Eigen::VectorXd());

/**
 * K-fold cross-validation over a geometric path from lambda_max down to
 * 0.05 * lambda_max (path_length points; a single point means {lambda_max}).
 * Fold assignment is an event-stratified shuffle, deterministic in seed;
 * fold_ids (values in [0, folds)) overrides it when supplied. Held-out folds
 * without events are skipped with a warning; all folds skipped is an error.
 * A fold stops descending once its active set saturates the training sample,
 * so trailing fold_deviance / cv_deviance entries can be NaN; selection runs
 * over the common finite prefix.
 */
CvReport cross_validate_lambda1(const SurvivalDataset& data, const FeatureAssembly& features,
                                const Eigen::VectorXd& penalty_weights, int folds, int path_length,
                                std::uint64_t seed, const std::vector<int>& fold_ids = {});

/**
 * Rate-based default c * [ sqrt(log(p_m) log(n) / n) + sqrt(log(n) / p_m)
 * + sqrt(log(n d)) sqrt(log(d) / n) ] with d = p - p_m; the constant c is the
 * theory's gap, default 0.5.
 */
double lambda1_rate(int n, int p_m, int d, double c = 0.5);

}  // namespace fads
