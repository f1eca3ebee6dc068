/**
 * Latent-factor estimation per covariate group: rank selection by eigenvalue
 * ratios and constrained-least-squares (PCA) recovery of factors, loadings,
 * and idiosyncratic residuals. All operations column-center their input first
 * (the model assumes zero-mean factors and noise; raw data do not comply), so
 * the reconstruction identity factors * loadings^T + idiosyncratic holds for
 * the centered matrix; column_means is stored to recover the raw input.
 */
#pragma once

#include <Eigen/Dense>

namespace fads {

struct FactorDecomposition {
  int k = 0;
  Eigen::MatrixXd factors;        // n x k, (1/n) factors^T factors = I_k
  Eigen::MatrixXd loadings;       // p_m x k, loadings^T loadings diagonal
  Eigen::MatrixXd idiosyncratic;  // n x p_m, centered input minus factors * loadings^T
  Eigen::VectorXd eigenvalues;    // leading eigenvalues of the centered Gram matrix, descending
  Eigen::RowVectorXd column_means;
  bool rotation_warning = false;  // repeated eigenvalue within the top k
};

/**
 * Ratio rule on a descending eigenvalue profile: argmax over k in [1, k_bar]
 * of eig[k-1]/eig[k], ties toward the smallest k. An eig[k] below
 * 1e-12 * eig[0] makes the ratio +infinity at the first such k, which wins
 * immediately. Requires eig.size() >= k_bar + 1 and eig[0] > 0.
 */
int num_factors_from_eigenvalues(const Eigen::VectorXd& eigenvalues_desc, int k_bar);

/**
 * Estimated factor count of x by the ratio rule applied to the eigenvalues of
 * the centered n x n Gram matrix. Requires 1 <= k_bar < min(n, p_m).
 */
int estimate_num_factors(const Eigen::MatrixXd& x, int k_bar = 15);

/**
 * PCA factor fit with k factors: factors = sqrt(n) * (top-k orthonormal
 * eigenvectors of the centered Gram matrix), loadings = X_c^T factors / n,
 * idiosyncratic = X_c - factors * loadings^T. Column signs are fixed so each
 * factor's largest-magnitude loading is positive. Requires 1 <= k < min(n, p_m).
 */
FactorDecomposition fit_factors(const Eigen::MatrixXd& x, int k);

/** Column-centered X^T X / n; symmetric PSD. Requires n >= 2. */
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x);

}  // namespace fads
