#include "fads/factor_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace fads {

namespace {

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& x, Eigen::RowVectorXd* means_out = nullptr) {
  Eigen::RowVectorXd means = x.colwise().mean();
  if (means_out) *means_out = means;
  return x.rowwise() - means;
}

// Eigenvalues of X_c X_c^T, descending, clamped at 0 (Gram matrices are PSD up
// to roundoff).
Eigen::VectorXd gram_eigenvalues_desc(const Eigen::MatrixXd& xc, Eigen::MatrixXd* vectors_desc = nullptr) {
  const Eigen::MatrixXd gram = xc * xc.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  if (vectors_desc)
    es.compute(gram);
  else
    es.compute(gram, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  const int n = static_cast<int>(gram.rows());
  Eigen::VectorXd eigs(n);
  for (int i = 0; i < n; ++i) eigs[i] = std::max(0.0, es.eigenvalues()[n - 1 - i]);
  if (vectors_desc) {
    vectors_desc->resize(n, n);
    for (int i = 0; i < n; ++i) vectors_desc->col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return eigs;
}

}  // namespace

int num_factors_from_eigenvalues(const Eigen::VectorXd& eigenvalues_desc, int k_bar) {
  if (k_bar < 1) throw std::invalid_argument("k_bar must be >= 1");
  if (eigenvalues_desc.size() < k_bar + 1)
    throw std::invalid_argument("need k_bar + 1 eigenvalues for the ratio rule");
  const double lead = eigenvalues_desc[0];
  if (!(lead > 0.0)) throw std::invalid_argument("leading eigenvalue must be positive");

  int best_k = 1;
  double best_ratio = -1.0;
  for (int k = 1; k <= k_bar; ++k) {
    const double num = eigenvalues_desc[k - 1];
    const double den = eigenvalues_desc[k];
    if (den < 1e-12 * lead) return k;  // ratio +inf at the first vanishing denominator
    const double ratio = num / den;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_k = k;
    }
  }
  return best_k;
}

int estimate_num_factors(const Eigen::MatrixXd& x, int k_bar) {
  const int n = static_cast<int>(x.rows());
  const int pm = static_cast<int>(x.cols());
  if (k_bar < 1 || k_bar >= std::min(n, pm))
    throw std::invalid_argument("require 1 <= k_bar < min(n, p_m)");
  const Eigen::VectorXd eigs = gram_eigenvalues_desc(center_columns(x));
  return num_factors_from_eigenvalues(eigs.head(k_bar + 1), k_bar);
}

FactorDecomposition fit_factors(const Eigen::MatrixXd& x, int k) {
  const int n = static_cast<int>(x.rows());
  const int pm = static_cast<int>(x.cols());
  if (k < 1 || k >= std::min(n, pm)) throw std::invalid_argument("require 1 <= k < min(n, p_m)");

  FactorDecomposition out;
  const Eigen::MatrixXd xc = center_columns(x, &out.column_means);
  Eigen::MatrixXd vecs;
  const Eigen::VectorXd eigs = gram_eigenvalues_desc(xc, &vecs);

  out.k = k;
  out.factors = std::sqrt(static_cast<double>(n)) * vecs.leftCols(k);
  out.loadings = xc.transpose() * out.factors / n;

  // Fixed sign convention: the largest-magnitude loading of each factor is
  // positive (the test statistic downstream is sign-invariant, output is not).
  for (int j = 0; j < k; ++j) {
    Eigen::Index idx;
    out.loadings.col(j).cwiseAbs().maxCoeff(&idx);
    if (out.loadings(idx, j) < 0.0) {
      out.loadings.col(j) = -out.loadings.col(j);
      out.factors.col(j) = -out.factors.col(j);
    }
  }

  out.idiosyncratic = xc - out.factors * out.loadings.transpose();
  out.eigenvalues = eigs.head(std::min(n, 16));

  const double lead = std::max(eigs[0], 1e-300);
  for (int i = 0; i + 1 < k; ++i) {
    if ((eigs[i] - eigs[i + 1]) / lead < 1e-10) {
      out.rotation_warning = true;  // rotation indeterminacy; computation proceeds
      break;
    }
  }
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw std::invalid_argument("sample_covariance requires n >= 2");
  const Eigen::MatrixXd xc = center_columns(x);
  return xc.transpose() * xc / static_cast<double>(x.rows());
}

}  // namespace fads
