#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fads/factor_model.hpp"
#include "fads/simulation.hpp"

using namespace fads;

namespace {

// Smallest canonical correlation between the column spaces of a and b:
// factor scores are identified only up to rotation, so per-factor recovery
// is judged after the best orthogonal alignment.
double min_canonical_correlation(Eigen::MatrixXd a, Eigen::MatrixXd b) {
  a.rowwise() -= a.colwise().mean().eval();
  b.rowwise() -= b.colwise().mean().eval();
  const auto n = a.rows();
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(a), qb(b);
  const Eigen::MatrixXd ua = qa.householderQ() * Eigen::MatrixXd::Identity(n, a.cols());
  const Eigen::MatrixXd ub = qb.householderQ() * Eigen::MatrixXd::Identity(n, b.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ua.transpose() * ub);
  return svd.singularValues().minCoeff();
}

}  // namespace

TEST_CASE("rank-one fit solved by hand") {
  Eigen::MatrixXd x(2, 2);
  x << 2.0, 1.0, -2.0, -1.0;  // already column-centered; Gram = [[5,-5],[-5,5]]

  const FactorDecomposition fd = fit_factors(x, 1);
  CHECK(fd.k == 1);
  CHECK(fd.factors(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fd.factors(1, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(fd.loadings(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fd.loadings(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fd.idiosyncratic.lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(fd.eigenvalues[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(fd.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fd.column_means.norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_FALSE(fd.rotation_warning);
}

TEST_CASE("sample covariance solved by hand") {
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 0.0, -1.0, 0.0;
  const Eigen::MatrixXd s = sample_covariance(x);
  CHECK(s(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(s(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(s(1, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_THROWS_AS(sample_covariance(Eigen::MatrixXd::Zero(1, 3)), std::invalid_argument);
}

TEST_CASE("noiseless low-rank input is recovered exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 40, p = 25, k = 3;
  Eigen::MatrixXd f(n, k), b(p, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) f(i, j) = gauss(rng);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < k; ++j) b(i, j) = gauss(rng);
  Eigen::MatrixXd x = f * b.transpose();
  x.rowwise() += Eigen::RowVectorXd::Constant(p, 3.0);  // nonzero column means

  const FactorDecomposition fd = fit_factors(x, k);
  CHECK(fd.idiosyncratic.lpNorm<Eigen::Infinity>() < 1e-10);

  // Normalization: factors orthonormal after 1/n scaling, loadings orthogonal.
  const Eigen::MatrixXd ftf = fd.factors.transpose() * fd.factors / n;
  CHECK((ftf - Eigen::MatrixXd::Identity(k, k)).lpNorm<Eigen::Infinity>() < 1e-10);
  const Eigen::MatrixXd ltl = fd.loadings.transpose() * fd.loadings;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) CHECK(std::abs(ltl(i, j)) < 1e-8);

  // The fitted subspace spans the truth. Factor scores live in the centered
  // space, so the comparison target is the centered truth.
  Eigen::MatrixXd fc = f;
  fc.rowwise() -= f.colwise().mean().eval();
  const Eigen::MatrixXd coef =
      (fd.factors.transpose() * fd.factors).ldlt().solve(fd.factors.transpose() * fc);
  CHECK((fd.factors * coef - fc).lpNorm<Eigen::Infinity>() < 1e-9);

  CHECK(estimate_num_factors(x, 10) == k);
}

TEST_CASE("ratio rule on hand-built eigenvalue profiles") {
  Eigen::VectorXd spiked(5);
  spiked << 100.0, 50.0, 1.0, 0.5, 0.25;  // ratios 2, 50, 2, 2
  CHECK(num_factors_from_eigenvalues(spiked, 4) == 2);

  Eigen::VectorXd flat(4);
  flat << 8.0, 4.0, 2.0, 1.0;  // all ratios tie at 2: smallest k wins
  CHECK(num_factors_from_eigenvalues(flat, 3) == 1);

  Eigen::VectorXd truncated(4);
  truncated << 10.0, 5.0, 1e-14, 1e-15;  // vanishing denominator at k = 2
  CHECK(num_factors_from_eigenvalues(truncated, 3) == 2);

  CHECK_THROWS_AS(num_factors_from_eigenvalues(flat, 4), std::invalid_argument);
  CHECK_THROWS_AS(num_factors_from_eigenvalues(Eigen::VectorXd::Zero(4), 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(num_factors_from_eigenvalues(flat, 0), std::invalid_argument);
}

TEST_CASE("repeated leading eigenvalues raise the rotation warning") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 3);
  x(0, 0) = 1.0;
  x(1, 0) = -1.0;
  x(2, 1) = 1.0;
  x(3, 1) = -1.0;  // Gram eigenvalues 2, 2, 0, 0
  const FactorDecomposition fd = fit_factors(x, 2);
  CHECK(fd.rotation_warning);
  CHECK(fit_factors(x, 1).rotation_warning == false);
}

TEST_CASE("fit_factors validates the requested rank") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 4);
  CHECK_THROWS_AS(fit_factors(x, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit_factors(x, 4), std::invalid_argument);
  CHECK_THROWS_AS(estimate_num_factors(x, 4), std::invalid_argument);
  CHECK_NOTHROW(fit_factors(x, 3));
}

TEST_CASE("pervasive factor design: rank found and factors tracked") {
  SimConfig config;
  config.case_id = 1;
  config.n = 150;
  config.p = 300;
  config.k_true = 2;
  std::mt19937_64 rng(17);
  const CovariateDraw draw = generate_covariates(config, rng);

  CHECK(estimate_num_factors(draw.x1, 15) == 2);
  const FactorDecomposition fd = fit_factors(draw.x1, 2);
  CHECK(min_canonical_correlation(fd.factors, *draw.factors1) >= 0.95);
}
