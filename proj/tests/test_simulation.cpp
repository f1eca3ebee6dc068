#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fads/simulation.hpp"
#include "fads/special_functions.hpp"

using namespace fads;

namespace {

double column_correlation(const Eigen::MatrixXd& m, int a, int b) {
  const Eigen::VectorXd x = m.col(a).array() - m.col(a).mean();
  const Eigen::VectorXd y = m.col(b).array() - m.col(b).mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

double mean_adjacent_correlation(const Eigen::MatrixXd& m) {
  double s = 0.0;
  for (int j = 0; j + 1 < m.cols(); ++j) s += column_correlation(m, j, j + 1);
  return s / (m.cols() - 1);
}

}  // namespace

TEST_CASE("true coefficient vectors") {
  SimConfig cfg;
  cfg.p = 40;  // p1 = 20

  cfg.alternative = SimConfig::Alternative::sparse;
  const Eigen::VectorXd sparse = beta1_truth(cfg, 0.3);
  REQUIRE(sparse.size() == 20);
  CHECK(sparse.head(5).isConstant(0.3));
  CHECK(sparse.tail(15).isZero());

  cfg.alternative = SimConfig::Alternative::dense;
  const Eigen::VectorXd dense = beta1_truth(cfg, 0.2);
  CHECK(dense.isConstant(0.2));

  CHECK(beta1_truth(cfg, 0.0).isZero());

  cfg.beta2_signal = 1.5;
  const Eigen::VectorXd b2 = beta2_truth(cfg);
  REQUIRE(b2.size() == 20);
  CHECK(b2[0] == 1.5);
  CHECK(b2[1] == 1.5);
  CHECK(b2.tail(18).isZero());
}

TEST_CASE("plain design has the stationary autoregressive covariance") {
  SimConfig cfg;
  cfg.case_id = 2;
  cfg.n = 50000;
  cfg.p = 8;
  std::mt19937_64 rng(3);
  const CovariateDraw draw = generate_covariates(cfg, rng);

  REQUIRE(draw.x1.rows() == cfg.n);
  REQUIRE(draw.x1.cols() == 4);
  CHECK_FALSE(draw.factors1.has_value());

  for (const Eigen::MatrixXd* m : {&draw.x1, &draw.x2}) {
    for (int j = 0; j < 4; ++j) {
      const double var = (m->col(j).array() - m->col(j).mean()).square().mean();
      CHECK(var == doctest::Approx(1.0).epsilon(0.03));
    }
    CHECK(mean_adjacent_correlation(*m) == doctest::Approx(0.5).epsilon(0.03));
    CHECK(column_correlation(*m, 0, 2) == doctest::Approx(0.25).epsilon(0.12));
  }
}

TEST_CASE("factor design decomposes into signal plus autoregressive noise") {
  SimConfig cfg;
  cfg.case_id = 1;
  cfg.n = 20000;
  cfg.p = 12;  // p1 = 6
  cfg.k_true = 2;

  std::mt19937_64 lrng(7);
  const CaseOneLoadings fixed = draw_loadings(cfg, lrng);
  REQUIRE(fixed.b1.rows() == 6);
  REQUIRE(fixed.b1.cols() == 2);
  CHECK(fixed.b1.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(fixed.b2.cwiseAbs().maxCoeff() <= 1.0);

  std::mt19937_64 rng(8);
  const CovariateDraw draw = generate_covariates(cfg, rng, &fixed);
  REQUIRE(draw.factors1.has_value());
  REQUIRE(draw.loadings1.has_value());
  CHECK(*draw.loadings1 == fixed.b1);
  CHECK(*draw.loadings2 == fixed.b2);

  // Subtracting the exact factor part leaves the autoregressive rows.
  for (int side = 0; side < 2; ++side) {
    const Eigen::MatrixXd& x = side == 0 ? draw.x1 : draw.x2;
    const Eigen::MatrixXd& f = side == 0 ? *draw.factors1 : *draw.factors2;
    const Eigen::MatrixXd& b = side == 0 ? fixed.b1 : fixed.b2;
    const Eigen::MatrixXd residual = x - f * b.transpose();
    CHECK(mean_adjacent_correlation(residual) == doctest::Approx(0.5).epsilon(0.04));
    for (int j = 0; j < residual.cols(); ++j) {
      const double var = (residual.col(j).array() - residual.col(j).mean()).square().mean();
      CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    }
    // Column variance matches the factor-model prediction ||b_j||^2 + 1.
    for (int j = 0; j < x.cols(); ++j) {
      const double var = (x.col(j).array() - x.col(j).mean()).square().mean();
      CHECK(var == doctest::Approx(b.row(j).squaredNorm() + 1.0).epsilon(0.08));
    }
  }

  // Same seed and same loadings reproduce the draw bit for bit; fresh
  // loadings (rng-consuming) do not.
  std::mt19937_64 rng2(8);
  const CovariateDraw again = generate_covariates(cfg, rng2, &fixed);
  CHECK(again.x1 == draw.x1);
  CHECK(again.x2 == draw.x2);
  std::mt19937_64 rng3(8);
  const CovariateDraw fresh = generate_covariates(cfg, rng3);
  CHECK(fresh.x1 != draw.x1);

  CaseOneLoadings wrong;
  wrong.b1 = Eigen::MatrixXd::Zero(5, 2);
  wrong.b2 = Eigen::MatrixXd::Zero(6, 2);
  std::mt19937_64 rng4(9);
  CHECK_THROWS_AS(generate_covariates(cfg, rng4, &wrong), std::invalid_argument);
}

TEST_CASE("coupled design adds the shared block exactly") {
  // Cases 2 and 3 consume the generator identically (two n x p/2
  // autoregressive blocks), so the coupling can be isolated exactly by
  // replaying the same seed through the plain design.
  SimConfig cfg3;
  cfg3.case_id = 3;
  cfg3.n = 40;
  cfg3.p = 24;  // p1 = 12
  SimConfig cfg2 = cfg3;
  cfg2.case_id = 2;

  std::mt19937_64 ra(5), rb(5);
  const CovariateDraw plain = generate_covariates(cfg2, ra);
  const CovariateDraw coupled = generate_covariates(cfg3, rb);

  CHECK(coupled.x2 == plain.x1);  // drawn first in both cases

  const Eigen::VectorXd shared = 0.5 * coupled.x2.rightCols(10).rowwise().sum();
  for (int j = 0; j < 12; ++j) {
    const Eigen::VectorXd expect =
        (j < 5 || j >= 7) ? (plain.x2.col(j) + shared).eval() : plain.x2.col(j).eval();
    CHECK((coupled.x1.col(j) - expect).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("design validation") {
  std::mt19937_64 rng(1);
  SimConfig cfg;

  cfg.case_id = 4;
  CHECK_THROWS_AS(generate_covariates(cfg, rng), std::invalid_argument);
  cfg.case_id = 1;

  cfg.p = 7;
  CHECK_THROWS_AS(generate_covariates(cfg, rng), std::invalid_argument);
  cfg.p = 2;
  CHECK_THROWS_AS(generate_covariates(cfg, rng), std::invalid_argument);
  cfg.p = 300;

  cfg.k_true = 0;
  CHECK_THROWS_AS(generate_covariates(cfg, rng), std::invalid_argument);
  cfg.k_true = 2;

  cfg.case_id = 3;
  cfg.p = 16;  // p1 = 8 < 10: coupling block does not fit
  CHECK_THROWS_AS(generate_covariates(cfg, rng), std::invalid_argument);
}

TEST_CASE("survival draw matches the exponential model") {
  const int n = 200000;
  std::mt19937_64 rng(11);

  SUBCASE("unit rate, censoring disabled") {
    const Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    const SurvivalDraw draw =
        simulate_survival(eta, std::numeric_limits<double>::infinity(), rng);
    for (int i = 0; i < n; ++i) {
      REQUIRE(draw.times[i] > 0.0);
      REQUIRE(draw.events[i]);
    }
    CHECK(draw.times.mean() == doctest::Approx(1.0).epsilon(0.015));
    const double tail =
        static_cast<double>((draw.times.array() > 1.0).count()) / n;
    CHECK(tail == doctest::Approx(std::exp(-1.0)).epsilon(0.02));
  }

  SUBCASE("linear predictor scales the hazard") {
    const Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, std::log(4.0));
    const SurvivalDraw draw =
        simulate_survival(eta, std::numeric_limits<double>::infinity(), rng);
    CHECK(draw.times.mean() == doctest::Approx(0.25).epsilon(0.02));
  }

  SUBCASE("uniform censoring at the analytic rate") {
    const Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    const SurvivalDraw draw = simulate_survival(eta, 2.0, rng);
    int censored = 0;
    for (int i = 0; i < n; ++i) {
      REQUIRE(draw.times[i] <= 2.0);
      if (!draw.events[i]) ++censored;
    }
    const double expect = (1.0 - std::exp(-2.0)) / 2.0;
    CHECK(static_cast<double>(censored) / n == doctest::Approx(expect).epsilon(0.02));
  }

  SUBCASE("event times are pairwise distinct") {
    const Eigen::VectorXd eta = Eigen::VectorXd::Zero(2000);
    const SurvivalDraw draw = simulate_survival(eta, 1.0, rng);
    std::vector<double> event_times;
    for (int i = 0; i < 2000; ++i)
      if (draw.events[i]) event_times.push_back(draw.times[i]);
    std::sort(event_times.begin(), event_times.end());
    CHECK(std::adjacent_find(event_times.begin(), event_times.end()) == event_times.end());
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(simulate_survival(Eigen::VectorXd(), 1.0, rng), std::invalid_argument);
    Eigen::VectorXd bad(3);
    bad << 0.0, std::numeric_limits<double>::quiet_NaN(), 0.0;
    CHECK_THROWS_AS(simulate_survival(bad, 1.0, rng), std::invalid_argument);
  }
}

TEST_CASE("censoring calibration solves the analytic equation under the null") {
  // With eta identically zero the censoring fraction is (1 - e^{-c}) / c,
  // so the calibrated c must match the closed-form root for the target.
  SimConfig cfg;
  cfg.case_id = 2;
  cfg.n = 100;
  cfg.p = 8;
  cfg.beta2_signal = 0.0;
  cfg.target_censoring = 0.40;

  std::mt19937_64 rng(21);
  const CensoringCalibration cal = calibrate_censoring(cfg, 0.0, rng);
  CHECK_FALSE(cal.at_bracket_bound);

  double lo = 1e-3, hi = 1e3;
  for (int it = 0; it < 500; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((1.0 - std::exp(-mid)) / mid > 0.40 ? lo : hi) = mid;
  }
  CHECK(cal.c_max == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-6));

  // More censoring demands a shorter follow-up window.
  std::mt19937_64 r1(21), r2(21);
  SimConfig heavy = cfg;
  heavy.target_censoring = 0.60;
  SimConfig light = cfg;
  light.target_censoring = 0.20;
  const double c_heavy = calibrate_censoring(heavy, 0.0, r1).c_max;
  const double c_light = calibrate_censoring(light, 0.0, r2).c_max;
  CHECK(c_heavy < cal.c_max);
  CHECK(cal.c_max < c_light);

  // Targets below what c = 1000 yields return the bracket bound.
  SimConfig rare = cfg;
  rare.target_censoring = 0.0005;
  std::mt19937_64 r3(21);
  const CensoringCalibration bound = calibrate_censoring(rare, 0.0, r3);
  CHECK(bound.at_bracket_bound);
  CHECK(bound.c_max == 1000.0);

  // Targets above what c = 0.001 yields are unreachable.
  SimConfig extreme = cfg;
  extreme.target_censoring = 0.9999;
  std::mt19937_64 r4(21);
  CHECK_THROWS_AS(calibrate_censoring(extreme, 0.0, r4), std::runtime_error);

  std::mt19937_64 r5(21);
  CHECK_THROWS_AS(calibrate_censoring(cfg, 0.0, r5, 500), std::invalid_argument);
}

TEST_CASE("power study reruns reproduce every tally") {
  SimConfig cfg;
  cfg.case_id = 2;
  cfg.n = 60;
  cfg.p = 16;
  cfg.replicates = 8;
  cfg.b0_grid = {0.0, 0.4};
  cfg.seed = 77;
  cfg.test.lambda1_mode = Lambda1Mode::rate;

  const SimReport a = run_power_study(cfg);
  const SimReport b = run_power_study(cfg);

  REQUIRE(a.b0.size() == 2);
  CHECK(a.b0 == b.b0);
  CHECK(a.rejections == b.rejections);
  CHECK(a.completed == b.completed);
  CHECK(a.failures == b.failures);
  CHECK(a.c_max == b.c_max);
  CHECK(a.rejection_rate == b.rejection_rate);
  CHECK(a.censoring_rate_observed == b.censoring_rate_observed);
  CHECK(a.valid == b.valid);

  for (size_t g = 0; g < 2; ++g) {
    CHECK(a.completed[g] + a.failures[g] == cfg.replicates);
    if (a.completed[g] > 0) {
      CHECK(a.rejection_rate[g] >= 0.0);
      CHECK(a.rejection_rate[g] <= 1.0);
      const double se =
          std::sqrt(a.rejection_rate[g] * (1.0 - a.rejection_rate[g]) / a.completed[g]);
      CHECK(a.mc_std_error[g] == doctest::Approx(se).epsilon(1e-12));
    }
  }
  CHECK(a.censoring_rate_observed == doctest::Approx(0.40).epsilon(0.25));
  CHECK(a.runtime_seconds > 0.0);

  // Thread count must not change any tally, only the wall time.
  SimConfig threaded = cfg;
  threaded.threads = 4;
  const SimReport c = run_power_study(threaded);
  CHECK(a.rejections == c.rejections);
  CHECK(a.failures == c.failures);

  SimConfig bad = cfg;
  bad.b0_grid = {};
  CHECK_THROWS_AS(run_power_study(bad), std::invalid_argument);
  bad.b0_grid = {0.4, 0.0};
  CHECK_THROWS_AS(run_power_study(bad), std::invalid_argument);
  bad.b0_grid = {-0.1};
  CHECK_THROWS_AS(run_power_study(bad), std::invalid_argument);
  bad.b0_grid = {0.0};
  bad.replicates = 0;
  CHECK_THROWS_AS(run_power_study(bad), std::invalid_argument);
  bad.replicates = 8;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(run_power_study(bad), std::invalid_argument);
}

TEST_CASE("analytic local power") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 2.0, 0.3, 0.3, 1.0;

  SUBCASE("no signal gives exactly the level") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    CHECK(theoretical_power(zero, sigma, 200, 0.05) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(theoretical_power(zero, sigma, 200, 0.10) == doctest::Approx(0.10).epsilon(1e-12));
  }

  SUBCASE("matches direct simulation of the limit distribution") {
    Eigen::VectorXd c(2);
    c << 0.1, -0.05;
    const int n = 500;
    const double h = n * c.dot(sigma * c);
    const double predicted = theoretical_power(c, sigma, n, 0.05);

    // The limit statistic is ||Z + mu||^2 with ||mu||^2 = h; its law depends
    // on mu only through the norm.
    const double critical = chi_square_upper_quantile(2, 0.05);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int reps = 200000;
    int above = 0;
    for (int r = 0; r < reps; ++r) {
      const double z1 = gauss(rng) + std::sqrt(h);
      const double z2 = gauss(rng);
      if (z1 * z1 + z2 * z2 > critical) ++above;
    }
    const double mc = static_cast<double>(above) / reps;
    const double se = std::sqrt(mc * (1.0 - mc) / reps);
    CHECK(std::abs(predicted - mc) < 4.0 * se + 1e-12);
  }

  SUBCASE("monotone in the signal and the sample size") {
    Eigen::VectorXd c(2);
    c << 0.1, -0.05;
    const double p1 = theoretical_power(c, sigma, 100, 0.05);
    const double p2 = theoretical_power(c, sigma, 400, 0.05);
    const double p3 = theoretical_power((2.0 * c).eval(), sigma, 400, 0.05);
    CHECK(0.05 < p1);
    CHECK(p1 < p2);
    CHECK(p2 < p3);
    CHECK(p3 < 1.0);
  }

  SUBCASE("input validation") {
    const Eigen::VectorXd c2 = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(theoretical_power(Eigen::VectorXd::Zero(3), sigma, 100, 0.05),
                    std::invalid_argument);
    CHECK_THROWS_AS(theoretical_power(c2, sigma, 0, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(theoretical_power(c2, sigma, 100, 1.0), std::invalid_argument);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS(theoretical_power(c2, asym, 100, 0.05), std::invalid_argument);
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(theoretical_power(c2, indef, 100, 0.05), std::invalid_argument);
  }
}
