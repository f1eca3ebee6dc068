#include "fads/penalized_cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fads {

namespace {

double weighted_l1(const Eigen::VectorXd& theta, const Eigen::VectorXd& w) {
  return w.cwiseProduct(theta.cwiseAbs()).sum();
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

/**
 * Max KKT stationarity violation of l + lambda * sum w_j |theta_j| at theta:
 * active or unpenalized coordinates need grad_j + lambda w_j sign(theta_j) = 0,
 * inactive penalized ones need |grad_j| <= lambda w_j.
 */
double kkt_residual(const Eigen::VectorXd& grad, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& w, double lambda) {
  double worst = 0.0;
  for (int j = 0; j < theta.size(); ++j) {
    double v;
    if (theta[j] == 0.0 && w[j] > 0.0)
      v = std::max(0.0, std::abs(grad[j]) - lambda * w[j]);
    else
      v = std::abs(grad[j] + lambda * w[j] * (theta[j] > 0.0 ? 1.0 : (theta[j] < 0.0 ? -1.0 : 0.0)));
    worst = std::max(worst, v);
  }
  return worst;
}

/**
 * Per-observation gradient and curvature of the loss in linear-predictor
 * space. With A_i = sum_{t_k <= Y_i} d_k / S0_k and B_i the same sum of
 * 1/S0_k^2:
 *   dl/deta_i    = (e^{eta_i} A_i - delta_i) / n
 *   d2l/deta_i^2 = (e^{eta_i} A_i - e^{2 eta_i} B_i) / n   (diagonal term)
 */
void eta_gradient_weights(const SurvivalDataset& data, const Eigen::VectorXd& eeta,
                          Eigen::VectorXd& g_eta, Eigen::VectorXd& w_eta) {
  const int n = data.n();
  const auto& blocks = data.blocks_desc();
  const auto& order = data.order_desc();

  std::vector<double> s0_at(blocks.size(), 0.0);
  double S0 = 0.0;
  for (size_t b = 0; b < blocks.size(); ++b) {
    for (int k = blocks[b].begin; k < blocks[b].end; ++k) S0 += eeta[order[k]];
    s0_at[b] = S0;
  }

  g_eta.resize(n);
  w_eta.resize(n);
  double cumA = 0.0, cumB = 0.0;
  for (size_t rb = blocks.size(); rb-- > 0;) {  // ascending time
    const auto& blk = blocks[rb];
    const int d = blk.ev_end - blk.ev_begin;
    if (d > 0) {
      cumA += d / s0_at[rb];
      cumB += d / (s0_at[rb] * s0_at[rb]);
    }
    for (int k = blk.begin; k < blk.end; ++k) {
      const int i = order[k];
      const double e = eeta[i];
      g_eta[i] = (e * cumA - (data.events()[i] ? 1.0 : 0.0)) / n;
      w_eta[i] = std::max(0.0, (e * cumA - e * e * cumB) / n);
    }
  }
}

Eigen::VectorXd compute_eta(const FeatureAssembly& features, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& offset) {
  Eigen::VectorXd eta = features.matrix * theta;
  if (offset.size() != 0 && offset.size() != eta.size())
    throw std::invalid_argument("offset: length != n");
  if (offset.size() == eta.size()) eta += offset;
  for (int i = 0; i < eta.size(); ++i)
    if (!std::isfinite(eta[i]) || std::abs(eta[i]) > 500.0)
      throw std::domain_error("linear predictor exceeds overflow guard (|eta| > 500)");
  return eta;
}

std::pair<SurvivalDataset, FeatureAssembly> subset_rows(const SurvivalDataset& data,
                                                        const FeatureAssembly& features,
                                                        const std::vector<int>& rows) {
  const int m = static_cast<int>(rows.size());
  Eigen::VectorXd times(m);
  std::vector<bool> events(m);
  Eigen::MatrixXd cov(m, data.p());
  Eigen::MatrixXd feat(m, features.cols());
  for (int r = 0; r < m; ++r) {
    times[r] = data.times()[rows[r]];
    events[r] = data.events()[rows[r]];
    cov.row(r) = data.covariates().row(rows[r]);
    feat.row(r) = features.matrix.row(rows[r]);
  }
  SurvivalDataset sub(std::move(times), std::move(events), std::move(cov), data.groups());
  FeatureAssembly fa;
  fa.matrix = std::move(feat);
  fa.labels = features.labels;
  return {std::move(sub), std::move(fa)};
}

}  // namespace

PenalizedFit fit_lasso_cox(const SurvivalDataset& data, const FeatureAssembly& features,
                           const Eigen::VectorXd& penalty_weights, double lambda1, double tol,
                           int max_iter, const Eigen::VectorXd& offset, const Eigen::VectorXd& init) {
  const int n = data.n();
  const int q = features.cols();
  if (penalty_weights.size() != q) throw std::invalid_argument("penalty_weights: length != q");
  for (int j = 0; j < q; ++j)
    if (!(penalty_weights[j] >= 0.0) || !std::isfinite(penalty_weights[j]))
      throw std::invalid_argument("penalty_weights must be nonnegative and finite");
  if (!(lambda1 >= 0.0)) throw std::invalid_argument("lambda1 must be nonnegative");
  if (data.num_events() == 0) throw std::invalid_argument("no events");
  if (init.size() != 0 && init.size() != q) throw std::invalid_argument("init: length != q");

  const Eigen::MatrixXd& X = features.matrix;
  Eigen::VectorXd theta = (init.size() == q) ? init : Eigen::VectorXd::Zero(q);

  auto objective_at = [&](const Eigen::VectorXd& th) {
    return neg_log_partial_likelihood(data, features, th, offset) +
           lambda1 * weighted_l1(th, penalty_weights);
  };

  PenalizedFit fit;
  fit.lambda1 = lambda1;
  double F = objective_at(theta);

  Eigen::VectorXd g_eta(n), w_eta(n), grad(q);
  bool converged = false;
  int iterations = 0;

  for (int it = 0; it <= max_iter; ++it) {
    const Eigen::VectorXd eta = compute_eta(features, theta, offset);
    const Eigen::VectorXd eeta = eta.array().exp();
    eta_gradient_weights(data, eeta, g_eta, w_eta);
    grad.noalias() = X.transpose() * g_eta;

    if (kkt_residual(grad, theta, penalty_weights, lambda1) <= tol) {
      converged = true;
      break;
    }
    if (it == max_iter) break;

    // Coordinate descent on the diagonal quadratic model around theta.
    const Eigen::MatrixXd WX = w_eta.asDiagonal() * X;
    Eigen::VectorXd a(q);
    for (int j = 0; j < q; ++j) a[j] = X.col(j).dot(WX.col(j));

    Eigen::VectorXd theta_c = theta;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);  // w .* X (theta_c - theta)
    auto cd_sweep = [&](const std::vector<int>& cols) {
      double max_delta = 0.0;
      for (int j : cols) {
        if (a[j] <= 1e-12) continue;  // no curvature reaches this column
        const double c_j = grad[j] + X.col(j).dot(v);
        const double t = soft_threshold(a[j] * theta_c[j] - c_j, lambda1 * penalty_weights[j]) / a[j];
        const double delta = t - theta_c[j];
        if (delta != 0.0) {
          v.noalias() += delta * WX.col(j);
          theta_c[j] = t;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      return max_delta;
    };

    // Active-set strategy: a full sweep seeds the working set, sweeps over
    // the working set run until stable, and the next full sweep both
    // certifies optimality over the complement and reseeds the set.
    std::vector<int> all_cols(q);
    std::iota(all_cols.begin(), all_cols.end(), 0);
    const double cd_tol = 1e-10;
    int sweeps_left = 200;
    while (sweeps_left > 0) {
      --sweeps_left;
      if (cd_sweep(all_cols) < cd_tol) break;
      std::vector<int> active;
      for (int j = 0; j < q; ++j)
        if (theta_c[j] != 0.0) active.push_back(j);
      while (sweeps_left > 0) {
        --sweeps_left;
        if (cd_sweep(active) < cd_tol) break;
      }
    }

    const Eigen::VectorXd d = theta_c - theta;
    if (d.lpNorm<Eigen::Infinity>() < 1e-15) break;  // model says stay; stop with best iterate

    const double decrement = grad.dot(d) + lambda1 * (weighted_l1(theta_c, penalty_weights) -
                                                      weighted_l1(theta, penalty_weights));
    double s = 1.0;
    bool accepted = false;
    while (s >= 1e-12) {
      const Eigen::VectorXd cand = theta + s * d;
      const double Fc = objective_at(cand);
      if (Fc <= F + 0.25 * s * std::min(decrement, 0.0)) {
        theta = cand;
        F = Fc;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;

    ++iterations;
    fit.objective_history.push_back(F);
  }

  fit.coefs = theta;
  fit.objective = objective_at(theta);
  {
    const Eigen::VectorXd eta = compute_eta(features, theta, offset);
    const Eigen::VectorXd eeta = eta.array().exp();
    eta_gradient_weights(data, eeta, g_eta, w_eta);
    grad.noalias() = X.transpose() * g_eta;
    fit.kkt_residual = kkt_residual(grad, theta, penalty_weights, lambda1);
  }
  fit.converged = converged && fit.kkt_residual <= tol;
  fit.iterations = iterations;

  std::vector<double> beta, gamma;
  for (int j = 0; j < q; ++j) {
    if (features.labels[j] == FeatureAssembly::Kind::covariate)
      beta.push_back(theta[j]);
    else
      gamma.push_back(theta[j]);
  }
  fit.beta_minus_m =
      Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  fit.gamma_m = Eigen::Map<Eigen::VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
  return fit;
}

double lasso_lambda_max(const SurvivalDataset& data, const FeatureAssembly& features,
                        const Eigen::VectorXd& penalty_weights, double tol,
                        const Eigen::VectorXd& offset) {
  const int q = features.cols();
  if (penalty_weights.size() != q) throw std::invalid_argument("penalty_weights: length != q");
  std::vector<int> unpenalized;
  bool any_penalized = false;
  for (int j = 0; j < q; ++j) {
    if (penalty_weights[j] == 0.0)
      unpenalized.push_back(j);
    else
      any_penalized = true;
  }
  if (!any_penalized) throw std::invalid_argument("lambda_max needs at least one penalized coordinate");

  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(q);
  if (!unpenalized.empty()) {
    FeatureAssembly sub;
    sub.matrix = features.matrix(Eigen::all, unpenalized);
    for (int j : unpenalized) sub.labels.push_back(features.labels[j]);
    const PenalizedFit prof = fit_lasso_cox(data, sub, Eigen::VectorXd::Zero(unpenalized.size()), 0.0,
                                            tol, 200, offset);
    for (size_t k = 0; k < unpenalized.size(); ++k) theta0[unpenalized[k]] = prof.coefs[k];
  }

  const Eigen::VectorXd grad = score(data, features, theta0, offset);
  double lmax = 0.0;
  for (int j = 0; j < q; ++j)
    if (penalty_weights[j] > 0.0) lmax = std::max(lmax, std::abs(grad[j]) / penalty_weights[j]);
  return lmax;
}

CvReport cross_validate_lambda1(const SurvivalDataset& data, const FeatureAssembly& features,
                                const Eigen::VectorXd& penalty_weights, int folds, int path_length,
                                std::uint64_t seed, const std::vector<int>& fold_ids) {
  const int n = data.n();
  if (folds < 2 || folds > n) throw std::invalid_argument("folds must lie in [2, n]");
  if (path_length < 1) throw std::invalid_argument("path_length must be >= 1");
  if (!fold_ids.empty()) {
    if (static_cast<int>(fold_ids.size()) != n) throw std::invalid_argument("fold_ids: length != n");
    for (int f : fold_ids)
      if (f < 0 || f >= folds) throw std::invalid_argument("fold_ids: value out of [0, folds)");
  }

  const double lmax = lasso_lambda_max(data, features, penalty_weights);
  Eigen::VectorXd path(path_length);
  if (path_length == 1) {
    path[0] = lmax;
  } else {
    for (int i = 0; i < path_length; ++i)
      path[i] = lmax * std::pow(0.05, static_cast<double>(i) / (path_length - 1));
  }

  std::vector<int> assign(n);
  if (!fold_ids.empty()) {
    assign = fold_ids;
  } else {
    // Event-stratified shuffle so every fold sees events with high probability.
    std::vector<int> ev, cs;
    for (int i = 0; i < n; ++i) (data.events()[i] ? ev : cs).push_back(i);
    std::mt19937_64 rng(seed);
    std::shuffle(ev.begin(), ev.end(), rng);
    std::shuffle(cs.begin(), cs.end(), rng);
    int pos = 0;
    for (int i : ev) assign[i] = pos++ % folds;
    for (int i : cs) assign[i] = pos++ % folds;
  }

  CvReport report;
  report.lambda_path = path;
  report.fold_deviance =
      Eigen::MatrixXd::Constant(folds, path_length, std::numeric_limits<double>::quiet_NaN());

  int used = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, held;
    for (int i = 0; i < n; ++i) (assign[i] == f ? held : train).push_back(i);
    const bool train_ev = std::any_of(train.begin(), train.end(), [&](int i) { return data.events()[i]; });
    const bool held_ev = std::any_of(held.begin(), held.end(), [&](int i) { return data.events()[i]; });
    if (train.empty() || held.empty() || !train_ev || !held_ev) {
      std::ostringstream w;
      w << "fold " << f << " skipped: " << (!train_ev ? "training" : "held-out") << " part has no events";
      report.warnings.push_back(w.str());
      continue;
    }

    auto [train_data, train_feat] = subset_rows(data, features, train);
    auto [held_data, held_feat] = subset_rows(data, features, held);
    const int n_train = static_cast<int>(train.size());

    Eigen::VectorXd warm = Eigen::VectorXd::Zero(features.cols());
    for (int i = 0; i < path_length; ++i) {
      const PenalizedFit fit = fit_lasso_cox(train_data, train_feat, penalty_weights, path[i], 1e-4,
                                             30, Eigen::VectorXd(), warm);
      warm = fit.coefs;
      report.fold_deviance(f, i) = neg_log_partial_likelihood(held_data, held_feat, fit.coefs);
      // Once the active set approaches the sample size the model is
      // saturated; deeper lambdas only interpolate, so stop descending.
      int nonzero = 0;
      for (int j = 0; j < features.cols(); ++j)
        if (penalty_weights[j] > 0.0 && fit.coefs[j] != 0.0) ++nonzero;
      if (nonzero >= static_cast<int>(0.9 * n_train)) break;
    }
    ++used;
  }
  if (used == 0) throw std::runtime_error("cross-validation failed: all folds skipped");

  // Folds stop at different depths; comparisons are only fair where every
  // contributing fold reached, so averaging and selection are restricted to
  // the common finite prefix.
  int common = path_length;
  for (int f = 0; f < folds; ++f) {
    if (!std::isfinite(report.fold_deviance(f, 0))) continue;  // skipped fold
    int depth = 0;
    while (depth < path_length && std::isfinite(report.fold_deviance(f, depth))) ++depth;
    common = std::min(common, depth);
  }

  report.fold_count = used;
  report.cv_deviance =
      Eigen::VectorXd::Constant(path_length, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < common; ++i) {
    double sum = 0.0;
    int cnt = 0;
    for (int f = 0; f < folds; ++f) {
      if (std::isfinite(report.fold_deviance(f, i))) {
        sum += report.fold_deviance(f, i);
        ++cnt;
      }
    }
    report.cv_deviance[i] = sum / cnt;
  }

  int best = 0;
  for (int i = 1; i < common; ++i)
    if (report.cv_deviance[i] < report.cv_deviance[best]) best = i;
  report.selected_lambda = path[best];
  return report;
}

double lambda1_rate(int n, int p_m, int d, double c) {
  if (n < 2 || p_m < 1 || d < 1) throw std::invalid_argument("lambda1_rate: need n >= 2, p_m >= 1, d >= 1");
  const double ln = std::log(static_cast<double>(n));
  const double lpm = std::log(static_cast<double>(p_m));
  const double ld = std::log(static_cast<double>(d));
  const double rate = std::sqrt(lpm * ln / n) + std::sqrt(ln / p_m) +
                      std::sqrt(std::log(static_cast<double>(n) * d)) * std::sqrt(ld / n);
  return c * rate;
}

}  // namespace fads
