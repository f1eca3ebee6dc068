#include "fads/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fads {

namespace {

// Shared precondition checks plus exp(eta) with the overflow guard.
struct SweepInput {
  Eigen::VectorXd eta;   // full linear predictor (features * coefs + offset)
  Eigen::VectorXd eeta;  // exp(eta)
};

SweepInput prepare(const SurvivalDataset& data, const FeatureAssembly& features,
                   const Eigen::VectorXd& coefs, const Eigen::VectorXd& offset,
                   bool require_events = true) {
  const int n = data.n();
  if (features.matrix.rows() != n) throw std::invalid_argument("features: row count != n");
  if (features.matrix.cols() < 1) throw std::invalid_argument("features: at least one column required");
  if (static_cast<int>(features.labels.size()) != features.matrix.cols())
    throw std::invalid_argument("features: one label per column required");
  if (coefs.size() != features.matrix.cols())
    throw std::invalid_argument("coefs: length != feature column count");
  if (offset.size() != 0 && offset.size() != n)
    throw std::invalid_argument("offset: length != n");
  if (require_events && data.num_events() == 0) throw std::invalid_argument("no events");

  SweepInput s;
  s.eta = features.matrix * coefs;
  if (offset.size() == n) s.eta += offset;
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(s.eta[i]) || std::abs(s.eta[i]) > 500.0)
      throw std::domain_error("linear predictor exceeds overflow guard (|eta| > 500)");
  }
  s.eeta = s.eta.array().exp();
  return s;
}

}  // namespace

SurvivalDataset::SurvivalDataset(Eigen::VectorXd times, std::vector<bool> events,
                                 Eigen::MatrixXd covariates, std::vector<GroupSpec> groups)
    : SurvivalDataset(unchecked_tag{}, std::move(times), std::move(events), std::move(covariates),
                      std::move(groups)) {
  // Tied event times break the no-ties assumption behind the partial
  // likelihood; reject with both offenders named.
  std::vector<std::pair<double, int>> ev;
  for (int i = 0; i < n(); ++i)
    if (events_[i]) ev.emplace_back(times_[i], i);
  std::sort(ev.begin(), ev.end());
  for (size_t k = 1; k < ev.size(); ++k) {
    if (ev[k].first == ev[k - 1].first) {
      std::ostringstream msg;
      msg << "tied event times: subjects " << ev[k - 1].second << " and " << ev[k].second
          << " both fail at t=" << ev[k].first
          << "; break ties first (deterministic jitter utility available)";
      throw std::invalid_argument(msg.str());
    }
  }
}

SurvivalDataset SurvivalDataset::unchecked(Eigen::VectorXd times, std::vector<bool> events,
                                           Eigen::MatrixXd covariates, std::vector<GroupSpec> groups) {
  return SurvivalDataset(unchecked_tag{}, std::move(times), std::move(events), std::move(covariates),
                         std::move(groups));
}

SurvivalDataset::SurvivalDataset(unchecked_tag, Eigen::VectorXd times, std::vector<bool> events,
                                 Eigen::MatrixXd covariates, std::vector<GroupSpec> groups)
    : times_(std::move(times)),
      events_(std::move(events)),
      covariates_(std::move(covariates)),
      groups_(std::move(groups)) {
  validate_common();
  build_sweep_index();
}

void SurvivalDataset::validate_common() const {
  const int n = static_cast<int>(times_.size());
  if (n == 0) throw std::invalid_argument("empty dataset");
  if (static_cast<int>(events_.size()) != n) throw std::invalid_argument("events: length != n");
  if (covariates_.rows() != n) throw std::invalid_argument("covariates: row count != n");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(times_[i]) || times_[i] <= 0.0)
      throw std::invalid_argument("times must be strictly positive and finite");
  }

  const int p = static_cast<int>(covariates_.cols());
  if (groups_.empty()) throw std::invalid_argument("at least one group required");
  std::vector<GroupSpec> sorted = groups_;
  std::sort(sorted.begin(), sorted.end(),
            [](const GroupSpec& a, const GroupSpec& b) { return a.begin < b.begin; });
  std::set<std::string> ids;
  int cursor = 0;
  for (const GroupSpec& g : sorted) {
    if (g.id.empty()) throw std::invalid_argument("group id must be non-empty");
    if (!ids.insert(g.id).second) throw std::invalid_argument("duplicate group id: " + g.id);
    if (g.begin != cursor || g.end <= g.begin)
      throw std::invalid_argument("groups must be disjoint, contiguous, and non-empty");
    cursor = g.end;
  }
  if (cursor != p) throw std::invalid_argument("groups must cover all covariate columns");
}

void SurvivalDataset::build_sweep_index() {
  const int n = static_cast<int>(times_.size());
  order_desc_.resize(n);
  std::iota(order_desc_.begin(), order_desc_.end(), 0);
  std::sort(order_desc_.begin(), order_desc_.end(), [&](int a, int b) {
    if (times_[a] != times_[b]) return times_[a] > times_[b];
    return a < b;
  });

  n_events_ = 0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && times_[order_desc_[j]] == times_[order_desc_[i]]) ++j;
    TimeBlock blk;
    blk.time = times_[order_desc_[i]];
    blk.begin = i;
    blk.end = j;
    blk.ev_begin = static_cast<int>(events_desc_.size());
    for (int k = i; k < j; ++k)
      if (events_[order_desc_[k]]) events_desc_.push_back(order_desc_[k]);
    blk.ev_end = static_cast<int>(events_desc_.size());
    n_events_ += blk.ev_end - blk.ev_begin;
    blocks_desc_.push_back(blk);
    i = j;
  }
}

const GroupSpec& SurvivalDataset::group(const std::string& id) const {
  for (const GroupSpec& g : groups_)
    if (g.id == id) return g;
  throw std::invalid_argument("unknown group id: " + id);
}

FeatureAssembly covariate_features(Eigen::MatrixXd m) {
  FeatureAssembly f;
  f.labels.assign(m.cols(), FeatureAssembly::Kind::covariate);
  f.matrix = std::move(m);
  return f;
}

FeatureAssembly factor_features(Eigen::MatrixXd m) {
  FeatureAssembly f;
  f.labels.assign(m.cols(), FeatureAssembly::Kind::factor);
  f.matrix = std::move(m);
  return f;
}

FeatureAssembly joint_features(const Eigen::MatrixXd& factors, const Eigen::MatrixXd& covariates) {
  if (factors.rows() != covariates.rows())
    throw std::invalid_argument("joint_features: row count mismatch");
  FeatureAssembly f;
  f.matrix.resize(factors.rows(), factors.cols() + covariates.cols());
  f.matrix << factors, covariates;
  f.labels.assign(factors.cols(), FeatureAssembly::Kind::factor);
  f.labels.insert(f.labels.end(), covariates.cols(), FeatureAssembly::Kind::covariate);
  return f;
}

RiskSetAggregates riskset_aggregates(const SurvivalDataset& data, const FeatureAssembly& features,
                                     const Eigen::VectorXd& coefs, int order,
                                     const Eigen::VectorXd& offset) {
  if (order < 0 || order > 2) throw std::invalid_argument("order must be 0, 1, or 2");
  const SweepInput s = prepare(data, features, coefs, offset);
  const Eigen::MatrixXd& X = features.matrix;
  const int n = data.n();
  const int q = features.cols();

  double S0 = 0.0;
  Eigen::VectorXd S1 = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(q, q);

  std::vector<double> t_desc, phi0_desc;
  std::vector<int> mult_desc;
  std::vector<Eigen::VectorXd> phi1_desc;
  std::vector<Eigen::MatrixXd> phi2_desc;

  for (const auto& blk : data.blocks_desc()) {
    for (int k = blk.begin; k < blk.end; ++k) {
      const int i = data.order_desc()[k];
      const double e = s.eeta[i];
      S0 += e;
      if (order >= 1) S1.noalias() += e * X.row(i).transpose();
      if (order >= 2) S2.noalias() += e * X.row(i).transpose() * X.row(i);
    }
    const int d = blk.ev_end - blk.ev_begin;
    if (d > 0) {
      t_desc.push_back(blk.time);
      mult_desc.push_back(d);
      phi0_desc.push_back(S0 / n);
      if (order >= 1) phi1_desc.push_back(S1 / n);
      if (order >= 2) phi2_desc.push_back(S2 / n);
    }
  }

  const int m = static_cast<int>(t_desc.size());
  RiskSetAggregates agg;
  agg.event_times.resize(m);
  agg.multiplicity.resize(m);
  agg.phi0.resize(m);
  if (order >= 1) agg.phi1.resize(m, q);
  for (int kDesc = 0; kDesc < m; ++kDesc) {
    const int kAsc = m - 1 - kDesc;
    agg.event_times[kAsc] = t_desc[kDesc];
    agg.multiplicity[kAsc] = mult_desc[kDesc];
    agg.phi0[kAsc] = phi0_desc[kDesc];
    if (order >= 1) agg.phi1.row(kAsc) = phi1_desc[kDesc].transpose();
  }
  if (order >= 2) {
    agg.phi2.resize(m);
    for (int kDesc = 0; kDesc < m; ++kDesc) agg.phi2[m - 1 - kDesc] = phi2_desc[kDesc];
  }
  return agg;
}

double neg_log_partial_likelihood(const SurvivalDataset& data, const FeatureAssembly& features,
                                  const Eigen::VectorXd& coefs, const Eigen::VectorXd& offset) {
  const SweepInput s = prepare(data, features, coefs, offset);
  const int n = data.n();

  double S0 = 0.0, log_term = 0.0, linear_term = 0.0;
  for (const auto& blk : data.blocks_desc()) {
    for (int k = blk.begin; k < blk.end; ++k) S0 += s.eeta[data.order_desc()[k]];
    const int d = blk.ev_end - blk.ev_begin;
    if (d > 0) {
      log_term += d * std::log(S0 / n);
      for (int k = blk.ev_begin; k < blk.ev_end; ++k) linear_term += s.eta[data.events_desc()[k]];
    }
  }
  return (log_term - linear_term) / n;
}

Eigen::VectorXd score(const SurvivalDataset& data, const FeatureAssembly& features,
                      const Eigen::VectorXd& coefs, const Eigen::VectorXd& offset) {
  const SweepInput s = prepare(data, features, coefs, offset);
  const Eigen::MatrixXd& X = features.matrix;
  const int n = data.n();
  const int q = features.cols();

  double S0 = 0.0;
  Eigen::VectorXd S1 = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
  for (const auto& blk : data.blocks_desc()) {
    for (int k = blk.begin; k < blk.end; ++k) {
      const int i = data.order_desc()[k];
      S0 += s.eeta[i];
      S1.noalias() += s.eeta[i] * X.row(i).transpose();
    }
    const int d = blk.ev_end - blk.ev_begin;
    if (d > 0) {
      for (int k = blk.ev_begin; k < blk.ev_end; ++k)
        g.noalias() += X.row(data.events_desc()[k]).transpose();
      g.noalias() -= (static_cast<double>(d) / S0) * S1;
    }
  }
  return -g / n;
}

Eigen::MatrixXd hessian_block(const SurvivalDataset& data, const FeatureAssembly& features,
                              const Eigen::VectorXd& coefs, const std::vector<int>& rows,
                              const std::vector<int>& cols, const Eigen::VectorXd& offset) {
  const SweepInput s = prepare(data, features, coefs, offset);
  const int n = data.n();
  const int q = features.cols();
  for (int r : rows)
    if (r < 0 || r >= q) throw std::invalid_argument("hessian_block: row index out of range");
  for (int c : cols)
    if (c < 0 || c >= q) throw std::invalid_argument("hessian_block: col index out of range");
  if (rows.empty() || cols.empty()) throw std::invalid_argument("hessian_block: empty index set");

  const Eigen::MatrixXd Xr = features.matrix(Eigen::all, rows);
  const Eigen::MatrixXd Xc = features.matrix(Eigen::all, cols);
  const int nr = static_cast<int>(rows.size());
  const int nc = static_cast<int>(cols.size());

  double S0 = 0.0;
  Eigen::VectorXd S1r = Eigen::VectorXd::Zero(nr);
  Eigen::VectorXd S1c = Eigen::VectorXd::Zero(nc);
  Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(nr, nc);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nr, nc);
  for (const auto& blk : data.blocks_desc()) {
    for (int k = blk.begin; k < blk.end; ++k) {
      const int i = data.order_desc()[k];
      const double e = s.eeta[i];
      S0 += e;
      S1r.noalias() += e * Xr.row(i).transpose();
      S1c.noalias() += e * Xc.row(i).transpose();
      S2.noalias() += e * Xr.row(i).transpose() * Xc.row(i);
    }
    const int d = blk.ev_end - blk.ev_begin;
    if (d > 0) {
      H.noalias() += (static_cast<double>(d) / S0) * S2;
      H.noalias() -= (static_cast<double>(d) / (S0 * S0)) * S1r * S1c.transpose();
    }
  }
  return H / n;
}

Eigen::MatrixXd hessian(const SurvivalDataset& data, const FeatureAssembly& features,
                        const Eigen::VectorXd& coefs, const Eigen::VectorXd& offset) {
  std::vector<int> all(features.cols());
  std::iota(all.begin(), all.end(), 0);
  return hessian_block(data, features, coefs, all, all, offset);
}

Eigen::VectorXd hessian_matvec(const SurvivalDataset& data, const FeatureAssembly& features,
                               const Eigen::VectorXd& coefs, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& offset) {
  const SweepInput s = prepare(data, features, coefs, offset);
  const Eigen::MatrixXd& X = features.matrix;
  const int n = data.n();
  const int q = features.cols();
  if (v.size() != q) throw std::invalid_argument("hessian_matvec: v length != q");

  const Eigen::VectorXd Xv = X * v;
  double S0 = 0.0;
  Eigen::VectorXd S1 = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd S2v = Eigen::VectorXd::Zero(q);  // running sum of e_i x_i (x_i^T v)
  double S1v = 0.0;                                // running sum of e_i (x_i^T v)
  Eigen::VectorXd out = Eigen::VectorXd::Zero(q);
  for (const auto& blk : data.blocks_desc()) {
    for (int k = blk.begin; k < blk.end; ++k) {
      const int i = data.order_desc()[k];
      const double e = s.eeta[i];
      S0 += e;
      S1.noalias() += e * X.row(i).transpose();
      S2v.noalias() += (e * Xv[i]) * X.row(i).transpose();
      S1v += e * Xv[i];
    }
    const int d = blk.ev_end - blk.ev_begin;
    if (d > 0) {
      out.noalias() += (static_cast<double>(d) / S0) * S2v;
      out.noalias() -= (static_cast<double>(d) * S1v / (S0 * S0)) * S1;
    }
  }
  return out / n;
}

Eigen::VectorXd break_event_time_ties(const Eigen::VectorXd& times, const std::vector<bool>& events) {
  if (static_cast<int>(events.size()) != times.size())
    throw std::invalid_argument("break_event_time_ties: length mismatch");
  std::vector<std::pair<double, int>> ev;
  for (int i = 0; i < times.size(); ++i)
    if (events[i]) ev.emplace_back(times[i], i);
  std::sort(ev.begin(), ev.end());

  Eigen::VectorXd out = times;
  size_t i = 0;
  while (i < ev.size()) {
    size_t j = i;
    while (j < ev.size() && ev[j].first == ev[i].first) ++j;
    for (size_t k = i; k < j; ++k) out[ev[k].second] = ev[k].first + 1e-9 * static_cast<double>(k - i);
    i = j;
  }

  std::vector<double> check;
  for (int i2 = 0; i2 < out.size(); ++i2)
    if (events[i2]) check.push_back(out[i2]);
  std::sort(check.begin(), check.end());
  if (std::adjacent_find(check.begin(), check.end()) != check.end())
    throw std::runtime_error("break_event_time_ties: ties persist after jitter");
  return out;
}

}  // namespace fads
