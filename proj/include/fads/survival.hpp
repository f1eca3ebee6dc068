/**
 * Counting-process survival data and exact evaluation of the Cox negative log
 * partial likelihood, its gradient, and Hessian blocks over arbitrary feature
 * assemblies. All operations are pure functions over immutable inputs.
 */
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fads {

/** Contiguous column range [begin, end) of one covariate group. */
struct GroupSpec {
  std::string id;
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
};

/**
 * Immutable survival dataset: follow-up times, event indicators, and a grouped
 * covariate matrix. Construction validates:
 *   - times strictly positive and finite, one per covariate row,
 *   - events aligned with times,
 *   - groups disjoint, contiguous, covering all columns, ids unique,
 *   - no two events share a time (see unchecked() for the one exemption).
 * The evaluation order over subjects is precomputed here so that every
 * likelihood operation is a single reverse-time sweep.
 */
class SurvivalDataset {
 public:
  SurvivalDataset(Eigen::VectorXd times, std::vector<bool> events,
                  Eigen::MatrixXd covariates, std::vector<GroupSpec> groups);

  /**
   * Construction that skips only the tied-event-time check; every other
   * invariant is still enforced. Exists for controlled inputs (e.g.
   * whole-dataset duplication, where the evaluation sweep remains exact
   * because event multiplicities are counted per distinct time).
   */
  static SurvivalDataset unchecked(Eigen::VectorXd times, std::vector<bool> events,
                                   Eigen::MatrixXd covariates, std::vector<GroupSpec> groups);

  int n() const { return static_cast<int>(times_.size()); }
  int p() const { return static_cast<int>(covariates_.cols()); }
  const Eigen::VectorXd& times() const { return times_; }
  const std::vector<bool>& events() const { return events_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<GroupSpec>& groups() const { return groups_; }

  /** Group lookup by id; throws std::invalid_argument if unknown. */
  const GroupSpec& group(const std::string& id) const;

  int num_events() const { return n_events_; }
  double censoring_rate() const { return 1.0 - static_cast<double>(n_events_) / n(); }

  /** One distinct observed time, descending order; members index order_desc(). */
  struct TimeBlock {
    double time;
    int begin, end;        // member range in order_desc()
    int ev_begin, ev_end;  // event range in events_desc()
  };

  const std::vector<int>& order_desc() const { return order_desc_; }
  const std::vector<int>& events_desc() const { return events_desc_; }
  const std::vector<TimeBlock>& blocks_desc() const { return blocks_desc_; }

 private:
  struct unchecked_tag {};
  SurvivalDataset(unchecked_tag, Eigen::VectorXd times, std::vector<bool> events,
                  Eigen::MatrixXd covariates, std::vector<GroupSpec> groups);
  void validate_common() const;
  void build_sweep_index();

  Eigen::VectorXd times_;
  std::vector<bool> events_;
  Eigen::MatrixXd covariates_;
  std::vector<GroupSpec> groups_;
  std::vector<int> order_desc_;
  std::vector<int> events_desc_;
  std::vector<TimeBlock> blocks_desc_;
  int n_events_ = 0;
};

/**
 * Regressors entering the linear predictor, one column per coefficient.
 * Labels record whether a column is an estimated factor score or an observed
 * covariate; penalty construction downstream keys off this tag.
 */
struct FeatureAssembly {
  enum class Kind : char { factor, covariate };

  Eigen::MatrixXd matrix;  // n x q
  std::vector<Kind> labels;

  int cols() const { return static_cast<int>(matrix.cols()); }
};

/** Assembly of all-covariate columns. */
FeatureAssembly covariate_features(Eigen::MatrixXd m);
/** Assembly of all-factor columns. */
FeatureAssembly factor_features(Eigen::MatrixXd m);
/** Assembly [factors | covariates] with matching labels. */
FeatureAssembly joint_features(const Eigen::MatrixXd& factors, const Eigen::MatrixXd& covariates);

/**
 * Risk-set aggregates Phi_k at the distinct event times (ascending):
 *   Phi_k(t) = (1/n) sum_i 1{Y_i >= t} exp(eta_i) features_i^{(x)k}
 * with eta = features * coefs + offset. multiplicity counts events per time
 * (1 for tie-free data). phi2 is populated only when order == 2.
 */
struct RiskSetAggregates {
  Eigen::VectorXd event_times;
  Eigen::VectorXi multiplicity;
  Eigen::VectorXd phi0;
  Eigen::MatrixXd phi1;                // (#event times) x q, row t = Phi_1(t)^T
  std::vector<Eigen::MatrixXd> phi2;   // per event time, q x q
};

/**
 * Computes Phi_0..Phi_order by one reverse-time sweep. The optional offset is
 * added to the linear predictor in every term. Throws on dimension mismatch,
 * zero events, or |eta| > 500 (overflow guard; saturating silently would
 * corrupt downstream tests).
 */
RiskSetAggregates riskset_aggregates(const SurvivalDataset& data, const FeatureAssembly& features,
                                     const Eigen::VectorXd& coefs, int order,
                                     const Eigen::VectorXd& offset = Eigen::VectorXd());

/**
 * Negative log partial likelihood
 *   l = -(1/n) sum_i int eta_i dN_i + (1/n) int log Phi_0 dN_bar
 * over [0, tau], tau = max observed time; only distinct event times contribute.
 */
double neg_log_partial_likelihood(const SurvivalDataset& data, const FeatureAssembly& features,
                                  const Eigen::VectorXd& coefs,
                                  const Eigen::VectorXd& offset = Eigen::VectorXd());

/** Gradient of neg_log_partial_likelihood in the coefficients. */
Eigen::VectorXd score(const SurvivalDataset& data, const FeatureAssembly& features,
                      const Eigen::VectorXd& coefs,
                      const Eigen::VectorXd& offset = Eigen::VectorXd());

/**
 * (rows x cols) block of the Hessian
 *   (1/n) int [Phi_2/Phi_0 - (Phi_1/Phi_0)^{(x)2}] dN_bar.
 * The full matrix is symmetric PSD. Dense blocks are intended for q up to a
 * few thousand; use hessian_matvec beyond that.
 */
Eigen::MatrixXd hessian_block(const SurvivalDataset& data, const FeatureAssembly& features,
                              const Eigen::VectorXd& coefs, const std::vector<int>& rows,
                              const std::vector<int>& cols,
                              const Eigen::VectorXd& offset = Eigen::VectorXd());

/** Full q x q Hessian. */
Eigen::MatrixXd hessian(const SurvivalDataset& data, const FeatureAssembly& features,
                        const Eigen::VectorXd& coefs,
                        const Eigen::VectorXd& offset = Eigen::VectorXd());

/** Hessian-vector product in O(n q) without forming the matrix. */
Eigen::VectorXd hessian_matvec(const SurvivalDataset& data, const FeatureAssembly& features,
                               const Eigen::VectorXd& coefs, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& offset = Eigen::VectorXd());

/**
 * Tie-breaking preprocessing: adds deterministic jitter 1e-9 * rank to tied
 * event times (rank 0 within each tie run is unchanged; runs ordered by
 * subject index). Subjects censored at exactly a tied time may drop out of the
 * moved events' risk sets; callers accept that when opting in. Throws if ties
 * survive the jitter.
 */
Eigen::VectorXd break_event_time_ties(const Eigen::VectorXd& times, const std::vector<bool>& events);

}  // namespace fads
