#pragma once

#include <string>
#include <vector>

#include "fads/fads_test.hpp"
#include "fads/simulation.hpp"
#include "fads/survival.hpp"

namespace fads {

struct IngestReport {
  int n = 0;
  int p = 0;
  std::vector<std::pair<std::string, int>> group_sizes;  // (group id, column count)
  int events = 0;
  double censoring_rate = 0.0;
};

/**
 * Reads the three-file CSV layout:
 *   covariates: header of column names, one row of reals per subject;
 *   survival:   columns `time` (positive real) and `status` (0/1);
 *   groups:     columns `column_name`, `group_id` covering every covariate.
 * Columns are reordered so groups are contiguous (ascending id, original
 * order within a group) and the dataset is constructed with full checks.
 */
SurvivalDataset ingest(const std::string& covariates_path, const std::string& survival_path,
                       const std::string& groups_path, IngestReport* report = nullptr);

/**
 * Writes a dataset back to the same three-file layout with enough digits
 * that ingest() reproduces it exactly. Columns are named c0..c{p-1}.
 */
void write_dataset(const SurvivalDataset& data, const std::string& covariates_path,
                   const std::string& survival_path, const std::string& groups_path);

/** Per-group factor structure summary for reporting. */
struct FactorSummary {
  std::string group_id;
  int k_hat = 0;
  std::vector<double> eigenvalues;         // leading eigenvalues of the centered Gram
  std::vector<double> ratios;              // eigenvalue ratios lambda_k / lambda_{k+1}
  std::vector<double> variance_explained;  // per retained factor, fraction of total
};

std::string to_json(const TestResult& result);
std::string to_json(const std::vector<TestResult>& results);
std::string to_json(const SimReport& report);
std::string to_json(const FactorSummary& summary);
std::string to_json(const std::vector<FactorSummary>& summaries);

std::string to_tsv(const TestResult& result);
std::string to_tsv(const std::vector<TestResult>& results);
std::string to_tsv(const SimReport& report);
std::string to_tsv(const FactorSummary& summary);
std::string to_tsv(const std::vector<FactorSummary>& summaries);

}  // namespace fads
