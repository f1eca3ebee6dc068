#include "fads/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fads {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> read_csv_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw std::runtime_error("empty file: " + path);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_real(const std::string& cell, const std::string& context) {
  if (cell.empty()) throw std::runtime_error(context + ": empty cell");
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size())
    throw std::runtime_error(context + ": non-numeric cell '" + cell + "'");
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json result_json(const TestResult& r) {
  json j;
  j["group"] = r.group_id;
  j["k_hat"] = r.k_hat;
  j["df"] = r.df;
  j["statistic"] = r.statistic ? json(*r.statistic) : json(nullptr);
  j["p_value"] = r.p_value ? json(*r.p_value) : json(nullptr);
  j["degenerate"] = r.degenerate;
  j["lambda1"] = r.diagnostics.lambda1;
  j["lambda2"] = r.diagnostics.lambda2;
  j["score"] = vector_json(r.score);
  j["t_n"] = r.t_n ? vector_json(*r.t_n) : json(nullptr);
  json rej = json::object();
  for (const auto& [alpha, decision] : r.reject_at) {
    char key[24];
    std::snprintf(key, sizeof key, "%.6g", alpha);
    rej[key] = decision;
  }
  j["reject_at"] = rej;
  j["diagnostics"] = {
      {"kkt_residual", r.diagnostics.kkt_residual},
      {"lasso_converged", r.diagnostics.lasso_converged},
      {"lasso_iterations", r.diagnostics.lasso_iterations},
      {"nonzero_beta", r.diagnostics.nonzero_beta},
      {"dantzig_feasibility", vector_json(r.diagnostics.dantzig_feasibility)},
      {"dantzig_l1", vector_json(r.diagnostics.dantzig_l1)},
      {"sigma_min_eig", r.diagnostics.sigma_min_eig},
      {"censoring_rate", r.diagnostics.censoring_rate},
      {"notes", r.diagnostics.notes},
  };
  return j;
}

json summary_json(const FactorSummary& s) {
  return json{{"group", s.group_id},
              {"k_hat", s.k_hat},
              {"eigenvalues", s.eigenvalues},
              {"ratios", s.ratios},
              {"variance_explained", s.variance_explained}};
}

json config_json(const SimConfig& c) {
  return json{{"case", c.case_id},
              {"n", c.n},
              {"p", c.p},
              {"k_true", c.k_true},
              {"beta2_signal", c.beta2_signal},
              {"alternative", c.alternative == SimConfig::Alternative::sparse ? "sparse" : "dense"},
              {"b0_grid", c.b0_grid},
              {"target_censoring", c.target_censoring},
              {"replicates", c.replicates},
              {"alpha", c.alpha},
              {"seed", c.seed},
              {"threads", c.threads}};
}

std::string result_tsv_row(const TestResult& r) {
  std::ostringstream out;
  out << r.group_id << '\t' << r.k_hat << '\t' << (r.statistic ? fmt(*r.statistic) : "NA") << '\t'
      << r.df << '\t' << (r.p_value ? fmt(*r.p_value) : "NA") << '\t'
      << fmt(r.diagnostics.lambda1) << '\t' << fmt(r.diagnostics.lambda2) << '\t'
      << (r.degenerate ? 1 : 0) << '\n';
  return out.str();
}

constexpr const char* kResultTsvHeader = "group\tk_hat\tstatistic\tdf\tp_value\tlambda1\tlambda2\tdegenerate\n";

std::string summary_tsv_rows(const FactorSummary& s) {
  std::ostringstream out;
  for (size_t i = 0; i < s.eigenvalues.size(); ++i) {
    out << s.group_id << '\t' << i + 1 << '\t' << fmt(s.eigenvalues[i]) << '\t'
        << (i < s.ratios.size() ? fmt(s.ratios[i]) : "NA") << '\t'
        << (i < s.variance_explained.size() ? fmt(s.variance_explained[i]) : "NA") << '\t'
        << s.k_hat << '\n';
  }
  return out.str();
}

constexpr const char* kSummaryTsvHeader =
    "group\tcomponent\teigenvalue\tratio\tvariance_explained\tk_hat\n";

}  // namespace

SurvivalDataset ingest(const std::string& covariates_path, const std::string& survival_path,
                       const std::string& groups_path, IngestReport* report) {
  // Covariates: header of names, then one row of reals per subject.
  const std::vector<std::string> cov_lines = read_csv_lines(covariates_path);
  const std::vector<std::string> names = split_csv(cov_lines[0]);
  const int p = static_cast<int>(names.size());
  const int n = static_cast<int>(cov_lines.size()) - 1;
  if (p < 1) throw std::runtime_error(covariates_path + ": no covariate columns");
  if (n < 1) throw std::runtime_error(covariates_path + ": no data rows");
  {
    std::set<std::string> unique(names.begin(), names.end());
    if (static_cast<int>(unique.size()) != p)
      throw std::runtime_error(covariates_path + ": duplicate column names");
  }
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    const std::vector<std::string> cells = split_csv(cov_lines[i + 1]);
    if (static_cast<int>(cells.size()) != p) {
      std::ostringstream msg;
      msg << covariates_path << " row " << i + 2 << ": expected " << p << " cells, found "
          << cells.size();
      throw std::runtime_error(msg.str());
    }
    for (int j = 0; j < p; ++j) {
      std::ostringstream ctx;
      ctx << covariates_path << " row " << i + 2 << ", column '" << names[j] << "'";
      x(i, j) = parse_real(cells[j], ctx.str());
    }
  }

  // Survival: locate `time` and `status` by header name.
  const std::vector<std::string> surv_lines = read_csv_lines(survival_path);
  const std::vector<std::string> surv_header = split_csv(surv_lines[0]);
  int time_col = -1, status_col = -1;
  for (size_t j = 0; j < surv_header.size(); ++j) {
    if (surv_header[j] == "time") time_col = static_cast<int>(j);
    if (surv_header[j] == "status") status_col = static_cast<int>(j);
  }
  if (time_col < 0 || status_col < 0)
    throw std::runtime_error(survival_path + ": header must contain 'time' and 'status'");
  if (static_cast<int>(surv_lines.size()) - 1 != n) {
    std::ostringstream msg;
    msg << survival_path << ": " << surv_lines.size() - 1 << " rows but " << covariates_path
        << " has " << n;
    throw std::runtime_error(msg.str());
  }
  Eigen::VectorXd times(n);
  std::vector<bool> events(n);
  for (int i = 0; i < n; ++i) {
    const std::vector<std::string> cells = split_csv(surv_lines[i + 1]);
    if (static_cast<int>(cells.size()) <= std::max(time_col, status_col)) {
      std::ostringstream msg;
      msg << survival_path << " row " << i + 2 << ": too few cells";
      throw std::runtime_error(msg.str());
    }
    std::ostringstream ctx;
    ctx << survival_path << " row " << i + 2;
    times[i] = parse_real(cells[time_col], ctx.str() + ", column 'time'");
    const double status = parse_real(cells[status_col], ctx.str() + ", column 'status'");
    if (status != 0.0 && status != 1.0)
      throw std::runtime_error(ctx.str() + ": status must be 0 or 1");
    events[i] = (status == 1.0);
  }

  // Groups: every covariate column must be assigned exactly once.
  const std::vector<std::string> grp_lines = read_csv_lines(groups_path);
  const std::vector<std::string> grp_header = split_csv(grp_lines[0]);
  int name_col = -1, id_col = -1;
  for (size_t j = 0; j < grp_header.size(); ++j) {
    if (grp_header[j] == "column_name") name_col = static_cast<int>(j);
    if (grp_header[j] == "group_id") id_col = static_cast<int>(j);
  }
  if (name_col < 0 || id_col < 0)
    throw std::runtime_error(groups_path + ": header must contain 'column_name' and 'group_id'");
  std::map<std::string, int> column_index;
  for (int j = 0; j < p; ++j) column_index[names[j]] = j;
  std::map<std::string, std::string> assignment;  // column name -> group id
  std::vector<std::string> group_order;           // ids by first appearance
  for (size_t r = 1; r < grp_lines.size(); ++r) {
    const std::vector<std::string> cells = split_csv(grp_lines[r]);
    if (static_cast<int>(cells.size()) <= std::max(name_col, id_col)) {
      std::ostringstream msg;
      msg << groups_path << " row " << r + 1 << ": too few cells";
      throw std::runtime_error(msg.str());
    }
    const std::string& cname = cells[name_col];
    const std::string& gid = cells[id_col];
    std::ostringstream ctx;
    ctx << groups_path << " row " << r + 1;
    if (gid.empty()) throw std::runtime_error(ctx.str() + ": empty group_id");
    if (!column_index.count(cname))
      throw std::runtime_error(ctx.str() + ": unknown column '" + cname + "'");
    if (assignment.count(cname))
      throw std::runtime_error(ctx.str() + ": column '" + cname + "' assigned twice");
    assignment[cname] = gid;
    if (std::find(group_order.begin(), group_order.end(), gid) == group_order.end())
      group_order.push_back(gid);
  }
  std::vector<std::string> orphans;
  for (const std::string& nm : names)
    if (!assignment.count(nm)) orphans.push_back(nm);
  if (!orphans.empty()) {
    std::ostringstream msg;
    msg << groups_path << ": columns missing a group assignment:";
    for (const std::string& nm : orphans) msg << " '" << nm << "'";
    throw std::runtime_error(msg.str());
  }

  // Reorder columns: groups in order of first appearance in the group file,
  // original covariate order within a group.
  std::vector<int> perm;
  std::vector<GroupSpec> groups;
  perm.reserve(p);
  for (const std::string& gid : group_order) {
    const int begin = static_cast<int>(perm.size());
    for (int j = 0; j < p; ++j)
      if (assignment[names[j]] == gid) perm.push_back(j);
    groups.push_back({gid, begin, static_cast<int>(perm.size())});
  }

  SurvivalDataset data(std::move(times), std::move(events), x(Eigen::all, perm), groups);
  if (report) {
    report->n = data.n();
    report->p = data.p();
    for (const GroupSpec& g : data.groups()) report->group_sizes.emplace_back(g.id, g.end - g.begin);
    report->events = data.num_events();
    report->censoring_rate = data.censoring_rate();
  }
  return data;
}

void write_dataset(const SurvivalDataset& data, const std::string& covariates_path,
                   const std::string& survival_path, const std::string& groups_path) {
  std::ofstream cov(covariates_path);
  if (!cov) throw std::runtime_error("cannot write file: " + covariates_path);
  for (int j = 0; j < data.p(); ++j) cov << (j ? "," : "") << "c" << j;
  cov << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j) cov << (j ? "," : "") << fmt(data.covariates()(i, j));
    cov << '\n';
  }

  std::ofstream surv(survival_path);
  if (!surv) throw std::runtime_error("cannot write file: " + survival_path);
  surv << "time,status\n";
  for (int i = 0; i < data.n(); ++i)
    surv << fmt(data.times()[i]) << ',' << (data.events()[i] ? 1 : 0) << '\n';

  std::ofstream grp(groups_path);
  if (!grp) throw std::runtime_error("cannot write file: " + groups_path);
  grp << "column_name,group_id\n";
  for (const GroupSpec& g : data.groups())
    for (int j = g.begin; j < g.end; ++j) grp << 'c' << j << ',' << g.id << '\n';
}

std::string to_json(const TestResult& result) {
  json j = result_json(result);
  j["schema_version"] = kSchemaVersion;
  return j.dump(2) + "\n";
}

std::string to_json(const std::vector<TestResult>& results) {
  json arr = json::array();
  for (const TestResult& r : results) arr.push_back(result_json(r));
  return json{{"schema_version", kSchemaVersion}, {"results", arr}}.dump(2) + "\n";
}

std::string to_json(const SimReport& report) {
  json rows = json::array();
  for (size_t i = 0; i < report.b0.size(); ++i) {
    rows.push_back(json{{"b0", report.b0[i]},
                        {"rejection_rate", report.rejection_rate[i]},
                        {"mc_std_error", report.mc_std_error[i]},
                        {"rejections", report.rejections[i]},
                        {"completed", report.completed[i]},
                        {"failures", report.failures[i]},
                        {"c_max", report.c_max[i]}});
  }
  const json j{{"schema_version", kSchemaVersion},
               {"config", config_json(report.config)},
               {"results", rows},
               {"censoring_rate_observed", report.censoring_rate_observed},
               {"valid", report.valid},
               {"warnings", report.warnings},
               {"runtime_seconds", report.runtime_seconds}};
  return j.dump(2) + "\n";
}

std::string to_json(const FactorSummary& summary) {
  json j = summary_json(summary);
  j["schema_version"] = kSchemaVersion;
  return j.dump(2) + "\n";
}

std::string to_json(const std::vector<FactorSummary>& summaries) {
  json arr = json::array();
  for (const FactorSummary& s : summaries) arr.push_back(summary_json(s));
  return json{{"schema_version", kSchemaVersion}, {"results", arr}}.dump(2) + "\n";
}

std::string to_tsv(const TestResult& result) { return kResultTsvHeader + result_tsv_row(result); }

std::string to_tsv(const std::vector<TestResult>& results) {
  std::string out = kResultTsvHeader;
  for (const TestResult& r : results) out += result_tsv_row(r);
  return out;
}

std::string to_tsv(const SimReport& report) {
  std::ostringstream out;
  out << "b0\trejection_rate\tmc_se\n";
  for (size_t i = 0; i < report.b0.size(); ++i)
    out << fmt(report.b0[i]) << '\t' << fmt(report.rejection_rate[i]) << '\t'
        << fmt(report.mc_std_error[i]) << '\n';
  return out.str();
}

std::string to_tsv(const FactorSummary& summary) {
  return kSummaryTsvHeader + summary_tsv_rows(summary);
}

std::string to_tsv(const std::vector<FactorSummary>& summaries) {
  std::string out = kSummaryTsvHeader;
  for (const FactorSummary& s : summaries) out += summary_tsv_rows(s);
  return out;
}

}  // namespace fads
