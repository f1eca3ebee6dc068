#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fads/factor_model.hpp"
#include "fads/fads_test.hpp"
#include "fads/io.hpp"
#include "fads/simulation.hpp"
#include "fads/survival.hpp"

namespace {

using namespace fads;

struct TuningOpts {
  std::string lambda1 = "cv";    // "cv", "rate", or a number
  std::string lambda2 = "rate";  // "rate" or a number
  std::string k = "ratio";       // "ratio" or an integer
  int k_bar = 15;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: resolve from FADS_THREADS, then 1
};

bool parse_double(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && !s.empty();
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("FADS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

TestConfig make_test_config(const TuningOpts& opts) {
  TestConfig tc;
  tc.alpha = opts.alpha;
  tc.seed = opts.seed;
  tc.threads = resolve_threads(opts.threads);
  tc.k_bar = opts.k_bar;

  double v = 0.0;
  if (opts.lambda1 == "cv") {
    tc.lambda1_mode = Lambda1Mode::cross_validation;
  } else if (opts.lambda1 == "rate") {
    tc.lambda1_mode = Lambda1Mode::rate;
  } else if (parse_double(opts.lambda1, v)) {
    tc.lambda1_mode = Lambda1Mode::value;
    tc.lambda1 = v;
  } else {
    throw std::invalid_argument("--lambda1 must be 'cv', 'rate', or a number");
  }

  if (opts.lambda2 == "rate") {
    tc.lambda2_mode = Lambda2Mode::rate;
  } else if (parse_double(opts.lambda2, v)) {
    tc.lambda2_mode = Lambda2Mode::value;
    tc.lambda2 = v;
  } else {
    throw std::invalid_argument("--lambda2 must be 'rate' or a number");
  }

  if (opts.k != "ratio") {
    if (parse_double(opts.k, v) && v == static_cast<int>(v) && v >= 1)
      tc.k = static_cast<int>(v);
    else
      throw std::invalid_argument("--k must be 'ratio' or a positive integer");
  }
  return tc;
}

void add_tuning_flags(CLI::App* cmd, TuningOpts& opts) {
  cmd->add_option("--lambda1", opts.lambda1, "lasso level: a number, 'cv', or 'rate'")
      ->capture_default_str();
  cmd->add_option("--lambda2", opts.lambda2, "projection level: a number or 'rate'")
      ->capture_default_str();
  cmd->add_option("--k", opts.k, "factor count: an integer or 'ratio'")->capture_default_str();
  cmd->add_option("--k-bar", opts.k_bar, "max factors scanned by the ratio rule")
      ->capture_default_str();
  cmd->add_option("--alpha", opts.alpha, "significance level")->capture_default_str();
  cmd->add_option("--seed", opts.seed, "random seed")->capture_default_str();
  cmd->add_option("--threads", opts.threads, "worker threads (0: FADS_THREADS env, then 1)")
      ->capture_default_str();
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write file: " + out_path);
  out << content;
}

std::vector<std::string> resolve_targets(const SurvivalDataset& data, const std::string& group) {
  std::vector<std::string> targets;
  if (group == "all") {
    for (const GroupSpec& g : data.groups()) targets.push_back(g.id);
  } else {
    targets.push_back(group);
  }
  return targets;
}

void print_ingest_summary(const IngestReport& rep) {
  std::cerr << "ingested n=" << rep.n << " p=" << rep.p << " groups:";
  for (const auto& [id, size] : rep.group_sizes) std::cerr << " " << id << "(" << size << ")";
  std::cerr << " events=" << rep.events << " censoring=" << rep.censoring_rate << "\n";
}

int cmd_test(const std::string& cov, const std::string& surv, const std::string& grp,
             const std::string& group, const TuningOpts& opts, const std::string& out,
             const std::string& format) {
  IngestReport rep;
  const SurvivalDataset data = ingest(cov, surv, grp, &rep);
  print_ingest_summary(rep);

  std::vector<TestResult> results;
  bool any_degenerate = false;
  for (const std::string& id : resolve_targets(data, group)) {
    results.push_back(run_fads_test(data, id, make_test_config(opts)));
    any_degenerate = any_degenerate || results.back().degenerate;
  }
  const std::string content = (format == "tsv")
                                  ? (results.size() == 1 ? to_tsv(results[0]) : to_tsv(results))
                                  : (results.size() == 1 ? to_json(results[0]) : to_json(results));
  emit(content, out);
  return any_degenerate ? 2 : 0;
}

int cmd_factors(const std::string& cov, const std::string& surv, const std::string& grp,
                const std::string& group, const TuningOpts& opts, const std::string& out,
                const std::string& format, const std::string& dump_path) {
  IngestReport rep;
  const SurvivalDataset data = ingest(cov, surv, grp, &rep);
  print_ingest_summary(rep);

  const std::vector<std::string> targets = resolve_targets(data, group);
  if (!dump_path.empty() && targets.size() != 1)
    throw std::invalid_argument("--dump-factors needs a single --group");

  std::vector<FactorSummary> summaries;
  for (const std::string& id : targets) {
    const GroupSpec& g = data.group(id);
    const Eigen::MatrixXd x_m = data.covariates().middleCols(g.begin, g.end - g.begin);
    const int p_m = static_cast<int>(x_m.cols());

    int k_hat;
    if (opts.k == "ratio") {
      const int k_bar = std::min(opts.k_bar, std::min(data.n(), p_m) - 1);
      k_hat = estimate_num_factors(x_m, k_bar);
    } else {
      double v = 0.0;
      if (!parse_double(opts.k, v) || v != static_cast<int>(v) || v < 1)
        throw std::invalid_argument("--k must be 'ratio' or a positive integer");
      k_hat = static_cast<int>(v);
    }
    const FactorDecomposition fd = fit_factors(x_m, k_hat);

    FactorSummary s;
    s.group_id = id;
    s.k_hat = k_hat;
    const Eigen::MatrixXd centered = x_m.rowwise() - fd.column_means;
    const double total = centered.squaredNorm();
    for (int i = 0; i < fd.eigenvalues.size(); ++i) {
      s.eigenvalues.push_back(fd.eigenvalues[i]);
      if (i + 1 < fd.eigenvalues.size() && fd.eigenvalues[i + 1] > 0.0)
        s.ratios.push_back(fd.eigenvalues[i] / fd.eigenvalues[i + 1]);
    }
    for (int i = 0; i < k_hat && i < fd.eigenvalues.size(); ++i)
      s.variance_explained.push_back(total > 0.0 ? fd.eigenvalues[i] / total : 0.0);
    summaries.push_back(std::move(s));

    if (!dump_path.empty()) {
      std::ofstream df(dump_path);
      if (!df) throw std::runtime_error("cannot write file: " + dump_path);
      for (int k = 0; k < k_hat; ++k) df << (k ? "," : "") << "f" << k + 1;
      df << "\n";
      for (int i = 0; i < fd.factors.rows(); ++i) {
        for (int k = 0; k < fd.factors.cols(); ++k) df << (k ? "," : "") << fd.factors(i, k);
        df << "\n";
      }
    }
  }
  const std::string content =
      (format == "tsv") ? (summaries.size() == 1 ? to_tsv(summaries[0]) : to_tsv(summaries))
                        : (summaries.size() == 1 ? to_json(summaries[0]) : to_json(summaries));
  emit(content, out);
  return 0;
}

void apply_preset(SimConfig& sc, const std::string& preset) {
  if (preset == "full") {
    sc.n = 200;
    sc.p = 600;
    sc.replicates = 500;
  } else if (preset == "ci") {
    sc.n = 150;
    sc.p = 300;
    sc.replicates = 200;
  } else {
    throw std::invalid_argument("--preset must be 'full' or 'ci'");
  }
}

void print_sim_summary(const SimReport& report) {
  std::cerr << "      b0   rejection_rate      mc_se  completed   failures\n";
  for (size_t i = 0; i < report.b0.size(); ++i) {
    char row[128];
    std::snprintf(row, sizeof row, "%8.3f %16.4f %10.4f %10d %10d\n", report.b0[i],
                  report.rejection_rate[i], report.mc_std_error[i], report.completed[i],
                  report.failures[i]);
    std::cerr << row;
  }
  std::cerr << "observed censoring " << report.censoring_rate_observed << ", runtime "
            << report.runtime_seconds << " s\n";
  for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_simulate(SimConfig sc, const TuningOpts& opts, const std::string& out,
                 const std::string& format) {
  sc.test = make_test_config(opts);
  sc.alpha = opts.alpha;
  sc.seed = opts.seed;
  sc.threads = resolve_threads(opts.threads);
  const SimReport report = run_power_study(sc);
  print_sim_summary(report);
  emit(format == "tsv" ? to_tsv(report) : to_json(report), out);
  return report.valid ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factor-adjusted decorrelated score test for grouped survival covariates"};
  app.require_subcommand(1);

  std::string cov_path, surv_path, grp_path, group = "all", out_path, format = "json";
  std::string dump_path;
  TuningOpts opts;

  SimConfig sc;
  std::string preset = "ci", alternative = "sparse";
  std::vector<double> b0_grid;
  double b0_single = 0.0;
  int n_override = -1, p_override = -1, reps_override = -1;

  auto add_io_flags = [&](CLI::App* cmd) {
    cmd->add_option("--covariates", cov_path, "covariate CSV (header + numeric rows)")->required();
    cmd->add_option("--survival", surv_path, "survival CSV with 'time' and 'status'")->required();
    cmd->add_option("--groups", grp_path, "group map CSV with 'column_name' and 'group_id'")
        ->required();
    cmd->add_option("--group", group, "group id to test, or 'all'")->capture_default_str();
    cmd->add_option("--out", out_path, "output path (default: stdout)");
    cmd->add_option("--format", format, "output format: json or tsv")
        ->check(CLI::IsMember({"json", "tsv"}))
        ->capture_default_str();
  };
  auto add_sim_flags = [&](CLI::App* cmd) {
    cmd->add_option("--preset", preset, "scale preset: 'ci' or 'full'")->capture_default_str();
    cmd->add_option("--case", sc.case_id, "covariate design: 1, 2, or 3")->capture_default_str();
    cmd->add_option("--n", n_override, "subjects (overrides preset)");
    cmd->add_option("--p", p_override, "covariates, split into two groups (overrides preset)");
    cmd->add_option("--replicates", reps_override, "Monte Carlo replicates (overrides preset)");
    cmd->add_option("--alternative", alternative, "signal pattern: sparse or dense")
        ->check(CLI::IsMember({"sparse", "dense"}))
        ->capture_default_str();
    cmd->add_option("--k-true", sc.k_true, "true factors per group (case 1)")
        ->capture_default_str();
    cmd->add_option("--target-censoring", sc.target_censoring, "calibrated censoring fraction")
        ->capture_default_str();
    cmd->add_option("--out", out_path, "output path (default: stdout)");
    cmd->add_option("--format", format, "output format: json or tsv")
        ->check(CLI::IsMember({"json", "tsv"}))
        ->capture_default_str();
  };

  CLI::App* test = app.add_subcommand("test", "run the conditional test on a dataset");
  add_io_flags(test);
  add_tuning_flags(test, opts);

  CLI::App* factors = app.add_subcommand("factors", "summarize the factor structure of a group");
  add_io_flags(factors);
  add_tuning_flags(factors, opts);
  factors->add_option("--dump-factors", dump_path, "CSV path for the factor-score matrix");

  CLI::App* simulate = app.add_subcommand("simulate", "one Monte Carlo study at a single signal");
  add_sim_flags(simulate);
  add_tuning_flags(simulate, opts);
  simulate->add_option("--b0", b0_single, "signal strength for group 1")->capture_default_str();

  CLI::App* curve = app.add_subcommand("power-curve", "Monte Carlo study over a signal grid");
  add_sim_flags(curve);
  add_tuning_flags(curve, opts);
  curve->add_option("--b0", b0_grid, "signal grid (default: the alternative's standard grid)");

  try {
    app.parse(argc, argv);

    if (test->parsed()) return cmd_test(cov_path, surv_path, grp_path, group, opts, out_path, format);
    if (factors->parsed())
      return cmd_factors(cov_path, surv_path, grp_path, group, opts, out_path, format, dump_path);

    apply_preset(sc, preset);
    if (n_override > 0) sc.n = n_override;
    if (p_override > 0) sc.p = p_override;
    if (reps_override > 0) sc.replicates = reps_override;
    sc.alternative = (alternative == "dense") ? SimConfig::Alternative::dense
                                              : SimConfig::Alternative::sparse;
    if (simulate->parsed()) {
      sc.b0_grid = {b0_single};
    } else if (!b0_grid.empty()) {
      sc.b0_grid = b0_grid;
    } else {
      sc.b0_grid = {0.0};
      const double step = (sc.alternative == SimConfig::Alternative::sparse) ? 0.05 : 0.02;
      for (int i = 1; i <= 10; ++i) sc.b0_grid.push_back(step * i);
    }
    return cmd_simulate(sc, opts, out_path, format);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
