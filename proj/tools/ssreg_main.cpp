#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ssreg/csv.hpp"
#include "ssreg/diagnostics.hpp"
#include "ssreg/pipeline.hpp"
#include "ssreg/report.hpp"

namespace {

using namespace ssreg;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw DataError("cannot write report to " + out_path);
  f << text;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::stoi(cur));
  return out;
}

struct FitArgs {
  std::string data_path;
  std::string out_path;
  std::string method = "aipw-rcal";
  std::string estimand = "population";
  std::string link = "identity";
  std::string z_cols;
  int folds = 5;
  std::uint64_t seed = 0;
  int knots = 4;
  double basis_range = 0.0;  // 0 = per-covariate data range
  std::vector<double> levels = {0.90, 0.95};
  bool no_or_interactions = false;
  bool gamma_plugin = false;
};

int cmd_fit(const FitArgs& args) {
  const CsvData csv = ingest_csv(args.data_path);

  FitOptions opt;
  opt.method = parse_method(args.method);
  opt.target.estimand = parse_estimand(args.estimand);
  opt.target.z_columns = parse_int_list(args.z_cols);
  opt.link = parse_link(args.link);
  opt.folds = args.folds;
  opt.seed = args.seed;
  opt.levels = args.levels;
  opt.or_interactions = !args.no_or_interactions;
  opt.gamma_plugin_form = args.gamma_plugin;
  opt.basis.knots_per_covariate = args.knots;
  if (args.basis_range > 0.0) {
    opt.basis.placement = KnotPlacement::FixedRange;
    opt.basis.fixed_half_range = args.basis_range;
  } else {
    opt.basis.placement = KnotPlacement::DataRange;
  }

  const EstimateReport rep = run_fit(csv.dataset, opt);
  emit(render_estimate_report(rep), args.out_path);
  return 0;
}

struct SimArgs {
  int case_id = 1;
  int n_total = 2000;
  int reps = 500;
  std::uint64_t seed = 0;
  std::vector<std::string> methods = {"aipw-rcal"};
  int folds = 5;
  int threads = 0;
  int knots = 49;
  double basis_range = 3.0;
  int oracle_n = 100000;
  bool noise_as_variance = false;
  std::string out_path;
};

int cmd_simulate(const SimArgs& args) {
  SimConfig cfg;
  cfg.case_id = args.case_id;
  cfg.n_total = args.n_total;
  cfg.replications = args.reps;
  cfg.seed = args.seed;
  cfg.methods.clear();
  for (const auto& s : args.methods) cfg.methods.push_back(parse_method(s));
  cfg.folds = args.folds;
  cfg.threads = args.threads;
  cfg.basis.knots_per_covariate = args.knots;
  cfg.basis.placement = KnotPlacement::FixedRange;
  cfg.basis.fixed_half_range = args.basis_range;
  cfg.true_beta_oracle_n = args.oracle_n;
  cfg.noise_is_variance = args.noise_as_variance;

  const MetricsReport rep = run_replications(cfg);
  emit(render_metrics_report(rep), args.out_path);
  return 0;
}

struct DiagnoseArgs {
  std::string data_path;
  std::string out_path;
  int n_boot = 999;
  int n_perm = 999;
  std::uint64_t seed = 0;
};

int cmd_diagnose(const DiagnoseArgs& args) {
  const CsvData csv = ingest_csv(args.data_path);
  const Dataset& data = csv.dataset;
  const int d = data.covariates();
  const int n0 = data.n_labeled;
  const int n1 = data.rows() - n0;
  if (n0 == 0 || n1 == 0)
    throw EstimandError("shift diagnostics need labeled and unlabeled rows");

  DiagnoseReport rep;
  rep.n_labeled = n0;
  rep.n_unlabeled = n1;
  rep.n_boot = args.n_boot;
  rep.n_perm = args.n_perm;
  rep.seed = args.seed;

  MatrixXd lab(n0, d), unlab(n1, d);
  int li = 0, ui = 0;
  for (int i = 0; i < data.rows(); ++i) {
    if (data.r[i] == 1)
      lab.row(li++) = data.x.row(i).tail(d);
    else
      unlab.row(ui++) = data.x.row(i).tail(d);
  }

  for (int j = 0; j < d; ++j) {
    Rng rng(args.seed, static_cast<std::uint64_t>(j) + 1);
    const KsResult ks =
        ks_two_sample_bootstrap(lab.col(j), unlab.col(j), args.n_boot, rng);
    rep.rows.push_back(
        {csv.covariate_names[j], ks.statistic, ks.p_value, ks.p_asymptotic});
  }

  Rng rng(args.seed, 0);
  const MmdResult mmd = mmd_permutation_test(lab, unlab, args.n_perm, rng);
  rep.mmd = mmd.mmd;
  rep.mmd_p_value = mmd.p_value;

  emit(render_diagnose_report(rep), args.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised regression with calibrated AIPW estimation"};
  app.require_subcommand(1);
  app.set_config("--config");
  app.allow_config_extras(false);

  FitArgs fit;
  CLI::App* cfit = app.add_subcommand(
      "fit", "Fit one estimate with confidence intervals from a CSV file");
  cfit->add_option("--data", fit.data_path, "input CSV (r,y,covariates...)")
      ->required();
  cfit->add_option("--out", fit.out_path, "report path (default stdout)");
  cfit->add_option("--method", fit.method,
                   "aipw-rcal|aipw-rml|aipw-cf|ipw");
  cfit->add_option("--estimand", fit.estimand,
                   "population|unlabeled|stratified");
  cfit->add_option("--z-cols", fit.z_cols,
                   "comma list of covariate column indices forming Z");
  cfit->add_option("--link", fit.link, "identity|logit");
  cfit->add_option("--folds", fit.folds, "cross-validation folds");
  cfit->add_option("--seed", fit.seed, "seed for fold assignment");
  cfit->add_option("--knots", fit.knots, "hinge knots per covariate");
  cfit->add_option("--basis-range", fit.basis_range,
                   "fixed half-range a for knots in (-a,a); 0 = data range");
  cfit->add_option("--level", fit.levels, "confidence levels")
      ->delimiter(',');
  cfit->add_flag("--no-or-interactions", fit.no_or_interactions,
                 "drop the Z-by-basis interaction block from G");
  cfit->add_flag("--gamma-plugin", fit.gamma_plugin,
                 "unlabeled estimand: plug-in Gamma-hat without the 1-pi factor");

  SimArgs sim;
  CLI::App* csim = app.add_subcommand(
      "simulate", "Monte Carlo study over the built-in cases 1..5");
  csim->add_option("--case", sim.case_id, "data-generating case 1..5");
  csim->add_option("--n", sim.n_total, "sample size per replication");
  csim->add_option("--reps", sim.reps, "number of replications");
  csim->add_option("--seed", sim.seed, "replication seed")->required();
  csim->add_option("--method", sim.methods, "methods to compare")
      ->delimiter(',');
  csim->add_option("--folds", sim.folds, "cross-validation folds");
  csim->add_option("--threads", sim.threads,
                   "worker threads (0 = hardware)");
  csim->add_option("--knots", sim.knots, "hinge knots per covariate");
  csim->add_option("--basis-range", sim.basis_range,
                   "half-range a of the fixed knot grid");
  csim->add_option("--oracle-n", sim.oracle_n,
                   "sample size of the true-value oracle");
  csim->add_flag("--noise-variance", sim.noise_as_variance,
                 "read the 0.1 noise parameter as variance instead of sd");
  csim->add_option("--out", sim.out_path, "report path (default stdout)");

  DiagnoseArgs diag;
  CLI::App* cdiag = app.add_subcommand(
      "diagnose", "Covariate-shift tests between labeled and unlabeled rows");
  cdiag->add_option("--data", diag.data_path, "input CSV")->required();
  cdiag->add_option("--out", diag.out_path, "report path (default stdout)");
  cdiag->add_option("--boot", diag.n_boot, "KS bootstrap resamples");
  cdiag->add_option("--perms", diag.n_perm, "MMD permutations");
  cdiag->add_option("--seed", diag.seed, "resampling seed");

  CLI11_PARSE(app, argc, argv);

  std::string out_path;
  try {
    if (cfit->parsed()) return cmd_fit(fit);
    if (csim->parsed()) return cmd_simulate(sim);
    if (cdiag->parsed()) return cmd_diagnose(diag);
  } catch (const ssreg::Error& e) {
    if (cfit->parsed()) out_path = fit.out_path;
    if (csim->parsed()) out_path = sim.out_path;
    if (cdiag->parsed()) out_path = diag.out_path;
    try {
      emit(ssreg::render_error_report(e.kind(), e.what()), out_path);
    } catch (...) {
    }
    std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
