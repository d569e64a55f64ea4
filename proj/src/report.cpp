#include "ssreg/report.hpp"

#include <cmath>
#include <cstdio>

namespace ssreg {

namespace {

std::string fmt17(double v) {
  if (std::isnan(v)) return "na";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_level(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void ReportWriter::line(const std::string& text) {
  out_.append(2 * depth_, ' ');
  out_ += text;
  out_ += '\n';
}

void ReportWriter::open(const std::string& key) {
  line(key + ":");
  ++depth_;
}

void ReportWriter::close() {
  if (depth_ > 0) --depth_;
}

void ReportWriter::kv(const std::string& key, const std::string& value) {
  line(key + ": " + value);
}
void ReportWriter::kv(const std::string& key, const char* value) {
  kv(key, std::string(value));
}
void ReportWriter::kv(const std::string& key, double value) {
  kv(key, fmt17(value));
}
void ReportWriter::kv(const std::string& key, int value) {
  kv(key, std::to_string(value));
}
void ReportWriter::kv(const std::string& key, long value) {
  kv(key, std::to_string(value));
}
void ReportWriter::kv(const std::string& key, std::uint64_t value) {
  kv(key, std::to_string(value));
}

std::string render_estimate_report(const EstimateReport& rep) {
  ReportWriter w;
  w.kv("command", "fit");
  w.open("estimate");
  w.kv("method", rep.method);
  w.kv("estimand", rep.estimand);
  w.kv("link", rep.link);
  w.kv("n_rows", rep.n_rows);
  w.kv("n_labeled", rep.n_labeled);
  w.kv("seed", rep.seed);
  if (!std::isnan(rep.lambda_gamma)) w.kv("lambda_gamma", rep.lambda_gamma);
  if (!std::isnan(rep.lambda_alpha)) w.kv("lambda_alpha", rep.lambda_alpha);
  if (rep.ps_active_count >= 0)
    w.kv("ps_active_count", rep.ps_active_count);
  if (rep.or_active_count >= 0)
    w.kv("or_active_count", rep.or_active_count);
  w.kv("pi_floor_count", rep.pi_floor_count);
  w.kv("exp_clamp_count", rep.exp_clamp_count);
  w.kv("has_variance", rep.has_variance ? "1" : "0");
  w.open("coefficients");
  for (int j = 0; j < rep.beta.size(); ++j) {
    w.open("coef_" + std::to_string(j));
    w.kv("beta", rep.beta[j]);
    if (rep.has_variance) {
      w.kv("se", rep.se[j]);
      for (std::size_t li = 0; li < rep.levels.size(); ++li) {
        const std::string tag = "ci_" + fmt_level(rep.levels[li]);
        w.kv(tag + "_lower", rep.ci_lower(j, static_cast<int>(li)));
        w.kv(tag + "_upper", rep.ci_upper(j, static_cast<int>(li)));
      }
    }
    w.close();
  }
  w.close();
  if (rep.has_variance) {
    w.open("sigma_hat");
    for (int i = 0; i < rep.sigma.rows(); ++i)
      for (int j = 0; j < rep.sigma.cols(); ++j)
        w.kv("sigma_" + std::to_string(i) + "_" + std::to_string(j),
             rep.sigma(i, j));
    w.close();
  }
  w.close();
  return w.str();
}

std::string render_metrics_report(const MetricsReport& rep) {
  ReportWriter w;
  w.kv("command", "simulate");
  w.open("simulation");
  w.kv("case", rep.case_id);
  w.kv("n_total", rep.n_total);
  w.kv("replications", rep.replications);
  w.kv("seed", rep.seed);
  w.open("true_beta");
  for (int j = 0; j < rep.true_beta.size(); ++j)
    w.kv("beta_" + std::to_string(j), rep.true_beta[j]);
  w.close();

  w.open("metrics");
  for (const auto& mm : rep.metrics) {
    w.open(method_name(mm.method));
    w.kv("replications_used", mm.replications_used);
    w.kv("failures", mm.failures);
    if (mm.has_variance && mm.replications_used < 30)
      w.kv("cp_low_precision", "1");
    for (int j = 0; j < mm.bias.size(); ++j) {
      w.open("coef_" + std::to_string(j));
      w.kv("bias", mm.bias[j]);
      w.kv("sqrt_var", mm.sqrt_var[j]);
      if (mm.has_variance) {
        w.kv("sqrt_evar", mm.sqrt_evar[j]);
        w.kv("cp90", mm.cp90[j]);
        w.kv("cp95", mm.cp95[j]);
      }
      w.close();
    }
    w.close();
  }
  w.close();

  w.open("replications_table");
  for (std::size_t mi = 0; mi < rep.metrics.size(); ++mi) {
    w.open(method_name(rep.metrics[mi].method));
    const MatrixXd& rb = rep.raw_beta[mi];
    const MatrixXd& rs = rep.raw_se[mi];
    for (int rr = 0; rr < rb.rows(); ++rr) {
      std::string row;
      for (int j = 0; j < rb.cols(); ++j) {
        if (j) row += ',';
        row += fmt17(rb(rr, j));
      }
      if (rep.metrics[mi].has_variance)
        for (int j = 0; j < rs.cols(); ++j) {
          row += ',';
          row += fmt17(rs(rr, j));
        }
      w.kv("rep_" + std::to_string(rr), row);
    }
    w.close();
  }
  w.close();
  w.close();
  return w.str();
}

std::string render_diagnose_report(const DiagnoseReport& rep) {
  ReportWriter w;
  w.kv("command", "diagnose");
  w.open("covariate_shift");
  w.kv("n_labeled", rep.n_labeled);
  w.kv("n_unlabeled", rep.n_unlabeled);
  w.kv("ks_bootstrap_samples", rep.n_boot);
  w.kv("mmd_permutations", rep.n_perm);
  w.kv("seed", rep.seed);
  w.open("ks_tests");
  for (const auto& row : rep.rows) {
    w.open(row.name);
    w.kv("statistic", row.statistic);
    w.kv("p_bootstrap", row.p_bootstrap);
    w.kv("p_asymptotic", row.p_asymptotic);
    w.close();
  }
  w.close();
  w.open("mmd_test");
  w.kv("mmd", rep.mmd);
  w.kv("p_value", rep.mmd_p_value);
  w.close();
  w.close();
  return w.str();
}

std::string render_error_report(const std::string& kind,
                                const std::string& message) {
  ReportWriter w;
  w.open("error");
  w.kv("kind", kind);
  w.kv("message", message);
  w.close();
  return w.str();
}

}  // namespace ssreg
