#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssreg/inference.hpp"
#include "ssreg/simulation.hpp"

namespace ssreg {

// Indentation-structured key/value text; every number is serialized with
// 17 significant digits so reports are reproducible byte for byte.
class ReportWriter {
 public:
  ReportWriter() { out_ = "ssreg_report_v1\n"; }

  void open(const std::string& key);
  void close();
  void kv(const std::string& key, const std::string& value);
  void kv(const std::string& key, const char* value);
  void kv(const std::string& key, double value);  // NaN prints as na
  void kv(const std::string& key, int value);
  void kv(const std::string& key, long value);
  void kv(const std::string& key, std::uint64_t value);

  const std::string& str() const { return out_; }

 private:
  void line(const std::string& text);
  std::string out_;
  int depth_ = 0;
};

std::string render_estimate_report(const EstimateReport& rep);
std::string render_metrics_report(const MetricsReport& rep);

struct DiagnoseRow {
  std::string name;
  double statistic = 0.0;
  double p_bootstrap = 0.0;
  double p_asymptotic = 0.0;
};

struct DiagnoseReport {
  int n_labeled = 0;
  int n_unlabeled = 0;
  int n_boot = 0;
  int n_perm = 0;
  std::uint64_t seed = 0;
  std::vector<DiagnoseRow> rows;
  double mmd = 0.0;
  double mmd_p_value = 0.0;
};

std::string render_diagnose_report(const DiagnoseReport& rep);
std::string render_error_report(const std::string& kind,
                                const std::string& message);

}  // namespace ssreg
