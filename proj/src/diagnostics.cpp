#include "ssreg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ssreg {

namespace {

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

// Tail of the Kolmogorov distribution via the alternating series, with the
// usual finite-sample effective-size correction.
double ks_asymptotic_p(double d, double n0, double n1) {
  const double ne = n0 * n1 / (n0 + n1);
  const double lambda =
      (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

KsResult ks_two_sample_bootstrap(const VectorXd& sample0,
                                 const VectorXd& sample1, int n_boot,
                                 Rng& rng) {
  if (sample0.size() == 0 || sample1.size() == 0)
    throw DataError("KS test needs nonempty samples");
  if (n_boot < 100) throw ConfigError("KS bootstrap needs n_boot >= 100");

  const int n0 = static_cast<int>(sample0.size());
  const int n1 = static_cast<int>(sample1.size());
  std::vector<double> a(sample0.data(), sample0.data() + n0);
  std::vector<double> b(sample1.data(), sample1.data() + n1);

  KsResult res;
  res.statistic = ks_statistic(a, b);
  res.p_asymptotic = ks_asymptotic_p(res.statistic, n0, n1);

  std::vector<double> pooled;
  pooled.reserve(n0 + n1);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const int nt = n0 + n1;

  int count = 0;
  std::vector<double> s0(n0), s1(n1);
  for (int boot = 0; boot < n_boot; ++boot) {
    for (int i = 0; i < n0; ++i) s0[i] = pooled[rng.uniform_int(nt)];
    for (int i = 0; i < n1; ++i) s1[i] = pooled[rng.uniform_int(nt)];
    if (ks_statistic(s0, s1) >= res.statistic) ++count;
  }
  res.p_value = static_cast<double>(count) / n_boot;
  return res;
}

MmdResult mmd_permutation_test(const MatrixXd& x0, const MatrixXd& x1,
                               int n_perm, Rng& rng) {
  if (x0.cols() != x1.cols())
    throw ConfigError("MMD groups must share the column count");
  if (x0.rows() == 0 || x1.rows() == 0)
    throw DataError("MMD test needs nonempty groups");
  if (n_perm < 1) throw ConfigError("MMD needs n_perm >= 1");

  const int n0 = static_cast<int>(x0.rows());
  const int n1 = static_cast<int>(x1.rows());
  const int nt = n0 + n1;
  MatrixXd pooled(nt, x0.cols());
  pooled.topRows(n0) = x0;
  pooled.bottomRows(n1) = x1;

  // Gaussian kernel exp(-|u - v|^2), unit bandwidth.
  MatrixXd kernel(nt, nt);
  for (int i = 0; i < nt; ++i) {
    kernel(i, i) = 1.0;
    for (int j = i + 1; j < nt; ++j) {
      const double d2 = (pooled.row(i) - pooled.row(j)).squaredNorm();
      kernel(i, j) = kernel(j, i) = std::exp(-d2);
    }
  }

  std::vector<int> idx(nt);
  std::iota(idx.begin(), idx.end(), 0);

  auto vstat = [&](const std::vector<int>& order) {
    double s00 = 0.0, s11 = 0.0, s01 = 0.0;
    for (int i = 0; i < nt; ++i) {
      const bool gi = i < n0;
      for (int j = 0; j < nt; ++j) {
        const double k = kernel(order[i], order[j]);
        const bool gj = j < n0;
        if (gi && gj) s00 += k;
        else if (!gi && !gj) s11 += k;
        else s01 += k;
      }
    }
    return s00 / (static_cast<double>(n0) * n0) +
           s11 / (static_cast<double>(n1) * n1) -
           s01 / (static_cast<double>(n0) * n1);
  };

  MmdResult res;
  res.mmd = vstat(idx);

  int count = 0;
  for (int p = 0; p < n_perm; ++p) {
    for (int i = nt - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    if (vstat(idx) >= res.mmd) ++count;
  }
  res.p_value = static_cast<double>(count + 1) / (n_perm + 1);
  return res;
}

}  // namespace ssreg
