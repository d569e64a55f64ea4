#pragma once

#include "ssreg/rng.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

struct KsResult {
  double statistic = 0.0;     // sup-norm distance between empirical CDFs
  double p_value = 0.0;       // pooled-bootstrap tail fraction
  double p_asymptotic = 0.0;  // Kolmogorov-series approximation
};

// Two-sample Kolmogorov-Smirnov test with a pooled bootstrap null:
// resample both group sizes with replacement from the pooled sample and
// count statistics >= the observed one.
KsResult ks_two_sample_bootstrap(const VectorXd& sample0,
                                 const VectorXd& sample1, int n_boot,
                                 Rng& rng);

struct MmdResult {
  double mmd = 0.0;      // biased (V-statistic) squared MMD, kernel exp(-|u-v|^2)
  double p_value = 0.0;  // permutation (count + 1) / (n_perm + 1)
};

MmdResult mmd_permutation_test(const MatrixXd& x0, const MatrixXd& x1,
                               int n_perm, Rng& rng);

}  // namespace ssreg
