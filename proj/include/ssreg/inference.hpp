#pragma once

#include <string>
#include <vector>

#include "ssreg/estimators.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

// Inverse standard normal CDF (Wichura's rational approximation).
double normal_quantile(double p);

// Gamma-hat of the sandwich: E~[psi1(beta^T Z) Z Z^T], with the (1 - pi)
// factor under the Unlabeled estimand. plugin_form drops that factor,
// matching the literal plug-in display rather than the population matrix.
MatrixXd gamma_hat(const MatrixXd& z, const VectorXd& beta, Link link,
                   Estimand variant, const VectorXd& pi_hat,
                   bool plugin_form = false);

// Lambda-hat = E~[tau tau^T].
MatrixXd lambda_hat(const MatrixXd& tau);

struct Sandwich {
  MatrixXd sigma;      // Gamma^{-1} Lambda Gamma^{-1}
  VectorXd se;         // sqrt(diag(sigma) / n_scale)
  VectorXd ci_lower;   // beta -+ z_{eta/2} * se
  VectorXd ci_upper;
};

Sandwich sandwich_ci(const MatrixXd& gamma, const MatrixXd& lambda,
                     const VectorXd& beta, int n_scale, double eta);

// Stratified-sampling Lambda-hat: the outcome term averages over the
// labeled block, the augmentation term over the full sample; n and N enter
// the mixing weights explicitly so algebraic-identity checks can evaluate
// both terms over one pooled sample.
MatrixXd lambda_hat_stratified(const VectorXd& y_labeled,
                               const MatrixXd& z_labeled,
                               const VectorXd& phi_labeled,
                               const MatrixXd& z_all, const VectorXd& phi_all,
                               const VectorXd& beta, Link link, int n, int N);
MatrixXd lambda_hat_stratified(const Dataset& dataset, const MatrixXd& z,
                               const ORFit& orf, const VectorXd& beta,
                               Link link);

// Constant-PS Lambda over a pooled, fully observed sample:
// E~[ (N/n)(y-phi)^2 + 2(y-phi)(phi-psi_b) + (phi-psi_b)^2 ] Z Z^T.
MatrixXd lambda_hat_constant_ps(const VectorXd& y, const VectorXd& phi,
                                const MatrixXd& z, const VectorXd& beta,
                                Link link, int n, int N);

// The two prior-work variance displays under constant PS, evaluated on a
// pooled fully observed sample; mean_form is the scalar population-mean
// formula (only for m == 1), regression_form the general one.
struct PriorVariance {
  MatrixXd mean_form;        // Var(y - phi) + (n/N) Var(phi), 1x1
  MatrixXd regression_form;  // Gamma^{-1} Var[(y - phi) Z] Gamma^{-1}
};
PriorVariance prior_method_variance(const VectorXd& y, const VectorXd& phi,
                                    const MatrixXd& z, const VectorXd& beta,
                                    Link link, int n, int N);

// Everything the CLI emits for one fit.
struct EstimateReport {
  VectorXd beta;
  MatrixXd sigma;
  VectorXd se;
  std::vector<double> levels;
  MatrixXd ci_lower;  // m x levels
  MatrixXd ci_upper;
  std::string method;
  std::string estimand;
  std::string link;
  int n_rows = 0;
  int n_labeled = 0;
  std::uint64_t seed = 0;
  double lambda_gamma = std::numeric_limits<double>::quiet_NaN();
  double lambda_alpha = std::numeric_limits<double>::quiet_NaN();
  int ps_active_count = -1;
  int or_active_count = -1;
  long pi_floor_count = 0;
  long exp_clamp_count = 0;
  bool has_variance = true;  // false for IPW reporting
};

}  // namespace ssreg
