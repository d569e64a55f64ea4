#pragma once

#include <cstdint>
#include <vector>

#include "ssreg/basis.hpp"
#include "ssreg/nuisance.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

enum class TauVariant { Population, Unlabeled };

// Row-wise estimating function tau(O_i, alpha, beta, gamma); column means
// are the estimating-equation residual.
struct TauEvaluation {
  MatrixXd tau;  // N x m
  TauVariant variant = TauVariant::Population;
  long pi_floor_count = 0;  // rows where pi_hat hit the 1e-6 divisor floor
};

TauEvaluation evaluate_tau(const Dataset& dataset, const MatrixXd& z,
                           const VectorXd& pi_hat, const VectorXd& phi,
                           const VectorXd& beta, Link link,
                           TauVariant variant);

// Solves the augmented estimating equation for the population target
// (variant Population) or the unlabeled-data target (variant Unlabeled) to
// max-norm residual <= 1e-10 * m.
VectorXd solve_beta_aipw(const Dataset& dataset, const MatrixXd& z,
                         const PSFit& ps, const ORFit& orf, Link link,
                         TauVariant variant);

// Inverse-probability-weighted estimating equation (no augmentation).
VectorXd solve_beta_ipw(const Dataset& dataset, const MatrixXd& z,
                        const PSFit& ps, Link link);

// Stratified / constant-PS form: labeled-average residual term plus
// full-sample augmentation term. The OR fit is the unweighted one.
VectorXd solve_beta_stratified(const Dataset& dataset, const MatrixXd& z,
                               const ORFit& orf, Link link);

// K-fold cross-fitted AIPW with lasso ML nuisances: each row's pi_hat and
// phi_hat come from nuisance fits on its fold's complement.
struct CrossfitResult {
  VectorXd beta;
  VectorXd pi_hat;  // pooled per-row, fold-complement fits
  VectorXd phi_hat;
  std::vector<int> fold_of_row;
  std::vector<PSFit> fold_ps;
  std::vector<ORFit> fold_or;
  long pi_floor_count = 0;
};

CrossfitResult crossfit_aipw(const Dataset& dataset, const MatrixXd& z,
                             const BasisSpec& basis, Link link, int folds,
                             std::uint64_t seed, const SolverConfig& config,
                             int cv_folds = 5);

// Damped Newton iteration shared by the logit-link estimating equations.
VectorXd solve_estimating_equation(
    const std::function<VectorXd(const VectorXd&)>& residual,
    const std::function<MatrixXd(const VectorXd&)>& jacobian_neg,
    VectorXd beta0, double tol, int max_iterations = 200);

// Symmetric positive-definite solve with an explicit condition-number
// guard (RankError beyond 1e12).
VectorXd solve_spd(const MatrixXd& a, const VectorXd& b, const char* context);
MatrixXd invert_spd(const MatrixXd& a, const char* context);

}  // namespace ssreg
