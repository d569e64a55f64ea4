#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ssreg/solver.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

enum class PsMethod { Rcal, Rml, Constant };
enum class OrMethod { Rwl, Unweighted };

const char* ps_method_name(PsMethod m);
const char* or_method_name(OrMethod m);

// Fitted propensity-score model. pi_hat and w_hat are per-row over the
// design the model was fit on, with w_hat = exp(-gamma^T F) exactly and
// pi_hat = 1 / (1 + w_hat).
struct PSFit {
  VectorXd gamma;
  VectorXd pi_hat;
  VectorXd w_hat;
  double lambda_gamma = 0.0;
  PsMethod method = PsMethod::Rcal;
  std::vector<int> active_set;  // nonzero penalized coordinates
  FitResult fit;
  VectorXd cv_curve;
  // Cross-validation artifacts: fold assignment and the per-fold linear
  // predictor F * gamma_fold at the selected lambda. These feed the nested
  // weight recomputation of the weighted OR fit.
  std::vector<int> fold_of_row;
  std::vector<VectorXd> fold_eta;
};

// Fitted outcome-regression model; eta and phi = psi(eta) are per-row.
struct ORFit {
  VectorXd alpha;
  VectorXd eta;
  VectorXd phi;
  double lambda_alpha = 0.0;
  OrMethod method = OrMethod::Rwl;
  Link link;
  std::vector<int> active_set;
  FitResult fit;
  VectorXd cv_curve;
};

// Geometric grid of `count` values from lambda_max down to
// min_ratio * lambda_max, descending.
VectorXd default_lambda_grid(double lambda_max_value, int count = 20,
                             double min_ratio = 1e-3);

// Seeded deterministic permutation split into contiguous blocks. Every fold
// must contain a labeled row (resampled with seed+1.. up to 10 attempts).
std::vector<int> make_folds(int n_rows, int folds, std::uint64_t seed,
                            const VectorXi& r);

// One entry of a warm-started path fit.
struct PathPoint {
  VectorXd coef;
  bool converged = true;
};

// A penalty-selection family: how to fit a path on training rows and how to
// score one coefficient vector on held-out rows with the family's own
// unpenalized loss. The fold index lets the family use fold state.
struct CvFamily {
  int n_rows = 0;
  const VectorXi* labels = nullptr;
  std::function<std::vector<PathPoint>(int fold, const std::vector<int>& rows,
                                       const VectorXd& grid)>
      fit_path;
  std::function<double(int fold, const std::vector<int>& rows,
                       const VectorXd& coef)>
      held_out_loss;
};

// Grid values where some training fold has no convergent fit (an unbounded
// penalized problem) carry an infinite curve value and are never selected.
struct CvSelection {
  double lambda = 0.0;
  int lambda_index = 0;
  VectorXd curve;  // out-of-fold average loss per grid value
  std::vector<int> fold_of_row;
  std::vector<std::vector<PathPoint>> fold_paths;
};

CvSelection select_lambda_cv(const CvFamily& family, const VectorXd& grid,
                             int folds, std::uint64_t seed);
// Same with a caller-chosen fold assignment (folds = max id + 1).
CvSelection select_lambda_cv_with_folds(const CvFamily& family,
                                        const VectorXd& grid,
                                        const std::vector<int>& fold_of_row);

// Regularized calibrated PS fit. folds >= 2 cross-validates lambda over the
// grid; folds == 0 fits the path and keeps the final (smallest) grid value.
// An empty grid means the default grid off lambda_max. At the optimum the
// calibration identity sum_labeled w_hat = N - n holds (unpenalized
// intercept first-order condition).
PSFit fit_ps_rcal(const MatrixXd& f, const VectorXi& r, VectorXd lambda_grid,
                  int folds, const SolverConfig& config, std::uint64_t seed);

// Lasso-penalized logistic maximum-likelihood PS fit; same conventions.
PSFit fit_ps_rml(const MatrixXd& f, const VectorXi& r, VectorXd lambda_grid,
                 int folds, const SolverConfig& config, std::uint64_t seed);

// The constant (MCAR / stratified) PS: pi = n/N on every row.
PSFit constant_ps(int n_rows, int n_labeled);

// Weighted-likelihood OR fit with weights w_hat from the PS fit. With
// folds >= 2 the held-out loss recomputes weights from the fold's own PS
// fit, so `ps` must carry fold artifacts for the same fold count (or be
// the Constant PS, whose fold weights are labeled fractions).
ORFit fit_or_rwl(const MatrixXd& g, const VectorXd& y, const VectorXi& r,
                 const PSFit& ps, Link link, VectorXd lambda_grid, int folds,
                 const SolverConfig& config, std::uint64_t seed);

// Unweighted lasso OR fit on labeled rows (the AIPW_RML / AIPW_CF
// baseline); held-out loss is the squared error on labeled rows.
ORFit fit_or_unweighted(const MatrixXd& g, const VectorXd& y,
                        const VectorXi& r, Link link, VectorXd lambda_grid,
                        int folds, const SolverConfig& config,
                        std::uint64_t seed);

}  // namespace ssreg
