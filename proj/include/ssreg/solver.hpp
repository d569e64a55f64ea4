#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

enum class LossKind { Calibration, WeightedML, LogisticML, WeightedLS };

const char* loss_name(LossKind k);

// L1-penalized convex program: mean loss over the sample plus
// lambda * sum_j |coef_j| over the penalized coordinates. The intercept
// (column 0) is never penalized.
struct PenalizedProblem {
  LossKind loss = LossKind::WeightedLS;
  const MatrixXd* design = nullptr;  // rows x (k+1), column 0 = intercept
  VectorXd response;                 // y for the weighted losses, r otherwise
  VectorXd weights;                  // per-row weights (already include r)
  Link link;                         // WeightedML; WeightedLS forces identity
  double lambda = 0.0;
  Eigen::Array<bool, Eigen::Dynamic, 1> penalized;  // [0] must stay false
  // Divisor of the loss sum. Defaults to the design row count; a compacted
  // problem (e.g. labeled rows only) keeps the divisor of the full sample.
  double mean_divisor = 0.0;

  int coef_count() const { return static_cast<int>(design->cols()); }
  double divisor() const {
    return mean_divisor > 0.0 ? mean_divisor
                              : static_cast<double>(design->rows());
  }

  static PenalizedProblem calibration(const MatrixXd& f, const VectorXi& r,
                                      double lambda);
  static PenalizedProblem logistic_ml(const MatrixXd& f, const VectorXi& r,
                                      double lambda);
  static PenalizedProblem weighted_ml(const MatrixXd& g, const VectorXd& y,
                                      const VectorXi& r, const VectorXd& w,
                                      Link link, double lambda);
  static PenalizedProblem weighted_ls(const MatrixXd& g, const VectorXd& y,
                                      const VectorXi& r, const VectorXd& w,
                                      double lambda);
};

struct SolverConfig {
  int max_iterations = 10000;
  double tolerance = 1e-9;        // relative objective-change stall threshold
  double backtrack_shrink = 0.5;  // in (0,1)
  double initial_step = 1.0;
  double kkt_tolerance = 1e-6;    // certificate checked on every returned fit
  // Iterates whose sup-norm crosses this bound are treated as walking an
  // unbounded direction (converged = false, iteration stops).
  double divergence_bound = 1e3;
  // When set, accepted penalized-objective values are appended here.
  std::vector<double>* objective_trace = nullptr;
};

struct FitResult {
  VectorXd coefficients;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  long clamp_events = 0;  // rows whose linear predictor hit the exp cap
};

struct LossValueGrad {
  double value = 0.0;
  VectorXd gradient;
  long clamp_events = 0;
};

// The four loss functions, each returning (value, gradient) of the
// unpenalized sample-mean loss.
LossValueGrad loss_calibration(const VectorXd& gamma, const MatrixXd& f,
                               const VectorXi& r);
LossValueGrad loss_weighted_ml(const VectorXd& alpha, const MatrixXd& g,
                               const VectorXd& y, const VectorXi& r,
                               const VectorXd& w, Link link);
LossValueGrad loss_logistic_ml(const VectorXd& gamma, const MatrixXd& f,
                               const VectorXi& r);

double soft_threshold(double x, double t);

// Max violation of the L1 subgradient conditions at (coef, gradient).
double kkt_residual(const VectorXd& gradient, const VectorXd& coef,
                    double lambda,
                    const Eigen::Array<bool, Eigen::Dynamic, 1>& penalized);

// Proximal gradient with backtracking line search. Monotone in the
// penalized objective; converged results certify kkt_residual <=
// config.kkt_tolerance. warm_start, when given, seeds the iteration.
FitResult minimize_l1(const PenalizedProblem& problem,
                      const SolverConfig& config,
                      const VectorXd* warm_start = nullptr);

// Warm-started solves along a descending lambda grid.
std::vector<FitResult> minimize_l1_path(const PenalizedProblem& problem,
                                        const VectorXd& lambda_grid,
                                        const SolverConfig& config);

// Smallest lambda at which every penalized coordinate stays zero, read off
// the gradient at the intercept-only optimum.
double lambda_max(const PenalizedProblem& problem);

}  // namespace ssreg
