#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ssreg/errors.hpp"

namespace ssreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

enum class LinkKind { Identity, Logit };

// Inverse link and companions for the two supported mean models.
// mean(u) is the inverse link applied to a linear predictor, cumulant(u)
// its antiderivative, mean_deriv(u) its derivative. linearize(mu) maps a
// mean back to the linear-predictor scale.
struct Link {
  LinkKind kind = LinkKind::Identity;

  static Link identity() { return Link{LinkKind::Identity}; }
  static Link logit() { return Link{LinkKind::Logit}; }

  double mean(double u) const {
    if (kind == LinkKind::Identity) return u;
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
  }

  double cumulant(double u) const {
    if (kind == LinkKind::Identity) return 0.5 * u * u;
    // log(1 + e^u), computed without overflow on either tail
    return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
  }

  double mean_deriv(double u) const {
    if (kind == LinkKind::Identity) return 1.0;
    const double p = mean(u);
    return p * (1.0 - p);
  }

  double linearize(double mu) const {
    if (kind == LinkKind::Identity) return mu;
    const double lo = 1e-12;
    const double m = std::min(std::max(mu, lo), 1.0 - lo);
    return std::log(m / (1.0 - m));
  }

  const char* name() const {
    return kind == LinkKind::Identity ? "identity" : "logit";
  }
};

// An i.i.d. sample of (X, Y, R): covariates with a leading intercept
// column, an outcome observed only where the label indicator is 1, and
// the indicator itself. Outcomes of unlabeled rows hold NaN sentinels and
// are validated at construction. Immutable after make().
struct Dataset {
  MatrixXd x;      // N x (d+1), column 0 identically 1
  VectorXd y;      // NaN wherever r == 0
  VectorXi r;      // 0/1
  int n_labeled = 0;

  int rows() const { return static_cast<int>(x.rows()); }
  int covariates() const { return static_cast<int>(x.cols()) - 1; }

  static Dataset make(MatrixXd x, VectorXd y, VectorXi r);
};

enum class Estimand { Population, Unlabeled, Stratified };

// Which sub-vector Z of X the mean model is fit on, and against which
// sampling target. Z always carries an intercept: z_columns lists the
// remaining x-column indices, so the empty list is the mean-only case.
struct TargetSpec {
  std::vector<int> z_columns;
  Estimand estimand = Estimand::Population;

  int dimension() const {
    int m = 1;
    for (int c : z_columns)
      if (c != 0) ++m;
    return m;
  }
};

// Projects the dataset onto Z. Column 0 of the result is all ones;
// the remaining columns follow z_columns order.
MatrixXd extract_z(const Dataset& dataset, const TargetSpec& spec);

const char* estimand_name(Estimand e);
Estimand parse_estimand(const std::string& s);
Link parse_link(const std::string& s);

}  // namespace ssreg
