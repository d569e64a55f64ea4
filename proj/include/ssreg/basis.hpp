#pragma once

#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

enum class KnotPlacement {
  FixedRange,  // knots strictly inside (-a, a), endpoints excluded
  DataRange,   // knots spread over [min, max] of each covariate
};

// Recipe for the piecewise-linear (hinge) expansion of selected covariates.
struct BasisSpec {
  int knots_per_covariate = 49;
  KnotPlacement placement = KnotPlacement::FixedRange;
  double fixed_half_range = 3.0;     // the a of (-a, a)
  std::vector<int> covariate_indices;  // x columns to expand; empty = all of 1..d
};

// Paired design matrices for the two nuisance models. g's leading block
// equals f exactly.
struct DesignMatrices {
  MatrixXd f;  // N x (p+1)
  MatrixXd g;  // N x (q+1)
  int p = 0;
  int q = 0;
};

// Knot locations for one covariate under the given placement rule.
std::vector<double> hinge_knots(const MatrixXd& x, int column,
                                const BasisSpec& spec);

// [1, (X_i - xi_ij)_+ ...] over the selected covariates; p = (#covariates)*k.
MatrixXd build_ps_basis(const MatrixXd& x, const BasisSpec& spec);

// G = [F, Z_ (x) F_] where Z_ and F_ drop their intercept columns and the
// interaction block holds all products of individual components, Z-major.
// q+1 = (p+1) + (m-1)*p.
MatrixXd build_or_basis(const MatrixXd& f, const MatrixXd& z);

DesignMatrices build_design(const Dataset& dataset, const MatrixXd& z,
                            const BasisSpec& spec, bool or_interactions);

}  // namespace ssreg
