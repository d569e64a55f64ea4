#include "ssreg/basis.hpp"

#include <algorithm>
#include <cmath>

namespace ssreg {

namespace {

std::vector<int> expansion_columns(const MatrixXd& x, const BasisSpec& spec) {
  const int d = static_cast<int>(x.cols()) - 1;
  std::vector<int> cols = spec.covariate_indices;
  if (cols.empty()) {
    cols.resize(d);
    for (int i = 0; i < d; ++i) cols[i] = i + 1;
  }
  for (int c : cols)
    if (c < 1 || c > d)
      throw ConfigError("basis covariate index " + std::to_string(c) +
                        " out of range [1," + std::to_string(d) + "]");
  return cols;
}

}  // namespace

std::vector<double> hinge_knots(const MatrixXd& x, int column,
                                const BasisSpec& spec) {
  const int k = spec.knots_per_covariate;
  if (k < 1) throw ConfigError("knots_per_covariate must be >= 1");
  std::vector<double> knots(k);
  if (spec.placement == KnotPlacement::FixedRange) {
    const double a = spec.fixed_half_range;
    if (a <= 0.0) throw ConfigError("fixed knot half-range must be positive");
    for (int j = 1; j <= k; ++j)
      knots[j - 1] = -a + 2.0 * a * j / (k + 1);
  } else {
    const double lo = x.col(column).minCoeff();
    const double hi = x.col(column).maxCoeff();
    if (k == 1) {
      knots[0] = 0.5 * (lo + hi);
    } else {
      for (int j = 0; j < k; ++j)
        knots[j] = lo + (hi - lo) * j / (k - 1);
    }
  }
  return knots;
}

MatrixXd build_ps_basis(const MatrixXd& x, const BasisSpec& spec) {
  if (!x.allFinite()) throw DataError("covariates contain non-finite values");
  const std::vector<int> cols = expansion_columns(x, spec);
  const int n = static_cast<int>(x.rows());
  const int k = spec.knots_per_covariate;
  const int p = static_cast<int>(cols.size()) * k;

  MatrixXd f(n, p + 1);
  f.col(0).setOnes();
  int out = 1;
  for (int c : cols) {
    const std::vector<double> knots = hinge_knots(x, c, spec);
    for (int j = 0; j < k; ++j, ++out)
      f.col(out) = (x.col(c).array() - knots[j]).max(0.0);
  }
  return f;
}

MatrixXd build_or_basis(const MatrixXd& f, const MatrixXd& z) {
  if (f.rows() != z.rows())
    throw ConfigError("OR basis: f and z are not row-aligned");
  if (f.cols() < 1 || z.cols() < 1)
    throw ConfigError("OR basis: empty design");
  const int n = static_cast<int>(f.rows());
  const int p = static_cast<int>(f.cols()) - 1;
  const int m = static_cast<int>(z.cols());
  const int q1 = (p + 1) + (m - 1) * p;

  MatrixXd g(n, q1);
  g.leftCols(p + 1) = f;
  int out = p + 1;
  for (int zj = 1; zj < m; ++zj)
    for (int fk = 1; fk <= p; ++fk, ++out)
      g.col(out) = z.col(zj).cwiseProduct(f.col(fk));
  return g;
}

DesignMatrices build_design(const Dataset& dataset, const MatrixXd& z,
                            const BasisSpec& spec, bool or_interactions) {
  DesignMatrices dm;
  dm.f = build_ps_basis(dataset.x, spec);
  dm.g = or_interactions ? build_or_basis(dm.f, z) : dm.f;
  dm.p = static_cast<int>(dm.f.cols()) - 1;
  dm.q = static_cast<int>(dm.g.cols()) - 1;
  return dm;
}

}  // namespace ssreg
