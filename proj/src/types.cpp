#include "ssreg/types.hpp"

#include <cmath>
#include <set>

namespace ssreg {

Dataset Dataset::make(MatrixXd x, VectorXd y, VectorXi r) {
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw DataError("dataset is empty");
  if (y.size() != n || r.size() != n)
    throw DataError("x, y, r row counts disagree");
  if (x.cols() < 1 || (x.col(0).array() != 1.0).any())
    throw DataError("first covariate column must be identically 1");
  if (!x.allFinite()) throw DataError("covariates contain non-finite values");

  int labeled = 0;
  for (int i = 0; i < n; ++i) {
    if (r[i] != 0 && r[i] != 1) throw DataError("label indicator must be 0/1");
    if (r[i] == 1) {
      if (!std::isfinite(y[i]))
        throw DataError("labeled outcome is missing or non-finite at row " +
                        std::to_string(i));
      ++labeled;
    } else if (!std::isnan(y[i])) {
      throw DataError("unlabeled outcome must carry the NaN sentinel at row " +
                      std::to_string(i));
    }
  }

  Dataset d;
  d.x = std::move(x);
  d.y = std::move(y);
  d.r = std::move(r);
  d.n_labeled = labeled;
  return d;
}

MatrixXd extract_z(const Dataset& dataset, const TargetSpec& spec) {
  const int n = dataset.rows();
  const int d = dataset.covariates();
  std::set<int> seen;
  for (int c : spec.z_columns) {
    if (c < 0 || c > d)
      throw ConfigError("z column index " + std::to_string(c) +
                        " out of range [0," + std::to_string(d) + "]");
    if (!seen.insert(c).second)
      throw ConfigError("duplicate z column index " + std::to_string(c));
  }

  MatrixXd z(n, spec.dimension());
  z.col(0).setOnes();
  int k = 1;
  for (int c : spec.z_columns) {
    if (c == 0) continue;  // intercept already present
    z.col(k++) = dataset.x.col(c);
  }
  return z;
}

const char* estimand_name(Estimand e) {
  switch (e) {
    case Estimand::Population: return "population";
    case Estimand::Unlabeled: return "unlabeled";
    case Estimand::Stratified: return "stratified";
  }
  return "?";
}

Estimand parse_estimand(const std::string& s) {
  if (s == "population") return Estimand::Population;
  if (s == "unlabeled") return Estimand::Unlabeled;
  if (s == "stratified") return Estimand::Stratified;
  throw ConfigError("unknown estimand: " + s);
}

Link parse_link(const std::string& s) {
  if (s == "identity") return Link::identity();
  if (s == "logit") return Link::logit();
  throw ConfigError("unknown link: " + s);
}

}  // namespace ssreg
