#include "ssreg/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "ssreg/rng.hpp"

namespace ssreg {

namespace {

constexpr double kPiFloor = 1e-6;
constexpr double kExpCap = 30.0;

double inv_pi(double pi, long& floor_count) {
  if (pi < kPiFloor) {
    ++floor_count;
    pi = kPiFloor;
  }
  return 1.0 / pi;
}

VectorXd column_means(const MatrixXd& m) {
  return m.colwise().mean().transpose();
}

// Plain (unpenalized) fit of y on z over labeled rows; used to initialize
// the logit-link Newton iterations.
VectorXd labeled_plain_fit(const Dataset& dataset, const MatrixXd& z,
                           Link link) {
  const int m = static_cast<int>(z.cols());
  auto residual = [&](const VectorXd& beta) {
    VectorXd res = VectorXd::Zero(m);
    for (int i = 0; i < dataset.rows(); ++i) {
      if (dataset.r[i] != 1) continue;
      res += (dataset.y[i] - link.mean(z.row(i).dot(beta))) *
             z.row(i).transpose();
    }
    return VectorXd(res / dataset.rows());
  };
  auto jac = [&](const VectorXd& beta) {
    MatrixXd j = MatrixXd::Zero(m, m);
    for (int i = 0; i < dataset.rows(); ++i) {
      if (dataset.r[i] != 1) continue;
      j += link.mean_deriv(z.row(i).dot(beta)) * z.row(i).transpose() *
           z.row(i);
    }
    return MatrixXd(j / dataset.rows());
  };
  return solve_estimating_equation(residual, jac, VectorXd::Zero(m),
                                   1e-10 * m);
}

}  // namespace

VectorXd solve_spd(const MatrixXd& a, const VectorXd& b, const char* context) {
  return invert_spd(a, context) * b;
}

MatrixXd invert_spd(const MatrixXd& a, const char* context) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success)
    throw RankError(std::string(context) + ": eigendecomposition failed");
  const VectorXd ev = es.eigenvalues();
  const double lo = ev.minCoeff(), hi = ev.maxCoeff();
  if (lo <= 0.0 || hi / lo > 1e12)
    throw RankError(std::string(context) +
                    ": matrix is singular or ill-conditioned (cond=" +
                    std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

VectorXd solve_estimating_equation(
    const std::function<VectorXd(const VectorXd&)>& residual,
    const std::function<MatrixXd(const VectorXd&)>& jacobian_neg,
    VectorXd beta0, double tol, int max_iterations) {
  VectorXd beta = std::move(beta0);
  VectorXd res = residual(beta);
  double norm = res.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < max_iterations && norm > tol; ++it) {
    const MatrixXd j = jacobian_neg(beta);
    const VectorXd dir = solve_spd(j, res, "estimating-equation jacobian");
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h <= 30; ++h) {
      const VectorXd cand = beta + t * dir;
      const VectorXd res_c = residual(cand);
      const double norm_c = res_c.lpNorm<Eigen::Infinity>();
      if (norm_c < norm) {
        beta = cand;
        res = res_c;
        norm = norm_c;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  if (!(norm <= tol))
    throw EstimationError(
        "estimating equation did not reach the residual tolerance (|res|=" +
        std::to_string(norm) + ")");
  return beta;
}

TauEvaluation evaluate_tau(const Dataset& dataset, const MatrixXd& z,
                           const VectorXd& pi_hat, const VectorXd& phi,
                           const VectorXd& beta, Link link,
                           TauVariant variant) {
  const int n = dataset.rows();
  const int m = static_cast<int>(z.cols());
  if (z.rows() != n || pi_hat.size() != n || phi.size() != n)
    throw ConfigError("tau evaluation: inputs are not row-aligned");
  if (beta.size() != m) throw ConfigError("tau evaluation: beta has wrong size");

  TauEvaluation out;
  out.variant = variant;
  out.tau.resize(n, m);
  for (int i = 0; i < n; ++i) {
    const double psi_b = link.mean(z.row(i).dot(beta));
    double scale;
    if (dataset.r[i] == 1) {
      const double ipi = inv_pi(pi_hat[i], out.pi_floor_count);
      if (variant == TauVariant::Population) {
        scale = ipi * (dataset.y[i] - phi[i]) + (phi[i] - psi_b);
      } else {
        const double w = (1.0 - pi_hat[i]) * ipi;
        scale = w * (dataset.y[i] - psi_b) +
                (1.0 - ipi) * (phi[i] - psi_b);
      }
    } else {
      scale = phi[i] - psi_b;
    }
    out.tau.row(i) = scale * z.row(i);
  }
  return out;
}

namespace {

VectorXd solve_aipw_rows(const Dataset& dataset, const MatrixXd& z,
                         const VectorXd& pi_hat, const VectorXd& phi,
                         Link link, TauVariant variant,
                         long* floor_count_out) {
  if (dataset.n_labeled == 0 || dataset.n_labeled == dataset.rows())
    throw EstimandError(
        "augmented estimator needs both labeled and unlabeled rows");
  const int n = dataset.rows();
  const int m = static_cast<int>(z.cols());
  const double tol = 1e-12 * m;
  long floors = 0;

  VectorXd beta;
  if (variant == TauVariant::Population && link.kind == LinkKind::Identity) {
    // closed form: E~[Z Z^T] beta = E~[m_hat Z]
    MatrixXd a = MatrixXd::Zero(m, m);
    VectorXd b = VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
      a.noalias() += z.row(i).transpose() * z.row(i);
      double mhat = phi[i];
      if (dataset.r[i] == 1)
        mhat += inv_pi(pi_hat[i], floors) * (dataset.y[i] - phi[i]);
      b += mhat * z.row(i).transpose();
    }
    beta = solve_spd(a / n, b / n, "aipw normal matrix");
  } else {
    auto residual = [&](const VectorXd& bb) {
      long scratch = 0;
      TauEvaluation te =
          evaluate_tau(dataset, z, pi_hat, phi, bb, link, variant);
      scratch = te.pi_floor_count;
      (void)scratch;
      return column_means(te.tau);
    };
    auto jac = [&](const VectorXd& bb) {
      MatrixXd j = MatrixXd::Zero(m, m);
      for (int i = 0; i < n; ++i) {
        const double d = link.mean_deriv(z.row(i).dot(bb));
        const double fac =
            variant == TauVariant::Population ? d : (1.0 - pi_hat[i]) * d;
        j.noalias() += fac * z.row(i).transpose() * z.row(i);
      }
      return MatrixXd(j / n);
    };
    VectorXd beta0 = link.kind == LinkKind::Identity
                         ? VectorXd::Zero(m)
                         : labeled_plain_fit(dataset, z, link);
    beta = solve_estimating_equation(residual, jac, std::move(beta0), tol);
  }

  TauEvaluation check =
      evaluate_tau(dataset, z, pi_hat, phi, beta, link, variant);
  floors = check.pi_floor_count;
  const double res_norm = column_means(check.tau).lpNorm<Eigen::Infinity>();
  if (res_norm > 1e-10 * m)
    throw EstimationError("aipw estimating equation residual " +
                          std::to_string(res_norm) + " above tolerance");
  if (floor_count_out != nullptr) *floor_count_out = floors;
  return beta;
}

}  // namespace

VectorXd solve_beta_aipw(const Dataset& dataset, const MatrixXd& z,
                         const PSFit& ps, const ORFit& orf, Link link,
                         TauVariant variant) {
  if (ps.pi_hat.size() != dataset.rows() || orf.phi.size() != dataset.rows())
    throw ConfigError("nuisance fits are not row-aligned with the dataset");
  return solve_aipw_rows(dataset, z, ps.pi_hat, orf.phi, link, variant,
                         nullptr);
}

VectorXd solve_beta_ipw(const Dataset& dataset, const MatrixXd& z,
                        const PSFit& ps, Link link) {
  if (ps.pi_hat.size() != dataset.rows())
    throw ConfigError("PS fit is not row-aligned with the dataset");
  if (dataset.n_labeled == 0)
    throw EstimandError("IPW estimator needs labeled rows");
  const int n = dataset.rows();
  const int m = static_cast<int>(z.cols());
  long floors = 0;

  if (link.kind == LinkKind::Identity) {
    MatrixXd a = MatrixXd::Zero(m, m);
    VectorXd b = VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
      if (dataset.r[i] != 1) continue;
      const double wi = inv_pi(ps.pi_hat[i], floors);
      a.noalias() += wi * z.row(i).transpose() * z.row(i);
      b += wi * dataset.y[i] * z.row(i).transpose();
    }
    return solve_spd(a / n, b / n, "ipw normal matrix");
  }

  auto residual = [&](const VectorXd& beta) {
    VectorXd res = VectorXd::Zero(m);
    long fl = 0;
    for (int i = 0; i < n; ++i) {
      if (dataset.r[i] != 1) continue;
      res += inv_pi(ps.pi_hat[i], fl) *
             (dataset.y[i] - link.mean(z.row(i).dot(beta))) *
             z.row(i).transpose();
    }
    return VectorXd(res / n);
  };
  auto jac = [&](const VectorXd& beta) {
    MatrixXd j = MatrixXd::Zero(m, m);
    long fl = 0;
    for (int i = 0; i < n; ++i) {
      if (dataset.r[i] != 1) continue;
      j.noalias() += inv_pi(ps.pi_hat[i], fl) *
                     link.mean_deriv(z.row(i).dot(beta)) *
                     z.row(i).transpose() * z.row(i);
    }
    return MatrixXd(j / n);
  };
  return solve_estimating_equation(residual, jac,
                                   labeled_plain_fit(dataset, z, link),
                                   1e-12 * m);
}

VectorXd solve_beta_stratified(const Dataset& dataset, const MatrixXd& z,
                               const ORFit& orf, Link link) {
  if (orf.phi.size() != dataset.rows())
    throw ConfigError("OR fit is not row-aligned with the dataset");
  const int n_all = dataset.rows();
  const int n_lab = dataset.n_labeled;
  if (n_lab == 0) throw EstimandError("stratified estimator needs labeled rows");
  const int m = static_cast<int>(z.cols());

  if (link.kind == LinkKind::Identity) {
    MatrixXd a = MatrixXd::Zero(m, m);
    VectorXd b = VectorXd::Zero(m);
    for (int i = 0; i < n_all; ++i) {
      a.noalias() += z.row(i).transpose() * z.row(i);
      b += orf.phi[i] * z.row(i).transpose();
    }
    a /= n_all;
    b /= n_all;
    for (int i = 0; i < n_all; ++i) {
      if (dataset.r[i] != 1) continue;
      b += (dataset.y[i] - orf.phi[i]) / n_lab * z.row(i).transpose();
    }
    return solve_spd(a, b, "stratified normal matrix");
  }

  auto residual = [&](const VectorXd& beta) {
    VectorXd res = VectorXd::Zero(m);
    for (int i = 0; i < n_all; ++i) {
      if (dataset.r[i] == 1)
        res += (dataset.y[i] - orf.phi[i]) / n_lab * z.row(i).transpose();
      res += (orf.phi[i] - link.mean(z.row(i).dot(beta))) / n_all *
             z.row(i).transpose();
    }
    return res;
  };
  auto jac = [&](const VectorXd& beta) {
    MatrixXd j = MatrixXd::Zero(m, m);
    for (int i = 0; i < n_all; ++i)
      j.noalias() += link.mean_deriv(z.row(i).dot(beta)) *
                     z.row(i).transpose() * z.row(i);
    return MatrixXd(j / n_all);
  };
  return solve_estimating_equation(residual, jac,
                                   labeled_plain_fit(dataset, z, link),
                                   1e-12 * m);
}

CrossfitResult crossfit_aipw(const Dataset& dataset, const MatrixXd& z,
                             const BasisSpec& basis, Link link, int folds,
                             std::uint64_t seed, const SolverConfig& config,
                             int cv_folds) {
  if (folds < 2) throw ConfigError("cross-fitting needs folds >= 2");
  const int n = dataset.rows();
  const MatrixXd f = build_ps_basis(dataset.x, basis);

  CrossfitResult out;
  out.fold_of_row = make_folds(n, folds, seed, dataset.r);
  out.pi_hat.resize(n);
  out.phi_hat.resize(n);

  for (int k = 0; k < folds; ++k) {
    std::vector<int> train, held;
    for (int i = 0; i < n; ++i)
      (out.fold_of_row[i] == k ? held : train).push_back(i);

    MatrixXd f_train(static_cast<int>(train.size()), f.cols());
    VectorXd y_train(static_cast<int>(train.size()));
    VectorXi r_train(static_cast<int>(train.size()));
    for (int i = 0; i < static_cast<int>(train.size()); ++i) {
      f_train.row(i) = f.row(train[i]);
      y_train[i] = dataset.y[train[i]];
      r_train[i] = dataset.r[train[i]];
    }

    std::uint64_t mix = seed ^ (0x9e3779b97f4a7c15ULL * (k + 1));
    const std::uint64_t fold_seed = splitmix64_next(mix);
    PSFit ps = fit_ps_rml(f_train, r_train, VectorXd(), cv_folds, config,
                          fold_seed);
    ORFit orf = fit_or_unweighted(f_train, y_train, r_train, link, VectorXd(),
                                  cv_folds, config, fold_seed + 1);

    for (int i : held) {
      const double eta_ps = f.row(i).dot(ps.gamma);
      const double w = std::exp(-std::clamp(eta_ps, -kExpCap, kExpCap));
      out.pi_hat[i] = 1.0 / (1.0 + w);
      out.phi_hat[i] = link.mean(f.row(i).dot(orf.alpha));
    }
    out.fold_ps.push_back(std::move(ps));
    out.fold_or.push_back(std::move(orf));
  }

  out.beta = solve_aipw_rows(dataset, z, out.pi_hat, out.phi_hat, link,
                             TauVariant::Population, &out.pi_floor_count);
  return out;
}

}  // namespace ssreg
