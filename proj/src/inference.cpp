#include "ssreg/inference.hpp"

#include <cmath>

namespace ssreg {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("normal quantile needs p in (0,1)");
  const double q = p - 0.5;
  double r, val;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    val = q *
          (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
              1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
            1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
          (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
              5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
            4.2313330701600911252e+1) * r + 1.0);
    return val;
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
               2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
             3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
           4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
               1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
             6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
           2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
               1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
             2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
           5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
               1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
             1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
           5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

MatrixXd gamma_hat(const MatrixXd& z, const VectorXd& beta, Link link,
                   Estimand variant, const VectorXd& pi_hat,
                   bool plugin_form) {
  const int n = static_cast<int>(z.rows());
  const int m = static_cast<int>(z.cols());
  const bool damp = variant == Estimand::Unlabeled && !plugin_form;
  if (damp && pi_hat.size() != n)
    throw ConfigError("gamma_hat: pi_hat is not row-aligned");

  MatrixXd g = MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i) {
    double w = link.mean_deriv(z.row(i).dot(beta));
    if (damp) w *= 1.0 - pi_hat[i];
    g.noalias() += w * z.row(i).transpose() * z.row(i);
  }
  return g / n;
}

MatrixXd lambda_hat(const MatrixXd& tau) {
  return tau.transpose() * tau / static_cast<double>(tau.rows());
}

Sandwich sandwich_ci(const MatrixXd& gamma, const MatrixXd& lambda,
                     const VectorXd& beta, int n_scale, double eta) {
  if (!(eta > 0.0 && eta < 1.0))
    throw ConfigError("confidence level parameter eta must be in (0,1)");
  if (n_scale <= 0) throw ConfigError("n_scale must be positive");
  const MatrixXd ginv = invert_spd(gamma, "sandwich gamma_hat");
  Sandwich s;
  s.sigma = ginv * lambda * ginv;
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose()).eval();
  s.se = (s.sigma.diagonal() / static_cast<double>(n_scale)).cwiseSqrt();
  const double zq = normal_quantile(1.0 - eta / 2.0);
  s.ci_lower = beta - zq * s.se;
  s.ci_upper = beta + zq * s.se;
  return s;
}

MatrixXd lambda_hat_stratified(const VectorXd& y_labeled,
                               const MatrixXd& z_labeled,
                               const VectorXd& phi_labeled,
                               const MatrixXd& z_all, const VectorXd& phi_all,
                               const VectorXd& beta, Link link, int n, int N) {
  const int m = static_cast<int>(z_all.cols());
  if (n <= 0 || N <= 0 || n > N)
    throw ConfigError("lambda_hat_stratified: bad n, N");
  const double rho = static_cast<double>(n) / N;

  MatrixXd first = MatrixXd::Zero(m, m);
  for (int i = 0; i < z_labeled.rows(); ++i) {
    const double psi_b = link.mean(z_labeled.row(i).dot(beta));
    const double t =
        y_labeled[i] - (1.0 - rho) * phi_labeled[i] - rho * psi_b;
    first.noalias() += t * t * z_labeled.row(i).transpose() * z_labeled.row(i);
  }
  first /= static_cast<double>(z_labeled.rows());

  MatrixXd second = MatrixXd::Zero(m, m);
  for (int i = 0; i < z_all.rows(); ++i) {
    const double psi_b = link.mean(z_all.row(i).dot(beta));
    const double t = phi_all[i] - psi_b;
    second.noalias() += t * t * z_all.row(i).transpose() * z_all.row(i);
  }
  second *= (1.0 - rho) * rho / static_cast<double>(z_all.rows());

  return first + second;
}

MatrixXd lambda_hat_stratified(const Dataset& dataset, const MatrixXd& z,
                               const ORFit& orf, const VectorXd& beta,
                               Link link) {
  const int n_lab = dataset.n_labeled;
  std::vector<int> lab;
  lab.reserve(n_lab);
  for (int i = 0; i < dataset.rows(); ++i)
    if (dataset.r[i] == 1) lab.push_back(i);

  VectorXd y_lab(n_lab), phi_lab(n_lab);
  MatrixXd z_lab(n_lab, z.cols());
  for (int i = 0; i < n_lab; ++i) {
    y_lab[i] = dataset.y[lab[i]];
    phi_lab[i] = orf.phi[lab[i]];
    z_lab.row(i) = z.row(lab[i]);
  }
  return lambda_hat_stratified(y_lab, z_lab, phi_lab, z, orf.phi, beta, link,
                               n_lab, dataset.rows());
}

MatrixXd lambda_hat_constant_ps(const VectorXd& y, const VectorXd& phi,
                                const MatrixXd& z, const VectorXd& beta,
                                Link link, int n, int N) {
  const int rows = static_cast<int>(z.rows());
  const int m = static_cast<int>(z.cols());
  if (n <= 0 || N <= 0 || n > N)
    throw ConfigError("lambda_hat_constant_ps: bad n, N");
  const double inflate = static_cast<double>(N) / n;

  MatrixXd out = MatrixXd::Zero(m, m);
  for (int i = 0; i < rows; ++i) {
    const double a = y[i] - phi[i];
    const double b = phi[i] - link.mean(z.row(i).dot(beta));
    const double t = inflate * a * a + 2.0 * a * b + b * b;
    out.noalias() += t * z.row(i).transpose() * z.row(i);
  }
  return out / rows;
}

PriorVariance prior_method_variance(const VectorXd& y, const VectorXd& phi,
                                    const MatrixXd& z, const VectorXd& beta,
                                    Link link, int n, int N) {
  const int rows = static_cast<int>(z.rows());
  const int m = static_cast<int>(z.cols());
  const double rho = static_cast<double>(n) / N;
  PriorVariance pv;

  if (m == 1) {
    const VectorXd resid = y - phi;
    const double mr = resid.mean();
    const double mp = phi.mean();
    const double var_resid = (resid.array() - mr).square().mean();
    const double var_phi = (phi.array() - mp).square().mean();
    pv.mean_form = MatrixXd::Constant(1, 1, var_resid + rho * var_phi);
  }

  MatrixXd svv = MatrixXd::Zero(m, m);
  VectorXd sv = VectorXd::Zero(m);
  for (int i = 0; i < rows; ++i) {
    const VectorXd v = (y[i] - phi[i]) * z.row(i).transpose();
    svv.noalias() += v * v.transpose();
    sv += v;
  }
  svv /= rows;
  sv /= rows;
  const MatrixXd var_v = svv - sv * sv.transpose();
  const MatrixXd gam = gamma_hat(z, beta, link, Estimand::Population,
                                 VectorXd());
  const MatrixXd ginv = invert_spd(gam, "prior-variance gamma_hat");
  pv.regression_form = ginv * var_v * ginv;
  return pv;
}

}  // namespace ssreg
