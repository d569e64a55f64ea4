#include "ssreg/pipeline.hpp"

#include "ssreg/rng.hpp"

namespace ssreg {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (tag + 1));
  return splitmix64_next(s);
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::AipwRcal: return "aipw-rcal";
    case Method::AipwRml: return "aipw-rml";
    case Method::AipwCf: return "aipw-cf";
    case Method::Ipw: return "ipw";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "aipw-rcal") return Method::AipwRcal;
  if (s == "aipw-rml") return Method::AipwRml;
  if (s == "aipw-cf") return Method::AipwCf;
  if (s == "ipw") return Method::Ipw;
  throw ConfigError("unknown method: " + s);
}

EstimateReport run_fit(const Dataset& dataset, const FitOptions& opt) {
  const MatrixXd z = extract_z(dataset, opt.target);
  const int m = static_cast<int>(z.cols());
  const Estimand estimand = opt.target.estimand;

  EstimateReport rep;
  rep.method = method_name(opt.method);
  rep.estimand = estimand_name(estimand);
  rep.link = opt.link.name();
  rep.n_rows = dataset.rows();
  rep.n_labeled = dataset.n_labeled;
  rep.seed = opt.seed;
  rep.levels = opt.levels;

  VectorXd beta;
  MatrixXd lam;
  VectorXd pi_for_gamma;
  int n_scale = dataset.rows();

  if (estimand == Estimand::Stratified) {
    // Constant PS: the weighted OR fit degenerates to the unweighted one,
    // so every AIPW flavor shares a single path here.
    const MatrixXd f = build_ps_basis(dataset.x, opt.basis);
    const MatrixXd g = opt.or_interactions && opt.method == Method::AipwRcal
                           ? build_or_basis(f, z)
                           : f;
    PSFit ps = constant_ps(dataset.rows(), dataset.n_labeled);
    if (opt.method == Method::Ipw) {
      beta = solve_beta_ipw(dataset, z, ps, opt.link);
      rep.beta = beta;
      rep.has_variance = false;
      return rep;
    }
    ORFit orf = fit_or_unweighted(g, dataset.y, dataset.r, opt.link,
                                  VectorXd(), opt.folds, opt.solver,
                                  derive_seed(opt.seed, 2));
    beta = solve_beta_stratified(dataset, z, orf, opt.link);
    lam = lambda_hat_stratified(dataset, z, orf, beta, opt.link);
    n_scale = dataset.n_labeled;
    rep.lambda_alpha = orf.lambda_alpha;
    rep.or_active_count = static_cast<int>(orf.active_set.size());
    rep.exp_clamp_count = orf.fit.clamp_events;
    pi_for_gamma = ps.pi_hat;
  } else {
    const TauVariant variant = estimand == Estimand::Unlabeled
                                   ? TauVariant::Unlabeled
                                   : TauVariant::Population;
    VectorXd pi_hat, phi_hat;
    long clamp = 0;

    if (opt.method == Method::AipwCf) {
      if (estimand == Estimand::Unlabeled)
        throw ConfigError(
            "cross-fitting is implemented for the population estimand only");
      CrossfitResult cf =
          crossfit_aipw(dataset, z, opt.basis, opt.link, opt.folds, opt.seed,
                        opt.solver);
      beta = cf.beta;
      pi_hat = std::move(cf.pi_hat);
      phi_hat = std::move(cf.phi_hat);
      rep.pi_floor_count = cf.pi_floor_count;
      for (const auto& pf : cf.fold_ps) clamp += pf.fit.clamp_events;
      for (const auto& of : cf.fold_or) clamp += of.fit.clamp_events;
    } else {
      const MatrixXd f = build_ps_basis(dataset.x, opt.basis);
      PSFit ps;
      ORFit orf;
      if (opt.method == Method::AipwRcal) {
        const MatrixXd g =
            opt.or_interactions ? build_or_basis(f, z) : MatrixXd(f);
        ps = fit_ps_rcal(f, dataset.r, VectorXd(), opt.folds, opt.solver,
                         derive_seed(opt.seed, 1));
        orf = fit_or_rwl(g, dataset.y, dataset.r, ps, opt.link, VectorXd(),
                         opt.folds, opt.solver, derive_seed(opt.seed, 2));
      } else {
        ps = fit_ps_rml(f, dataset.r, VectorXd(), opt.folds, opt.solver,
                        derive_seed(opt.seed, 1));
        if (opt.method != Method::Ipw)
          orf = fit_or_unweighted(f, dataset.y, dataset.r, opt.link,
                                  VectorXd(), opt.folds, opt.solver,
                                  derive_seed(opt.seed, 2));
      }
      rep.lambda_gamma = ps.lambda_gamma;
      rep.ps_active_count = static_cast<int>(ps.active_set.size());
      clamp += ps.fit.clamp_events;

      if (opt.method == Method::Ipw) {
        beta = solve_beta_ipw(dataset, z, ps, opt.link);
        rep.beta = beta;
        rep.has_variance = false;  // no EVar-based reporting for IPW
        rep.exp_clamp_count = clamp;
        return rep;
      }

      rep.lambda_alpha = orf.lambda_alpha;
      rep.or_active_count = static_cast<int>(orf.active_set.size());
      clamp += orf.fit.clamp_events;
      beta = solve_beta_aipw(dataset, z, ps, orf, opt.link, variant);
      pi_hat = ps.pi_hat;
      phi_hat = orf.phi;
    }

    TauEvaluation te =
        evaluate_tau(dataset, z, pi_hat, phi_hat, beta, opt.link, variant);
    rep.pi_floor_count += te.pi_floor_count;
    rep.exp_clamp_count = clamp;
    lam = lambda_hat(te.tau);
    pi_for_gamma = std::move(pi_hat);
  }

  const Estimand gamma_variant =
      estimand == Estimand::Stratified ? Estimand::Population : estimand;
  const MatrixXd gam = gamma_hat(z, beta, opt.link, gamma_variant,
                                 pi_for_gamma, opt.gamma_plugin_form);

  rep.beta = beta;
  rep.ci_lower.resize(m, static_cast<int>(opt.levels.size()));
  rep.ci_upper.resize(m, static_cast<int>(opt.levels.size()));
  for (std::size_t li = 0; li < opt.levels.size(); ++li) {
    const double eta = 1.0 - opt.levels[li];
    Sandwich s = sandwich_ci(gam, lam, beta, n_scale, eta);
    rep.sigma = s.sigma;
    rep.se = s.se;
    rep.ci_lower.col(static_cast<int>(li)) = s.ci_lower;
    rep.ci_upper.col(static_cast<int>(li)) = s.ci_upper;
  }
  return rep;
}

}  // namespace ssreg
