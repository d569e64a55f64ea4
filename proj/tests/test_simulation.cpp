#include <doctest.h>

#include <cmath>

#include "ssreg/report.hpp"
#include "ssreg/simulation.hpp"

using namespace ssreg;

TEST_CASE("covariates are clamped draws with the 2^{-|i-j|} covariance") {
  Rng rng(1);
  const int n = 1000000;
  const MatrixXd x = gen_covariates(n, rng);
  CHECK((x.col(0).array() == 1.0).all());
  CHECK(x.rightCols(3).maxCoeff() <= 3.0);
  CHECK(x.rightCols(3).minCoeff() >= -3.0);

  // sample covariance against the target (clamping barely moves it)
  Eigen::Matrix3d target;
  target << 1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0;
  Eigen::Vector3d mean = x.rightCols(3).colwise().mean();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d v = x.row(i).tail(3).transpose() - mean;
    cov += v * v.transpose();
  }
  cov /= n;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      CHECK(std::abs(cov(a, b) - target(a, b)) < 0.01);
}

TEST_CASE("label model hits the pinned plug-in value and labeled share") {
  // pi at the all-zero basis point
  CHECK(Link::logit().mean(-1.5) == doctest::Approx(1.0 / (1.0 + std::exp(1.5))));

  Rng rng(2);
  const int n = 1000000;
  const MatrixXd x = gen_covariates(n, rng);
  BasisSpec spec;
  const MatrixXd f = build_ps_basis(x, spec);
  const VectorXi r = gen_labels(f, rng);
  const double share = r.cast<double>().mean();
  // E[pi(X)] = 0.0342, pinned by a one-time 1e7-draw oracle run
  CHECK(std::abs(share - 0.0342) < 0.002);

  CHECK_THROWS_AS(gen_labels(MatrixXd::Ones(5, 2), rng), ConfigError);
}

TEST_CASE("outcome means at hand-picked covariate points") {
  Rng rng(3);
  MatrixXd x(1, 4);

  SUBCASE("case 1 vanishes at the origin") {
    x << 1, 0, 0, 0;
    const VectorXd y = gen_outcome(1, x, rng, 0.0);
    CHECK(y[0] == doctest::Approx(-0.2).epsilon(1e-14));
  }
  SUBCASE("case 3 at x1 = 1, x3 = 0") {
    x << 1, 1, 0.7, 0;
    const VectorXd y = gen_outcome(3, x, rng, 0.0);
    CHECK(y[0] == doctest::Approx(0.4 * 2.0 + 0.2 * 1.0).epsilon(1e-14));
  }
  SUBCASE("case 4 negative part is flat") {
    x << 1, -2, 0.5, 0;
    const VectorXd y = gen_outcome(4, x, rng, 0.0);
    CHECK(y[0] == doctest::Approx(0.2 * (-2) * 0.5).epsilon(1e-14));
  }
  SUBCASE("case 5 at the all-ones point") {
    x << 1, 1, 1, 1;
    const VectorXd y = gen_outcome(5, x, rng, 0.0);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("unknown case is a configuration error") {
    x << 1, 0, 0, 0;
    CHECK_THROWS_AS(gen_outcome(6, x, rng, 0.0), ConfigError);
  }
}

TEST_CASE("true beta oracle") {
  SUBCASE("case 1 population mean sits at -0.2") {
    const VectorXd beta =
        true_beta(1, case_target(1), 400000, 99, false);
    REQUIRE(beta.size() == 1);
    CHECK(std::abs(beta[0] + 0.2) < 0.01);
  }
  SUBCASE("case 2 mean exceeds -0.2 (nonnegative transforms)") {
    const VectorXd beta =
        true_beta(2, case_target(2), 100000, 99, false);
    CHECK(beta[0] > -0.2);
  }
  SUBCASE("repeated calls are bit-identical") {
    const VectorXd a = true_beta(3, case_target(3), 50000, 7, false);
    const VectorXd b = true_beta(3, case_target(3), 50000, 7, false);
    CHECK(a == b);
  }
  SUBCASE("case targets carry the documented z columns") {
    CHECK(case_target(1).dimension() == 1);
    CHECK(case_target(3).dimension() == 2);
    CHECK(case_target(5).dimension() == 4);
    CHECK_THROWS_AS(case_target(0), ConfigError);
  }
}

TEST_CASE("small replication batches aggregate faithfully") {
  SimConfig cfg;
  cfg.case_id = 1;
  cfg.n_total = 400;
  cfg.replications = 3;
  cfg.seed = 77;
  cfg.methods = {Method::AipwRcal, Method::Ipw};
  cfg.basis.knots_per_covariate = 10;
  cfg.true_beta_oracle_n = 20000;
  cfg.threads = 2;

  const MetricsReport rep = run_replications(cfg);
  REQUIRE(rep.metrics.size() == 2);
  CHECK(rep.metrics[0].replications_used == 3);
  CHECK(rep.metrics[0].has_variance);
  CHECK(!rep.metrics[1].has_variance);  // IPW reports no EVar/CP fields
  CHECK(rep.metrics[1].cp90.size() == 0);
  CHECK(std::isfinite(rep.metrics[0].sqrt_var[0]));
  CHECK(rep.raw_beta[0].rows() == 3);

  SUBCASE("a single replication leaves sqrt_var as the missing marker") {
    cfg.replications = 1;
    cfg.methods = {Method::AipwRcal};
    const MetricsReport one = run_replications(cfg);
    CHECK(std::isnan(one.metrics[0].sqrt_var[0]));
    const std::string text = render_metrics_report(one);
    CHECK(text.find("sqrt_var: na") != std::string::npos);
  }
}

TEST_CASE("replication driver is schedule-independent") {
  SimConfig cfg;
  cfg.case_id = 3;
  cfg.n_total = 300;
  cfg.replications = 6;
  cfg.seed = 31;
  cfg.methods = {Method::AipwRcal};
  cfg.basis.knots_per_covariate = 8;
  cfg.true_beta_oracle_n = 20000;

  cfg.threads = 1;
  const std::string a = render_metrics_report(run_replications(cfg));
  cfg.threads = 2;
  const std::string b = render_metrics_report(run_replications(cfg));
  cfg.threads = 4;
  const std::string c = render_metrics_report(run_replications(cfg));
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.replications = 0;
  CHECK_THROWS_AS(run_replications(cfg), ConfigError);
  cfg.replications = 1;
  cfg.methods.clear();
  CHECK_THROWS_AS(run_replications(cfg), ConfigError);
}
