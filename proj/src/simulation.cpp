#include "ssreg/simulation.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

namespace ssreg {

namespace {

Eigen::Matrix3d covariate_chol() {
  Eigen::Matrix3d sigma;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) sigma(i, j) = std::pow(2.0, -std::abs(i - j));
  return sigma.llt().matrixL();
}

double noise_sd(bool noise_is_variance) {
  return noise_is_variance ? std::sqrt(0.1) : 0.1;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (0xbf58476d1ce4e5b9ULL * (tag + 1));
  return splitmix64_next(s);
}

}  // namespace

TargetSpec case_target(int case_id) {
  TargetSpec spec;
  spec.estimand = Estimand::Population;
  switch (case_id) {
    case 1:
    case 2: break;
    case 3:
    case 4: spec.z_columns = {1}; break;
    case 5: spec.z_columns = {1, 2, 3}; break;
    default: throw ConfigError("case must be 1..5");
  }
  return spec;
}

MatrixXd gen_covariates(int n, Rng& rng) {
  static const Eigen::Matrix3d chol = covariate_chol();
  MatrixXd x(n, 4);
  x.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d raw(rng.normal(), rng.normal(), rng.normal());
    Eigen::Vector3d v = chol * raw;
    for (int j = 0; j < 3; ++j)
      x(i, j + 1) = std::clamp(v[j], -3.0, 3.0);
  }
  return x;
}

VectorXi gen_labels(const MatrixXd& f, Rng& rng) {
  if (f.cols() < 4)
    throw ConfigError("label model needs at least three hinge columns of X1");
  const int n = static_cast<int>(f.rows());
  VectorXd gamma = VectorXd::Zero(f.cols());
  gamma[0] = -1.5;
  gamma[1] = -0.8;
  gamma[2] = -0.2;
  gamma[3] = 0.3;
  const VectorXd eta = f * gamma;
  VectorXi r(n);
  const Link logit = Link::logit();
  for (int i = 0; i < n; ++i)
    r[i] = rng.uniform01() < logit.mean(eta[i]) ? 1 : 0;
  return r;
}

VectorXd gen_outcome(int case_id, const MatrixXd& x, Rng& rng,
                     double noise_sd) {
  const int n = static_cast<int>(x.rows());
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double x1 = x(i, 1), x2 = x(i, 2), x3 = x(i, 3);
    double mean = 0.0;
    switch (case_id) {
      case 1: {
        auto t = [](double v) {
          const double a = std::abs(v);
          return v * std::pow(a, 0.1) + v * std::pow(a, 0.3) +
                 v * std::pow(a, 0.5);
        };
        mean = -0.2 + 0.1 * t(x1) + 0.4 * t(x2) + 0.7 * t(x3);
        break;
      }
      case 2: {
        auto t = [](double v) {
          const double a = std::abs(v);
          return a * std::exp(std::pow(a, 0.1) + std::pow(a, 0.3));
        };
        mean = -0.2 + 0.1 * t(x1) + 0.4 * t(x2) + 0.7 * t(x3);
        break;
      }
      case 3:
        mean = 0.4 * (x1 + x1 * x1) +
               0.2 * std::cos(M_PI / 9.0 * x1 * x3);
        break;
      case 4:
        mean = 0.4 * (x1 > 0.0 ? x1 * std::sqrt(std::abs(x1)) : 0.0) +
               0.2 * x1 * x2;
        break;
      case 5:
        mean = -0.2 + 0.1 * x1 * x2 + 0.4 * x2 * x3 + 0.7 * x1 * x3;
        break;
      default:
        throw ConfigError("case must be 1..5");
    }
    y[i] = mean + noise_sd * rng.normal();
  }
  return y;
}

VectorXd true_beta(int case_id, const TargetSpec& spec, int oracle_n,
                   std::uint64_t seed, bool noise_is_variance) {
  if (oracle_n < 1000) throw ConfigError("true-beta oracle sample too small");
  using Key = std::tuple<int, std::string, int, std::uint64_t, bool>;
  static std::map<Key, VectorXd> cache;
  static std::mutex mu;

  std::string zkey;
  for (int c : spec.z_columns) zkey += std::to_string(c) + ",";
  const Key key{case_id, zkey, oracle_n, seed, noise_is_variance};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }

  Rng rng(seed, 0x7472756562657461ULL);
  const MatrixXd x = gen_covariates(oracle_n, rng);
  const VectorXd y =
      gen_outcome(case_id, x, rng, noise_sd(noise_is_variance));
  Dataset oracle = Dataset::make(x, y, VectorXi::Ones(oracle_n));
  const MatrixXd z = extract_z(oracle, spec);
  const int m = static_cast<int>(z.cols());

  MatrixXd a = MatrixXd::Zero(m, m);
  VectorXd b = VectorXd::Zero(m);
  for (int i = 0; i < oracle_n; ++i) {
    a.noalias() += z.row(i).transpose() * z.row(i);
    b += y[i] * z.row(i).transpose();
  }
  VectorXd beta = solve_spd(a / oracle_n, b / oracle_n, "true-beta oracle");

  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, beta);
  return beta;
}

namespace {

struct RepOutcome {
  // per method: estimate, se, and CI hits at the two levels
  std::vector<VectorXd> beta;
  std::vector<VectorXd> se;
  std::vector<std::vector<bool>> hit90, hit95;
  std::vector<bool> failed;
};

RepOutcome run_one(const SimConfig& cfg, const TargetSpec& target,
                   const VectorXd& truth, int rep) {
  const int m = target.dimension();
  RepOutcome out;
  const int nm = static_cast<int>(cfg.methods.size());
  out.beta.assign(nm, VectorXd::Constant(m, std::nan("")));
  out.se.assign(nm, VectorXd::Constant(m, std::nan("")));
  out.hit90.assign(nm, std::vector<bool>(m, false));
  out.hit95.assign(nm, std::vector<bool>(m, false));
  out.failed.assign(nm, false);

  Rng rng(cfg.seed, static_cast<std::uint64_t>(rep) + 1);
  const MatrixXd x = gen_covariates(cfg.n_total, rng);
  const MatrixXd f = build_ps_basis(x, cfg.basis);
  const VectorXi r = gen_labels(f, rng);
  VectorXd y =
      gen_outcome(cfg.case_id, x, rng, noise_sd(cfg.noise_is_variance));
  for (int i = 0; i < cfg.n_total; ++i)
    if (r[i] == 0) y[i] = std::nan("");
  const Dataset data = Dataset::make(x, y, r);

  for (int mi = 0; mi < nm; ++mi) {
    FitOptions opt;
    opt.method = cfg.methods[mi];
    opt.target = target;
    opt.link = Link::identity();
    opt.basis = cfg.basis;
    opt.folds = cfg.folds;
    opt.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep) * 8 + mi);
    opt.solver = cfg.solver;
    opt.levels = {0.90, 0.95};
    opt.or_interactions = cfg.or_interactions;
    try {
      const EstimateReport er = run_fit(data, opt);
      out.beta[mi] = er.beta;
      if (er.has_variance) {
        out.se[mi] = er.se;
        for (int j = 0; j < m; ++j) {
          out.hit90[mi][j] = er.ci_lower(j, 0) <= truth[j] &&
                             truth[j] <= er.ci_upper(j, 0);
          out.hit95[mi][j] = er.ci_lower(j, 1) <= truth[j] &&
                             truth[j] <= er.ci_upper(j, 1);
        }
      }
    } catch (const Error&) {
      out.failed[mi] = true;
    }
  }
  return out;
}

}  // namespace

MetricsReport run_replications(const SimConfig& cfg) {
  if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
  if (cfg.methods.empty()) throw ConfigError("no methods requested");
  const TargetSpec target = case_target(cfg.case_id);
  const int m = target.dimension();
  const VectorXd truth =
      true_beta(cfg.case_id, target, cfg.true_beta_oracle_n,
                mix_seed(cfg.seed, 0x5452554542455441ULL),
                cfg.noise_is_variance);

  const int reps = cfg.replications;
  std::vector<RepOutcome> slots(reps);
  std::atomic<int> next{0};
  int nthreads = cfg.threads > 0
                     ? cfg.threads
                     : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min(nthreads, reps));

  auto worker = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= reps) return;
      slots[rep] = run_one(cfg, target, truth, rep);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads - 1);
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  MetricsReport report;
  report.case_id = cfg.case_id;
  report.n_total = cfg.n_total;
  report.replications = reps;
  report.seed = cfg.seed;
  report.true_beta = truth;

  const int nm = static_cast<int>(cfg.methods.size());
  for (int mi = 0; mi < nm; ++mi) {
    MethodMetrics mm;
    mm.method = cfg.methods[mi];
    mm.has_variance = cfg.methods[mi] != Method::Ipw;

    MatrixXd raw_beta = MatrixXd::Constant(reps, m, std::nan(""));
    MatrixXd raw_se = MatrixXd::Constant(reps, m, std::nan(""));
    VectorXd sum = VectorXd::Zero(m), sumsq = VectorXd::Zero(m);
    VectorXd evar_sum = VectorXd::Zero(m);
    VectorXd h90 = VectorXd::Zero(m), h95 = VectorXd::Zero(m);
    int used = 0;
    for (int rep = 0; rep < reps; ++rep) {
      const RepOutcome& ro = slots[rep];
      if (ro.failed[mi]) continue;
      ++used;
      raw_beta.row(rep) = ro.beta[mi];
      raw_se.row(rep) = ro.se[mi];
      sum += ro.beta[mi];
      sumsq.array() += ro.beta[mi].array().square();
      if (mm.has_variance) {
        evar_sum.array() += ro.se[mi].array().square() ;
        for (int j = 0; j < m; ++j) {
          h90[j] += ro.hit90[mi][j] ? 1.0 : 0.0;
          h95[j] += ro.hit95[mi][j] ? 1.0 : 0.0;
        }
      }
    }
    mm.failures = reps - used;
    mm.replications_used = used;
    if (mm.failures * 20 > reps)
      throw RunError("more than 5% of replications failed for method " +
                     std::string(method_name(cfg.methods[mi])));
    const VectorXd mean = sum / used;
    mm.bias = mean - truth;
    if (used > 1) {
      mm.sqrt_var = ((sumsq.array() - used * mean.array().square()) /
                     (used - 1)).max(0.0).sqrt();
    } else {
      mm.sqrt_var = VectorXd::Constant(m, std::nan(""));
    }
    if (mm.has_variance) {
      mm.sqrt_evar = (evar_sum / used).cwiseSqrt();
      mm.cp90 = h90 / used;
      mm.cp95 = h95 / used;
    }
    report.metrics.push_back(std::move(mm));
    report.raw_beta.push_back(std::move(raw_beta));
    report.raw_se.push_back(std::move(raw_se));
  }
  return report;
}

}  // namespace ssreg
