#include "ssreg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ssreg {

namespace {

constexpr double kExpCap = 30.0;  // linear predictors fed to exp stay in +-30

// Loss evaluation engine. The calibration loss is compacted: its slope is
// identically 1 on unlabeled rows, so those rows collapse into one fixed
// column sum and per-iteration work touches labeled rows only.
struct Evaluator {
  const PenalizedProblem& pb;
  long clamp_events = 0;

  bool compact = false;
  MatrixXd f_lab;          // labeled rows of the design (calibration only)
  VectorXd unlab_colsum;   // sum of unlabeled design rows
  int unlab_count = 0;
  VectorXd precond;        // fixed per-coordinate curvature scale

  explicit Evaluator(const PenalizedProblem& problem) : pb(problem) {
    if (pb.loss == LossKind::Calibration) {
      const MatrixXd& x = *pb.design;
      const int n = static_cast<int>(x.rows());
      int n_lab = 0;
      for (int i = 0; i < n; ++i) n_lab += pb.response[i] > 0.5;
      compact = true;
      unlab_count = n - n_lab;
      f_lab.resize(n_lab, x.cols());
      unlab_colsum = VectorXd::Zero(x.cols());
      int k = 0;
      for (int i = 0; i < n; ++i) {
        if (pb.response[i] > 0.5)
          f_lab.row(k++) = x.row(i);
        else
          unlab_colsum += x.row(i).transpose();
      }
    }
    build_preconditioner();
  }

  // Hinge columns span orders of magnitude in scale, so a scalar step
  // crawls. Each coordinate is scaled by its curvature proxy: the
  // (weighted) second moment of its design column.
  void build_preconditioner() {
    const int k = pb.coef_count();
    precond.resize(k);
    switch (pb.loss) {
      case LossKind::Calibration:
        precond = f_lab.array().square().colwise().sum().transpose();
        break;
      case LossKind::LogisticML:
        precond =
            0.25 * pb.design->array().square().colwise().sum().transpose();
        break;
      case LossKind::WeightedML:
      case LossKind::WeightedLS: {
        const Link link =
            pb.loss == LossKind::WeightedLS ? Link::identity() : pb.link;
        const double curv = link.mean_deriv(0.0);
        precond.setZero();
        for (int i = 0; i < pb.design->rows(); ++i) {
          const double v = pb.weights[i];
          if (v == 0.0) continue;
          precond += curv * v *
                     pb.design->row(i).array().square().matrix().transpose();
        }
        break;
      }
    }
    precond /= pb.divisor();
    const double mx = precond.maxCoeff();
    if (mx <= 0.0) {
      precond.setOnes();
      return;
    }
    precond = precond.cwiseMax(1e-12 * mx);
  }

  int predictor_rows() const {
    return compact ? static_cast<int>(f_lab.rows())
                   : static_cast<int>(pb.design->rows());
  }

  void predict(const VectorXd& coef, VectorXd& u) const {
    if (compact)
      u.noalias() = f_lab * coef;
    else
      u.noalias() = *pb.design * coef;
  }

  double value(const VectorXd& coef, const VectorXd& u) {
    const int n = static_cast<int>(u.size());
    double acc = 0.0;
    switch (pb.loss) {
      case LossKind::Calibration: {
        for (int i = 0; i < n; ++i) {
          double ui = u[i];
          if (ui < -kExpCap) {
            ++clamp_events;
            ui = -kExpCap;
          } else if (ui > kExpCap) {
            ++clamp_events;
            ui = kExpCap;
          }
          acc += std::exp(-ui);
        }
        acc += unlab_colsum.dot(coef);
        break;
      }
      case LossKind::LogisticML: {
        const Link logit = Link::logit();
        for (int i = 0; i < n; ++i)
          acc += logit.cumulant(u[i]) - pb.response[i] * u[i];
        break;
      }
      case LossKind::WeightedML:
      case LossKind::WeightedLS: {
        const Link link =
            pb.loss == LossKind::WeightedLS ? Link::identity() : pb.link;
        for (int i = 0; i < n; ++i) {
          const double v = pb.weights[i];
          if (v == 0.0) continue;
          acc += v * (link.cumulant(u[i]) - pb.response[i] * u[i]);
        }
        break;
      }
    }
    return acc / pb.divisor();
  }

  void gradient(const VectorXd& coef, const VectorXd& u, VectorXd& s,
                VectorXd& g) {
    (void)coef;
    const int n = static_cast<int>(u.size());
    s.resize(n);
    switch (pb.loss) {
      case LossKind::Calibration: {
        for (int i = 0; i < n; ++i)
          s[i] = -std::exp(-std::clamp(u[i], -kExpCap, kExpCap));
        g.noalias() = f_lab.transpose() * s;
        g += unlab_colsum;
        g /= pb.divisor();
        return;
      }
      case LossKind::LogisticML: {
        const Link logit = Link::logit();
        for (int i = 0; i < n; ++i) s[i] = logit.mean(u[i]) - pb.response[i];
        break;
      }
      case LossKind::WeightedML:
      case LossKind::WeightedLS: {
        const Link link =
            pb.loss == LossKind::WeightedLS ? Link::identity() : pb.link;
        for (int i = 0; i < n; ++i) {
          const double v = pb.weights[i];
          s[i] = v == 0.0 ? 0.0 : v * (link.mean(u[i]) - pb.response[i]);
        }
        break;
      }
    }
    g.noalias() = pb.design->transpose() * s;
    g /= pb.divisor();
  }

  // Exact minimization over the unpenalized intercept with the other
  // coordinates held fixed; a plain descent step. Updates coef and u.
  void polish_intercept(VectorXd& coef, VectorXd& u) {
    const int n = static_cast<int>(u.size());
    double shift = 0.0;
    switch (pb.loss) {
      case LossKind::Calibration: {
        // first-order condition: sum_labeled exp(-u_i) = #unlabeled
        if (n == 0 || unlab_count == 0) return;
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) mx = std::max(mx, coef[0] - u[i]);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += std::exp(coef[0] - u[i] - mx);
        shift = mx + std::log(sum) -
                std::log(static_cast<double>(unlab_count)) - coef[0];
        break;
      }
      case LossKind::LogisticML:
      case LossKind::WeightedML:
      case LossKind::WeightedLS: {
        const bool logistic = pb.loss == LossKind::LogisticML;
        const Link link = logistic                          ? Link::logit()
                          : pb.loss == LossKind::WeightedLS ? Link::identity()
                                                            : pb.link;
        if (link.kind == LinkKind::Identity) {
          double num = 0.0, den = 0.0;
          for (int i = 0; i < n; ++i) {
            const double v = logistic ? 1.0 : pb.weights[i];
            if (v == 0.0) continue;
            num += v * (pb.response[i] - (u[i] - coef[0]));
            den += v;
          }
          if (den <= 0.0) return;
          shift = num / den - coef[0];
        } else {
          double c = coef[0];
          for (int it = 0; it < 60; ++it) {
            double d1 = 0.0, d2 = 0.0;
            for (int i = 0; i < n; ++i) {
              const double v = logistic ? 1.0 : pb.weights[i];
              if (v == 0.0) continue;
              const double ui = u[i] - coef[0] + c;
              d1 += v * (link.mean(ui) - pb.response[i]);
              d2 += v * link.mean_deriv(ui);
            }
            if (d2 <= 0.0) break;
            const double delta = d1 / d2;
            c -= delta;
            if (std::abs(delta) < 1e-14 * std::max(1.0, std::abs(c))) break;
          }
          shift = c - coef[0];
        }
        break;
      }
    }
    if (shift != 0.0 && std::isfinite(shift)) {
      coef[0] += shift;
      u.array() += shift;
    }
  }
};

double penalty(const VectorXd& coef, double lambda,
               const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
  double acc = 0.0;
  for (int j = 0; j < coef.size(); ++j)
    if (mask[j]) acc += std::abs(coef[j]);
  return lambda * acc;
}

PenalizedProblem base_problem(LossKind kind, const MatrixXd& design,
                              double lambda) {
  PenalizedProblem pb;
  pb.loss = kind;
  pb.design = &design;
  pb.lambda = lambda;
  pb.penalized =
      Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(design.cols(), true);
  pb.penalized[0] = false;
  return pb;
}

}  // namespace

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::Calibration: return "calibration";
    case LossKind::WeightedML: return "weighted_ml";
    case LossKind::LogisticML: return "logistic_ml";
    case LossKind::WeightedLS: return "weighted_ls";
  }
  return "?";
}

PenalizedProblem PenalizedProblem::calibration(const MatrixXd& f,
                                               const VectorXi& r,
                                               double lambda) {
  PenalizedProblem pb = base_problem(LossKind::Calibration, f, lambda);
  pb.response = r.cast<double>();
  return pb;
}

PenalizedProblem PenalizedProblem::logistic_ml(const MatrixXd& f,
                                               const VectorXi& r,
                                               double lambda) {
  PenalizedProblem pb = base_problem(LossKind::LogisticML, f, lambda);
  pb.response = r.cast<double>();
  return pb;
}

PenalizedProblem PenalizedProblem::weighted_ml(const MatrixXd& g,
                                               const VectorXd& y,
                                               const VectorXi& r,
                                               const VectorXd& w, Link link,
                                               double lambda) {
  PenalizedProblem pb = base_problem(LossKind::WeightedML, g, lambda);
  pb.link = link;
  const int n = static_cast<int>(g.rows());
  pb.response.resize(n);
  pb.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const bool lab = r[i] == 1;
    pb.response[i] = lab ? y[i] : 0.0;
    pb.weights[i] = lab ? w[i] : 0.0;
    if (pb.weights[i] < 0.0)
      throw ConfigError("weighted loss requires nonnegative weights");
  }
  return pb;
}

PenalizedProblem PenalizedProblem::weighted_ls(const MatrixXd& g,
                                               const VectorXd& y,
                                               const VectorXi& r,
                                               const VectorXd& w,
                                               double lambda) {
  PenalizedProblem pb = weighted_ml(g, y, r, w, Link::identity(), lambda);
  pb.loss = LossKind::WeightedLS;
  return pb;
}

namespace {

LossValueGrad eval_loss(const PenalizedProblem& pb, const VectorXd& coef) {
  Evaluator ev(pb);
  LossValueGrad out;
  VectorXd u, s;
  ev.predict(coef, u);
  out.value = ev.value(coef, u);
  ev.gradient(coef, u, s, out.gradient);
  out.clamp_events = ev.clamp_events;
  return out;
}

}  // namespace

LossValueGrad loss_calibration(const VectorXd& gamma, const MatrixXd& f,
                               const VectorXi& r) {
  return eval_loss(PenalizedProblem::calibration(f, r, 0.0), gamma);
}

LossValueGrad loss_weighted_ml(const VectorXd& alpha, const MatrixXd& g,
                               const VectorXd& y, const VectorXi& r,
                               const VectorXd& w, Link link) {
  return eval_loss(PenalizedProblem::weighted_ml(g, y, r, w, link, 0.0),
                   alpha);
}

LossValueGrad loss_logistic_ml(const VectorXd& gamma, const MatrixXd& f,
                               const VectorXi& r) {
  return eval_loss(PenalizedProblem::logistic_ml(f, r, 0.0), gamma);
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double kkt_residual(const VectorXd& gradient, const VectorXd& coef,
                    double lambda,
                    const Eigen::Array<bool, Eigen::Dynamic, 1>& penalized) {
  double worst = 0.0;
  for (int j = 0; j < coef.size(); ++j) {
    const double gj = gradient[j];
    double viol;
    if (!penalized[j]) {
      viol = std::abs(gj);
    } else if (coef[j] == 0.0) {
      viol = std::max(std::abs(gj) - lambda, 0.0);
    } else {
      viol = std::abs(gj + (coef[j] > 0.0 ? lambda : -lambda));
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

namespace {

FitResult minimize_l1_dense(const PenalizedProblem& pb,
                            const SolverConfig& cfg,
                            const VectorXd* warm_start) {
  const int k = pb.coef_count();
  Evaluator ev(pb);

  VectorXd x = warm_start != nullptr ? *warm_start : VectorXd::Zero(k);
  if (x.size() != k) throw ConfigError("warm start has wrong dimension");
  VectorXd u(ev.predictor_rows());
  ev.predict(x, u);
  if (warm_start == nullptr) ev.polish_intercept(x, u);  // cold starts begin
                                                         // at the intercept-
                                                         // only optimum

  VectorXd s, g, cand(k), u_cand(ev.predictor_rows()), g_cand(k);
  double f = ev.value(x, u);
  if (!std::isfinite(f))
    throw SolverError(std::string("loss ") + loss_name(pb.loss) +
                      " is not finite at the starting point");
  ev.gradient(x, u, s, g);
  double obj = f + penalty(x, pb.lambda, pb.penalized);

  FitResult res;
  if (cfg.objective_trace != nullptr) cfg.objective_trace->push_back(obj);

  // Polish the intercept, refresh the state, and re-check the KKT
  // certificate; descent by construction.
  auto certify = [&]() -> bool {
    ev.polish_intercept(x, u);
    f = ev.value(x, u);
    ev.gradient(x, u, s, g);
    obj = f + penalty(x, pb.lambda, pb.penalized);
    res.kkt_residual = kkt_residual(g, x, pb.lambda, pb.penalized);
    return res.kkt_residual <= cfg.kkt_tolerance;
  };

  double step = cfg.initial_step;
  int it = 0;
  bool done = false;
  bool diverged = false;
  double window_best = std::numeric_limits<double>::infinity();
  double prev_window_best = std::numeric_limits<double>::infinity();

  if (kkt_residual(g, x, pb.lambda, pb.penalized) <= cfg.kkt_tolerance)
    done = certify();

  const VectorXd& pc = ev.precond;
  while (!done && !diverged && it < cfg.max_iterations) {
    ++it;
    bool accepted = false;
    double f_cand = 0.0;
    while (step >= 1e-18) {
      double model_quad = 0.0;
      for (int j = 0; j < k; ++j) {
        const double dj = step / pc[j];
        const double target = x[j] - dj * g[j];
        cand[j] =
            pb.penalized[j] ? soft_threshold(target, dj * pb.lambda) : target;
        const double dx = cand[j] - x[j];
        model_quad += pc[j] * dx * dx;
      }
      ev.predict(cand, u_cand);
      f_cand = ev.value(cand, u_cand);
      const double quad = f + g.dot(cand - x) + model_quad / (2.0 * step);
      const double obj_cand = f_cand + penalty(cand, pb.lambda, pb.penalized);
      // Accept on majorization, or on plain sufficient descent: the BB
      // step often breaks the quadratic bound while still making the
      // monotone progress the method is built around.
      if ((f_cand <= quad && obj_cand <= obj) ||
          obj_cand <= obj - 1e-5 * model_quad / (2.0 * step)) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack_shrink;
    }
    if (!accepted) {
      done = certify();  // cannot move: certify whatever we have
      break;
    }

    // The unpenalized intercept rides the strongest collinearity (hinge
    // columns are nonnegative); minimizing it exactly after every step
    // removes that slow direction. Plain descent, so monotonicity holds.
    ev.polish_intercept(cand, u_cand);
    f_cand = ev.value(cand, u_cand);

    ev.gradient(cand, u_cand, s, g_cand);

    // Barzilai-Borwein trial step in the preconditioned metric. The
    // intercept is excluded: it is minimized exactly, so the spectral
    // pair lives on the remaining block (envelope gradient).
    double sty = 0.0, sps = 0.0;
    for (int j = 1; j < k; ++j) {
      const double dj = cand[j] - x[j];
      sty += dj * (g_cand[j] - g[j]);
      sps += pc[j] * dj * dj;
    }
    if (k == 1) {
      sty = (cand[0] - x[0]) * (g_cand[0] - g[0]);
      sps = pc[0] * (cand[0] - x[0]) * (cand[0] - x[0]);
    }
    step = sty > 0.0 ? std::clamp(sps / sty, 1e-10, 1e10) : step * 2.0;

    const double prev_obj = obj;
    x.swap(cand);
    u.swap(u_cand);
    g.swap(g_cand);
    f = f_cand;
    obj = f + penalty(x, pb.lambda, pb.penalized);
    if (!std::isfinite(obj))
      throw SolverError(std::string("loss ") + loss_name(pb.loss) +
                        " diverged (objective is not finite)");
    if (cfg.objective_trace != nullptr) cfg.objective_trace->push_back(obj);

    // Unbounded problems (e.g. calibration under separation) walk off to
    // infinity; stop once the iterate leaves any plausible region.
    if (x.lpNorm<Eigen::Infinity>() > cfg.divergence_bound) {
      diverged = true;
      break;
    }

    const double kkt = kkt_residual(g, x, pb.lambda, pb.penalized);
    window_best = std::min(window_best, kkt);
    const bool flat = std::abs(prev_obj - obj) <=
                      cfg.tolerance * std::max(1.0, std::abs(obj));
    if (kkt <= cfg.kkt_tolerance || flat) done = certify();

    // Stagnation guard for the unbounded regime: the certificate plateaus
    // far above tolerance while the iterate wanders.
    if (!done && it % 1000 == 0) {
      if (window_best > 0.7 * prev_window_best &&
          window_best > 1e3 * cfg.kkt_tolerance)
        break;
      prev_window_best = window_best;
      window_best = std::numeric_limits<double>::infinity();
    }
  }

  if (!done && !diverged && it >= cfg.max_iterations) done = certify();

  res.coefficients = std::move(x);
  res.objective = obj;
  res.iterations = it;
  res.converged = done;
  res.clamp_events = ev.clamp_events;
  if (!done)
    res.kkt_residual = kkt_residual(g, res.coefficients, pb.lambda,
                                    pb.penalized);
  return res;
}

}  // namespace

FitResult minimize_l1(const PenalizedProblem& pb, const SolverConfig& cfg,
                      const VectorXd* warm_start) {
  if (pb.design == nullptr)
    throw ConfigError("penalized problem has no design");
  if (pb.penalized.size() != pb.coef_count() || pb.penalized[0])
    throw ConfigError(
        "penalized mask must match the design and leave the intercept free");
  if (pb.lambda < 0.0) throw ConfigError("lambda must be nonnegative");

  const int k = pb.coef_count();
  if (warm_start != nullptr && warm_start->size() != k)
    throw ConfigError("warm start has wrong dimension");
  if (pb.lambda == 0.0 || k <= 33)
    return minimize_l1_dense(pb, cfg, warm_start);

  // Working-set strategy: run the proximal-gradient solver on the columns
  // that are active or violate the KKT margin, then re-check the full
  // gradient and grow the set until no violators remain.
  Evaluator full_ev(pb);
  VectorXd x = warm_start != nullptr ? *warm_start : VectorXd::Zero(k);
  VectorXd u(full_ev.predictor_rows()), s, g;
  full_ev.predict(x, u);
  if (warm_start == nullptr) full_ev.polish_intercept(x, u);
  full_ev.gradient(x, u, s, g);

  const double margin = 0.5 * cfg.kkt_tolerance;
  std::vector<char> in_set(k, 0);
  std::vector<int> working;
  working.push_back(0);
  in_set[0] = 1;
  for (int j = 1; j < k; ++j) {
    const double viol = std::max(std::abs(g[j]) - pb.lambda, 0.0);
    if (x[j] != 0.0 || viol > margin) {
      working.push_back(j);
      in_set[j] = 1;
    }
  }

  FitResult res;
  long iters = 0;
  long clamps = 0;
  SolverConfig sub_cfg = cfg;
  sub_cfg.kkt_tolerance = margin;
  const int n_rows = static_cast<int>(pb.design->rows());

  for (int round = 0; round < 60; ++round) {
    MatrixXd sub(n_rows, static_cast<int>(working.size()));
    for (std::size_t c = 0; c < working.size(); ++c)
      sub.col(static_cast<int>(c)) = pb.design->col(working[c]);
    PenalizedProblem spb = pb;
    spb.design = &sub;
    spb.penalized.resize(working.size());
    for (std::size_t c = 0; c < working.size(); ++c)
      spb.penalized[static_cast<int>(c)] = pb.penalized[working[c]];
    VectorXd warm_sub(static_cast<int>(working.size()));
    for (std::size_t c = 0; c < working.size(); ++c)
      warm_sub[static_cast<int>(c)] = x[working[c]];

    FitResult sub_res = minimize_l1_dense(spb, sub_cfg, &warm_sub);
    iters += sub_res.iterations;
    clamps += sub_res.clamp_events;
    for (std::size_t c = 0; c < working.size(); ++c)
      x[working[c]] = sub_res.coefficients[static_cast<int>(c)];

    full_ev.predict(x, u);
    full_ev.gradient(x, u, s, g);
    res.kkt_residual = kkt_residual(g, x, pb.lambda, pb.penalized);
    if (!sub_res.converged) {
      res.converged = false;
      break;
    }
    bool grew = false;
    for (int j = 1; j < k; ++j) {
      if (in_set[j]) continue;
      if (std::abs(g[j]) - pb.lambda > margin) {
        working.push_back(j);
        in_set[j] = 1;
        grew = true;
      }
    }
    if (!grew) {
      res.converged = res.kkt_residual <= cfg.kkt_tolerance;
      break;
    }
  }

  res.coefficients = x;
  res.objective =
      full_ev.value(x, u) + penalty(x, pb.lambda, pb.penalized);
  res.iterations = static_cast<int>(std::min<long>(iters, INT32_MAX));
  res.clamp_events = clamps + full_ev.clamp_events;
  return res;
}

std::vector<FitResult> minimize_l1_path(const PenalizedProblem& problem,
                                        const VectorXd& lambda_grid,
                                        const SolverConfig& config) {
  if (lambda_grid.size() == 0) throw ConfigError("empty lambda grid");
  for (int i = 1; i < lambda_grid.size(); ++i)
    if (lambda_grid[i] > lambda_grid[i - 1])
      throw ConfigError("lambda grid must be sorted descending");

  std::vector<FitResult> out;
  out.reserve(lambda_grid.size());
  PenalizedProblem pb = problem;
  const VectorXd* warm = nullptr;
  for (int i = 0; i < lambda_grid.size(); ++i) {
    pb.lambda = lambda_grid[i];
    out.push_back(minimize_l1(pb, config, warm));
    warm = &out.back().coefficients;
  }
  return out;
}

double lambda_max(const PenalizedProblem& problem) {
  PenalizedProblem pb = problem;
  pb.lambda = 0.0;
  Evaluator ev(pb);
  VectorXd coef = VectorXd::Zero(pb.coef_count());
  VectorXd u(ev.predictor_rows());
  ev.predict(coef, u);
  ev.polish_intercept(coef, u);
  VectorXd s, g;
  ev.gradient(coef, u, s, g);
  double mx = 0.0;
  for (int j = 0; j < coef.size(); ++j)
    if (pb.penalized[j]) mx = std::max(mx, std::abs(g[j]));
  return mx;
}

}  // namespace ssreg
