#include "ssreg/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ssreg/rng.hpp"

namespace ssreg {

namespace {

constexpr double kExpCap = 30.0;

MatrixXd take_rows(const MatrixXd& m, const std::vector<int>& rows) {
  MatrixXd out(static_cast<int>(rows.size()), m.cols());
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    out.row(i) = m.row(rows[i]);
  return out;
}

VectorXd take(const VectorXd& v, const std::vector<int>& rows) {
  VectorXd out(static_cast<int>(rows.size()));
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) out[i] = v[rows[i]];
  return out;
}

VectorXi take(const VectorXi& v, const std::vector<int>& rows) {
  VectorXi out(static_cast<int>(rows.size()));
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) out[i] = v[rows[i]];
  return out;
}

void validate_grid(const VectorXd& grid) {
  if (grid.size() == 0) throw ConfigError("lambda grid is empty");
  for (int i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0) throw ConfigError("lambda grid has a negative value");
    if (i > 0 && grid[i] > grid[i - 1])
      throw ConfigError("lambda grid must be sorted descending");
  }
}

std::vector<int> active_coords(const VectorXd& coef) {
  std::vector<int> out;
  for (int j = 1; j < coef.size(); ++j)
    if (coef[j] != 0.0) out.push_back(j);
  return out;
}

VectorXd clamped_inv_odds(const VectorXd& eta) {
  return (-eta.array().min(kExpCap).max(-kExpCap)).exp();
}

// Inner cross-validation fits score candidate penalties; they run with a
// relaxed certificate, and the full-sample logistic fits (the only ones
// whose iterations touch every row) get a hard iteration cap. Only the
// final full-sample fit carries the strict KKT certificate.
SolverConfig relaxed_cv_config(const SolverConfig& cfg, bool row_heavy) {
  SolverConfig out = cfg;
  if (row_heavy) {
    out.kkt_tolerance = std::max(cfg.kkt_tolerance, 1e-4);
    out.max_iterations = std::min(cfg.max_iterations, 1200);
  }
  return out;
}

// Weighted GLM loss averaged over the given rows only (its own sample mean),
// used as the held-out score for the weighted OR family.
double held_out_wl(const MatrixXd& g, const VectorXd& y, const VectorXi& r,
                   const VectorXd& w, Link link, const std::vector<int>& rows,
                   const VectorXd& coef) {
  double acc = 0.0;
  for (int i : rows) {
    if (r[i] != 1) continue;
    const double u = g.row(i).dot(coef);
    acc += w[i] * (link.cumulant(u) - y[i] * u);
  }
  return acc / static_cast<double>(rows.size());
}

struct PsLossSpec {
  PsMethod method;
  PenalizedProblem make(const MatrixXd& f, const VectorXi& r) const {
    return method == PsMethod::Rcal ? PenalizedProblem::calibration(f, r, 0.0)
                                    : PenalizedProblem::logistic_ml(f, r, 0.0);
  }
  double held_out(const MatrixXd& f, const VectorXi& r,
                  const VectorXd& coef) const {
    return method == PsMethod::Rcal ? loss_calibration(coef, f, r).value
                                    : loss_logistic_ml(coef, f, r).value;
  }
};

PSFit fit_ps_impl(PsMethod method, const MatrixXd& f, const VectorXi& r,
                  VectorXd grid, int folds, const SolverConfig& cfg,
                  std::uint64_t seed) {
  const int n_rows = static_cast<int>(f.rows());
  const int n_lab = (r.array() == 1).count();
  if (n_lab == 0 || n_lab == n_rows)
    throw EstimandError("propensity fit needs both labeled and unlabeled rows");
  if (r.size() != n_rows) throw ConfigError("r does not match the design");

  const PsLossSpec spec{method};
  if (grid.size() == 0) {
    PenalizedProblem base = spec.make(f, r);
    grid = default_lambda_grid(lambda_max(base));
  }
  validate_grid(grid);

  PSFit out;
  out.method = method;

  int chosen = static_cast<int>(grid.size()) - 1;
  if (folds != 0) {
    const SolverConfig cv_cfg = relaxed_cv_config(cfg, method == PsMethod::Rml);
    CvFamily family;
    family.n_rows = n_rows;
    family.labels = &r;
    family.fit_path = [&](int, const std::vector<int>& rows,
                          const VectorXd& g) {
      const MatrixXd f_t = take_rows(f, rows);
      const VectorXi r_t = take(r, rows);
      if ((r_t.array() == 1).count() == 0 || (r_t.array() == 0).count() == 0)
        throw DataError("training fold lost one of the label classes");
      PenalizedProblem pb = spec.make(f_t, r_t);
      std::vector<FitResult> path = minimize_l1_path(pb, g, cv_cfg);
      std::vector<PathPoint> points;
      points.reserve(path.size());
      for (auto& fr : path)
        points.push_back({std::move(fr.coefficients), fr.converged});
      return points;
    };
    family.held_out_loss = [&](int, const std::vector<int>& rows,
                               const VectorXd& coef) {
      return spec.held_out(take_rows(f, rows), take(r, rows), coef);
    };
    CvSelection sel = select_lambda_cv(family, grid, folds, seed);
    chosen = sel.lambda_index;
    out.cv_curve = sel.curve;
    out.fold_of_row = std::move(sel.fold_of_row);
    out.fold_eta.reserve(sel.fold_paths.size());
    for (const auto& path : sel.fold_paths)
      out.fold_eta.push_back(f * path[chosen].coef);
  }

  PenalizedProblem pb = spec.make(f, r);
  std::vector<FitResult> path =
      minimize_l1_path(pb, grid.head(chosen + 1), cfg);
  // If the full-sample fit at the selected penalty walked an unbounded
  // direction, move up to the smallest grid value that does converge.
  int take_idx = chosen;
  while (take_idx > 0 && !path[take_idx].converged) --take_idx;
  if (!path[take_idx].converged)
    throw SolverError("no convergent propensity fit on the lambda grid");
  out.fit = path[take_idx];
  out.gamma = out.fit.coefficients;
  out.lambda_gamma = grid[take_idx];
  out.active_set = active_coords(out.gamma);
  const VectorXd eta = f * out.gamma;
  out.w_hat = clamped_inv_odds(eta);
  out.pi_hat = (1.0 + out.w_hat.array()).inverse();
  return out;
}

}  // namespace

const char* ps_method_name(PsMethod m) {
  switch (m) {
    case PsMethod::Rcal: return "rcal";
    case PsMethod::Rml: return "rml";
    case PsMethod::Constant: return "constant";
  }
  return "?";
}

const char* or_method_name(OrMethod m) {
  switch (m) {
    case OrMethod::Rwl: return "rwl";
    case OrMethod::Unweighted: return "unweighted";
  }
  return "?";
}

VectorXd default_lambda_grid(double lambda_max_value, int count,
                             double min_ratio) {
  if (count < 1) throw ConfigError("lambda grid needs at least one value");
  if (lambda_max_value <= 0.0) return VectorXd::Zero(1);
  VectorXd grid(count);
  if (count == 1) {
    grid[0] = lambda_max_value;
    return grid;
  }
  for (int i = 0; i < count; ++i)
    grid[i] = lambda_max_value *
              std::pow(min_ratio, static_cast<double>(i) / (count - 1));
  return grid;
}

std::vector<int> make_folds(int n_rows, int folds, std::uint64_t seed,
                            const VectorXi& r) {
  if (folds < 2) throw ConfigError("cross-validation needs folds >= 2");
  if (folds > n_rows) throw ConfigError("more folds than rows");
  const int total_unlabeled = (r.array() == 0).count();

  for (int attempt = 0; attempt < 10; ++attempt) {
    Rng rng(seed + static_cast<std::uint64_t>(attempt));
    std::vector<int> perm(n_rows);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n_rows - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

    std::vector<int> fold_of_row(n_rows);
    const int base = n_rows / folds;
    const int extra = n_rows % folds;
    int pos = 0;
    for (int k = 0; k < folds; ++k) {
      const int size = base + (k < extra ? 1 : 0);
      for (int i = 0; i < size; ++i) fold_of_row[perm[pos++]] = k;
    }

    std::vector<int> labeled(folds, 0), unlabeled(folds, 0);
    for (int i = 0; i < n_rows; ++i)
      (r[i] == 1 ? labeled : unlabeled)[fold_of_row[i]]++;
    bool ok = true;
    for (int k = 0; k < folds; ++k) {
      if (labeled[k] == 0) ok = false;
      if (total_unlabeled > 0 && unlabeled[k] == total_unlabeled) ok = false;
    }
    if (ok) return fold_of_row;
  }
  throw DataError(
      "could not build folds with labeled rows in every fold (10 attempts)");
}

CvSelection select_lambda_cv_with_folds(const CvFamily& family,
                                        const VectorXd& grid,
                                        const std::vector<int>& fold_of_row) {
  validate_grid(grid);
  if (static_cast<int>(fold_of_row.size()) != family.n_rows)
    throw ConfigError("fold assignment does not match the sample");
  const int folds = 1 + *std::max_element(fold_of_row.begin(),
                                          fold_of_row.end());
  if (folds < 2) throw ConfigError("cross-validation needs folds >= 2");

  CvSelection sel;
  sel.fold_of_row = fold_of_row;
  sel.curve = VectorXd::Zero(grid.size());
  sel.fold_paths.resize(folds);

  VectorXd scored = VectorXd::Zero(grid.size());
  for (int k = 0; k < folds; ++k) {
    std::vector<int> train, val;
    for (int i = 0; i < family.n_rows; ++i)
      (fold_of_row[i] == k ? val : train).push_back(i);
    if (train.empty() || val.empty())
      throw ConfigError("empty cross-validation fold");
    sel.fold_paths[k] = family.fit_path(k, train, grid);
    if (static_cast<int>(sel.fold_paths[k].size()) != grid.size())
      throw ConfigError("path fit returned wrong number of solutions");
    for (int i = 0; i < grid.size(); ++i) {
      const PathPoint& pt = sel.fold_paths[k][i];
      const double loss = family.held_out_loss(k, val, pt.coef);
      scored[i] += loss;
      sel.curve[i] +=
          pt.converged ? loss : std::numeric_limits<double>::infinity();
    }
  }
  sel.curve /= static_cast<double>(folds);
  scored /= static_cast<double>(folds);

  sel.lambda_index = -1;
  for (int i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(sel.curve[i])) continue;
    if (sel.lambda_index < 0 || sel.curve[i] < sel.curve[sel.lambda_index])
      sel.lambda_index = i;
  }
  if (sel.lambda_index < 0) {
    // Tiny folds can leave every grid value with some non-convergent
    // training fit. Fall back to the clamped held-out scores, which rank
    // runaway fits honestly badly.
    sel.lambda_index = 0;
    for (int i = 1; i < grid.size(); ++i)
      if (scored[i] < scored[sel.lambda_index]) sel.lambda_index = i;
  }
  sel.lambda = grid[sel.lambda_index];
  return sel;
}

CvSelection select_lambda_cv(const CvFamily& family, const VectorXd& grid,
                             int folds, std::uint64_t seed) {
  if (family.labels == nullptr)
    throw ConfigError("cv family needs the label vector");
  return select_lambda_cv_with_folds(
      family, grid, make_folds(family.n_rows, folds, seed, *family.labels));
}

PSFit fit_ps_rcal(const MatrixXd& f, const VectorXi& r, VectorXd lambda_grid,
                  int folds, const SolverConfig& config, std::uint64_t seed) {
  return fit_ps_impl(PsMethod::Rcal, f, r, std::move(lambda_grid), folds,
                     config, seed);
}

PSFit fit_ps_rml(const MatrixXd& f, const VectorXi& r, VectorXd lambda_grid,
                 int folds, const SolverConfig& config, std::uint64_t seed) {
  return fit_ps_impl(PsMethod::Rml, f, r, std::move(lambda_grid), folds,
                     config, seed);
}

PSFit constant_ps(int n_rows, int n_labeled) {
  if (n_labeled <= 0 || n_rows <= 0)
    throw EstimandError("constant PS needs labeled rows");
  PSFit out;
  out.method = PsMethod::Constant;
  const double pi = static_cast<double>(n_labeled) / n_rows;
  out.gamma = VectorXd::Constant(1, std::log(pi / (1.0 - pi)));
  out.pi_hat = VectorXd::Constant(n_rows, pi);
  out.w_hat = VectorXd::Constant(n_rows, (1.0 - pi) / pi);
  out.fit.converged = true;
  return out;
}

namespace {

// Fold-specific inverse-odds weights for the nested OR cross-validation.
VectorXd fold_weights(const PSFit& ps, const VectorXi& r,
                      const std::vector<int>& fold_of_row, int fold,
                      int n_rows) {
  if (ps.method == PsMethod::Constant) {
    int lab = 0, tot = 0;
    for (int i = 0; i < n_rows; ++i) {
      if (fold_of_row[i] == fold) continue;  // training complement
      ++tot;
      lab += r[i] == 1;
    }
    if (lab == 0 || lab == tot)
      throw DataError("constant PS degenerate on a training fold");
    const double pi = static_cast<double>(lab) / tot;
    return VectorXd::Constant(n_rows, (1.0 - pi) / pi);
  }
  if (fold < 0 || fold >= static_cast<int>(ps.fold_eta.size()))
    throw ConfigError(
        "weighted OR cross-validation needs fold-aligned PS fits");
  return clamped_inv_odds(ps.fold_eta[fold]);
}

ORFit fit_or_impl(OrMethod method, const MatrixXd& g, const VectorXd& y,
                  const VectorXi& r, const PSFit* ps, Link link,
                  VectorXd grid, int folds, const SolverConfig& cfg,
                  std::uint64_t seed) {
  const int n_rows = static_cast<int>(g.rows());
  if (y.size() != n_rows || r.size() != n_rows)
    throw ConfigError("g, y, r are not row-aligned");
  const int n_lab = (r.array() == 1).count();
  if (n_lab == 0) throw DataError("outcome fit needs labeled rows");

  VectorXd w_full;
  if (method == OrMethod::Rwl) {
    if (ps == nullptr) throw ConfigError("weighted OR fit needs a PS fit");
    if (ps->pi_hat.size() != n_rows)
      throw ConfigError("PS fit is not row-aligned with the OR design");
    w_full = ps->w_hat;
    double mx = 0.0;
    for (int i = 0; i < n_rows; ++i)
      if (r[i] == 1) mx = std::max(mx, w_full[i]);
    if (mx == 0.0)
      throw DataError("degenerate weighted OR fit: zero weight on every "
                      "labeled row");
  } else {
    w_full = VectorXd::Ones(n_rows);
  }

  // Compact to labeled rows; the loss keeps the full-sample divisor.
  std::vector<int> lab_rows;
  lab_rows.reserve(n_lab);
  for (int i = 0; i < n_rows; ++i)
    if (r[i] == 1) lab_rows.push_back(i);

  auto make_problem = [&](const MatrixXd& design, const VectorXd& resp,
                          const VectorXd& wts, double divisor) {
    VectorXi ones = VectorXi::Ones(design.rows());
    PenalizedProblem pb =
        method == OrMethod::Rwl
            ? PenalizedProblem::weighted_ml(design, resp, ones, wts, link, 0.0)
            : (link.kind == LinkKind::Identity
                   ? PenalizedProblem::weighted_ls(design, resp, ones, wts, 0.0)
                   : PenalizedProblem::weighted_ml(design, resp, ones, wts,
                                                   link, 0.0));
    pb.mean_divisor = divisor;
    return pb;
  };

  const MatrixXd g_lab = take_rows(g, lab_rows);
  const VectorXd y_lab = take(y, lab_rows);

  if (grid.size() == 0) {
    const VectorXd w_lab = take(w_full, lab_rows);
    PenalizedProblem base =
        make_problem(g_lab, y_lab, w_lab, static_cast<double>(n_rows));
    grid = default_lambda_grid(lambda_max(base));
  }
  validate_grid(grid);

  ORFit out;
  out.method = method;
  out.link = link;

  int chosen = static_cast<int>(grid.size()) - 1;
  if (folds != 0) {
    const SolverConfig cv_cfg = relaxed_cv_config(cfg, false);
    std::vector<int> fold_of_row;
    if (method == OrMethod::Rwl && ps->method != PsMethod::Constant) {
      if (static_cast<int>(ps->fold_eta.size()) != folds ||
          static_cast<int>(ps->fold_of_row.size()) != n_rows)
        throw ConfigError(
            "weighted OR cross-validation needs a PS fit cross-validated "
            "with the same fold count");
      fold_of_row = ps->fold_of_row;
    } else {
      fold_of_row = make_folds(n_rows, folds, seed, r);
    }

    // Per-fold weight vectors (full length); unit weights when unweighted.
    std::vector<VectorXd> w_fold(folds);
    for (int k = 0; k < folds; ++k)
      w_fold[k] = method == OrMethod::Rwl
                      ? fold_weights(*ps, r, fold_of_row, k, n_rows)
                      : VectorXd::Ones(n_rows);

    CvFamily family;
    family.n_rows = n_rows;
    family.labels = &r;
    family.fit_path = [&](int fold, const std::vector<int>& rows,
                          const VectorXd& gr) {
      std::vector<int> lab;
      for (int i : rows)
        if (r[i] == 1) lab.push_back(i);
      if (lab.empty()) throw DataError("training fold has no labeled rows");
      const MatrixXd design = take_rows(g, lab);
      const VectorXd resp = take(y, lab);
      const VectorXd wts = take(w_fold[fold], lab);
      PenalizedProblem pb = make_problem(design, resp, wts,
                                         static_cast<double>(rows.size()));
      std::vector<FitResult> path = minimize_l1_path(pb, gr, cv_cfg);
      std::vector<PathPoint> points;
      points.reserve(path.size());
      for (auto& fr : path)
        points.push_back({std::move(fr.coefficients), fr.converged});
      return points;
    };
    family.held_out_loss = [&](int fold, const std::vector<int>& rows,
                               const VectorXd& coef) {
      if (method == OrMethod::Rwl)
        return held_out_wl(g, y, r, w_fold[fold], link, rows, coef);
      // squared error on labeled held-out rows
      double acc = 0.0;
      for (int i : rows) {
        if (r[i] != 1) continue;
        const double resid = y[i] - link.mean(g.row(i).dot(coef));
        acc += resid * resid;
      }
      return acc / static_cast<double>(rows.size());
    };
    CvSelection sel = select_lambda_cv_with_folds(family, grid, fold_of_row);
    chosen = sel.lambda_index;
    out.cv_curve = sel.curve;
  }

  const VectorXd w_lab = take(w_full, lab_rows);
  PenalizedProblem pb =
      make_problem(g_lab, y_lab, w_lab, static_cast<double>(n_rows));
  std::vector<FitResult> path = minimize_l1_path(pb, grid.head(chosen + 1), cfg);
  int take_idx = chosen;
  while (take_idx > 0 && !path[take_idx].converged) --take_idx;
  if (!path[take_idx].converged)
    throw SolverError("no convergent outcome fit on the lambda grid");
  out.fit = path[take_idx];
  out.alpha = out.fit.coefficients;
  out.lambda_alpha = grid[take_idx];
  out.active_set = active_coords(out.alpha);
  out.eta = g * out.alpha;
  out.phi = out.eta.unaryExpr([&](double u) { return link.mean(u); });
  return out;
}

}  // namespace

ORFit fit_or_rwl(const MatrixXd& g, const VectorXd& y, const VectorXi& r,
                 const PSFit& ps, Link link, VectorXd lambda_grid, int folds,
                 const SolverConfig& config, std::uint64_t seed) {
  return fit_or_impl(OrMethod::Rwl, g, y, r, &ps, link,
                     std::move(lambda_grid), folds, config, seed);
}

ORFit fit_or_unweighted(const MatrixXd& g, const VectorXd& y,
                        const VectorXi& r, Link link, VectorXd lambda_grid,
                        int folds, const SolverConfig& config,
                        std::uint64_t seed) {
  return fit_or_impl(OrMethod::Unweighted, g, y, r, nullptr, link,
                     std::move(lambda_grid), folds, config, seed);
}

}  // namespace ssreg
