#pragma once

#include <cstdint>
#include <string>

#include "ssreg/basis.hpp"
#include "ssreg/inference.hpp"
#include "ssreg/types.hpp"

namespace ssreg {

enum class Method { AipwRcal, AipwRml, AipwCf, Ipw };

const char* method_name(Method m);
Method parse_method(const std::string& s);

// One full estimation pass: basis -> nuisances -> estimator -> sandwich.
struct FitOptions {
  Method method = Method::AipwRcal;
  TargetSpec target;
  Link link;
  BasisSpec basis;
  int folds = 5;
  std::uint64_t seed = 0;
  SolverConfig solver;
  std::vector<double> levels = {0.90, 0.95};
  // The calibrated method pairs the PS basis F with G = [F, Z (x) F];
  // switching this off fits the interaction-free (misspecified) OR basis.
  bool or_interactions = true;
  // Unlabeled estimand: use the literal plug-in Gamma-hat (no 1-pi factor).
  bool gamma_plugin_form = false;
};

EstimateReport run_fit(const Dataset& dataset, const FitOptions& options);

}  // namespace ssreg
