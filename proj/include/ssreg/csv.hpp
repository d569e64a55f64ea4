#pragma once

#include <string>
#include <vector>

#include "ssreg/types.hpp"

namespace ssreg {

struct CsvData {
  Dataset dataset;
  std::vector<std::string> covariate_names;
};

// Reads `r,y,<covariates...>` with a header row. r must be 0/1; y may be
// the empty string exactly when r == 0. An intercept column is prepended.
CsvData ingest_csv(const std::string& path);

// Inverse of ingest_csv, 17 significant digits (round-trip exact).
void write_csv(const Dataset& dataset,
               const std::vector<std::string>& covariate_names,
               const std::string& path);

}  // namespace ssreg
