#include "ssreg/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ssreg {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, int row, const char* what) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ParseError(std::string(what) + " is not numeric at data row " +
                     std::to_string(row) + ": '" + cell + "'");
  }
  if (used != cell.size())
    throw ParseError(std::string(what) + " has trailing characters at data row " +
                     std::to_string(row) + ": '" + cell + "'");
  return v;
}

}  // namespace

CsvData ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv file has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "r" || header[1] != "y")
    throw ParseError("csv header must start with r,y and name covariates");
  const int d = static_cast<int>(header.size()) - 2;

  std::vector<int> r_rows;
  std::vector<double> y_rows;
  std::vector<double> x_rows;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != d + 2)
      throw ParseError("wrong cell count at data row " + std::to_string(row));

    const std::string& rc = cells[0];
    int r;
    if (rc == "0") r = 0;
    else if (rc == "1") r = 1;
    else
      throw ParseError("label indicator must be 0 or 1 at data row " +
                       std::to_string(row) + ": '" + rc + "'");

    double y;
    if (cells[1].empty()) {
      if (r == 1)
        throw DataError("outcome missing for labeled data row " +
                        std::to_string(row));
      y = std::nan("");
    } else {
      y = parse_number(cells[1], row, "outcome");
      if (r == 0)
        throw DataError("outcome present for unlabeled data row " +
                        std::to_string(row) +
                        " (leave y empty when r is 0)");
    }

    r_rows.push_back(r);
    y_rows.push_back(y);
    for (int j = 0; j < d; ++j) {
      const double v = parse_number(cells[2 + j], row, "covariate");
      if (!std::isfinite(v))
        throw DataError("non-finite covariate at data row " +
                        std::to_string(row));
      x_rows.push_back(v);
    }
  }
  if (row == 0) throw DataError("csv file has no data rows");

  const int n = row;
  MatrixXd x(n, d + 1);
  VectorXd y(n);
  VectorXi r(n);
  x.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    r[i] = r_rows[i];
    y[i] = y_rows[i];
    for (int j = 0; j < d; ++j) x(i, j + 1) = x_rows[i * d + j];
  }

  CsvData out{Dataset::make(std::move(x), std::move(y), std::move(r)),
              std::vector<std::string>(header.begin() + 2, header.end())};
  return out;
}

void write_csv(const Dataset& dataset,
               const std::vector<std::string>& covariate_names,
               const std::string& path) {
  const int d = dataset.covariates();
  if (static_cast<int>(covariate_names.size()) != d)
    throw ConfigError("covariate name count does not match the dataset");

  std::ofstream out(path);
  if (!out) throw DataError("cannot write csv file: " + path);
  out << "r,y";
  for (const auto& name : covariate_names) out << ',' << name;
  out << '\n';

  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (int i = 0; i < dataset.rows(); ++i) {
    out << dataset.r[i] << ',';
    if (dataset.r[i] == 1) out << fmt(dataset.y[i]);
    for (int j = 1; j <= d; ++j) out << ',' << fmt(dataset.x(i, j));
    out << '\n';
  }
}

}  // namespace ssreg
