// Copyright 2026 The dpglm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGLM_DATA_HPP
#define DPGLM_DATA_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpglm/common.hpp"
#include "dpglm/oracles.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/sstats.hpp"

namespace dpglm {

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  bool clipped = false;
  double R_x = 0.0;

  long n() const { return static_cast<long>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }
};

enum class ClipPolicy { scale_clip, filter };

inline std::string to_string(ClipPolicy policy) {
  return policy == ClipPolicy::scale_clip ? "scale-clip" : "filter";
}

inline ClipPolicy clip_policy_from_string(const std::string& name) {
  if (name == "scale-clip") return ClipPolicy::scale_clip;
  if (name == "filter") return ClipPolicy::filter;
  throw std::invalid_argument("unknown preprocessing policy: " + name);
}

struct SynthConfig {
  Model model = Model::logistic;
  long N = 0;
  Eigen::VectorXd theta;
  Eigen::MatrixXd covariance;
  double R_y = 5.0;  // Poisson responses are clamped at this bound
  std::uint64_t seed = 0;
};

// Draws x_i ~ N(0, Sigma_true) and responses from the exact model:
// logistic labels in {-1, +1} with Pr[y = 1] = sigmoid(x^T theta), Poisson
// counts with softplus mean, clamped at R_y so the release bound holds.
inline Dataset synth(const SynthConfig& config) {
  if (config.N < 1) throw std::invalid_argument("synth: N must be >= 1");
  const int d = static_cast<int>(config.theta.size());
  if (config.covariance.rows() != d || config.covariance.cols() != d) {
    throw std::invalid_argument("synth: covariance spec does not match theta");
  }
  const CovMatrix sigma(config.covariance);  // rejects non-PSD specs
  const Eigen::MatrixXd A = detail::covariance_factor(sigma);
  Rng rng(config.seed);
  Dataset out;
  out.X.resize(config.N, d);
  out.y.resize(config.N);
  Eigen::VectorXd g(d);
  for (long i = 0; i < config.N; ++i) {
    for (int j = 0; j < d; ++j) g[j] = rng.normal();
    const Eigen::VectorXd x = A * g;
    out.X.row(i) = x.transpose();
    const double t = config.theta.dot(x);
    if (config.model == Model::logistic) {
      const double p1 = 1.0 / (1.0 + std::exp(-t));
      out.y[i] = rng.uniform() < p1 ? 1.0 : -1.0;
    } else {
      const double mean = detail::softplus_exact(t);
      const double draw = static_cast<double>(rng.poisson(mean));
      out.y[i] = std::min(draw, config.R_y);
    }
  }
  return out;
}

// Enforces the input-norm bound: scale-clip rescales offending rows onto
// the sphere of radius R_x (direction preserved), filter drops them (the
// Poisson protocol). Rows with y above R_y are clamped or dropped the same
// way; pass R_y = infinity to leave responses untouched.
inline Dataset preprocess(const Dataset& raw, ClipPolicy policy, double R_x,
                          double R_y = std::numeric_limits<double>::infinity()) {
  if (R_x <= 0) throw std::invalid_argument("preprocess: R_x must be > 0");
  Dataset out;
  out.clipped = true;
  out.R_x = R_x;
  if (policy == ClipPolicy::scale_clip) {
    out.X = raw.X;
    out.y = raw.y;
    for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
      const double norm = out.X.row(i).norm();
      if (norm > R_x) out.X.row(i) *= R_x / norm;
      if (out.y[i] > R_y) out.y[i] = R_y;
    }
    return out;
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < raw.X.rows(); ++i) {
    if (raw.X.row(i).norm() <= R_x && raw.y[i] <= R_y) keep.push_back(i);
  }
  if (keep.empty()) {
    throw DataError(DataError::Code::empty_file,
                    "preprocess: filter removed every row");
  }
  out.X.resize(static_cast<Eigen::Index>(keep.size()), raw.X.cols());
  out.y.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = raw.X.row(keep[i]);
    out.y[static_cast<Eigen::Index>(i)] = raw.y[keep[i]];
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    // trim surrounding whitespace
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? std::string()
                        : cell.substr(first, last - first + 1));
  }
  return cells;
}

inline double parse_number(const std::string& cell) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    throw DataError(DataError::Code::non_numeric,
                    "load_csv: non-numeric cell: '" + cell + "'");
  }
  return v;
}

}  // namespace detail

// Loads a headered numeric CSV, standardizes features column-wise to zero
// mean and unit variance (variance floor 1e-12: constant columns map to
// zeros), and maps logistic targets {0, 1} -> {-1, +1}. Standardization
// statistics are computed non-privately, outside the privacy accounting.
inline Dataset load_csv(const std::string& path,
                        const std::string& target_column, Model model,
                        bool standardize = true) {
  std::ifstream file(path);
  if (!file) {
    throw DataError(DataError::Code::empty_file,
                    "load_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(file, line)) {
    throw DataError(DataError::Code::empty_file, "load_csv: empty file " + path);
  }
  const std::vector<std::string> header = detail::split_csv_line(line);
  int target = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == target_column) target = static_cast<int>(i);
  }
  if (target < 0) {
    throw DataError(DataError::Code::missing_target,
                    "load_csv: missing target column '" + target_column + "'");
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(DataError::Code::bad_format,
                      "load_csv: row has wrong cell count");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells) {
      row.push_back(detail::parse_number(cell));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw DataError(DataError::Code::empty_file,
                    "load_csv: no data rows in " + path);
  }
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1) {
    throw DataError(DataError::Code::bad_format,
                    "load_csv: need at least one feature column");
  }
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), d);
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int col = 0;
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (static_cast<int>(j) == target) {
        out.y[static_cast<Eigen::Index>(i)] = rows[i][j];
      } else {
        out.X(static_cast<Eigen::Index>(i), col++) = rows[i][j];
      }
    }
  }
  if (standardize) {
    for (int j = 0; j < d; ++j) {
      const double mean = out.X.col(j).mean();
      const double var = (out.X.col(j).array() - mean).square().mean();
      if (var < 1e-12) {
        out.X.col(j).setZero();
      } else {
        out.X.col(j) = (out.X.col(j).array() - mean) / std::sqrt(var);
      }
    }
  }
  if (model == Model::logistic) {
    for (Eigen::Index i = 0; i < out.y.size(); ++i) {
      if (out.y[i] == 0.0) {
        out.y[i] = -1.0;
      } else if (out.y[i] != 1.0 && out.y[i] != -1.0) {
        throw DataError(DataError::Code::non_numeric,
                        "load_csv: logistic targets must be 0/1 or -1/+1");
      }
    }
  } else {
    for (Eigen::Index i = 0; i < out.y.size(); ++i) {
      const double rounded = std::round(out.y[i]);
      if (out.y[i] < 0 || std::abs(out.y[i] - rounded) > 1e-9) {
        throw DataError(DataError::Code::non_numeric,
                        "load_csv: Poisson targets must be counts");
      }
      out.y[i] = rounded;
    }
  }
  return out;
}

inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream file(path);
  if (!file) {
    throw DataError(DataError::Code::bad_format,
                    "save_csv: cannot open " + path);
  }
  for (int j = 1; j <= data.d(); ++j) file << "x" << j << ",";
  file << "y\n";
  for (long i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d(); ++j) {
      file << format_real(data.X(i, j)) << ",";
    }
    file << format_real(data.y[i]) << "\n";
  }
}

}  // namespace dpglm

#endif  // DPGLM_DATA_HPP
