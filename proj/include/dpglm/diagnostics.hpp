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

#ifndef DPGLM_DIAGNOSTICS_HPP
#define DPGLM_DIAGNOSTICS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpglm/common.hpp"

namespace dpglm {

// Classic potential scale reduction for one parameter across chains:
// R-hat = sqrt(((n-1)/n W + B/n) / W). With split = true each chain is
// halved first (split R-hat; not used by the acceptance checks).
inline double gelman_rubin(const std::vector<Eigen::VectorXd>& chains,
                           bool split = false) {
  std::vector<Eigen::VectorXd> work;
  if (split) {
    for (const Eigen::VectorXd& c : chains) {
      const Eigen::Index half = c.size() / 2;
      if (half < 2) throw std::invalid_argument("gelman_rubin: chains too short to split");
      work.push_back(c.head(half));
      work.push_back(c.tail(half));
    }
  } else {
    work = chains;
  }
  const std::size_t m = work.size();
  if (m < 2) {
    throw std::invalid_argument("gelman_rubin: need at least 2 chains");
  }
  const Eigen::Index n = work.front().size();
  if (n < 2) {
    throw std::invalid_argument("gelman_rubin: need at least 2 samples");
  }
  for (const Eigen::VectorXd& c : work) {
    if (c.size() != n) {
      throw std::invalid_argument("gelman_rubin: chains must have equal length");
    }
  }
  double w = 0.0;  // mean within-chain variance
  double grand_mean = 0.0;
  std::vector<double> means;
  means.reserve(m);
  for (const Eigen::VectorXd& c : work) {
    const double mean = c.mean();
    means.push_back(mean);
    grand_mean += mean / static_cast<double>(m);
    w += (c.array() - mean).square().sum() /
         static_cast<double>(n - 1) / static_cast<double>(m);
  }
  double b = 0.0;  // between-chain variance (times n)
  for (double mean : means) {
    b += (mean - grand_mean) * (mean - grand_mean);
  }
  b *= static_cast<double>(n) / static_cast<double>(m - 1);
  if (w == 0.0) {
    return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  const double nn = static_cast<double>(n);
  return std::sqrt(((nn - 1.0) / nn * w + b / nn) / w);
}

// Right-continuous empirical CDF.
struct ECDF {
  std::vector<double> sorted_values;
  long n = 0;

  // (# samples <= t) / n.
  double operator()(double t) const {
    const auto it =
        std::upper_bound(sorted_values.begin(), sorted_values.end(), t);
    return static_cast<double>(it - sorted_values.begin()) /
           static_cast<double>(n);
  }

  // Left limit (# samples < t) / n.
  double left_limit(double t) const {
    const auto it =
        std::lower_bound(sorted_values.begin(), sorted_values.end(), t);
    return static_cast<double>(it - sorted_values.begin()) /
           static_cast<double>(n);
  }
};

inline ECDF ecdf(const std::vector<double>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("ecdf: samples must be non-empty");
  }
  ECDF out;
  out.sorted_values = samples;
  std::sort(out.sorted_values.begin(), out.sorted_values.end());
  out.n = static_cast<long>(out.sorted_values.size());
  return out;
}

inline ECDF ecdf(const Eigen::VectorXd& samples) {
  return ecdf(std::vector<double>(samples.data(), samples.data() + samples.size()));
}

// Two-sample Kolmogorov-Smirnov score: sup |F - G| over the union of jump
// points, evaluating both one-sided limits at each jump.
inline double ks_score(const ECDF& f, const ECDF& g) {
  if (f.n < 1 || g.n < 1) {
    throw std::invalid_argument("ks_score: both ECDFs must be non-empty");
  }
  double best = 0.0;
  for (const std::vector<double>* jumps : {&f.sorted_values, &g.sorted_values}) {
    for (double t : *jumps) {
      best = std::max(best, std::abs(f(t) - g(t)));
      best = std::max(best, std::abs(f.left_limit(t) - g.left_limit(t)));
    }
  }
  return best;
}

struct ParameterDiagnostics {
  std::string name;
  double r_hat = 0.0;
  double ks_vs_baseline = 0.0;
};

struct DiagnosticsReport {
  std::vector<ParameterDiagnostics> per_parameter;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

inline std::string diagnostics_report_json(const DiagnosticsReport& report) {
  std::ostringstream os;
  os << "{\n  \"per_parameter\": [\n";
  for (std::size_t i = 0; i < report.per_parameter.size(); ++i) {
    const ParameterDiagnostics& p = report.per_parameter[i];
    char r_hat[64];
    char ks[64];
    std::snprintf(r_hat, sizeof(r_hat), "%.16e", p.r_hat);
    std::snprintf(ks, sizeof(ks), "%.16e", p.ks_vs_baseline);
    os << "    {\"name\": \"" << p.name << "\", \"r_hat\": " << r_hat
       << ", \"ks_vs_baseline\": " << ks << "}"
       << (i + 1 < report.per_parameter.size() ? "," : "") << "\n";
  }
  char eps[64];
  std::snprintf(eps, sizeof(eps), "%.16e", report.epsilon);
  os << "  ],\n  \"epsilon\": " << eps << ",\n  \"seed\": " << report.seed
     << "\n}\n";
  return os.str();
}

}  // namespace dpglm

#endif  // DPGLM_DIAGNOSTICS_HPP
