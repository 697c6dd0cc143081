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
//
// Construction, indexing and aggregation of the polynomial summary
// statistics t(x, y) released for each model. Each monomial carries the
// square root of its multinomial coefficient so that the joint release
// satisfies ||t_m(x) - t_m(x')||^2 = ||x||^{2m} + ||x'||^{2m} - 2<x,x'>^m.

#ifndef DPGLM_SSTATS_HPP
#define DPGLM_SSTATS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpglm/moments.hpp"

namespace dpglm {

enum class Model { logistic, poisson };

inline std::string to_string(Model model) {
  return model == Model::logistic ? "logistic" : "poisson";
}

inline Model model_from_string(const std::string& name) {
  if (name == "logistic") return Model::logistic;
  if (name == "poisson") return Model::poisson;
  throw std::invalid_argument("unknown model: " + name);
}

// One released monomial: its exponent index, the power of y it carries
// (after reducing y^2 = 1 for logistic labels), the multinomial multiplier,
// and the noise block it belongs to.
struct StatisticEntry {
  ExponentIndex index;
  int y_power;
  double multiplier;
  std::string block;
};

// Ordered list of released statistics for one (model, d, m). The constant
// statistic "1" is excluded; N is public metadata.
struct StatisticLayout {
  Model model;
  int d;
  int m;
  std::vector<StatisticEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }

  std::vector<std::string> block_order() const {
    std::vector<std::string> blocks;
    for (const StatisticEntry& e : entries) {
      if (blocks.empty() || blocks.back() != e.block) blocks.push_back(e.block);
    }
    return blocks;
  }
};

// sqrt of the exact multinomial coefficient of the exponent pattern.
inline double multiplier(const ExponentIndex& index) {
  if (index.degree() < 1) {
    throw std::invalid_argument("multiplier: degree must be >= 1");
  }
  return std::sqrt(static_cast<double>(multinomial_coefficient(index)));
}

namespace detail {

// Descending exponent pattern (nonzero exponents sorted high to low); the
// shape class of a monomial, e.g. x_i^2 x_j -> (2, 1).
inline std::vector<int> exponent_pattern(const ExponentIndex& k) {
  std::vector<int> p;
  for (int j = 0; j < k.dimension(); ++j) {
    if (k[j] > 0) p.push_back(k[j]);
  }
  std::sort(p.begin(), p.end(), std::greater<int>());
  return p;
}

// Canonical order within one degree block: pattern groups first (squares
// before cross terms, x_i^3 before x_i^2 x_j before x_i x_j x_k), then
// lexicographically by exponent vector within a group. Reproduces the
// t_2(x) = [x_1^2 ... x_d^2, sqrt(2) x_1 x_2, ...] ordering.
inline bool canonical_monomial_less(const ExponentIndex& a,
                                    const ExponentIndex& b) {
  const std::vector<int> pa = exponent_pattern(a);
  const std::vector<int> pb = exponent_pattern(b);
  if (pa != pb) return pa > pb;
  return a.exponents() > b.exponents();
}

}  // namespace detail

// All monomials of exactly the given degree over d coordinates, in the
// canonical release order.
inline std::vector<ExponentIndex> degree_monomials(int d, int degree) {
  if (d < 1) throw std::invalid_argument("degree_monomials: d must be >= 1");
  if (degree < 1) {
    throw std::invalid_argument("degree_monomials: degree must be >= 1");
  }
  std::vector<ExponentIndex> out;
  std::vector<int> e(static_cast<std::size_t>(d), 0);
  auto recurse = [&](auto&& self, int coord, int left) -> void {
    if (coord == d - 1) {
      e[static_cast<std::size_t>(coord)] = left;
      out.push_back(ExponentIndex(e));
      return;
    }
    for (int v = 0; v <= left; ++v) {
      e[static_cast<std::size_t>(coord)] = v;
      self(self, coord + 1, left - v);
    }
    e[static_cast<std::size_t>(coord)] = 0;
  };
  recurse(recurse, 0, degree);
  std::sort(out.begin(), out.end(), detail::canonical_monomial_less);
  return out;
}

// The order-m statistic block t_m(x) with multinomial multipliers, as used
// in the joint-release norm identity.
inline Eigen::VectorXd order_block(const Eigen::VectorXd& x, int m) {
  const std::vector<ExponentIndex> monomials =
      degree_monomials(static_cast<int>(x.size()), m);
  Eigen::VectorXd t(static_cast<Eigen::Index>(monomials.size()));
  for (std::size_t i = 0; i < monomials.size(); ++i) {
    double v = multiplier(monomials[i]);
    for (int j = 0; j < monomials[i].dimension(); ++j) {
      for (int r = 0; r < monomials[i][j]; ++r) v *= x[j];
    }
    t[static_cast<Eigen::Index>(i)] = v;
  }
  return t;
}

// Deterministic statistic layout for a model. Blocks follow the order of
// the release mechanism: [y t1, t2] for logistic (y^2 = 1 folds the label
// out of the quadratic block) and [t1, t2, y t1, y t2] for Poisson. Within
// a block, entries use the canonical monomial order.
inline StatisticLayout layout(Model model, int d, int m) {
  if (d < 1) throw std::invalid_argument("layout: d must be >= 1");
  if (m != 1 && m != 2) {
    throw std::invalid_argument("layout: order m must be 1 or 2");
  }
  StatisticLayout out{model, d, m, {}};
  auto append = [&](int degree, int y_power, const std::string& block) {
    for (const ExponentIndex& k : degree_monomials(d, degree)) {
      out.entries.push_back(StatisticEntry{k, y_power, multiplier(k), block});
    }
  };
  if (model == Model::logistic) {
    append(1, 1, "yt1");
    if (m == 2) append(2, 0, "t2");
  } else {
    append(1, 0, "t1");
    if (m == 2) append(2, 0, "t2");
    append(1, 1, "yt1");
    if (m == 2) append(2, 1, "yt2");
  }
  return out;
}

// Evaluates the per-record statistic vector: entry e is
// multiplier(e) * y^{y_power(e)} * prod_j x_j^{k_j}.
inline Eigen::VectorXd statistic(const Eigen::VectorXd& x, double y,
                                 const StatisticLayout& layout) {
  if (static_cast<int>(x.size()) != layout.d) {
    throw std::invalid_argument("statistic: dimension mismatch");
  }
  Eigen::VectorXd t(layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    const StatisticEntry& e = layout.entries[static_cast<std::size_t>(i)];
    double v = e.multiplier;
    for (int p = 0; p < e.y_power; ++p) v *= y;
    for (int j = 0; j < layout.d; ++j) {
      for (int r = 0; r < e.index[j]; ++r) v *= x[j];
    }
    t[i] = v;
  }
  return t;
}

// Exact sum of per-record statistics in dataset order (sequential
// left-to-right; the contractual reference result).
inline Eigen::VectorXd aggregate(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y,
                                 const StatisticLayout& layout) {
  if (X.rows() != y.size()) {
    throw std::invalid_argument("aggregate: X and y row counts differ");
  }
  if (X.rows() < 1) {
    throw std::invalid_argument("aggregate: dataset must be non-empty");
  }
  if (static_cast<int>(X.cols()) != layout.d) {
    throw std::invalid_argument("aggregate: dimension mismatch");
  }
  Eigen::VectorXd s = Eigen::VectorXd::Zero(layout.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    s += statistic(X.row(i).transpose(), y[i], layout);
  }
  return s;
}

}  // namespace dpglm

#endif  // DPGLM_SSTATS_HPP
