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
// Exact expectations of polynomials of a zero-mean multivariate Gaussian.
// Even-degree monomial moments are evaluated by enumerating perfect pairings
// of the coordinate slots and summing the products of covariance entries;
// odd-degree moments vanish.

#ifndef DPGLM_MOMENTS_HPP
#define DPGLM_MOMENTS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpglm/common.hpp"

namespace dpglm {

// Largest monomial degree the exact evaluator accepts. Second-order
// statistic covariances against quartic link expansions need degree 4 + 4;
// anything above that is rejected rather than silently enumerated.
inline constexpr int kMaxMomentDegree = 8;

// Multi-index of per-coordinate exponents; identifies one monomial
// prod_j x_j^{k_j} over d coordinates.
class ExponentIndex {
 public:
  explicit ExponentIndex(std::vector<int> exponents)
      : exponents_(std::move(exponents)) {
    if (exponents_.empty()) {
      throw std::invalid_argument("ExponentIndex: dimension must be >= 1");
    }
    for (int e : exponents_) {
      if (e < 0) {
        throw std::invalid_argument("ExponentIndex: exponents must be >= 0");
      }
    }
  }

  static ExponentIndex zeros(int d) {
    return ExponentIndex(std::vector<int>(static_cast<std::size_t>(d), 0));
  }

  // The monomial x_j, as a multi-index.
  static ExponentIndex unit(int d, int j) {
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    e.at(static_cast<std::size_t>(j)) = 1;
    return ExponentIndex(std::move(e));
  }

  int dimension() const { return static_cast<int>(exponents_.size()); }

  int degree() const {
    return std::accumulate(exponents_.begin(), exponents_.end(), 0);
  }

  int operator[](int j) const {
    return exponents_[static_cast<std::size_t>(j)];
  }

  const std::vector<int>& exponents() const { return exponents_; }

  // Entrywise sum; the index of the product of the two monomials.
  ExponentIndex plus(const ExponentIndex& other) const {
    if (other.dimension() != dimension()) {
      throw std::invalid_argument("ExponentIndex::plus: dimension mismatch");
    }
    std::vector<int> e(exponents_);
    for (std::size_t j = 0; j < e.size(); ++j) e[j] += other.exponents_[j];
    return ExponentIndex(std::move(e));
  }

  friend bool operator==(const ExponentIndex& a, const ExponentIndex& b) {
    return a.exponents_ == b.exponents_;
  }
  friend bool operator!=(const ExponentIndex& a, const ExponentIndex& b) {
    return !(a == b);
  }
  friend bool operator<(const ExponentIndex& a, const ExponentIndex& b) {
    return a.exponents_ < b.exponents_;
  }

 private:
  std::vector<int> exponents_;
};

struct ExponentIndexHash {
  std::size_t operator()(const ExponentIndex& k) const {
    std::size_t h = 1469598103934665603ULL;
    for (int e : k.exponents()) {
      h ^= static_cast<std::size_t>(e) + 0x9e3779b9 + (h << 6) + (h >> 2);
    }
    return h;
  }
};

struct PolyTerm {
  double coefficient;
  ExponentIndex index;
};

// Multivariate polynomial in canonical form: terms sorted by exponent
// vector, no duplicate indices, exact-zero coefficients removed.
class Polynomial {
 public:
  explicit Polynomial(int d) : d_(d) {
    if (d < 1) throw std::invalid_argument("Polynomial: dimension must be >= 1");
  }

  static Polynomial constant(int d, double c) {
    Polynomial p(d);
    p.add_term(c, ExponentIndex::zeros(d));
    return p;
  }

  static Polynomial from_terms(int d, const std::vector<PolyTerm>& terms) {
    Polynomial p(d);
    for (const PolyTerm& t : terms) p.add_term(t.coefficient, t.index);
    return p;
  }

  int dimension() const { return d_; }

  const std::vector<PolyTerm>& terms() const { return terms_; }

  void add_term(double coefficient, const ExponentIndex& index) {
    if (index.dimension() != d_) {
      throw std::invalid_argument("Polynomial::add_term: dimension mismatch");
    }
    auto it = std::lower_bound(
        terms_.begin(), terms_.end(), index,
        [](const PolyTerm& t, const ExponentIndex& k) { return t.index < k; });
    if (it != terms_.end() && it->index == index) {
      it->coefficient += coefficient;
      if (it->coefficient == 0.0) terms_.erase(it);
    } else if (coefficient != 0.0) {
      terms_.insert(it, PolyTerm{coefficient, index});
    }
  }

  Polynomial& operator+=(const Polynomial& other) {
    if (other.d_ != d_) {
      throw std::invalid_argument("Polynomial::+=: dimension mismatch");
    }
    for (const PolyTerm& t : other.terms_) add_term(t.coefficient, t.index);
    return *this;
  }

  Polynomial scaled(double c) const {
    Polynomial p(d_);
    for (const PolyTerm& t : terms_) p.add_term(c * t.coefficient, t.index);
    return p;
  }

  // Multiplies every term by coefficient * x^index.
  Polynomial times_monomial(const ExponentIndex& index,
                            double coefficient = 1.0) const {
    Polynomial p(d_);
    for (const PolyTerm& t : terms_) {
      p.add_term(coefficient * t.coefficient, t.index.plus(index));
    }
    return p;
  }

  Polynomial operator*(const Polynomial& other) const {
    if (other.d_ != d_) {
      throw std::invalid_argument("Polynomial::*: dimension mismatch");
    }
    Polynomial p(d_);
    for (const PolyTerm& a : terms_) {
      for (const PolyTerm& b : other.terms_) {
        p.add_term(a.coefficient * b.coefficient, a.index.plus(b.index));
      }
    }
    return p;
  }

  double evaluate(const Eigen::VectorXd& x) const {
    double total = 0.0;
    for (const PolyTerm& t : terms_) {
      double v = t.coefficient;
      for (int j = 0; j < d_; ++j) {
        for (int r = 0; r < t.index[j]; ++r) v *= x[j];
      }
      total += v;
    }
    return total;
  }

 private:
  int d_;
  std::vector<PolyTerm> terms_;
};

// Symmetric positive-semidefinite covariance matrix. Validated on
// construction: symmetry to 1e-12 relative, eigenvalues >= -1e-10 times the
// spectral norm.
class CovMatrix {
 public:
  explicit CovMatrix(Eigen::MatrixXd sigma) : m_(std::move(sigma)) {
    if (m_.rows() < 1 || m_.rows() != m_.cols()) {
      throw std::invalid_argument("CovMatrix: matrix must be square, d >= 1");
    }
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw std::invalid_argument("CovMatrix: matrix is not symmetric");
    }
    m_ = 0.5 * (m_ + m_.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_,
                                                      Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(lmax, 1e-300)) {
      throw std::invalid_argument(
          "CovMatrix: matrix is not positive semidefinite");
    }
  }

  static CovMatrix identity(int d) {
    return CovMatrix(Eigen::MatrixXd::Identity(d, d));
  }

  int dimension() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Eigen::MatrixXd m_;
};

// All perfect pairings of an even number of labelled slots. Deterministic
// enumeration: the first remaining slot is paired with each later slot in
// order, then the rest recursively, so fixtures can assert exact lists.
// Slots with equal labels are still distinct slots; the count is always
// (2k-1)!! for 2k slots.
inline std::vector<std::vector<std::pair<int, int>>> pair_partitions(
    const std::vector<int>& slots) {
  if (slots.size() < 2 || slots.size() % 2 != 0) {
    throw std::invalid_argument(
        "pair_partitions: slot count must be even and >= 2");
  }
  std::vector<std::vector<std::pair<int, int>>> out;
  std::vector<std::pair<int, int>> current;
  std::vector<int> remaining = slots;

  auto recurse = [&](auto&& self, std::vector<int>& rem) -> void {
    if (rem.empty()) {
      out.push_back(current);
      return;
    }
    const int first = rem[0];
    for (std::size_t j = 1; j < rem.size(); ++j) {
      current.emplace_back(first, rem[j]);
      std::vector<int> next;
      next.reserve(rem.size() - 2);
      for (std::size_t t = 1; t < rem.size(); ++t) {
        if (t != j) next.push_back(rem[t]);
      }
      self(self, next);
      current.pop_back();
    }
  };
  recurse(recurse, remaining);
  return out;
}

// Evaluation context for Gaussian moments under one fixed covariance.
// Results are memoized per exponent vector, so repeated lookups while
// populating a statistic mean/covariance are cheap. Not shared across
// threads; each evaluation context is confined to its caller.
class MomentEvaluator {
 public:
  explicit MomentEvaluator(CovMatrix sigma) : sigma_(std::move(sigma)) {}

  const CovMatrix& sigma() const { return sigma_; }

  // E[prod_j x_j^{k_j}] for x ~ N(0, Sigma). Zero for odd degree.
  double moment(const ExponentIndex& index) {
    if (index.dimension() != sigma_.dimension()) {
      throw std::invalid_argument("gaussian_moment: dimension mismatch");
    }
    const int degree = index.degree();
    if (degree == 0) return 1.0;
    if (degree % 2 != 0) return 0.0;
    if (degree > kMaxMomentDegree) {
      throw std::invalid_argument(
          "gaussian_moment: degree exceeds the exact-evaluation cap");
    }
    auto found = cache_.find(index);
    if (found != cache_.end()) return found->second;

    std::array<int, kMaxMomentDegree> slots{};
    int n = 0;
    for (int j = 0; j < index.dimension(); ++j) {
      for (int r = 0; r < index[j]; ++r) slots[static_cast<std::size_t>(n++)] = j;
    }
    const double value = pairing_sum(slots.data(), n);
    cache_.emplace(index, value);
    return value;
  }

  // Linearity: sum of coefficient * moment over the polynomial's terms, in
  // canonical term order.
  double expectation(const Polynomial& poly) {
    if (poly.dimension() != sigma_.dimension()) {
      throw std::invalid_argument("poly_expectation: dimension mismatch");
    }
    double total = 0.0;
    for (const PolyTerm& t : poly.terms()) {
      total += t.coefficient * moment(t.index);
    }
    return total;
  }

 private:
  // Sum over perfect pairings without materializing them: pair slots[0]
  // with each later slot, recurse on the remainder in stable order.
  double pairing_sum(const int* slots, int n) {
    if (n == 0) return 1.0;
    double total = 0.0;
    std::array<int, kMaxMomentDegree> rest{};
    for (int j = 1; j < n; ++j) {
      const double sij = sigma_(slots[0], slots[j]);
      int m = 0;
      for (int t = 1; t < n; ++t) {
        if (t != j) rest[static_cast<std::size_t>(m++)] = slots[t];
      }
      total += sij * pairing_sum(rest.data(), m);
    }
    return total;
  }

  CovMatrix sigma_;
  std::unordered_map<ExponentIndex, double, ExponentIndexHash> cache_;
};

inline double gaussian_moment(const ExponentIndex& index,
                              const CovMatrix& sigma) {
  MomentEvaluator ev(sigma);
  return ev.moment(index);
}

inline double poly_expectation(const Polynomial& poly, const CovMatrix& sigma) {
  MomentEvaluator ev(sigma);
  return ev.expectation(poly);
}

// n! as an exact 64-bit integer; valid through n = 20.
inline std::int64_t factorial(int n) {
  std::int64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Exact multinomial coefficient degree! / prod_j k_j! of an exponent vector.
inline std::int64_t multinomial_coefficient(const ExponentIndex& index) {
  std::int64_t c = factorial(index.degree());
  for (int j = 0; j < index.dimension(); ++j) c /= factorial(index[j]);
  return c;
}

// Canonical expansion of (x^T theta)^power by the multinomial theorem.
// Each term's coefficient is multinomial(power; e) * prod_n theta_n^{e_n}.
// The cap guards combinatorial blowup for accidental large powers.
inline Polynomial multinomial_expand(const Eigen::VectorXd& theta, int power,
                                     int max_power = 4) {
  const int d = static_cast<int>(theta.size());
  if (d < 1) throw std::invalid_argument("multinomial_expand: empty theta");
  if (power < 0) throw std::invalid_argument("multinomial_expand: power < 0");
  if (power > max_power) {
    throw std::invalid_argument("multinomial_expand: power exceeds the cap");
  }
  Polynomial out(d);
  std::vector<int> e(static_cast<std::size_t>(d), 0);
  auto recurse = [&](auto&& self, int coord, int left) -> void {
    if (coord == d - 1) {
      e[static_cast<std::size_t>(coord)] = left;
      ExponentIndex k(e);
      double coeff = static_cast<double>(multinomial_coefficient(k));
      for (int j = 0; j < d; ++j) {
        for (int r = 0; r < e[static_cast<std::size_t>(j)]; ++r) {
          coeff *= theta[j];
        }
      }
      out.add_term(coeff, k);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      e[static_cast<std::size_t>(coord)] = v;
      self(self, coord + 1, left - v);
    }
    e[static_cast<std::size_t>(coord)] = 0;
  };
  recurse(recurse, 0, power);
  return out;
}

}  // namespace dpglm

#endif  // DPGLM_MOMENTS_HPP
