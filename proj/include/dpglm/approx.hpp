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
// Closed-form normal approximation of the summary statistics: per-record
// mean mu_s and covariance Sigma_s for each model, built from truncated
// Taylor expansions of the link functionals and exact Gaussian moments, and
// the marginal likelihood of a noisy release.

#ifndef DPGLM_APPROX_HPP
#define DPGLM_APPROX_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dpglm/moments.hpp"
#include "dpglm/privacy.hpp"
#include "dpglm/sstats.hpp"

namespace dpglm {

// Truncated Taylor series of a link functional in t = x^T theta; sparse
// list of (power, coefficient) pairs with powers <= 4.
struct LinkTaylor {
  std::vector<std::pair<int, double>> coefficients;

  double evaluate(double t) const {
    double total = 0.0;
    for (const auto& [power, coeff] : coefficients) {
      double p = coeff;
      for (int r = 0; r < power; ++r) p *= t;
      total += p;
    }
    return total;
  }
};

// (1 - e^t) / (1 + e^t) ~ -t/2 + t^3/24.
inline LinkTaylor taylor_logistic_link() {
  return LinkTaylor{{{1, -0.5}, {3, 1.0 / 24.0}}};
}

// log(1 + e^t) ~ log 2 + t/2 + t^2/8 - t^4/192.
inline LinkTaylor taylor_softplus() {
  const double log2 = std::log(2.0);
  return LinkTaylor{{{0, log2}, {1, 0.5}, {2, 0.125}, {4, -1.0 / 192.0}}};
}

// log^2(1 + e^t) ~ log^2 2 + t log 2 + t^2 (1 + log 2)/4 + t^3/8.
inline LinkTaylor taylor_softplus_sq() {
  const double log2 = std::log(2.0);
  return LinkTaylor{
      {{0, log2 * log2}, {1, log2}, {2, (1.0 + log2) / 4.0}, {3, 0.125}}};
}

// Mean vector and covariance matrix of one individual's statistic under
// parameters (theta, Sigma). The covariance comes from a truncated Taylor
// approximation, so its diagonal may carry tiny negatives.
struct NormalApprox {
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
};

namespace detail {

// E[x^k * P(x^T theta)] for a Taylor polynomial P, sharing one moment cache.
// Each Taylor power is expanded once by the multinomial theorem; the
// monomial index k then shifts every expansion term.
class LinkExpectation {
 public:
  LinkExpectation(const LinkTaylor& taylor, const Eigen::VectorXd& theta,
                  MomentEvaluator& evaluator)
      : evaluator_(evaluator) {
    for (const auto& [power, coeff] : taylor.coefficients) {
      expansions_.emplace_back(coeff, multinomial_expand(theta, power));
    }
  }

  double expect(const ExponentIndex& k) const {
    double total = 0.0;
    for (const auto& [coeff, expansion] : expansions_) {
      double inner = 0.0;
      for (const PolyTerm& term : expansion.terms()) {
        inner += term.coefficient * evaluator_.moment(k.plus(term.index));
      }
      total += coeff * inner;
    }
    return total;
  }

  // The fully assembled polynomial x^k * P(x^T theta); the independent
  // evaluation route used to cross-check the factored path.
  Polynomial assemble(const ExponentIndex& k) const {
    Polynomial out(k.dimension());
    for (const auto& [coeff, expansion] : expansions_) {
      out += expansion.times_monomial(k, coeff);
    }
    return out;
  }

 private:
  MomentEvaluator& evaluator_;
  std::vector<std::pair<double, Polynomial>> expansions_;
};

inline void check_model(const StatisticLayout& layout, Model expected,
                        const char* op) {
  if (layout.model != expected) {
    throw std::invalid_argument(std::string(op) +
                                ": layout model does not match");
  }
}

inline void check_dims(const Eigen::VectorXd& theta, const CovMatrix& sigma,
                       const StatisticLayout& layout, const char* op) {
  if (static_cast<int>(theta.size()) != layout.d ||
      sigma.dimension() != layout.d) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch");
  }
}

}  // namespace detail

// mu_s and Sigma_s for one model in a single pass sharing one moment cache.
// Entry parities decide which conditional y-moment applies:
//   logistic: E[y^a | x] = 1 for even a, the link expansion for odd a;
//   poisson:  E[y | x] = softplus, E[y^2 | x] = softplus^2 + softplus.
// Only the upper triangle of Sigma_s is computed and mirrored, so the
// output is exactly symmetric.
inline NormalApprox normal_approx(const Eigen::VectorXd& theta,
                                  const CovMatrix& sigma,
                                  const StatisticLayout& layout) {
  detail::check_dims(theta, sigma, layout, "normal_approx");
  const int n = layout.size();
  MomentEvaluator ev(sigma);
  NormalApprox out;
  out.mu.resize(n);
  out.cov.resize(n, n);

  const auto& entries = layout.entries;
  if (layout.model == Model::logistic) {
    detail::LinkExpectation link(taylor_logistic_link(), theta, ev);
    for (int i = 0; i < n; ++i) {
      const StatisticEntry& e = entries[static_cast<std::size_t>(i)];
      out.mu[i] = e.multiplier *
                  (e.y_power == 0 ? ev.moment(e.index) : link.expect(e.index));
    }
    for (int i = 0; i < n; ++i) {
      const StatisticEntry& e = entries[static_cast<std::size_t>(i)];
      for (int j = i; j < n; ++j) {
        const StatisticEntry& f = entries[static_cast<std::size_t>(j)];
        const ExponentIndex prod = e.index.plus(f.index);
        double value;
        if (e.y_power == 0 && f.y_power == 0) {
          value = ev.moment(prod) - ev.moment(e.index) * ev.moment(f.index);
        } else if (e.y_power == 1 && f.y_power == 1) {
          // y^2 = 1 inside the joint moment; means carry the link weight.
          value = ev.moment(prod) - link.expect(e.index) * link.expect(f.index);
        } else {
          const ExponentIndex& even = e.y_power == 0 ? e.index : f.index;
          const ExponentIndex& odd = e.y_power == 0 ? f.index : e.index;
          value = link.expect(prod) - ev.moment(even) * link.expect(odd);
        }
        value *= e.multiplier * f.multiplier;
        out.cov(i, j) = value;
        out.cov(j, i) = value;
      }
    }
    return out;
  }

  detail::LinkExpectation sp(taylor_softplus(), theta, ev);
  detail::LinkExpectation sp_sq(taylor_softplus_sq(), theta, ev);
  for (int i = 0; i < n; ++i) {
    const StatisticEntry& e = entries[static_cast<std::size_t>(i)];
    out.mu[i] = e.multiplier *
                (e.y_power == 0 ? ev.moment(e.index) : sp.expect(e.index));
  }
  for (int i = 0; i < n; ++i) {
    const StatisticEntry& e = entries[static_cast<std::size_t>(i)];
    for (int j = i; j < n; ++j) {
      const StatisticEntry& f = entries[static_cast<std::size_t>(j)];
      const ExponentIndex prod = e.index.plus(f.index);
      double value;
      if (e.y_power == 0 && f.y_power == 0) {
        value = ev.moment(prod) - ev.moment(e.index) * ev.moment(f.index);
      } else if (e.y_power == 1 && f.y_power == 1) {
        // E[y^2 | x] = softplus^2 + softplus.
        value = sp_sq.expect(prod) + sp.expect(prod) -
                sp.expect(e.index) * sp.expect(f.index);
      } else {
        const ExponentIndex& even = e.y_power == 0 ? e.index : f.index;
        const ExponentIndex& odd = e.y_power == 0 ? f.index : e.index;
        value = sp.expect(prod) - ev.moment(even) * sp.expect(odd);
      }
      value *= e.multiplier * f.multiplier;
      out.cov(i, j) = value;
      out.cov(j, i) = value;
    }
  }
  return out;
}

inline Eigen::VectorXd mu_s_logistic(const Eigen::VectorXd& theta,
                                     const CovMatrix& sigma,
                                     const StatisticLayout& layout) {
  detail::check_model(layout, Model::logistic, "mu_s_logistic");
  return normal_approx(theta, sigma, layout).mu;
}

inline Eigen::MatrixXd sigma_s_logistic(const Eigen::VectorXd& theta,
                                        const CovMatrix& sigma,
                                        const StatisticLayout& layout) {
  detail::check_model(layout, Model::logistic, "sigma_s_logistic");
  return normal_approx(theta, sigma, layout).cov;
}

inline Eigen::VectorXd mu_s_poisson(const Eigen::VectorXd& theta,
                                    const CovMatrix& sigma,
                                    const StatisticLayout& layout) {
  detail::check_model(layout, Model::poisson, "mu_s_poisson");
  return normal_approx(theta, sigma, layout).mu;
}

inline Eigen::MatrixXd sigma_s_poisson(const Eigen::VectorXd& theta,
                                       const CovMatrix& sigma,
                                       const StatisticLayout& layout) {
  detail::check_model(layout, Model::poisson, "sigma_s_poisson");
  return normal_approx(theta, sigma, layout).cov;
}

// Log density of z under N(N mu_s, N Sigma_s + D_noise), the analytic
// marginalization of the latent statistic sum. The truncated-Taylor
// covariance may be slightly indefinite: after symmetrizing, jitter of
// 1e-8 .. 1e-4 times the mean diagonal is escalated tenfold per retry;
// past that the evaluation reports failure and the caller rejects.
inline std::optional<double> marginal_loglik(const NoisyRelease& release,
                                             const Eigen::VectorXd& theta,
                                             const CovMatrix& sigma) {
  const NormalApprox na = normal_approx(theta, sigma, release.layout);
  const int n = release.layout.size();
  const double N = static_cast<double>(release.N);
  Eigen::MatrixXd C = N * na.cov;
  C = 0.5 * (C + C.transpose().eval());
  for (int i = 0; i < n; ++i) {
    C(i, i) += release.noise_sd_per_entry[i] * release.noise_sd_per_entry[i];
  }
  const Eigen::VectorXd r = release.z - N * na.mu;
  double mean_diag = C.diagonal().mean();
  if (!(mean_diag > 0)) mean_diag = std::max(C.cwiseAbs().maxCoeff(), 1e-300);

  constexpr double kTwoPi = 6.2831853071795864769;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd Cj = C;
    if (jitter > 0) Cj.diagonal().array() += jitter * mean_diag;
    Eigen::LLT<Eigen::MatrixXd> llt(Cj);
    if (llt.info() == Eigen::Success) {
      double log_det = 0.0;
      for (int i = 0; i < n; ++i) {
        log_det += 2.0 * std::log(llt.matrixLLT()(i, i));
      }
      const Eigen::VectorXd w = llt.matrixL().solve(r);
      const double quad = w.squaredNorm();
      const double value =
          -0.5 * (n * std::log(kTwoPi) + log_det + quad);
      if (std::isfinite(value)) return value;
      return std::nullopt;
    }
    jitter = (jitter == 0.0) ? 1e-8 : jitter * 10.0;
    if (jitter > 1e-4) break;
  }
  return std::nullopt;
}

}  // namespace dpglm

#endif  // DPGLM_APPROX_HPP
