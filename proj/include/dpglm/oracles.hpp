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
// Independent brute-force verification tools: Monte Carlo moments, exact-
// link moment estimation, randomized sensitivity search, and hockey-stick
// delta estimates. These live in the shipped library and back the `verify`
// subcommand so the closed forms can be audited on any machine.

#ifndef DPGLM_ORACLES_HPP
#define DPGLM_ORACLES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dpglm/approx.hpp"
#include "dpglm/common.hpp"
#include "dpglm/moments.hpp"
#include "dpglm/privacy.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/sstats.hpp"

namespace dpglm {

struct MCEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Symmetric factor A with A A^T = Sigma via eigendecomposition; tolerates
// semidefinite inputs by clamping vanishing eigenvalues at zero.
inline Eigen::MatrixXd covariance_factor(const CovMatrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma.matrix());
  if (es.info() != Eigen::Success) {
    throw NumericalError("covariance factorization failed");
  }
  Eigen::VectorXd roots = es.eigenvalues();
  for (int i = 0; i < roots.size(); ++i) {
    roots[i] = std::sqrt(std::max(roots[i], 0.0));
  }
  return es.eigenvectors() * roots.asDiagonal();
}

// Exact logistic odd-moment factor (1 - e^t) / (1 + e^t) = -tanh(t / 2).
inline double logistic_link_exact(double t) { return -std::tanh(0.5 * t); }

inline double softplus_exact(double t) {
  if (t > 30.0) return t;
  return std::log1p(std::exp(t));
}

}  // namespace detail

// Sample mean and standard error of prod_j x_j^{k_j} over n draws from
// N(0, Sigma). Deterministic per seed.
inline MCEstimate mc_moment(const ExponentIndex& index, const CovMatrix& sigma,
                            long n, std::uint64_t seed) {
  if (n < 1000) throw std::invalid_argument("mc_moment: n must be >= 1000");
  if (index.dimension() != sigma.dimension()) {
    throw std::invalid_argument("mc_moment: dimension mismatch");
  }
  const Eigen::MatrixXd A = detail::covariance_factor(sigma);
  const int d = sigma.dimension();
  Rng rng(seed);
  Eigen::VectorXd g(d);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long s = 0; s < n; ++s) {
    for (int j = 0; j < d; ++j) g[j] = rng.normal();
    const Eigen::VectorXd x = A * g;
    double v = 1.0;
    for (int j = 0; j < d; ++j) {
      for (int r = 0; r < index[j]; ++r) v *= x[j];
    }
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(n);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  MCEstimate out;
  out.value = mean;
  out.std_error = std::sqrt(var / static_cast<double>(n - 1));
  out.n_samples = n;
  out.seed = seed;
  return out;
}

struct LinkMomentsEstimate {
  Eigen::VectorXd mu_hat;
  Eigen::MatrixXd cov_hat;
  long n_samples = 0;
  std::uint64_t seed = 0;
};

// Taylor-free reference for mu_s / Sigma_s: Monte Carlo over x with the
// exact conditional y-moments (logistic: E[y^odd | x] = -tanh(t/2),
// E[y^even | x] = 1; Poisson: E[y | x] = softplus, E[y^2 | x] =
// softplus^2 + softplus).
inline LinkMomentsEstimate mc_link_moments(Model model,
                                           const Eigen::VectorXd& theta,
                                           const CovMatrix& sigma,
                                           const StatisticLayout& layout,
                                           long n, std::uint64_t seed) {
  if (n < 10000) {
    throw std::invalid_argument("mc_link_moments: n must be >= 10^4");
  }
  if (model != layout.model) {
    throw std::invalid_argument("mc_link_moments: layout model mismatch");
  }
  detail::check_dims(theta, sigma, layout, "mc_link_moments");
  const Eigen::MatrixXd A = detail::covariance_factor(sigma);
  const int d = layout.d;
  const int k = layout.size();
  Rng rng(seed);

  Eigen::VectorXd g(d);
  Eigen::VectorXd base(k);   // multiplier * monomial, no y factor
  Eigen::VectorXd first(k);  // with first conditional y-moment applied
  Eigen::VectorXd mean_first = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd mean_pair = Eigen::MatrixXd::Zero(k, k);

  for (long s = 0; s < n; ++s) {
    for (int j = 0; j < d; ++j) g[j] = rng.normal();
    const Eigen::VectorXd x = A * g;
    const double t = theta.dot(x);
    double m1;       // E[y | x] factor (or odd-power factor for logistic)
    double m2;       // E[y^2 | x]
    if (model == Model::logistic) {
      m1 = detail::logistic_link_exact(t);
      m2 = 1.0;
    } else {
      m1 = detail::softplus_exact(t);
      m2 = m1 * m1 + m1;
    }
    for (int i = 0; i < k; ++i) {
      const StatisticEntry& e = layout.entries[static_cast<std::size_t>(i)];
      double v = e.multiplier;
      for (int j = 0; j < d; ++j) {
        for (int r = 0; r < e.index[j]; ++r) v *= x[j];
      }
      base[i] = v;
      first[i] = e.y_power == 0 ? v : v * m1;
    }
    mean_first += (first - mean_first) / static_cast<double>(s + 1);
    for (int i = 0; i < k; ++i) {
      const int ypi = layout.entries[static_cast<std::size_t>(i)].y_power;
      for (int j = i; j < k; ++j) {
        const int yps =
            ypi + layout.entries[static_cast<std::size_t>(j)].y_power;
        double pair = base[i] * base[j];
        if (yps == 1) {
          pair *= m1;
        } else if (yps == 2) {
          pair *= m2;
        }
        mean_pair(i, j) += (pair - mean_pair(i, j)) / static_cast<double>(s + 1);
      }
    }
  }
  LinkMomentsEstimate out;
  out.mu_hat = mean_first;
  out.cov_hat.resize(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      const double c = mean_pair(i, j) - mean_first[i] * mean_first[j];
      out.cov_hat(i, j) = c;
      out.cov_hat(j, i) = c;
    }
  }
  out.n_samples = n;
  out.seed = seed;
  return out;
}

// The objective maximized by sensitivity_search: the block-weighted
// statistic distance of two records under the unit-mechanism reduction
// (entry weights sigma_ref / sigma_block, reference = first block).
inline double weighted_statistic_distance(
    const StatisticLayout& layout,
    const std::map<std::string, double>& sigma_blocks,
    const Eigen::VectorXd& x, double y, const Eigen::VectorXd& x_prime,
    double y_prime) {
  const double sigma_ref = sigma_blocks.at(layout.block_order().front());
  const Eigen::VectorXd diff =
      statistic(x, y, layout) - statistic(x_prime, y_prime, layout);
  double total = 0.0;
  for (int i = 0; i < layout.size(); ++i) {
    const double w =
        sigma_ref /
        sigma_blocks.at(layout.entries[static_cast<std::size_t>(i)].block);
    total += w * w * diff[i] * diff[i];
  }
  return std::sqrt(total);
}

// Randomized lower bound on the release sensitivity: spherical random
// restarts, then coordinate ascent with projection onto the norm ball and
// pairwise sign flips. 20 sweeps per restart with step halving from
// 0.25 R_x reaches the known maximizer geometry.
inline double sensitivity_search(
    const StatisticLayout& layout, double R_x, double R_y,
    const std::map<std::string, double>& sigma_blocks, int n_restarts,
    std::uint64_t seed) {
  if (n_restarts < 1) {
    throw std::invalid_argument("sensitivity_search: n_restarts must be >= 1");
  }
  const int d = layout.d;
  const bool logistic = layout.model == Model::logistic;
  Rng rng(seed);

  // Per-entry weights precomputed once; the objective below is the
  // allocation-free twin of weighted_statistic_distance.
  const double sigma_ref = sigma_blocks.at(layout.block_order().front());
  std::vector<double> weight(static_cast<std::size_t>(layout.size()));
  for (int i = 0; i < layout.size(); ++i) {
    weight[static_cast<std::size_t>(i)] =
        sigma_ref /
        sigma_blocks.at(layout.entries[static_cast<std::size_t>(i)].block);
  }
  auto entry_value = [&](const StatisticEntry& e, const Eigen::VectorXd& x,
                         double y) {
    double v = e.multiplier;
    for (int p = 0; p < e.y_power; ++p) v *= y;
    for (int j = 0; j < d; ++j) {
      for (int r = 0; r < e.index[j]; ++r) v *= x[j];
    }
    return v;
  };
  auto project = [&](Eigen::VectorXd& x) {
    const double norm = x.norm();
    if (norm > R_x) x *= R_x / norm;
  };
  auto objective = [&](const Eigen::VectorXd& x, double y,
                       const Eigen::VectorXd& xp, double yp) {
    double total = 0.0;
    for (int i = 0; i < layout.size(); ++i) {
      const StatisticEntry& e = layout.entries[static_cast<std::size_t>(i)];
      const double diff = entry_value(e, x, y) - entry_value(e, xp, yp);
      const double w = weight[static_cast<std::size_t>(i)];
      total += w * w * diff * diff;
    }
    return std::sqrt(total);
  };

  double best = 0.0;
  for (int restart = 0; restart < n_restarts; ++restart) {
    Eigen::VectorXd x(d);
    Eigen::VectorXd xp(d);
    for (int j = 0; j < d; ++j) x[j] = rng.normal();
    for (int j = 0; j < d; ++j) xp[j] = rng.normal();
    // Spherical start: random direction at a random radius, biased toward
    // the boundary where the maximizers live.
    const double rx = R_x * std::sqrt(rng.uniform());
    const double rxp = R_x * std::sqrt(rng.uniform());
    if (x.norm() > 0) x *= rx / x.norm();
    if (xp.norm() > 0) xp *= rxp / xp.norm();
    double y;
    double yp;
    if (logistic) {
      y = rng.uniform() < 0.5 ? -1.0 : 1.0;
      yp = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } else {
      y = R_y * rng.uniform();
      yp = R_y * rng.uniform();
    }

    double value = objective(x, y, xp, yp);
    double step = 0.25 * R_x;
    for (int sweep = 0; sweep < 20; ++sweep) {
      bool improved = false;
      for (int side = 0; side < 2; ++side) {
        Eigen::VectorXd& v = side == 0 ? x : xp;
        for (int j = 0; j < d; ++j) {
          for (double dir : {+1.0, -1.0}) {
            Eigen::VectorXd trial = v;
            trial[j] += dir * step;
            project(trial);
            const double trial_value = side == 0
                                           ? objective(trial, y, xp, yp)
                                           : objective(x, y, trial, yp);
            if (trial_value > value) {
              value = trial_value;
              v = trial;
              improved = true;
            }
          }
        }
      }
      if (logistic) {
        for (int flips = 1; flips < 4; ++flips) {
          const double ty = (flips & 1) ? -y : y;
          const double typ = (flips & 2) ? -yp : yp;
          const double trial_value = objective(x, ty, xp, typ);
          if (trial_value > value) {
            value = trial_value;
            y = ty;
            yp = typ;
            improved = true;
          }
        }
      } else {
        for (double ty : {0.0, R_y}) {
          for (double typ : {0.0, R_y}) {
            const double trial_value = objective(x, ty, xp, typ);
            if (trial_value > value) {
              value = trial_value;
              y = ty;
              yp = typ;
              improved = true;
            }
          }
        }
        for (int side = 0; side < 2; ++side) {
          double& v = side == 0 ? y : yp;
          for (double dir : {+1.0, -1.0}) {
            const double trial_y =
                std::clamp(v + dir * step * R_y, 0.0, R_y);
            const double trial_value = side == 0 ? objective(x, trial_y, xp, yp)
                                                 : objective(x, y, xp, trial_y);
            if (trial_value > value) {
              value = trial_value;
              v = trial_y;
              improved = true;
            }
          }
        }
      }
      // Sign flips catch the opposing-pair structure of the maximizer.
      {
        const double trial_value = objective(x, y, -xp, yp);
        if (trial_value > value) {
          value = trial_value;
          xp = -xp;
          improved = true;
        }
      }
      if (!improved) step *= 0.5;
    }
    best = std::max(best, value);
  }
  return best;
}

// Hockey-stick Monte Carlo estimate of delta for a 1-d Gaussian mechanism
// at distance delta_sens: E[max(0, 1 - e^{eps - L})] with L the privacy
// loss at an output drawn from the mechanism.
inline MCEstimate mc_delta(double epsilon, double sigma, double delta_sens,
                           long n, std::uint64_t seed) {
  if (n < 100000) throw std::invalid_argument("mc_delta: n must be >= 10^5");
  if (epsilon <= 0 || sigma <= 0 || delta_sens <= 0) {
    throw std::invalid_argument("mc_delta: arguments must be > 0");
  }
  Rng rng(seed);
  const double ratio = delta_sens / sigma;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long s = 0; s < n; ++s) {
    const double loss = 0.5 * ratio * ratio - ratio * rng.normal();
    const double h = std::max(0.0, 1.0 - std::exp(epsilon - loss));
    sum += h;
    sum_sq += h * h;
  }
  const double mean = sum / static_cast<double>(n);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  MCEstimate out;
  out.value = mean;
  out.std_error = std::sqrt(var / static_cast<double>(n - 1));
  out.n_samples = n;
  out.seed = seed;
  return out;
}

// One row of the `verify` report.
struct VerifyCheck {
  std::string name;
  double closed_form = 0.0;
  double oracle = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline VerifyCheck make_check(const std::string& name, double closed,
                              double oracle, double tolerance) {
  VerifyCheck c{name, closed, oracle, tolerance, false};
  c.pass = std::abs(closed - oracle) <= tolerance;
  return c;
}

// The full closed-form-vs-oracle battery. `restarts` scales the sensitivity
// search, `samples` the Monte Carlo checks.
inline std::vector<VerifyCheck> run_verification(int restarts, long samples,
                                                 std::uint64_t seed) {
  std::vector<VerifyCheck> checks;

  // Pairing counts against the double-factorial closed form.
  for (int k = 1; k <= 5; ++k) {
    std::vector<int> slots(static_cast<std::size_t>(2 * k), 0);
    const double enumerated =
        static_cast<double>(pair_partitions(slots).size());
    double closed = 1.0;
    for (int i = 2 * k - 1; i > 1; i -= 2) closed *= i;
    checks.push_back(make_check("pairings_degree_" + std::to_string(2 * k),
                                closed, enumerated, 0.0));
  }

  // Fourth-order moment identities on a fixed covariance, against both the
  // direct product expression and a Monte Carlo estimate.
  {
    Eigen::MatrixXd S(3, 3);
    S << 1.0, 0.3, -0.2, 0.3, 0.8, 0.1, -0.2, 0.1, 1.2;
    const CovMatrix sigma(S);
    const ExponentIndex k22(std::vector<int>{2, 2, 0});
    const ExponentIndex k211(std::vector<int>{2, 1, 1});
    const double direct22 = S(0, 0) * S(1, 1) + 2.0 * S(0, 1) * S(0, 1);
    const double direct211 = S(0, 0) * S(1, 2) + 2.0 * S(0, 1) * S(0, 2);
    checks.push_back(make_check("moment_x1sq_x2sq_identity",
                                gaussian_moment(k22, sigma), direct22, 1e-12));
    checks.push_back(make_check("moment_x1sq_x2_x3_identity",
                                gaussian_moment(k211, sigma), direct211,
                                1e-12));
    const MCEstimate mc =
        mc_moment(k22, sigma, std::max(samples, 100000L), mix_seed(seed, 11));
    checks.push_back(make_check("moment_x1sq_x2sq_vs_mc",
                                gaussian_moment(k22, sigma), mc.value,
                                4.0 * mc.std_error));
  }

  // Sensitivity closed forms bracketed by randomized search.
  {
    std::map<std::string, double> equal{{"yt1", 1.0}, {"t2", 1.0}};
    const StatisticLayout lay = layout(Model::logistic, 3, 2);
    const double closed = sensitivity_logistic(1.0, 1.0, 1.0);
    const double found =
        sensitivity_search(lay, 1.0, 0.0, equal, restarts, mix_seed(seed, 21));
    checks.push_back(
        make_check("sensitivity_logistic_search", closed, found, 0.01 * closed));
  }
  {
    std::map<std::string, double> equal{
        {"t1", 1.0}, {"t2", 1.0}, {"yt1", 1.0}, {"yt2", 1.0}};
    const StatisticLayout lay = layout(Model::poisson, 3, 2);
    const double closed = sensitivity_poisson(1.0, 5.0, 1.0, 1.0, 1.0, 1.0);
    const double found =
        sensitivity_search(lay, 1.0, 5.0, equal, restarts, mix_seed(seed, 22));
    checks.push_back(
        make_check("sensitivity_poisson_search", closed, found, 0.01 * closed));
  }

  // General-m sensitivity against a dense-grid scan of the polynomial.
  {
    const GeneralMSensitivity gm = sensitivity_general_m(1.0, 6);
    double grid_min = 1e300;
    for (int i = 0; i <= 200000; ++i) {
      const double t = -1.0 + 2.0 * i / 200000.0;
      double sum = 0.0;
      double p = 1.0;
      for (int q = 1; q <= 6; ++q) {
        p *= t;
        sum += p;
      }
      grid_min = std::min(grid_min, sum);
    }
    const double grid_delta_sq = 12.0 - 2.0 * grid_min;
    checks.push_back(make_check("sensitivity_general_m6_sq",
                                gm.delta * gm.delta, grid_delta_sq, 1e-6));
  }

  // Analytic delta against the hockey-stick Monte Carlo estimate.
  {
    int i = 0;
    for (double eps : {0.5, 1.0, 2.0}) {
      const double sigma = 1.3;
      const double sens = 1.0;
      const MCEstimate mc = mc_delta(eps, sigma, sens, std::max(samples, 100000L),
                                     mix_seed(seed, 31 + i));
      checks.push_back(make_check(
          "delta_of_vs_mc_eps_" + format_real(eps), delta_of(eps, sigma, sens),
          mc.value, 3.0 * mc.std_error + 1e-12));
      ++i;
    }
  }

  // Calibration round trip at the logistic corollary sensitivity.
  {
    const double sens = std::sqrt(4.5);
    const double eps = 1.1;
    const double target_delta = 1e-5;
    const double sigma = calibrate_sigma(sens, eps, target_delta);
    checks.push_back(make_check("calibration_round_trip",
                                delta_of(eps, sigma, sens), target_delta,
                                1e-5 * target_delta));
  }

  // Normal approximation against the exact-link Monte Carlo reference.
  {
    Eigen::VectorXd theta(3);
    theta << 0.25, -0.15, 0.1;
    Eigen::MatrixXd S(3, 3);
    S << 0.5, 0.1, 0.0, 0.1, 0.4, -0.05, 0.0, -0.05, 0.6;
    const CovMatrix sigma(S);
    int i = 0;
    for (Model model : {Model::logistic, Model::poisson}) {
      const StatisticLayout lay = layout(model, 3, 2);
      const NormalApprox na = normal_approx(theta, sigma, lay);
      const LinkMomentsEstimate mc =
          mc_link_moments(model, theta, sigma, lay, std::max(samples, 100000L),
                          mix_seed(seed, 41 + i));
      const double mu_gap = (na.mu - mc.mu_hat).cwiseAbs().maxCoeff();
      const double cov_gap = (na.cov - mc.cov_hat).cwiseAbs().maxCoeff();
      checks.push_back(
          make_check("normal_approx_mu_" + to_string(model), 0.0, mu_gap, 0.01));
      checks.push_back(make_check("normal_approx_cov_" + to_string(model), 0.0,
                                  cov_gap, 0.05));
      ++i;
    }
  }

  return checks;
}

// JSON report of (check name, closed-form value, oracle value, tolerance,
// pass/fail) rows.
inline std::string verify_report_json(const std::vector<VerifyCheck>& checks) {
  std::ostringstream os;
  os << "{\n  \"checks\": [\n";
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const VerifyCheck& c = checks[i];
    os << "    {\"name\": \"" << c.name << "\", \"closed_form\": "
       << detail::json_real(c.closed_form) << ", \"oracle\": "
       << detail::json_real(c.oracle) << ", \"tolerance\": "
       << detail::json_real(c.tolerance) << ", \"pass\": "
       << (c.pass ? "true" : "false") << "}"
       << (i + 1 < checks.size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";
  return os.str();
}

}  // namespace dpglm

#endif  // DPGLM_ORACLES_HPP
