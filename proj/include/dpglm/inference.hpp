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
// Noise-aware posterior sampling of (theta, Sigma) by random-walk
// Metropolis-Hastings on an unconstrained latent parameterization:
// direction/norm latents for theta and a log-diagonal Cholesky factor for
// Sigma, with the change-of-variables Jacobians folded into the prior.

#ifndef DPGLM_INFERENCE_HPP
#define DPGLM_INFERENCE_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpglm/approx.hpp"
#include "dpglm/common.hpp"
#include "dpglm/privacy.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

// Unconstrained latent coordinates of one chain state.
//   p        - coefficient direction latents (theta direction, or theta
//              itself for the Poisson model);
//   log_rho  - squared-norm latent for the truncated chi-square prior
//              (kept as an inert standard-normal coordinate for Poisson);
//   chol     - Sigma factor latents, d log-diagonal entries followed by the
//              strictly-lower-triangular entries in row-major order.
struct LatentVector {
  Eigen::VectorXd p;
  double log_rho = 0.0;
  Eigen::VectorXd chol;

  static int size_for(int d) { return d + 1 + d * (d + 1) / 2; }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(p.size() + 1 + chol.size());
    out.head(p.size()) = p;
    out[p.size()] = log_rho;
    out.tail(chol.size()) = chol;
    return out;
  }

  static LatentVector unflatten(const Eigen::VectorXd& v, int d) {
    if (v.size() != size_for(d)) {
      throw std::invalid_argument("LatentVector: wrong flat size");
    }
    LatentVector out;
    out.p = v.head(d);
    out.log_rho = v[d];
    out.chol = v.tail(d * (d + 1) / 2);
    return out;
  }
};

enum class SigmaPrior { scaled_lkj, inverse_wishart };

struct PriorConfig {
  Model model = Model::logistic;
  // Truncation bound on ||theta||^2 (logistic only; typically 2-3 times the
  // squared non-private norm).
  double s_max = 3.0;
  SigmaPrior sigma_prior = SigmaPrior::scaled_lkj;
  double lkj_eta = 2.0;
  double lkj_scale_sd = 2.5;
  double iw_nu = 0.0;            // must exceed d - 1 for inverse-Wishart
  Eigen::MatrixXd iw_psi;        // scale matrix; identity if empty
  // The generative text reads sqrt(max(rho, s)); an upper bound clamps from
  // above, so min is the default and max is available for literal replay.
  bool literal_max_truncation = false;
};

// Paper defaults: scaled-LKJ(2, 2.5) with the truncated chi-square norm
// prior for logistic; inverse-Wishart(d + 2, I) with a standard-normal
// theta prior for Poisson.
inline PriorConfig default_prior(Model model, int d, double s_max = 3.0) {
  PriorConfig prior;
  prior.model = model;
  prior.s_max = s_max;
  if (model == Model::poisson) {
    prior.sigma_prior = SigmaPrior::inverse_wishart;
    prior.iw_nu = d + 2;
    prior.iw_psi = Eigen::MatrixXd::Identity(d, d);
  }
  return prior;
}

struct MCMCConfig {
  int n_chains = 4;
  int n_iters = 10000;
  double burn_in_fraction = 0.5;
  double proposal_sd = 0.1;
  std::uint64_t seed = 0;
};

inline MCMCConfig default_mcmc(Model model) {
  MCMCConfig config;
  if (model == Model::poisson) {
    config.n_iters = 50000;
    config.proposal_sd = 0.01;
  } else {
    config.n_iters = 30000;
    config.proposal_sd = 0.1;
  }
  return config;
}

struct ChainState {
  LatentVector latents;
  Eigen::VectorXd theta;
  Eigen::MatrixXd sigma;
  double log_target = -std::numeric_limits<double>::infinity();
  long n_proposed = 0;
  long n_accepted = 0;
};

struct ChainOutput {
  // kept iterations x (d + d^2): theta, then Sigma flattened row-major.
  Eigen::MatrixXd samples;
  double acceptance_rate = 0.0;
  Eigen::VectorXd log_target_trace;
};

namespace detail {

inline Eigen::MatrixXd cholesky_from_latents(const Eigen::VectorXd& chol,
                                             int d) {
  if (chol.size() != d * (d + 1) / 2) {
    throw std::invalid_argument("chol latents: wrong size");
  }
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) L(i, i) = std::exp(chol[i]);
  int idx = d;
  for (int i = 1; i < d; ++i) {
    for (int j = 0; j < i; ++j) L(i, j) = chol[idx++];
  }
  return L;
}

inline Eigen::VectorXd latents_from_cholesky(const Eigen::MatrixXd& L) {
  const int d = static_cast<int>(L.rows());
  Eigen::VectorXd chol(d * (d + 1) / 2);
  for (int i = 0; i < d; ++i) chol[i] = std::log(L(i, i));
  int idx = d;
  for (int i = 1; i < d; ++i) {
    for (int j = 0; j < i; ++j) chol[idx++] = L(i, j);
  }
  return chol;
}

}  // namespace detail

// Deterministic map from latents to (theta, Sigma). Sigma = L L^T with
// exponentiated diagonal is positive definite by construction; theta is the
// direction p scaled to squared norm min(rho, s_max).
inline std::pair<Eigen::VectorXd, CovMatrix> transform(
    const LatentVector& latents, const PriorConfig& prior) {
  const int d = static_cast<int>(latents.p.size());
  const Eigen::MatrixXd L = detail::cholesky_from_latents(latents.chol, d);
  CovMatrix sigma(Eigen::MatrixXd(L * L.transpose()));
  Eigen::VectorXd theta;
  if (prior.model == Model::poisson) {
    theta = latents.p;
  } else {
    const double norm = latents.p.norm();
    if (norm == 0.0) {
      throw std::invalid_argument("transform: direction latents are zero");
    }
    const double rho = std::exp(latents.log_rho);
    const double s = prior.literal_max_truncation ? std::max(rho, prior.s_max)
                                                  : std::min(rho, prior.s_max);
    theta = std::sqrt(s) * latents.p / norm;
  }
  return {std::move(theta), std::move(sigma)};
}

// Unnormalized LKJ log density on a correlation matrix:
// (eta - 1) log det(Omega). The normalizer cancels in MH ratios.
inline double lkj_correlation_logpdf_unnorm(const Eigen::MatrixXd& omega,
                                            double eta) {
  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) {
    return -std::numeric_limits<double>::infinity();
  }
  double log_det = 0.0;
  for (int i = 0; i < omega.rows(); ++i) {
    log_det += 2.0 * std::log(llt.matrixLLT()(i, i));
  }
  return (eta - 1.0) * log_det;
}

inline double log_multivariate_gamma(double a, int d) {
  double out = 0.25 * d * (d - 1) * std::log(3.14159265358979323846);
  for (int j = 1; j <= d; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

// Fully normalized inverse-Wishart(nu, Psi) log density.
inline double inverse_wishart_logpdf(const Eigen::MatrixXd& sigma, double nu,
                                     const Eigen::MatrixXd& psi) {
  const int d = static_cast<int>(sigma.rows());
  if (nu <= d - 1) {
    throw std::invalid_argument("inverse_wishart_logpdf: need nu > d - 1");
  }
  Eigen::LLT<Eigen::MatrixXd> llt_sigma(sigma);
  Eigen::LLT<Eigen::MatrixXd> llt_psi(psi);
  if (llt_sigma.info() != Eigen::Success || llt_psi.info() != Eigen::Success) {
    return -std::numeric_limits<double>::infinity();
  }
  double log_det_sigma = 0.0;
  double log_det_psi = 0.0;
  for (int i = 0; i < d; ++i) {
    log_det_sigma += 2.0 * std::log(llt_sigma.matrixLLT()(i, i));
    log_det_psi += 2.0 * std::log(llt_psi.matrixLLT()(i, i));
  }
  const double trace = llt_sigma.solve(psi).trace();
  return 0.5 * nu * log_det_psi - 0.5 * nu * d * std::log(2.0) -
         log_multivariate_gamma(0.5 * nu, d) -
         0.5 * (nu + d + 1) * log_det_sigma - 0.5 * trace;
}

inline double half_normal_logpdf(double x, double scale) {
  if (x < 0) return -std::numeric_limits<double>::infinity();
  return 0.5 * std::log(2.0 / 3.14159265358979323846) - std::log(scale) -
         0.5 * x * x / (scale * scale);
}

// Log prior density of the latents, including the exp-map and Cholesky
// Jacobians so the sampler can walk unconstrained coordinates. The theta
// truncation is a hard clamp in transform and contributes an atom rather
// than a density adjustment.
inline double log_prior(const LatentVector& latents, const PriorConfig& prior) {
  const int d = static_cast<int>(latents.p.size());
  constexpr double kLogTwoPi = 1.8378770664093454836;
  double lp = -0.5 * latents.p.squaredNorm() - 0.5 * d * kLogTwoPi;

  if (prior.model == Model::logistic) {
    // chi-square(d) on rho = exp(log_rho), plus the exp-map Jacobian.
    const double rho = std::exp(latents.log_rho);
    lp += (0.5 * d - 1.0) * latents.log_rho - 0.5 * rho -
          0.5 * d * std::log(2.0) - std::lgamma(0.5 * d) + latents.log_rho;
  } else {
    // theta = p carries the standard-normal prior already; log_rho is an
    // inert proper coordinate.
    lp += -0.5 * latents.log_rho * latents.log_rho - 0.5 * kLogTwoPi;
  }

  const Eigen::MatrixXd L = detail::cholesky_from_latents(latents.chol, d);
  const Eigen::MatrixXd sigma = L * L.transpose();
  // |d Sigma / d latents| = 2^d prod_i L_ii^{d+1-i} (Cholesky map, 0-indexed
  // rows) times prod_i L_ii (log-diagonal reparameterization).
  double log_jac = d * std::log(2.0);
  for (int i = 0; i < d; ++i) log_jac += (d + 1 - i) * std::log(L(i, i));

  double lp_sigma;
  if (prior.sigma_prior == SigmaPrior::scaled_lkj) {
    Eigen::VectorXd tau(d);
    double sum_log_tau = 0.0;
    for (int i = 0; i < d; ++i) {
      tau[i] = std::sqrt(sigma(i, i));
      sum_log_tau += std::log(tau[i]);
    }
    const Eigen::MatrixXd omega =
        tau.cwiseInverse().asDiagonal() * sigma *
        tau.cwiseInverse().asDiagonal();
    lp_sigma = lkj_correlation_logpdf_unnorm(omega, prior.lkj_eta);
    for (int i = 0; i < d; ++i) {
      lp_sigma += half_normal_logpdf(tau[i], prior.lkj_scale_sd);
    }
    // |d Sigma / d (tau, Omega)| = 2^d prod_i tau_i^d.
    lp_sigma -= d * std::log(2.0) + d * sum_log_tau;
  } else {
    Eigen::MatrixXd psi = prior.iw_psi;
    if (psi.size() == 0) psi = Eigen::MatrixXd::Identity(d, d);
    lp_sigma = inverse_wishart_logpdf(sigma, prior.iw_nu, psi);
  }
  return lp + lp_sigma + log_jac;
}

// log_prior + marginal log-likelihood; indefinite-approximation failures
// map to -infinity so the proposal is rejected.
inline double log_target(const LatentVector& latents,
                         const NoisyRelease& release,
                         const PriorConfig& prior) {
  const auto [theta, sigma] = transform(latents, prior);
  const double lp = log_prior(latents, prior);
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  const std::optional<double> ll = marginal_loglik(release, theta, sigma);
  if (!ll.has_value()) return -std::numeric_limits<double>::infinity();
  const double lt = lp + *ll;
  return std::isfinite(lt) ? lt : -std::numeric_limits<double>::infinity();
}

namespace detail {

// One symmetric random-walk Metropolis step on an arbitrary log-target.
// This kernel is shared by the production sampler and by tests that inject
// synthetic targets.
template <typename Target>
bool rw_step(Eigen::VectorXd& x, double& log_target_value, const Target& target,
             double proposal_sd, Rng& rng) {
  Eigen::VectorXd proposal = x;
  for (Eigen::Index i = 0; i < proposal.size(); ++i) {
    proposal[i] += proposal_sd * rng.normal();
  }
  const double proposed = target(proposal);
  const double log_u = std::log(std::max(rng.uniform(), 1e-300));
  if (proposed > -std::numeric_limits<double>::infinity() &&
      log_u < proposed - log_target_value) {
    x = proposal;
    log_target_value = proposed;
    return true;
  }
  return false;
}

}  // namespace detail

inline ChainState make_state(const LatentVector& latents,
                             const NoisyRelease& release,
                             const PriorConfig& prior) {
  ChainState state;
  state.latents = latents;
  auto [theta, sigma] = transform(latents, prior);
  state.theta = std::move(theta);
  state.sigma = sigma.matrix();
  state.log_target = log_target(latents, release, prior);
  return state;
}

// Proposes latents + N(0, proposal_sd^2 I) and accepts with probability
// min(1, exp(delta log-target)); rejected proposals return the prior state
// with updated bookkeeping.
inline ChainState mh_step(const ChainState& state, const NoisyRelease& release,
                          const PriorConfig& prior, const MCMCConfig& config,
                          Rng& rng) {
  const int d = release.layout.d;
  ChainState next = state;
  Eigen::VectorXd flat = state.latents.flatten();
  double lt = state.log_target;
  const bool accepted = detail::rw_step(
      flat, lt,
      [&](const Eigen::VectorXd& v) {
        return log_target(LatentVector::unflatten(v, d), release, prior);
      },
      config.proposal_sd, rng);
  next.n_proposed += 1;
  if (accepted) {
    next.latents = LatentVector::unflatten(flat, d);
    auto [theta, sigma] = transform(next.latents, prior);
    next.theta = std::move(theta);
    next.sigma = sigma.matrix();
    next.log_target = lt;
    next.n_accepted += 1;
  }
  return next;
}

// Correlation matrix draw from LKJ(eta) via the onion method.
inline Eigen::MatrixXd sample_lkj(int d, double eta, Rng& rng) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(d, d);
  if (d == 1) return omega;
  double beta = eta + 0.5 * (d - 2);
  const double r = 2.0 * rng.beta(beta, beta) - 1.0;
  omega(0, 1) = r;
  omega(1, 0) = r;
  for (int k = 2; k < d; ++k) {
    beta -= 0.5;
    const double y = rng.beta(0.5 * k, beta);
    Eigen::VectorXd u(k);
    for (int j = 0; j < k; ++j) u[j] = rng.normal();
    double norm = u.norm();
    if (norm == 0.0) norm = 1.0;
    u = std::sqrt(y) * u / norm;
    Eigen::LLT<Eigen::MatrixXd> llt(omega.topLeftCorner(k, k));
    const Eigen::VectorXd z = llt.matrixL() * u;
    omega.block(0, k, k, 1) = z;
    omega.block(k, 0, 1, k) = z.transpose();
  }
  return omega;
}

// Inverse-Wishart(nu, psi) draw: Bartlett decomposition of the Wishart with
// scale psi^{-1}, then inversion.
inline Eigen::MatrixXd sample_inverse_wishart(double nu,
                                              const Eigen::MatrixXd& psi,
                                              Rng& rng) {
  const int d = static_cast<int>(psi.rows());
  if (nu <= d - 1) {
    throw std::invalid_argument("sample_inverse_wishart: need nu > d - 1");
  }
  const Eigen::MatrixXd scale = psi.inverse();
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sample_inverse_wishart: scale factorization failed");
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    A(i, i) = std::sqrt(rng.chi_squared(nu - i));
    for (int j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  const Eigen::MatrixXd L = llt.matrixL() * A;
  return (L * L.transpose()).inverse();
}

// Fresh latent draw from the prior, so independent chains start
// overdispersed and the Gelman-Rubin statistic is meaningful.
inline LatentVector draw_prior_latents(const PriorConfig& prior, int d,
                                       Rng& rng) {
  LatentVector latents;
  latents.p.resize(d);
  for (int j = 0; j < d; ++j) latents.p[j] = rng.normal();
  if (prior.model == Model::logistic) {
    latents.log_rho = std::log(std::max(rng.chi_squared(d), 1e-12));
  } else {
    latents.log_rho = rng.normal();
  }
  Eigen::MatrixXd sigma;
  if (prior.sigma_prior == SigmaPrior::scaled_lkj) {
    const Eigen::MatrixXd omega = sample_lkj(d, prior.lkj_eta, rng);
    Eigen::VectorXd tau(d);
    for (int i = 0; i < d; ++i) {
      tau[i] = std::max(std::abs(prior.lkj_scale_sd * rng.normal()),
                        1e-6 * prior.lkj_scale_sd);
    }
    sigma = tau.asDiagonal() * omega * tau.asDiagonal();
  } else {
    Eigen::MatrixXd psi = prior.iw_psi;
    if (psi.size() == 0) psi = Eigen::MatrixXd::Identity(d, d);
    sigma = sample_inverse_wishart(prior.iw_nu, psi, rng);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("draw_prior_latents: Sigma draw not factorizable");
  }
  latents.chol = detail::latents_from_cholesky(llt.matrixL());
  return latents;
}

// Runs independent chains from distinct sub-seeds (seed + chain index),
// discards burn-in, and reports kept samples in transformed (theta, Sigma)
// coordinates.
inline std::vector<ChainOutput> run_chains(const NoisyRelease& release,
                                           const PriorConfig& prior,
                                           const MCMCConfig& config) {
  if (config.n_chains < 1 || config.n_iters < 1) {
    throw std::invalid_argument("run_chains: need n_chains, n_iters >= 1");
  }
  if (config.burn_in_fraction < 0 || config.burn_in_fraction >= 1) {
    throw std::invalid_argument("run_chains: burn_in_fraction must be in [0,1)");
  }
  if (config.proposal_sd <= 0) {
    throw std::invalid_argument("run_chains: proposal_sd must be > 0");
  }
  const int d = release.layout.d;
  const int burn =
      static_cast<int>(config.n_iters * config.burn_in_fraction);
  const int kept = config.n_iters - burn;
  std::vector<ChainOutput> outputs;
  outputs.reserve(static_cast<std::size_t>(config.n_chains));

  for (int chain = 0; chain < config.n_chains; ++chain) {
    Rng rng(config.seed + static_cast<std::uint64_t>(chain));
    ChainState state;
    bool initialized = false;
    for (int attempt = 0; attempt < 100 && !initialized; ++attempt) {
      try {
        const LatentVector init = draw_prior_latents(prior, d, rng);
        state = make_state(init, release, prior);
        initialized = std::isfinite(state.log_target);
      } catch (const std::exception&) {
        initialized = false;
      }
    }
    if (!initialized) {
      throw NumericalError(
          "run_chains: could not initialize chain " + std::to_string(chain) +
          " with a finite log-target after 100 prior draws");
    }

    ChainOutput out;
    out.samples.resize(kept, d + d * d);
    out.log_target_trace.resize(kept);
    for (int iter = 0; iter < config.n_iters; ++iter) {
      state = mh_step(state, release, prior, config, rng);
      if (iter >= burn) {
        const int row = iter - burn;
        out.samples.block(row, 0, 1, d) = state.theta.transpose();
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) {
            out.samples(row, d + i * d + j) = state.sigma(i, j);
          }
        }
        out.log_target_trace[row] = state.log_target;
      }
    }
    out.acceptance_rate = state.n_proposed > 0
                              ? static_cast<double>(state.n_accepted) /
                                    static_cast<double>(state.n_proposed)
                              : 0.0;
    outputs.push_back(std::move(out));
  }

  bool any_moved = false;
  for (const ChainOutput& out : outputs) {
    if (out.acceptance_rate > 0) any_moved = true;
  }
  if (!any_moved) {
    std::ostringstream os;
    os << "run_chains: no proposal was accepted in any of " << config.n_chains
       << " chains over " << config.n_iters
       << " iterations (proposal_sd = " << config.proposal_sd << ")";
    throw NumericalError(os.str());
  }
  return outputs;
}

// Chain CSV: one row per kept iteration with columns
// chain, iter, theta_1..theta_d, sigma_11..sigma_dd, log_target.
inline std::string chains_to_csv(const std::vector<ChainOutput>& chains,
                                 int d) {
  std::ostringstream os;
  os << "chain,iter";
  for (int j = 1; j <= d; ++j) os << ",theta_" << j;
  for (int i = 1; i <= d; ++i) {
    for (int j = 1; j <= d; ++j) os << ",sigma_" << i << j;
  }
  os << ",log_target\n";
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const ChainOutput& chain = chains[c];
    for (Eigen::Index row = 0; row < chain.samples.rows(); ++row) {
      os << c << "," << row;
      for (Eigen::Index col = 0; col < chain.samples.cols(); ++col) {
        os << "," << format_real(chain.samples(row, col));
      }
      os << "," << format_real(chain.log_target_trace[row]) << "\n";
    }
  }
  return os.str();
}

// Parses a chain CSV back into per-chain sample matrices (without the
// chain/iter columns). Column count must be d + d^2 + 1 for some d.
inline std::vector<Eigen::MatrixXd> chains_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) {
    throw DataError(DataError::Code::empty_file, "chain CSV is empty");
  }
  std::map<long, std::vector<std::vector<double>>> per_chain;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    long chain = -1;
    int col = 0;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw DataError(DataError::Code::non_numeric,
                        "chain CSV: non-numeric cell: " + cell);
      }
      if (col == 0) {
        chain = static_cast<long>(v);
      } else if (col >= 2) {
        row.push_back(v);
      }
      ++col;
    }
    per_chain[chain].push_back(std::move(row));
  }
  std::vector<Eigen::MatrixXd> out;
  for (const auto& [chain, rows] : per_chain) {
    if (rows.empty()) continue;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            rows[r][c];
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace dpglm

#endif  // DPGLM_INFERENCE_HPP
