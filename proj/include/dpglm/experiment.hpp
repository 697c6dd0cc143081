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
// End-to-end experiment protocol: per (epsilon, repeat) cell, generate and
// preprocess data, aggregate and release the statistics, run noise-aware
// inference on the private release and on a near-noiseless baseline
// release, and score the posteriors against each other. Inference consumes
// only the release; raw records never cross that boundary.

#ifndef DPGLM_EXPERIMENT_HPP
#define DPGLM_EXPERIMENT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpglm/common.hpp"
#include "dpglm/data.hpp"
#include "dpglm/diagnostics.hpp"
#include "dpglm/inference.hpp"
#include "dpglm/privacy.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/sstats.hpp"

namespace dpglm {

// Noise scale used for the non-private baseline: the same noise-aware
// model, with the privatization noise made negligible.
inline constexpr double kBaselineNoiseSd = 1e-12;

struct ExperimentConfig {
  Model model = Model::logistic;
  int d = 3;
  int m = 2;
  std::vector<double> epsilons{0.1, 1.1};
  double delta = 1e-5;
  double R_x = 1.0;
  double R_y = 5.0;
  long N = 1000;
  Eigen::VectorXd true_theta;
  Eigen::MatrixXd covariance;
  int repeats = 5;
  ClipPolicy policy = ClipPolicy::scale_clip;
  MCMCConfig mcmc;
  PriorConfig prior;
  std::uint64_t seed = 0;
};

// Paper-protocol defaults. The covariance is a fixed non-identity positive
// definite matrix scaled so clipped rows are rare at R_x = 1.
inline ExperimentConfig default_experiment(Model model) {
  ExperimentConfig config;
  config.model = model;
  config.d = 3;
  config.true_theta.resize(3);
  config.covariance.resize(3, 3);
  config.covariance << 0.16, 0.04, -0.02,
                       0.04, 0.12, 0.03,
                      -0.02, 0.03, 0.18;
  if (model == Model::logistic) {
    config.true_theta << -0.9, -0.5, 0.3;
    config.N = 1000;
    config.policy = ClipPolicy::scale_clip;
    config.R_y = 0.0;
  } else {
    config.true_theta << 0.3, -0.6, 0.8;
    config.N = 500;
    config.policy = ClipPolicy::filter;
    config.R_y = 5.0;
    config.repeats = 5;
  }
  config.mcmc = default_mcmc(model);
  config.prior = default_prior(model, config.d);
  if (model == Model::logistic) {
    // 2-3x the squared non-private theta norm.
    config.prior.s_max = 2.5 * config.true_theta.squaredNorm();
  }
  return config;
}

struct CellResult {
  double epsilon = 0.0;
  int repeat = 0;
  std::uint64_t cell_seed = 0;
  std::vector<double> ks_per_coordinate;
  double ks_mean = 0.0;
  std::vector<double> r_hat_private;
  std::vector<double> r_hat_baseline;
  double acceptance_private = 0.0;
  double acceptance_baseline = 0.0;
  std::vector<double> posterior_mean_private;
  std::vector<double> posterior_mean_baseline;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<double> epsilons;
  std::vector<double> mean_ks_per_epsilon;
};

namespace detail {

// Pools kept theta_j samples across chains.
inline std::vector<double> pooled_theta(const std::vector<ChainOutput>& chains,
                                        int coordinate) {
  std::vector<double> pooled;
  for (const ChainOutput& c : chains) {
    for (Eigen::Index r = 0; r < c.samples.rows(); ++r) {
      pooled.push_back(c.samples(r, coordinate));
    }
  }
  return pooled;
}

inline std::vector<Eigen::VectorXd> per_chain_theta(
    const std::vector<ChainOutput>& chains, int coordinate) {
  std::vector<Eigen::VectorXd> out;
  for (const ChainOutput& c : chains) {
    out.push_back(c.samples.col(coordinate));
  }
  return out;
}

// 201-point quantile sketch of an ECDF for plot-ready output.
inline void append_cdf_rows(std::ostringstream& os, double epsilon, int repeat,
                            int coordinate, const char* kind,
                            const ECDF& curve) {
  const int points = 201;
  for (int q = 0; q < points; ++q) {
    const double frac = static_cast<double>(q) / (points - 1);
    const std::size_t idx = std::min(
        curve.sorted_values.size() - 1,
        static_cast<std::size_t>(frac * (curve.sorted_values.size() - 1)));
    const double x = curve.sorted_values[idx];
    os << format_real(epsilon) << "," << repeat << ",theta_" << (coordinate + 1)
       << "," << kind << "," << format_real(x) << "," << format_real(curve(x))
       << "\n";
  }
}

}  // namespace detail

// Runs every (epsilon, repeat) cell sequentially with independent derived
// seeds and writes cdf_curves.csv plus summary.json into out_dir.
// Deterministic: rerunning with the same config yields byte-identical
// files.
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const std::string& out_dir) {
  if (config.epsilons.empty() || config.repeats < 1) {
    throw std::invalid_argument("run_experiment: empty epsilon list or repeats");
  }
  if (config.true_theta.size() != config.d) {
    throw std::invalid_argument("run_experiment: theta dimension mismatch");
  }
  std::filesystem::create_directories(out_dir);

  const StatisticLayout lay = layout(config.model, config.d, config.m);
  ExperimentResult result;
  result.epsilons = config.epsilons;
  std::ostringstream cdf_rows;
  cdf_rows << "epsilon,repeat,parameter,kind,value,cdf\n";

  for (std::size_t ei = 0; ei < config.epsilons.size(); ++ei) {
    const double epsilon = config.epsilons[ei];
    for (int repeat = 0; repeat < config.repeats; ++repeat) {
      const std::uint64_t cell_seed =
          mix_seed(config.seed, ei * 1000003ULL + static_cast<std::uint64_t>(repeat));

      SynthConfig synth_config;
      synth_config.model = config.model;
      synth_config.N = config.N;
      synth_config.theta = config.true_theta;
      synth_config.covariance = config.covariance;
      synth_config.R_y = config.R_y;
      synth_config.seed = mix_seed(cell_seed, 1);
      const Dataset raw = synth(synth_config);
      const Dataset data =
          preprocess(raw, config.policy, config.R_x,
                     config.model == Model::poisson
                         ? config.R_y
                         : std::numeric_limits<double>::infinity());

      const Eigen::VectorXd s = aggregate(data.X, data.y, lay);

      PrivacyParams private_params;
      private_params.epsilon = epsilon;
      private_params.delta = config.delta;
      private_params.R_x = config.R_x;
      private_params.R_y = config.R_y;
      private_params.sigma_blocks =
          calibrate_blocks(lay, epsilon, config.delta, config.R_x, config.R_y);
      const NoisyRelease rel_private =
          release(s, lay, private_params, mix_seed(cell_seed, 2), data.n());

      PrivacyParams baseline_params = private_params;
      for (auto& [block, sigma] : baseline_params.sigma_blocks) {
        sigma = kBaselineNoiseSd;
      }
      const NoisyRelease rel_baseline =
          release(s, lay, baseline_params, mix_seed(cell_seed, 3), data.n());

      MCMCConfig mcmc_private = config.mcmc;
      mcmc_private.seed = mix_seed(cell_seed, 4);
      const std::vector<ChainOutput> chains_private =
          run_chains(rel_private, config.prior, mcmc_private);

      MCMCConfig mcmc_baseline = config.mcmc;
      mcmc_baseline.seed = mix_seed(cell_seed, 5);
      const std::vector<ChainOutput> chains_baseline =
          run_chains(rel_baseline, config.prior, mcmc_baseline);

      CellResult cell;
      cell.epsilon = epsilon;
      cell.repeat = repeat;
      cell.cell_seed = cell_seed;
      for (int j = 0; j < config.d; ++j) {
        const std::vector<double> pooled_private =
            detail::pooled_theta(chains_private, j);
        const std::vector<double> pooled_baseline =
            detail::pooled_theta(chains_baseline, j);
        const ECDF cdf_private = ecdf(pooled_private);
        const ECDF cdf_baseline = ecdf(pooled_baseline);
        cell.ks_per_coordinate.push_back(ks_score(cdf_private, cdf_baseline));
        if (config.mcmc.n_chains >= 2) {
          cell.r_hat_private.push_back(
              gelman_rubin(detail::per_chain_theta(chains_private, j)));
          cell.r_hat_baseline.push_back(
              gelman_rubin(detail::per_chain_theta(chains_baseline, j)));
        }
        double mean_private = 0.0;
        for (double v : pooled_private) mean_private += v;
        cell.posterior_mean_private.push_back(
            mean_private / static_cast<double>(pooled_private.size()));
        double mean_baseline = 0.0;
        for (double v : pooled_baseline) mean_baseline += v;
        cell.posterior_mean_baseline.push_back(
            mean_baseline / static_cast<double>(pooled_baseline.size()));
        detail::append_cdf_rows(cdf_rows, epsilon, repeat, j, "private",
                                cdf_private);
        detail::append_cdf_rows(cdf_rows, epsilon, repeat, j, "baseline",
                                cdf_baseline);
      }
      cell.ks_mean = 0.0;
      for (double ks : cell.ks_per_coordinate) cell.ks_mean += ks;
      cell.ks_mean /= static_cast<double>(config.d);
      double acc = 0.0;
      for (const ChainOutput& c : chains_private) acc += c.acceptance_rate;
      cell.acceptance_private = acc / static_cast<double>(chains_private.size());
      acc = 0.0;
      for (const ChainOutput& c : chains_baseline) acc += c.acceptance_rate;
      cell.acceptance_baseline =
          acc / static_cast<double>(chains_baseline.size());
      result.cells.push_back(std::move(cell));
    }
  }

  for (double epsilon : config.epsilons) {
    double total = 0.0;
    int count = 0;
    for (const CellResult& cell : result.cells) {
      if (cell.epsilon == epsilon) {
        total += cell.ks_mean;
        ++count;
      }
    }
    result.mean_ks_per_epsilon.push_back(total / std::max(count, 1));
  }

  {
    std::ofstream file(std::filesystem::path(out_dir) / "cdf_curves.csv");
    file << cdf_rows.str();
  }
  {
    std::ostringstream os;
    os << "{\n";
    os << "  \"model\": \"" << to_string(config.model) << "\",\n";
    os << "  \"d\": " << config.d << ",\n";
    os << "  \"m\": " << config.m << ",\n";
    os << "  \"N\": " << config.N << ",\n";
    os << "  \"delta\": " << detail::json_real(config.delta) << ",\n";
    os << "  \"repeats\": " << config.repeats << ",\n";
    os << "  \"seed\": " << config.seed << ",\n";
    os << "  \"policy\": \"" << to_string(config.policy) << "\",\n";
    os << "  \"epsilons\": [";
    for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
      os << (i ? ", " : "") << detail::json_real(config.epsilons[i]);
    }
    os << "],\n";
    os << "  \"mean_ks_per_epsilon\": [";
    for (std::size_t i = 0; i < result.mean_ks_per_epsilon.size(); ++i) {
      os << (i ? ", " : "") << detail::json_real(result.mean_ks_per_epsilon[i]);
    }
    os << "],\n";
    os << "  \"cells\": [\n";
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
      const CellResult& cell = result.cells[i];
      auto write_list = [&os](const std::vector<double>& values) {
        os << "[";
        for (std::size_t j = 0; j < values.size(); ++j) {
          os << (j ? ", " : "") << detail::json_real(values[j]);
        }
        os << "]";
      };
      os << "    {\"epsilon\": " << detail::json_real(cell.epsilon)
         << ", \"repeat\": " << cell.repeat << ", \"cell_seed\": "
         << cell.cell_seed << ",\n     \"ks\": ";
      write_list(cell.ks_per_coordinate);
      os << ", \"ks_mean\": " << detail::json_real(cell.ks_mean)
         << ",\n     \"r_hat_private\": ";
      write_list(cell.r_hat_private);
      os << ", \"r_hat_baseline\": ";
      write_list(cell.r_hat_baseline);
      os << ",\n     \"posterior_mean_private\": ";
      write_list(cell.posterior_mean_private);
      os << ", \"posterior_mean_baseline\": ";
      write_list(cell.posterior_mean_baseline);
      os << ",\n     \"acceptance_private\": "
         << detail::json_real(cell.acceptance_private)
         << ", \"acceptance_baseline\": "
         << detail::json_real(cell.acceptance_baseline) << "}"
         << (i + 1 < result.cells.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
    std::ofstream file(std::filesystem::path(out_dir) / "summary.json");
    file << os.str();
  }
  return result;
}

// Structured config file support: a JSON object whose fields mirror
// ExperimentConfig; missing fields keep the model defaults.
inline ExperimentConfig experiment_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Code::bad_format,
                    std::string("config: invalid JSON: ") + e.what());
  }
  const Model model =
      model_from_string(j.value("model", std::string("logistic")));
  ExperimentConfig config = default_experiment(model);
  if (j.contains("d")) config.d = j.at("d").get<int>();
  if (j.contains("m")) config.m = j.at("m").get<int>();
  if (j.contains("epsilons")) {
    config.epsilons = j.at("epsilons").get<std::vector<double>>();
  }
  if (j.contains("delta")) config.delta = j.at("delta").get<double>();
  if (j.contains("R_x")) config.R_x = j.at("R_x").get<double>();
  if (j.contains("R_y")) config.R_y = j.at("R_y").get<double>();
  if (j.contains("N")) config.N = j.at("N").get<long>();
  if (j.contains("repeats")) config.repeats = j.at("repeats").get<int>();
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("policy")) {
    config.policy = clip_policy_from_string(j.at("policy").get<std::string>());
  }
  if (j.contains("true_theta")) {
    const std::vector<double> theta =
        j.at("true_theta").get<std::vector<double>>();
    config.true_theta =
        Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
    config.d = static_cast<int>(theta.size());
  }
  if (j.contains("covariance")) {
    const auto& cov = j.at("covariance");
    if (cov.is_string()) {
      if (cov.get<std::string>() != "identity") {
        throw DataError(DataError::Code::bad_format,
                        "config: covariance string must be 'identity'");
      }
      config.covariance = Eigen::MatrixXd::Identity(config.d, config.d);
    } else {
      const auto rows = cov.get<std::vector<std::vector<double>>>();
      config.covariance.resize(static_cast<Eigen::Index>(rows.size()),
                               static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) {
          throw DataError(DataError::Code::bad_format,
                          "config: covariance must be square");
        }
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
          config.covariance(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(k)) = rows[i][k];
        }
      }
    }
  } else if (config.covariance.rows() != config.d) {
    config.covariance = Eigen::MatrixXd::Identity(config.d, config.d);
  }
  if (j.contains("mcmc")) {
    const auto& mc = j.at("mcmc");
    if (mc.contains("n_chains")) config.mcmc.n_chains = mc.at("n_chains");
    if (mc.contains("n_iters")) config.mcmc.n_iters = mc.at("n_iters");
    if (mc.contains("burn_in_fraction")) {
      config.mcmc.burn_in_fraction = mc.at("burn_in_fraction");
    }
    if (mc.contains("proposal_sd")) config.mcmc.proposal_sd = mc.at("proposal_sd");
  }
  if (j.contains("prior")) {
    const auto& pr = j.at("prior");
    config.prior = default_prior(model, config.d);
    if (pr.contains("s_max")) config.prior.s_max = pr.at("s_max");
    if (pr.contains("sigma_prior")) {
      const std::string kind = pr.at("sigma_prior").get<std::string>();
      if (kind == "scaled-lkj") {
        config.prior.sigma_prior = SigmaPrior::scaled_lkj;
      } else if (kind == "inverse-wishart") {
        config.prior.sigma_prior = SigmaPrior::inverse_wishart;
        if (config.prior.iw_nu <= config.d - 1) {
          config.prior.iw_nu = config.d + 2;
          config.prior.iw_psi =
              Eigen::MatrixXd::Identity(config.d, config.d);
        }
      } else {
        throw DataError(DataError::Code::bad_format,
                        "config: unknown sigma_prior " + kind);
      }
    }
    if (pr.contains("nu")) config.prior.iw_nu = pr.at("nu");
    if (pr.contains("lkj_eta")) config.prior.lkj_eta = pr.at("lkj_eta");
    if (pr.contains("lkj_scale_sd")) {
      config.prior.lkj_scale_sd = pr.at("lkj_scale_sd");
    }
  } else {
    config.prior = default_prior(model, config.d);
  }
  return config;
}

}  // namespace dpglm

#endif  // DPGLM_EXPERIMENT_HPP
