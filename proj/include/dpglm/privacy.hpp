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
// Tight L2-sensitivity of the joint statistic release, exact (epsilon,
// delta) characterization of the Gaussian mechanism via the normal CDF,
// minimal-noise calibration, and the noisy release itself.

#ifndef DPGLM_PRIVACY_HPP
#define DPGLM_PRIVACY_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpglm/common.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/sstats.hpp"

namespace dpglm {

struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
  double R_x = 0.0;  // input-norm clip bound
  double R_y = 0.0;  // response bound (Poisson only)
  std::map<std::string, double> sigma_blocks;  // noise sd per block label
};

// The perturbed statistic vector plus all public metadata needed to run
// noise-aware inference without ever touching the raw records again.
struct NoisyRelease {
  Eigen::VectorXd z;
  StatisticLayout layout;
  std::int64_t N = 0;
  Eigen::VectorXd noise_sd_per_entry;
  double sensitivity = 0.0;
  PrivacyParams params;
  std::uint64_t seed = 0;
};

// Standard normal CDF through the complementary error function; accurate in
// both tails because erfc is evaluated directly rather than as 1 - erf.
inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Joint release of [y t1(x); t2(x)] with per-block noise (sigma1, sigma2)
// is equivalent to a Gaussian mechanism with noise variance sigma1^2 and
// this sensitivity. Depends on the noise ratio only.
inline double sensitivity_logistic(double R, double sigma1, double sigma2) {
  if (R <= 0 || sigma1 <= 0 || sigma2 <= 0) {
    throw std::invalid_argument("sensitivity_logistic: arguments must be > 0");
  }
  const double c = (sigma1 * sigma1) / (sigma2 * sigma2);
  return std::sqrt(0.5 / c + 2.0 * R * R + 2.0 * c * R * R * R * R);
}

// Joint release of [t1; t2; y t1; y t2] with per-block noise
// (sigma1..sigma4), |y| <= R_y: equivalent unit mechanism has noise variance
// sigma1^2 and this sensitivity.
inline double sensitivity_poisson(double R_x, double R_y, double sigma1,
                                  double sigma2, double sigma3, double sigma4) {
  if (R_x <= 0 || sigma1 <= 0 || sigma2 <= 0 || sigma3 <= 0 || sigma4 <= 0) {
    throw std::invalid_argument("sensitivity_poisson: arguments must be > 0");
  }
  if (R_y < 0) {
    throw std::invalid_argument("sensitivity_poisson: R_y must be >= 0");
  }
  const double c2 = (sigma1 * sigma1) / (sigma2 * sigma2);
  const double c3 = (sigma1 * sigma1) / (sigma3 * sigma3) * R_y * R_y;
  const double c4 = (sigma1 * sigma1) / (sigma4 * sigma4) * R_y * R_y;
  if (c2 + c4 <= 0) {
    throw std::invalid_argument("sensitivity_poisson: c2 + c4 must be > 0");
  }
  return (2.0 * (c2 + c4) * R_x * R_x + c3 + 1.0) / std::sqrt(2.0 * (c2 + c4));
}

struct GeneralMSensitivity {
  double delta;     // sensitivity of the stacked release [t_1 ... t_m]
  double argmin_t;  // inner product <x, x'> attaining the bound
};

// Sensitivity of the joint order-1..m release with equal noise on all
// terms: Delta^2 = sum_i (2 R^{2i} - 2 t*^i), with t* minimizing
// sum_i t^i over t in [-R^2, R^2] (golden-section search to 1e-9).
inline GeneralMSensitivity sensitivity_general_m(double R, int m,
                                                 bool equal_sigma = true) {
  if (R <= 0) throw std::invalid_argument("sensitivity_general_m: R must be > 0");
  if (m < 1) throw std::invalid_argument("sensitivity_general_m: m must be >= 1");
  if (!equal_sigma) {
    throw std::invalid_argument(
        "sensitivity_general_m: only the equal-noise case is supported");
  }
  const double r2 = R * R;
  auto poly = [m](double t) {
    double sum = 0.0;
    double p = 1.0;
    for (int i = 1; i <= m; ++i) {
      p *= t;
      sum += p;
    }
    return sum;
  };
  // Coarse grid scan brackets the global minimum (the polynomial need not
  // be unimodal for every m), then golden-section polishes to 1e-12 width.
  const int grid = 2000;
  int best = 0;
  double best_value = poly(-r2);
  for (int i = 1; i <= grid; ++i) {
    const double t = -r2 + 2.0 * r2 * i / grid;
    const double v = poly(t);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  double a = -r2 + 2.0 * r2 * std::max(0, best - 1) / grid;
  double b = -r2 + 2.0 * r2 * std::min(grid, best + 1) / grid;
  auto dpoly = [m](double t) {
    double sum = 0.0;
    double p = 1.0;
    for (int i = 1; i <= m; ++i) {
      sum += i * p;
      p *= t;
    }
    return sum;
  };
  double t_star;
  if (dpoly(a) < 0.0 && dpoly(b) > 0.0) {
    // Interior stationary point: bisect the derivative sign change, which
    // localizes far better than value comparisons can.
    for (int iter = 0; iter < 200 && b - a > 1e-15 * r2; ++iter) {
      const double mid = 0.5 * (a + b);
      if (dpoly(mid) < 0.0) {
        a = mid;
      } else {
        b = mid;
      }
    }
    t_star = 0.5 * (a + b);
  } else {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    while (b - a > 1e-12) {
      if (poly(c) < poly(d)) {
        b = d;
      } else {
        a = c;
      }
      c = b - gr * (b - a);
      d = a + gr * (b - a);
    }
    t_star = 0.5 * (a + b);
  }
  if (poly(-r2) <= poly(t_star)) t_star = -r2;  // boundary may beat interior
  double delta_sq = 0.0;
  double rp = 1.0;
  double tp = 1.0;
  for (int i = 1; i <= m; ++i) {
    rp *= r2;
    tp *= t_star;
    delta_sq += 2.0 * rp - 2.0 * tp;
  }
  return GeneralMSensitivity{std::sqrt(delta_sq), t_star};
}

// Exact delta of a Gaussian mechanism with noise sd sigma at sensitivity
// delta_sens: Phi(D/2s - es/D) - e^eps Phi(-D/2s - es/D).
inline double delta_of(double epsilon, double sigma, double delta_sens) {
  if (epsilon <= 0 || sigma <= 0 || delta_sens <= 0) {
    throw std::invalid_argument("delta_of: arguments must be > 0");
  }
  const double a = delta_sens / (2.0 * sigma);
  const double b = epsilon * sigma / delta_sens;
  return standard_normal_cdf(a - b) -
         std::exp(epsilon) * standard_normal_cdf(-a - b);
}

// Minimal noise sd for (epsilon, delta) at the given sensitivity. delta_of
// is strictly decreasing in sigma, so exponential bracketing plus bisection
// to 1e-9 relative finds the crossing.
inline double calibrate_sigma(double delta_sens, double epsilon, double delta) {
  if (delta_sens <= 0 || epsilon <= 0) {
    throw std::invalid_argument("calibrate_sigma: arguments must be > 0");
  }
  if (delta <= 0 || delta >= 1) {
    throw std::invalid_argument("calibrate_sigma: delta must be in (0, 1)");
  }
  double lo = delta_sens * 1e-9;
  double hi = delta_sens;
  int iters = 0;
  while (delta_of(epsilon, hi, delta_sens) > delta) {
    lo = hi;
    hi *= 2.0;
    if (++iters > 200) {
      throw NumericalError("calibrate_sigma: bracketing did not converge");
    }
  }
  iters = 0;
  while (hi - lo > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (delta_of(epsilon, mid, delta_sens) > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (++iters > 200) {
      throw NumericalError("calibrate_sigma: bisection did not converge");
    }
  }
  return hi;
}

// Sensitivity of a laid-out release under the model-appropriate lemma. The
// reference noise variance is that of the first block in layout order.
inline double release_sensitivity(const StatisticLayout& layout,
                                  const PrivacyParams& params) {
  auto sigma = [&](const std::string& block) {
    auto it = params.sigma_blocks.find(block);
    if (it == params.sigma_blocks.end()) {
      throw std::invalid_argument("release: no noise scale for block " + block);
    }
    if (it->second <= 0) {
      throw std::invalid_argument("release: noise scales must be > 0");
    }
    return it->second;
  };
  if (layout.model == Model::logistic) {
    if (layout.m == 1) return 2.0 * params.R_x;
    return sensitivity_logistic(params.R_x, sigma("yt1"), sigma("t2"));
  }
  if (layout.m == 1) {
    // First-order analogue of the joint bound: [t1; y t1] maximized at
    // <x, x'> = -R_x^2 with y = y' = R_y.
    const double s1 = sigma("t1");
    const double s3 = sigma("yt1");
    const double c3 = (s1 * s1) / (s3 * s3) * params.R_y * params.R_y;
    return 2.0 * params.R_x * std::sqrt(1.0 + c3);
  }
  return sensitivity_poisson(params.R_x, params.R_y, sigma("t1"), sigma("t2"),
                             sigma("yt1"), sigma("yt2"));
}

// Calibrates per-block noise scales to meet (epsilon, delta). The ratios
// fix the relative noise across blocks (default: equal); the common scale
// is set so the equivalent unit mechanism is exactly tight.
inline std::map<std::string, double> calibrate_blocks(
    const StatisticLayout& layout, double epsilon, double delta, double R_x,
    double R_y, const std::map<std::string, double>& ratios = {}) {
  PrivacyParams shape;
  shape.epsilon = epsilon;
  shape.delta = delta;
  shape.R_x = R_x;
  shape.R_y = R_y;
  const std::vector<std::string> blocks = layout.block_order();
  for (const std::string& b : blocks) {
    auto it = ratios.find(b);
    shape.sigma_blocks[b] = (it == ratios.end()) ? 1.0 : it->second;
  }
  const double delta_sens = release_sensitivity(layout, shape);
  const double ref_ratio = shape.sigma_blocks.at(blocks.front());
  const double sigma_ref = calibrate_sigma(delta_sens, epsilon, delta);
  std::map<std::string, double> out;
  for (const std::string& b : blocks) {
    out[b] = sigma_ref * shape.sigma_blocks.at(b) / ref_ratio;
  }
  return out;
}

// Adds entrywise independent zero-mean Gaussian noise with block-assigned
// standard deviations: z = s + zeta. Deterministic given the seed; the
// generator is private to the call.
inline NoisyRelease release(const Eigen::VectorXd& s,
                            const StatisticLayout& layout,
                            const PrivacyParams& params, std::uint64_t seed,
                            std::int64_t N) {
  if (s.size() != layout.size()) {
    throw std::invalid_argument("release: statistic size does not match layout");
  }
  NoisyRelease out;
  out.layout = layout;
  out.N = N;
  out.params = params;
  out.seed = seed;
  out.sensitivity = release_sensitivity(layout, params);
  out.noise_sd_per_entry.resize(layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    const std::string& block = layout.entries[static_cast<std::size_t>(i)].block;
    out.noise_sd_per_entry[i] = params.sigma_blocks.at(block);
  }
  Rng rng(seed);
  out.z.resize(layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    out.z[i] = s[i] + out.noise_sd_per_entry[i] * rng.normal();
  }
  return out;
}

namespace detail {

// JSON real with 17 significant digits, always.
inline std::string json_real(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.16e", v);
  return std::string(buffer);
}

}  // namespace detail

// Serializes a release to its JSON document. Field order and number format
// are fixed so reruns produce byte-identical files.
inline std::string to_json(const NoisyRelease& release) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"model\": \"" << to_string(release.layout.model) << "\",\n";
  os << "  \"d\": " << release.layout.d << ",\n";
  os << "  \"m\": " << release.layout.m << ",\n";
  os << "  \"N\": " << release.N << ",\n";
  os << "  \"epsilon\": " << detail::json_real(release.params.epsilon) << ",\n";
  os << "  \"delta\": " << detail::json_real(release.params.delta) << ",\n";
  os << "  \"R_x\": " << detail::json_real(release.params.R_x) << ",\n";
  os << "  \"R_y\": " << detail::json_real(release.params.R_y) << ",\n";
  os << "  \"sensitivity\": " << detail::json_real(release.sensitivity)
     << ",\n";
  os << "  \"blocks\": [\n";
  const std::vector<std::string> blocks = release.layout.block_order();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    os << "    {\n";
    os << "      \"label\": \"" << blocks[b] << "\",\n";
    os << "      \"sigma\": "
       << detail::json_real(release.params.sigma_blocks.at(blocks[b]))
       << ",\n";
    os << "      \"entries\": [\n";
    bool first = true;
    for (int i = 0; i < release.layout.size(); ++i) {
      const StatisticEntry& e =
          release.layout.entries[static_cast<std::size_t>(i)];
      if (e.block != blocks[b]) continue;
      if (!first) os << ",\n";
      first = false;
      os << "        {\"exponents\": [";
      for (int j = 0; j < e.index.dimension(); ++j) {
        if (j > 0) os << ", ";
        os << e.index[j];
      }
      os << "], \"y_power\": " << e.y_power << ", \"multiplier\": "
         << detail::json_real(e.multiplier) << ", \"value\": "
         << detail::json_real(release.z[i]) << "}";
    }
    os << "\n      ]\n";
    os << "    }" << (b + 1 < blocks.size() ? "," : "") << "\n";
  }
  os << "  ],\n";
  os << "  \"seed\": " << release.seed << "\n";
  os << "}\n";
  return os.str();
}

inline NoisyRelease release_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Code::bad_format,
                    std::string("release: invalid JSON: ") + e.what());
  }
  try {
    NoisyRelease out;
    out.layout.model = model_from_string(j.at("model").get<std::string>());
    out.layout.d = j.at("d").get<int>();
    out.layout.m = j.at("m").get<int>();
    out.N = j.at("N").get<std::int64_t>();
    out.params.epsilon = j.at("epsilon").get<double>();
    out.params.delta = j.at("delta").get<double>();
    out.params.R_x = j.at("R_x").get<double>();
    out.params.R_y = j.at("R_y").get<double>();
    out.sensitivity = j.at("sensitivity").get<double>();
    out.seed = j.at("seed").get<std::uint64_t>();
    std::vector<double> z;
    std::vector<double> sd;
    for (const auto& block : j.at("blocks")) {
      const std::string label = block.at("label").get<std::string>();
      const double sigma = block.at("sigma").get<double>();
      out.params.sigma_blocks[label] = sigma;
      for (const auto& entry : block.at("entries")) {
        std::vector<int> exps = entry.at("exponents").get<std::vector<int>>();
        out.layout.entries.push_back(
            StatisticEntry{ExponentIndex(exps), entry.at("y_power").get<int>(),
                           entry.at("multiplier").get<double>(), label});
        z.push_back(entry.at("value").get<double>());
        sd.push_back(sigma);
      }
    }
    out.z = Eigen::Map<Eigen::VectorXd>(z.data(),
                                        static_cast<Eigen::Index>(z.size()));
    out.noise_sd_per_entry = Eigen::Map<Eigen::VectorXd>(
        sd.data(), static_cast<Eigen::Index>(sd.size()));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Code::bad_format,
                    std::string("release: missing or invalid field: ") +
                        e.what());
  }
}

}  // namespace dpglm

#endif  // DPGLM_PRIVACY_HPP
