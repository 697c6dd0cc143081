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

#include "dpglm/privacy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dpglm/rng.hpp"
#include "dpglm/sstats.hpp"

namespace dpglm {
namespace {

TEST(SensitivityLogistic, EqualNoiseCorollary) {
  EXPECT_NEAR(sensitivity_logistic(1.0, 1.0, 1.0), std::sqrt(4.5), 1e-14);
  EXPECT_NEAR(sensitivity_logistic(1.0, 0.37, 0.37), std::sqrt(4.5), 1e-14);
}

TEST(SensitivityLogistic, UnequalNoiseCase) {
  // R = 1, sigma1 = 1, sigma2 = sqrt(2): sqrt(1 + 2 + 1) = 2.
  EXPECT_NEAR(sensitivity_logistic(1.0, 1.0, std::sqrt(2.0)), 2.0, 1e-14);
}

TEST(SensitivityLogistic, CommonScaleInvariance) {
  const double base = sensitivity_logistic(0.8, 1.0, 1.7);
  for (double c : {0.25, 3.0, 40.0}) {
    EXPECT_NEAR(sensitivity_logistic(0.8, c, c * 1.7), base, 1e-12 * base);
  }
}

TEST(SensitivityLogistic, RejectsNonPositiveArguments) {
  EXPECT_THROW(sensitivity_logistic(0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(sensitivity_logistic(1.0, -1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(sensitivity_logistic(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(SensitivityPoisson, EqualNoiseCorollary) {
  for (double ry : {1.0, 5.0}) {
    EXPECT_NEAR(sensitivity_poisson(1.0, ry, 1.0, 1.0, 1.0, 1.0),
                std::sqrt(4.5 * (1.0 + ry * ry)), 1e-12);
  }
}

TEST(SensitivityPoisson, ZeroResponseBoundReducesToLogistic) {
  EXPECT_NEAR(sensitivity_poisson(1.0, 0.0, 1.0, 1.0, 1.0, 1.0),
              3.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(sensitivity_poisson(1.0, 0.0, 1.0, 1.0, 1.0, 1.0),
              std::sqrt(4.5), 1e-14);
}

TEST(SensitivityPoisson, AppendixProtocolValue) {
  EXPECT_NEAR(sensitivity_poisson(1.0, 5.0, 1.0, 1.0, 1.0, 1.0),
              std::sqrt(4.5 * 26.0), 1e-12);
}

TEST(SensitivityGeneralM, FirstOrderIsExact) {
  for (double R : {0.5, 1.0, 2.0}) {
    const GeneralMSensitivity gm = sensitivity_general_m(R, 1);
    EXPECT_DOUBLE_EQ(gm.delta, 2.0 * R);
    EXPECT_DOUBLE_EQ(gm.argmin_t, -R * R);
  }
}

TEST(SensitivityGeneralM, OrderSixReferenceValues) {
  const GeneralMSensitivity gm = sensitivity_general_m(1.0, 6);
  EXPECT_NEAR(gm.delta * gm.delta, 12.72, 0.05);
  EXPECT_NEAR(gm.argmin_t, -0.67, 0.01);
}

TEST(SensitivityGeneralM, OrderTwoMatchesLogisticEqualNoise) {
  const GeneralMSensitivity gm = sensitivity_general_m(1.0, 2);
  EXPECT_NEAR(gm.delta, sensitivity_logistic(1.0, 1.0, 1.0), 1e-9);
  EXPECT_NEAR(gm.argmin_t, -0.5, 1e-9);
}

TEST(SensitivityGeneralM, PerBlockNoiseUnsupported) {
  EXPECT_THROW(sensitivity_general_m(1.0, 3, false), std::invalid_argument);
}

TEST(DeltaOf, VanishesWhenNoiseDominates) {
  EXPECT_LT(delta_of(1.0, 1e6, 1.0), 1e-300);
}

TEST(DeltaOf, ScaleInvarianceIsExactForPowerOfTwo) {
  const double base = delta_of(1.3, 0.9, 1.7);
  EXPECT_EQ(delta_of(1.3, 2.0 * 0.9, 2.0 * 1.7), base);
  EXPECT_EQ(delta_of(1.3, 4.0 * 0.9, 4.0 * 1.7), base);
  EXPECT_NEAR(delta_of(1.3, 3.0 * 0.9, 3.0 * 1.7), base, 1e-15);
}

TEST(DeltaOf, MonotoneInSigmaAndSensitivity) {
  double previous = 1.0;
  for (double sigma = 0.3; sigma < 4.0; sigma += 0.1) {
    const double value = delta_of(1.0, sigma, 1.5);
    EXPECT_LT(value, previous);
    previous = value;
  }
  previous = 0.0;
  for (double sens = 0.2; sens < 5.0; sens += 0.2) {
    const double value = delta_of(1.0, 1.0, sens);
    EXPECT_GT(value, previous);
    previous = value;
  }
}

TEST(CalibrateSigma, RoundTripHitsDeltaFromBelow) {
  for (double eps : {0.1, 0.7, 1.1, 3.0}) {
    for (double target : {1e-6, 1e-5, 1e-3}) {
      const double sigma = calibrate_sigma(std::sqrt(4.5), eps, target);
      const double achieved = delta_of(eps, sigma, std::sqrt(4.5));
      EXPECT_LE(achieved, target);
      EXPECT_GT(achieved, target * (1.0 - 1e-5));
      EXPECT_GT(delta_of(eps, sigma * (1.0 - 1e-6), std::sqrt(4.5)), target);
    }
  }
}

TEST(CalibrateSigma, ScalesLinearlyInSensitivity) {
  const double sigma1 = calibrate_sigma(1.3, 0.9, 1e-5);
  const double sigma2 = calibrate_sigma(2.6, 0.9, 1e-5);
  EXPECT_NEAR(sigma2, 2.0 * sigma1, 1e-9 * sigma2);
}

TEST(CalibrateSigma, MatchesGridSearchOracle) {
  // Independent coarse log-grid over sigma refined on the delta_of sign
  // change, for the paper's epsilon = 1.1, delta = 1e-5 setting.
  const double sens = std::sqrt(4.5);
  const double eps = 1.1;
  const double target = 1e-5;
  double lo = 0.0;
  double hi = 0.0;
  const int grid = 20000;
  for (int i = 0; i < grid; ++i) {
    const double sigma = 0.01 * sens * std::pow(10000.0, i / (grid - 1.0));
    if (delta_of(eps, sigma, sens) <= target) {
      hi = sigma;
      break;
    }
    lo = sigma;
  }
  ASSERT_GT(hi, 0.0);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (delta_of(eps, mid, sens) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double sigma = calibrate_sigma(sens, eps, target);
  EXPECT_NEAR(sigma, hi, 1e-6 * hi);
}

TEST(Release, DegenerateNoiseRecoversStatistic) {
  const StatisticLayout lay = layout(Model::logistic, 2, 2);
  Eigen::VectorXd s(lay.size());
  s << 10.0, -3.0, 7.5, 2.0, 0.5;
  PrivacyParams params;
  params.epsilon = 1.0;
  params.delta = 1e-5;
  params.R_x = 1.0;
  params.sigma_blocks = {{"yt1", 1e-12}, {"t2", 1e-12}};
  const NoisyRelease rel = release(s, lay, params, 7, 100);
  EXPECT_LT((rel.z - s).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Release, SameSeedSameOutput) {
  const StatisticLayout lay = layout(Model::poisson, 2, 2);
  Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(lay.size(), -3.0, 3.0);
  PrivacyParams params;
  params.epsilon = 1.0;
  params.delta = 1e-5;
  params.R_x = 1.0;
  params.R_y = 5.0;
  params.sigma_blocks = {
      {"t1", 2.0}, {"t2", 3.0}, {"yt1", 4.0}, {"yt2", 5.0}};
  const NoisyRelease a = release(s, lay, params, 99, 100);
  const NoisyRelease b = release(s, lay, params, 99, 100);
  EXPECT_EQ(a.z, b.z);
  const NoisyRelease c = release(s, lay, params, 100, 100);
  EXPECT_NE(a.z, c.z);
}

TEST(Release, EmpiricalNoiseVarianceMatchesAssignment) {
  const StatisticLayout lay = layout(Model::logistic, 2, 2);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(lay.size());
  PrivacyParams params;
  params.epsilon = 1.0;
  params.delta = 1e-5;
  params.R_x = 1.0;
  params.sigma_blocks = {{"yt1", 2.0}, {"t2", 0.5}};
  const int repeats = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(lay.size());
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(lay.size());
  for (int r = 0; r < repeats; ++r) {
    const NoisyRelease rel =
        release(s, lay, params, 1000 + static_cast<std::uint64_t>(r), 10);
    sum += rel.z;
    sum_sq += rel.z.cwiseProduct(rel.z);
  }
  for (int i = 0; i < lay.size(); ++i) {
    const double mean = sum[i] / repeats;
    const double var = sum_sq[i] / repeats - mean * mean;
    const double sigma = params.sigma_blocks.at(
        lay.entries[static_cast<std::size_t>(i)].block);
    EXPECT_NEAR(var, sigma * sigma, 0.05 * sigma * sigma) << "entry " << i;
  }
}

TEST(Release, MissingBlockScaleRejected) {
  const StatisticLayout lay = layout(Model::logistic, 2, 2);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(lay.size());
  PrivacyParams params;
  params.epsilon = 1.0;
  params.delta = 1e-5;
  params.R_x = 1.0;
  params.sigma_blocks = {{"yt1", 1.0}};  // no "t2"
  EXPECT_THROW(release(s, lay, params, 1, 10), std::invalid_argument);
}

TEST(Release, SensitivityFieldUsesModelLemma) {
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(lay.size());
  PrivacyParams params;
  params.epsilon = 1.0;
  params.delta = 1e-5;
  params.R_x = 1.0;
  params.sigma_blocks = {{"yt1", 2.0}, {"t2", 3.0}};
  const NoisyRelease rel = release(s, lay, params, 5, 10);
  EXPECT_DOUBLE_EQ(rel.sensitivity, sensitivity_logistic(1.0, 2.0, 3.0));
}

TEST(CalibrateBlocks, EqualRatiosMeetBudgetExactly) {
  const StatisticLayout lay = layout(Model::poisson, 3, 2);
  const auto blocks = calibrate_blocks(lay, 1.1, 1e-5, 1.0, 5.0);
  ASSERT_EQ(blocks.size(), 4u);
  const double sigma1 = blocks.at("t1");
  for (const auto& [label, sigma] : blocks) {
    EXPECT_DOUBLE_EQ(sigma, sigma1);
  }
  const double sens = sensitivity_poisson(1.0, 5.0, sigma1, sigma1, sigma1,
                                          sigma1);
  const double achieved = delta_of(1.1, sigma1, sens);
  EXPECT_LE(achieved, 1e-5);
  EXPECT_GT(achieved, 1e-5 * (1.0 - 1e-5));
}

TEST(CalibrateBlocks, RatioShapesArePreserved) {
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  const auto blocks =
      calibrate_blocks(lay, 0.5, 1e-6, 1.0, 0.0, {{"yt1", 1.0}, {"t2", 2.0}});
  EXPECT_NEAR(blocks.at("t2") / blocks.at("yt1"), 2.0, 1e-12);
  const double sens =
      sensitivity_logistic(1.0, blocks.at("yt1"), blocks.at("t2"));
  EXPECT_LE(delta_of(0.5, blocks.at("yt1"), sens), 1e-6);
}

TEST(ReleaseJson, RoundTripPreservesEverything) {
  const StatisticLayout lay = layout(Model::poisson, 3, 2);
  Rng rng(33);
  Eigen::VectorXd s(lay.size());
  for (int i = 0; i < lay.size(); ++i) s[i] = 10.0 * rng.normal();
  PrivacyParams params;
  params.epsilon = 0.7;
  params.delta = 1e-5;
  params.R_x = 1.0;
  params.R_y = 5.0;
  params.sigma_blocks = calibrate_blocks(lay, 0.7, 1e-5, 1.0, 5.0);
  const NoisyRelease rel = release(s, lay, params, 424242, 500);

  const std::string text = to_json(rel);
  const NoisyRelease back = release_from_json(text);
  EXPECT_EQ(back.layout.model, rel.layout.model);
  EXPECT_EQ(back.layout.d, rel.layout.d);
  EXPECT_EQ(back.layout.m, rel.layout.m);
  EXPECT_EQ(back.N, rel.N);
  EXPECT_EQ(back.seed, rel.seed);
  EXPECT_EQ(back.params.epsilon, rel.params.epsilon);
  EXPECT_EQ(back.params.delta, rel.params.delta);
  EXPECT_EQ(back.params.R_x, rel.params.R_x);
  EXPECT_EQ(back.params.R_y, rel.params.R_y);
  EXPECT_EQ(back.sensitivity, rel.sensitivity);
  ASSERT_EQ(back.layout.size(), rel.layout.size());
  for (int i = 0; i < rel.layout.size(); ++i) {
    EXPECT_EQ(back.z[i], rel.z[i]) << "entry " << i;
    EXPECT_EQ(back.noise_sd_per_entry[i], rel.noise_sd_per_entry[i]);
    EXPECT_EQ(back.layout.entries[static_cast<std::size_t>(i)].index.exponents(),
              rel.layout.entries[static_cast<std::size_t>(i)].index.exponents());
    EXPECT_EQ(back.layout.entries[static_cast<std::size_t>(i)].y_power,
              rel.layout.entries[static_cast<std::size_t>(i)].y_power);
    EXPECT_EQ(back.layout.entries[static_cast<std::size_t>(i)].multiplier,
              rel.layout.entries[static_cast<std::size_t>(i)].multiplier);
    EXPECT_EQ(back.layout.entries[static_cast<std::size_t>(i)].block,
              rel.layout.entries[static_cast<std::size_t>(i)].block);
  }
}

TEST(ReleaseJson, MalformedInputRejected) {
  EXPECT_THROW(release_from_json("{not json"), DataError);
  EXPECT_THROW(release_from_json("{\"model\": \"logistic\"}"), DataError);
}

}  // namespace
}  // namespace dpglm
