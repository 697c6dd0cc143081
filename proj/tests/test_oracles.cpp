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

#include "dpglm/oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "dpglm/rng.hpp"

namespace dpglm {
namespace {

TEST(McMoment, IndependentSquaresGiveOne) {
  const MCEstimate est =
      mc_moment(ExponentIndex({2, 2}), CovMatrix::identity(2), 1000000, 9);
  EXPECT_NEAR(est.value, 1.0, 4.0 * est.std_error);
}

TEST(McMoment, MatchesFourthOrderIdentity) {
  Eigen::MatrixXd S(2, 2);
  S << 0.9, -0.35, -0.35, 0.6;
  const CovMatrix sigma(S);
  const double target = S(0, 0) * S(1, 1) + 2.0 * S(0, 1) * S(0, 1);
  const MCEstimate est = mc_moment(ExponentIndex({2, 2}), sigma, 1000000, 10);
  EXPECT_NEAR(est.value, target, 4.0 * est.std_error);
}

TEST(McMoment, OddMomentNearZero) {
  Eigen::MatrixXd S(2, 2);
  S << 1.0, 0.4, 0.4, 1.0;
  const MCEstimate est =
      mc_moment(ExponentIndex({2, 1}), CovMatrix(S), 500000, 11);
  EXPECT_NEAR(est.value, 0.0, 4.0 * est.std_error);
}

TEST(McMoment, SeedDeterminism) {
  const MCEstimate a =
      mc_moment(ExponentIndex({2, 0}), CovMatrix::identity(2), 10000, 5);
  const MCEstimate b =
      mc_moment(ExponentIndex({2, 0}), CovMatrix::identity(2), 10000, 5);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(McMoment, SampleFloorEnforced) {
  EXPECT_THROW(
      mc_moment(ExponentIndex({2, 0}), CovMatrix::identity(2), 10, 1),
      std::invalid_argument);
}

TEST(McLinkMoments, ZeroThetaLogisticMeansArePureMoments) {
  Eigen::MatrixXd S(2, 2);
  S << 0.6, 0.15, 0.15, 0.5;
  const CovMatrix sigma(S);
  const StatisticLayout lay = layout(Model::logistic, 2, 2);
  const LinkMomentsEstimate est = mc_link_moments(
      Model::logistic, Eigen::VectorXd::Zero(2), sigma, lay, 400000, 13);
  // Even-degree entries estimate the pure Gaussian moments.
  EXPECT_NEAR(est.mu_hat[2], S(0, 0), 0.01);
  EXPECT_NEAR(est.mu_hat[3], S(1, 1), 0.01);
  EXPECT_NEAR(est.mu_hat[4], std::sqrt(2.0) * S(0, 1), 0.01);
  // Odd entries carry the exact link factor, which is odd: near zero.
  EXPECT_NEAR(est.mu_hat[0], 0.0, 0.01);
  EXPECT_NEAR(est.mu_hat[1], 0.0, 0.01);
}

TEST(McLinkMoments, ZeroThetaPoissonPicksUpLogTwo) {
  Eigen::MatrixXd S(2, 2);
  S << 0.7, -0.2, -0.2, 0.6;
  const CovMatrix sigma(S);
  const StatisticLayout lay = layout(Model::poisson, 2, 2);
  const LinkMomentsEstimate est = mc_link_moments(
      Model::poisson, Eigen::VectorXd::Zero(2), sigma, lay, 400000, 14);
  const double log2 = std::log(2.0);
  EXPECT_NEAR(est.mu_hat[7], log2 * S(0, 0), 0.01);
  EXPECT_NEAR(est.mu_hat[8], log2 * S(1, 1), 0.01);
}

TEST(WeightedStatisticDistance, IdenticalPairGivesZero) {
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  const std::map<std::string, double> blocks{{"yt1", 1.0}, {"t2", 1.0}};
  Eigen::VectorXd x(3);
  x << 0.3, -0.4, 0.5;
  EXPECT_DOUBLE_EQ(weighted_statistic_distance(lay, blocks, x, 1.0, x, 1.0),
                   0.0);
}

TEST(WeightedStatisticDistance, MatchesNormIdentityOnOppositePair) {
  // For y = 1, y' = -1 and x' = -x, the logistic statistic distance should
  // follow from the pair identity.
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  const std::map<std::string, double> blocks{{"yt1", 1.0}, {"t2", 1.0}};
  Eigen::VectorXd x(3);
  x << 0.6, 0.0, 0.8;  // unit norm
  // y t1 difference: y x - y' x' = x - (-1)(-x) = 0; t2 difference: 0.
  EXPECT_NEAR(
      weighted_statistic_distance(lay, blocks, x, 1.0, -x, -1.0), 0.0, 1e-12);
  // y = y' = 1, x' = -x: linear block differs by 2x, quadratic cancels.
  EXPECT_NEAR(weighted_statistic_distance(lay, blocks, x, 1.0, -x, 1.0), 2.0,
              1e-12);
}

TEST(SensitivitySearch, LogisticBracketsTheClosedForm) {
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  const std::map<std::string, double> blocks{{"yt1", 1.0}, {"t2", 1.0}};
  const double closed = sensitivity_logistic(1.0, 1.0, 1.0);
  const double found = sensitivity_search(lay, 1.0, 0.0, blocks, 2000, 300);
  EXPECT_GE(found, 0.99 * closed);
  EXPECT_LE(found, closed + 1e-9);
}

TEST(SensitivitySearch, PoissonBracketsTheClosedForm) {
  const StatisticLayout lay = layout(Model::poisson, 3, 2);
  const std::map<std::string, double> blocks{
      {"t1", 1.0}, {"t2", 1.0}, {"yt1", 1.0}, {"yt2", 1.0}};
  for (double ry : {1.0, 5.0}) {
    const double closed = sensitivity_poisson(1.0, ry, 1.0, 1.0, 1.0, 1.0);
    const double found =
        sensitivity_search(lay, 1.0, ry, blocks, 2000, 301);
    EXPECT_GE(found, 0.99 * closed) << "R_y " << ry;
    EXPECT_LE(found, closed + 1e-9) << "R_y " << ry;
  }
}

TEST(SensitivitySearch, UnequalBlockNoiseWithinTightRegime) {
  // The lemma's bound is attained only while its inner-product optimizer
  // -1/(2c) stays inside [-R^2, R^2], i.e. sigma2^2 <= 2 sigma1^2 R^2.
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  const std::map<std::string, double> blocks{{"yt1", 1.0}, {"t2", 1.2}};
  const double closed = sensitivity_logistic(1.0, 1.0, 1.2);
  const double found = sensitivity_search(lay, 1.0, 0.0, blocks, 2000, 302);
  EXPECT_GE(found, 0.99 * closed);
  EXPECT_LE(found, closed + 1e-9);
}

TEST(SensitivitySearch, StaysBelowLemmaValueOutsideTightRegime) {
  // With sigma2 = 2 sigma1 the lemma's optimizer is infeasible and the
  // closed form is a strict upper bound; the search must stay below it.
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  const std::map<std::string, double> blocks{{"yt1", 1.0}, {"t2", 2.0}};
  const double closed = sensitivity_logistic(1.0, 1.0, 2.0);
  const double found = sensitivity_search(lay, 1.0, 0.0, blocks, 2000, 303);
  EXPECT_LE(found, closed + 1e-9);
  // The constrained optimum at <x, x'> = -R^2 evaluates to 2.
  EXPECT_NEAR(found, 2.0, 0.02);
}

TEST(McDelta, LargeEpsilonGivesZero) {
  const MCEstimate est = mc_delta(20.0, 1.0, 1.0, 100000, 17);
  EXPECT_NEAR(est.value, 0.0, est.std_error + 1e-12);
}

TEST(McDelta, MatchesAnalyticDeltaOnGrid) {
  int idx = 0;
  for (double eps : {0.2, 0.5, 1.0, 1.5, 2.5}) {
    const double sigma = 1.1;
    const double sens = 1.4;
    const MCEstimate est = mc_delta(eps, sigma, sens, 1000000, 100 + idx);
    EXPECT_NEAR(est.value, delta_of(eps, sigma, sens),
                3.0 * est.std_error + 1e-12)
        << "eps " << eps;
    ++idx;
  }
}

TEST(McDelta, ScaleInvarianceHoldsDistributionally) {
  const MCEstimate a = mc_delta(1.0, 1.0, 1.0, 200000, 55);
  const MCEstimate b = mc_delta(1.0, 7.0, 7.0, 200000, 55);
  EXPECT_EQ(a.value, b.value);  // same seed, ratio-only dependence
}

TEST(Verification, FastBatteryPasses) {
  const std::vector<VerifyCheck> checks = run_verification(500, 200000, 2026);
  ASSERT_FALSE(checks.empty());
  for (const VerifyCheck& c : checks) {
    EXPECT_TRUE(c.pass) << c.name << ": closed " << c.closed_form
                        << " oracle " << c.oracle << " tol " << c.tolerance;
  }
  const std::string report = verify_report_json(checks);
  EXPECT_NE(report.find("\"checks\""), std::string::npos);
  EXPECT_NE(report.find("pairings_degree_10"), std::string::npos);
}

}  // namespace
}  // namespace dpglm
