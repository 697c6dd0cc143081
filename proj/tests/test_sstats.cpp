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

#include "dpglm/sstats.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dpglm/rng.hpp"

namespace dpglm {
namespace {

TEST(Layout, LogisticD4M2MatchesReleaseOrder) {
  // 4 linear (y x_i) entries, then 4 squares, then 6 cross terms.
  const StatisticLayout lay = layout(Model::logistic, 4, 2);
  ASSERT_EQ(lay.size(), 14);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(lay.entries[i].y_power, 1);
    EXPECT_EQ(lay.entries[i].index.degree(), 1);
    EXPECT_EQ(lay.entries[i].index[i], 1);
    EXPECT_EQ(lay.entries[i].block, "yt1");
    EXPECT_DOUBLE_EQ(lay.entries[i].multiplier, 1.0);
  }
  for (int i = 4; i < 8; ++i) {
    EXPECT_EQ(lay.entries[i].y_power, 0);
    EXPECT_EQ(lay.entries[i].index[i - 4], 2);
    EXPECT_DOUBLE_EQ(lay.entries[i].multiplier, 1.0);
    EXPECT_EQ(lay.entries[i].block, "t2");
  }
  const std::vector<std::pair<int, int>> crosses{{0, 1}, {0, 2}, {0, 3},
                                                 {1, 2}, {1, 3}, {2, 3}};
  for (int i = 8; i < 14; ++i) {
    const auto [a, b] = crosses[i - 8];
    EXPECT_EQ(lay.entries[i].index[a], 1);
    EXPECT_EQ(lay.entries[i].index[b], 1);
    EXPECT_NEAR(lay.entries[i].multiplier, std::sqrt(2.0), 1e-15);
  }
}

TEST(Layout, LogisticD1M2SmallestCase) {
  const StatisticLayout lay = layout(Model::logistic, 1, 2);
  ASSERT_EQ(lay.size(), 2);
  EXPECT_EQ(lay.entries[0].y_power, 1);
  EXPECT_EQ(lay.entries[0].index.degree(), 1);
  EXPECT_EQ(lay.entries[1].y_power, 0);
  EXPECT_EQ(lay.entries[1].index.degree(), 2);
}

TEST(Layout, PoissonD3M2BlockCounts) {
  const StatisticLayout lay = layout(Model::poisson, 3, 2);
  ASSERT_EQ(lay.size(), 18);
  const std::vector<std::string> blocks = lay.block_order();
  ASSERT_EQ(blocks.size(), 4u);
  EXPECT_EQ(blocks[0], "t1");
  EXPECT_EQ(blocks[1], "t2");
  EXPECT_EQ(blocks[2], "yt1");
  EXPECT_EQ(blocks[3], "yt2");
  int counts[4] = {0, 0, 0, 0};
  for (const StatisticEntry& e : lay.entries) {
    for (int b = 0; b < 4; ++b) {
      if (e.block == blocks[static_cast<std::size_t>(b)]) ++counts[b];
    }
  }
  EXPECT_EQ(counts[0], 3);
  EXPECT_EQ(counts[1], 6);
  EXPECT_EQ(counts[2], 3);
  EXPECT_EQ(counts[3], 6);
}

TEST(Layout, UnsupportedOrderRejected) {
  EXPECT_THROW(layout(Model::logistic, 3, 3), std::invalid_argument);
  EXPECT_THROW(layout(Model::poisson, 3, 0), std::invalid_argument);
  EXPECT_THROW(layout(Model::logistic, 0, 2), std::invalid_argument);
}

TEST(Layout, PureFunctionOfInputs) {
  const StatisticLayout a = layout(Model::poisson, 4, 2);
  const StatisticLayout b = layout(Model::poisson, 4, 2);
  ASSERT_EQ(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.entries[i].index.exponents(), b.entries[i].index.exponents());
    EXPECT_EQ(a.entries[i].y_power, b.entries[i].y_power);
    EXPECT_EQ(a.entries[i].block, b.entries[i].block);
  }
}

TEST(Multiplier, KnownValues) {
  EXPECT_DOUBLE_EQ(multiplier(ExponentIndex({2, 0, 0})), 1.0);
  EXPECT_NEAR(multiplier(ExponentIndex({1, 1, 0})), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(multiplier(ExponentIndex({1, 1, 1})), std::sqrt(6.0), 1e-15);
  EXPECT_THROW(multiplier(ExponentIndex({0, 0})), std::invalid_argument);
}

TEST(Statistic, HandEvaluatedLogisticCase) {
  // d = 2, x = (1, 0), y = -1: order (y x1, y x2, x1^2, x2^2, sqrt2 x1 x2).
  const StatisticLayout lay = layout(Model::logistic, 2, 2);
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  const Eigen::VectorXd t = statistic(x, -1.0, lay);
  ASSERT_EQ(t.size(), 5);
  EXPECT_DOUBLE_EQ(t[0], -1.0);
  EXPECT_DOUBLE_EQ(t[1], 0.0);
  EXPECT_DOUBLE_EQ(t[2], 1.0);
  EXPECT_DOUBLE_EQ(t[3], 0.0);
  EXPECT_DOUBLE_EQ(t[4], 0.0);
}

TEST(Statistic, ZeroInputGivesZeroVector) {
  const StatisticLayout lay = layout(Model::poisson, 3, 2);
  const Eigen::VectorXd t =
      statistic(Eigen::VectorXd::Zero(3), 4.0, lay);
  EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Statistic, LabelSignDropsOutOfQuadraticBlock) {
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  Rng rng(17);
  Eigen::VectorXd x(3);
  for (int j = 0; j < 3; ++j) x[j] = rng.normal();
  const Eigen::VectorXd plus = statistic(x, 1.0, lay);
  const Eigen::VectorXd minus = statistic(x, -1.0, lay);
  for (int i = 3; i < lay.size(); ++i) {
    EXPECT_DOUBLE_EQ(plus[i], minus[i]);
  }
}

TEST(Statistic, DimensionMismatchRejected) {
  const StatisticLayout lay = layout(Model::logistic, 3, 2);
  EXPECT_THROW(statistic(Eigen::VectorXd::Zero(2), 1.0, lay),
               std::invalid_argument);
}

TEST(Aggregate, SmallCases) {
  const StatisticLayout lay = layout(Model::logistic, 2, 2);
  Eigen::MatrixXd X(1, 2);
  X << 0.4, -0.3;
  Eigen::VectorXd y(1);
  y << 1.0;
  EXPECT_EQ(aggregate(X, y, lay), statistic(X.row(0).transpose(), 1.0, lay));

  Eigen::MatrixXd X2(2, 2);
  X2 << 0.4, -0.3, 0.4, -0.3;
  Eigen::VectorXd y2(2);
  y2 << 1.0, 1.0;
  EXPECT_EQ(aggregate(X2, y2, lay),
            2.0 * statistic(X.row(0).transpose(), 1.0, lay));
}

TEST(Aggregate, MatchesFoldLeftOracleBitForBit) {
  const StatisticLayout lay = layout(Model::poisson, 3, 2);
  Rng rng(2718);
  const int n = 100;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
    y[i] = static_cast<double>(rng.poisson(1.0));
  }
  // Independently coded double loop in the same order.
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(lay.size());
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < lay.size(); ++e) {
      const StatisticEntry& entry = lay.entries[static_cast<std::size_t>(e)];
      double v = entry.multiplier;
      for (int p = 0; p < entry.y_power; ++p) v *= y[i];
      for (int j = 0; j < 3; ++j) {
        for (int r = 0; r < entry.index[j]; ++r) v *= X(i, j);
      }
      expected[e] += v;
    }
  }
  const Eigen::VectorXd got = aggregate(X, y, lay);
  for (int e = 0; e < lay.size(); ++e) {
    EXPECT_EQ(got[e], expected[e]) << "entry " << e;
  }
}

TEST(Aggregate, EmptyDatasetRejected) {
  const StatisticLayout lay = layout(Model::logistic, 2, 2);
  Eigen::MatrixXd X(0, 2);
  Eigen::VectorXd y(0);
  EXPECT_THROW(aggregate(X, y, lay), std::invalid_argument);
}

TEST(OrderBlock, NormIdentity) {
  // ||t_m(x)||^2 = ||x||^{2m} for m = 1..4.
  Rng rng(4242);
  for (int m = 1; m <= 4; ++m) {
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x(3);
      for (int j = 0; j < 3; ++j) x[j] = rng.normal();
      const double lhs = order_block(x, m).squaredNorm();
      const double rhs = std::pow(x.squaredNorm(), m);
      EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, rhs));
    }
  }
}

TEST(OrderBlock, PairDistanceIdentity) {
  // ||t_m(x) - t_m(x')||^2 = ||x||^{2m} + ||x'||^{2m} - 2 <x, x'>^m.
  Rng rng(515);
  for (int m = 1; m <= 4; ++m) {
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x(4);
      Eigen::VectorXd xp(4);
      for (int j = 0; j < 4; ++j) {
        x[j] = rng.normal();
        xp[j] = rng.normal();
      }
      const double lhs = (order_block(x, m) - order_block(xp, m)).squaredNorm();
      const double rhs = std::pow(x.squaredNorm(), m) +
                         std::pow(xp.squaredNorm(), m) -
                         2.0 * std::pow(x.dot(xp), m);
      EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
    }
  }
}

}  // namespace
}  // namespace dpglm
