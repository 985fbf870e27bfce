// Copyright 2026 The FedClip Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedclip/problems.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace fedclip {
namespace {

using testing::Unwrap;

// Central differences of f along each axis.
template <typename F>
ModelVector NumericGradient(F f, const ModelVector& x, double h) {
  ModelVector g(x.size());
  for (int k = 0; k < x.size(); ++k) {
    ModelVector up = x, down = x;
    up[k] += h;
    down[k] -= h;
    g[k] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

ModelVector RandomVector(RngStream& s, int d, double scale = 1.0) {
  ModelVector v(d);
  for (int k = 0; k < d; ++k) v[k] = scale * s.Normal();
  return v;
}

Eigen::MatrixXd RandomMatrix(RngStream& s, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) m(i, k) = s.Normal();
  }
  return m;
}

ProblemInstance RandomLinearEnsemble(uint64_t seed, int n, int d, int rows) {
  RngStream s(seed, {StreamDomain::kTest, 0, 0, 0});
  std::vector<Eigen::MatrixXd> a;
  std::vector<Eigen::VectorXd> b;
  for (int i = 0; i < n; ++i) {
    a.push_back(RandomMatrix(s, rows, d));
    b.push_back(RandomVector(s, rows));
  }
  return Unwrap(BuildLinearRegressionEnsemble(a, b));
}

TEST(QuadraticEnsembleTest, OptimumIsMeanOfOffsets) {
  const std::vector<double> b = {-0.5, -0.5, 5.0};
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(b));
  ASSERT_TRUE(p.global_optimum.has_value());
  EXPECT_NEAR((*p.global_optimum)[0], 4.0 / 3.0, 1e-15);
  EXPECT_EQ(p.num_clients(), 3);
  EXPECT_EQ(p.dimension(), 1);
  EXPECT_DOUBLE_EQ(p.constants.lipschitz, 1.0);
}

TEST(QuadraticEnsembleTest, SingleClientAtZero) {
  const std::vector<double> b = {0.0};
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(b));
  EXPECT_EQ((*p.global_optimum)[0], 0.0);
  EXPECT_EQ(*p.f_star, 0.0);
}

TEST(QuadraticEnsembleTest, FStarMatchesLossAtOptimum) {
  const std::vector<double> b = {1.0, 2.0, 6.0};
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(b));
  // Mean of 1/2 (x - b_i)^2 at x = 3: (4 + 1 + 9) / 6.
  EXPECT_NEAR(*p.f_star, 14.0 / 6.0, 1e-14);
  EXPECT_NEAR(p.GlobalLoss(*p.global_optimum), *p.f_star, 1e-14);
}

TEST(QuadraticEnsembleTest, LocalMinimizerIsOffsetExactly) {
  const std::vector<double> b = {0.1, -7.3, 1.0 / 3.0};
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(b));
  for (int i = 0; i < 3; ++i) EXPECT_EQ((*p.client(i).local_minimizer())[0], b[i]);
}

TEST(QuadraticEnsembleTest, EmptyIsRejected) {
  EXPECT_FALSE(BuildQuadraticEnsemble(std::vector<double>{}).ok());
}

TEST(ScalarRegressionTest, ThreeClientExampleSumGradient) {
  ProblemInstance p = Unwrap(BuildScalarRegressionEnsemble(std::vector<double>{1, 2, 6},
                                                           std::vector<double>{4, 1, -1}));
  for (double x : {-2.0, -0.3, 0.0, 0.7, 5.0}) {
    EXPECT_NEAR(p.SumGradient(ModelVector::Constant(1, x))[0], 41.0 * x, 1e-12);
  }
  EXPECT_NEAR((*p.global_optimum)[0], 0.0, 1e-15);
  EXPECT_NEAR((*p.client(0).local_minimizer())[0], 4.0, 1e-15);
  EXPECT_NEAR((*p.client(1).local_minimizer())[0], 0.5, 1e-15);
  EXPECT_NEAR((*p.client(2).local_minimizer())[0], -1.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.constants.lipschitz, 36.0);
}

TEST(LinearRegressionTest, HandExamples) {
  {
    std::vector<Eigen::MatrixXd> a = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
    std::vector<Eigen::VectorXd> b = {Eigen::VectorXd::Zero(1)};
    ProblemInstance p = Unwrap(BuildLinearRegressionEnsemble(a, b));
    EXPECT_DOUBLE_EQ(p.client(0).Gradient(ModelVector::Constant(1, 1.0))[0], 1.0);
  }
  {
    std::vector<Eigen::MatrixXd> a = {Eigen::MatrixXd::Constant(1, 1, 2.0)};
    std::vector<Eigen::VectorXd> b = {Eigen::VectorXd::Constant(1, 2.0)};
    ProblemInstance p = Unwrap(BuildLinearRegressionEnsemble(a, b));
    EXPECT_DOUBLE_EQ(p.client(0).Gradient(ModelVector::Zero(1))[0], -4.0);
  }
}

TEST(LinearRegressionTest, DimensionMismatchIsAnError) {
  std::vector<Eigen::MatrixXd> a = {Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 3)};
  std::vector<Eigen::VectorXd> b = {Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)};
  EXPECT_TRUE(absl::IsInvalidArgument(BuildLinearRegressionEnsemble(a, b).status()));
  std::vector<Eigen::MatrixXd> a2 = {Eigen::MatrixXd::Ones(2, 2)};
  std::vector<Eigen::VectorXd> b2 = {Eigen::VectorXd::Ones(3)};
  EXPECT_TRUE(absl::IsInvalidArgument(BuildLinearRegressionEnsemble(a2, b2).status()));
}

TEST(LinearRegressionTest, FullRankLocalMinimizerIsStationary) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    ProblemInstance p = RandomLinearEnsemble(seed, 3, 3, 5);
    for (int i = 0; i < p.num_clients(); ++i) {
      auto xi = p.client(i).local_minimizer();
      ASSERT_TRUE(xi.has_value());
      EXPECT_LE(p.client(i).Gradient(*xi).norm(), 1e-10);
    }
    EXPECT_LE(p.GlobalGradient(*p.global_optimum).norm(), 1e-10);
    EXPECT_NEAR(p.GlobalLoss(*p.global_optimum), *p.f_star, 1e-12);
  }
}

TEST(LinearRegressionTest, RankDeficientClientHasNoMinimizer) {
  std::vector<Eigen::MatrixXd> a = {Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Identity(2, 2)};
  std::vector<Eigen::VectorXd> b = {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(2)};
  ProblemInstance p = Unwrap(BuildLinearRegressionEnsemble(a, b));
  EXPECT_FALSE(p.client(0).local_minimizer().has_value());
  EXPECT_TRUE(p.client(1).local_minimizer().has_value());
}

TEST(LinearRegressionTest, GradientMatchesFiniteDifferences) {
  RngStream s(11, {StreamDomain::kTest, 1, 0, 0});
  for (uint64_t seed = 0; seed < 10; ++seed) {
    ProblemInstance p = RandomLinearEnsemble(100 + seed, 2, 4, 6);
    for (int i = 0; i < p.num_clients(); ++i) {
      const ModelVector x = RandomVector(s, 4);
      const ClientObjective& f = p.client(i);
      const ModelVector numeric =
          NumericGradient([&](const ModelVector& y) { return f.Loss(y); }, x, 1e-6);
      const ModelVector exact = f.Gradient(x);
      EXPECT_LE((numeric - exact).norm(), 1e-6 * std::max(1.0, exact.norm()));
    }
  }
}

TEST(LinearRegressionTest, LipschitzIsMaxEigenvalueAndHolds) {
  ProblemInstance p = RandomLinearEnsemble(7, 4, 3, 5);
  double expected = 0.0;
  for (int i = 0; i < p.num_clients(); ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*p.client(i).hessian());
    expected = std::max(expected, eig.eigenvalues().maxCoeff());
  }
  EXPECT_NEAR(p.constants.lipschitz, expected, 1e-12 * expected);
  RngStream s(8, {StreamDomain::kTest, 0, 0, 0});
  for (int k = 0; k < 1000; ++k) {
    const ModelVector x = RandomVector(s, 3, 3.0), y = RandomVector(s, 3, 3.0);
    for (int i = 0; i < p.num_clients(); ++i) {
      const double lhs = (p.client(i).Gradient(x) - p.client(i).Gradient(y)).norm();
      ASSERT_LE(lhs, p.constants.lipschitz * (x - y).norm() * (1 + 1e-12));
    }
  }
}

TEST(SigmaGTest, EqualHessiansClosedFormDominatesSamples) {
  // Shared design matrix: the gradient gap is constant in x.
  RngStream s(9, {StreamDomain::kTest, 0, 0, 0});
  const Eigen::MatrixXd a = RandomMatrix(s, 4, 2);
  std::vector<Eigen::MatrixXd> as = {a, a, a};
  std::vector<Eigen::VectorXd> bs = {RandomVector(s, 4), RandomVector(s, 4), RandomVector(s, 4)};
  ProblemInstance p = Unwrap(BuildLinearRegressionEnsemble(as, bs));
  EXPECT_EQ(p.constants.sigma_g_method, "closed-form");
  for (int k = 0; k < 100; ++k) {
    const ModelVector x = RandomVector(s, 2, 10.0);
    const ModelVector g = p.GlobalGradient(x);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) worst = std::max(worst, (p.client(i).Gradient(x) - g).norm());
    EXPECT_NEAR(worst, p.constants.sigma_g, 1e-9 * std::max(1.0, worst));
  }
}

TEST(SigmaGTest, BoxMaximumDominatesInteriorPoints) {
  ProblemInstance p = RandomLinearEnsemble(21, 3, 2, 4);
  const ModelVector center = ModelVector::Zero(2);
  testing::Check(RecomputeSigmaGOverBox(p, center, 1.5));
  EXPECT_EQ(p.constants.sigma_g_method.rfind("box-vertices", 0), 0u);
  RngStream s(22, {StreamDomain::kTest, 0, 0, 0});
  for (int k = 0; k < 500; ++k) {
    ModelVector x(2);
    for (int j = 0; j < 2; ++j) x[j] = -1.5 + 3.0 * s.Uniform();
    const ModelVector g = p.GlobalGradient(x);
    for (int i = 0; i < 3; ++i) {
      ASSERT_LE((p.client(i).Gradient(x) - g).norm(), p.constants.sigma_g * (1 + 1e-12));
    }
  }
}

TEST(SigmaGTest, ScalarQuadraticClosedForm) {
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(std::vector<double>{4.0, 0.5, -1.0}));
  // Mean 7/6, largest gap |4 - 7/6|.
  EXPECT_NEAR(p.constants.sigma_g, 4.0 - 3.5 / 3.0, 1e-14);
}

TEST(OracleTest, DeterministicReturnsExactGradient) {
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(std::vector<double>{0.0}));
  GradientOracle oracle(p.client(0), {}, RngStream(0, {StreamDomain::kTest, 0, 0, 0}));
  EXPECT_EQ(oracle.Sample(ModelVector::Constant(1, 3.0))[0], 3.0);
  EXPECT_TRUE(oracle.deterministic());
}

TEST(OracleTest, ZeroNoiseGaussianEqualsDeterministic) {
  ProblemInstance p = RandomLinearEnsemble(5, 1, 3, 4);
  OracleOptions opts{NoiseMode::kGaussian, 0.0, 1};
  GradientOracle oracle(p.client(0), opts, RngStream(0, {StreamDomain::kTest, 0, 0, 0}));
  const ModelVector x = ModelVector::Constant(3, 0.4);
  EXPECT_EQ(oracle.Sample(x), p.client(0).Gradient(x));
}

TEST(OracleTest, GaussianSampleMeanWithinThreeStandardErrors) {
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(std::vector<double>{1.0}));
  const double sigma = 0.7;
  OracleOptions opts{NoiseMode::kGaussian, sigma, 1};
  GradientOracle oracle(p.client(0), opts, RngStream(5, {StreamDomain::kTest, 0, 0, 0}));
  const ModelVector x = ModelVector::Constant(1, 2.5);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double g = oracle.Sample(x)[0];
    sum += g;
    sum_sq += (g - 1.5) * (g - 1.5);
  }
  EXPECT_NEAR(sum / n, 1.5, 3.0 * sigma / std::sqrt(n));
  EXPECT_NEAR(sum_sq / n, sigma * sigma, 0.02 * sigma * sigma);
}

TEST(OracleTest, GaussianVectorNoiseHasTotalSecondMomentSigmaSquared) {
  ProblemInstance p = RandomLinearEnsemble(6, 1, 4, 5);
  const double sigma = 1.3;
  GradientOracle oracle(p.client(0), {NoiseMode::kGaussian, sigma, 1},
                        RngStream(6, {StreamDomain::kTest, 0, 0, 0}));
  const ModelVector x = ModelVector::Constant(4, -0.2);
  const ModelVector exact = p.client(0).Gradient(x);
  const int n = 50000;
  double second = 0.0;
  for (int k = 0; k < n; ++k) second += (oracle.Sample(x) - exact).squaredNorm() / n;
  EXPECT_NEAR(second, sigma * sigma, 0.03 * sigma * sigma);
}

// Mean over draws within 4 standard errors of the exact gradient, per coordinate.
void ExpectUnbiased(GradientOracle& oracle, const ModelVector& x, const ModelVector& exact,
                    int draws) {
  const int d = static_cast<int>(x.size());
  ModelVector sum = ModelVector::Zero(d), sum_sq = ModelVector::Zero(d);
  for (int k = 0; k < draws; ++k) {
    const ModelVector g = oracle.Sample(x);
    sum += g;
    sum_sq += g.cwiseProduct(g);
  }
  const ModelVector mean = sum / draws;
  for (int j = 0; j < d; ++j) {
    const double var = std::max(0.0, sum_sq[j] / draws - mean[j] * mean[j]);
    const double se = std::sqrt(var / draws);
    EXPECT_LE(std::abs(mean[j] - exact[j]), 4.0 * se + 1e-12) << "coordinate " << j;
  }
}

TEST(OracleTest, MinibatchIsUnbiasedForRegression) {
  ProblemInstance p = RandomLinearEnsemble(12, 1, 3, 20);
  GradientOracle oracle(p.client(0), {NoiseMode::kMinibatch, 0.0, 4},
                        RngStream(12, {StreamDomain::kTest, 0, 0, 0}));
  const ModelVector x = ModelVector::Constant(3, 0.3);
  ExpectUnbiased(oracle, x, p.client(0).Gradient(x), 20000);
}

TEST(OracleTest, MinibatchIsUnbiasedForMlp) {
  MlpEnsembleOptions opts;
  opts.num_clients = 1;
  opts.samples_per_client = 30;
  opts.hidden_width = 3;
  ProblemInstance p = Unwrap(BuildMlpSyntheticEnsemble(opts));
  GradientOracle oracle(p.client(0), {NoiseMode::kMinibatch, 0.0, 5},
                        RngStream(13, {StreamDomain::kTest, 0, 0, 0}));
  const ModelVector x = *p.initial_point;
  ExpectUnbiased(oracle, x, p.client(0).Gradient(x), 20000);
}

TEST(OracleTest, GradientBoundViolationsAreCountedNotProjected) {
  ProblemInstance p = Unwrap(BuildQuadraticEnsemble(std::vector<double>{0.0}));
  GradientOracle oracle(p.client(0), {}, RngStream(0, {StreamDomain::kTest, 0, 0, 0}), 2.0);
  EXPECT_EQ(oracle.Sample(ModelVector::Constant(1, 1.0))[0], 1.0);
  EXPECT_EQ(oracle.violations(), 0);
  EXPECT_EQ(oracle.Sample(ModelVector::Constant(1, 5.0))[0], 5.0);
  EXPECT_EQ(oracle.violations(), 1);
}

TEST(MlpTest, GradientMatchesFiniteDifferences) {
  MlpEnsembleOptions opts;
  opts.num_clients = 2;
  opts.samples_per_client = 20;
  opts.heterogeneity = 0.5;
  ProblemInstance p = Unwrap(BuildMlpSyntheticEnsemble(opts));
  RngStream s(14, {StreamDomain::kTest, 0, 0, 0});
  for (int k = 0; k < 10; ++k) {
    const ModelVector x = RandomVector(s, p.dimension(), 0.8);
    const ClientObjective& f = p.client(k % 2);
    const ModelVector exact = f.Gradient(x);
    const ModelVector numeric =
        NumericGradient([&](const ModelVector& y) { return f.Loss(y); }, x, 1e-5);
    EXPECT_LE((numeric - exact).norm(), 1e-5 * std::max(1.0, exact.norm())) << "point " << k;
  }
}

TEST(MlpTest, FullySkewedTwoClassTwoClientsAreSingleClass) {
  MlpEnsembleOptions opts;
  opts.num_clients = 2;
  opts.num_classes = 2;
  opts.heterogeneity = 1.0;
  ProblemInstance p = Unwrap(BuildMlpSyntheticEnsemble(opts));
  std::set<int> seen;
  for (int i = 0; i < 2; ++i) {
    const std::vector<int> labels = ClientLabels(p.client(i));
    ASSERT_EQ(static_cast<int>(labels.size()), opts.samples_per_client);
    const std::set<int> distinct(labels.begin(), labels.end());
    EXPECT_EQ(distinct.size(), 1u);
    seen.insert(labels.front());
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(MlpTest, IidClientsAgreeWithPooledGradient) {
  MlpEnsembleOptions opts;
  opts.num_clients = 2;
  opts.samples_per_client = 1000;
  opts.heterogeneity = 0.0;
  ProblemInstance p = Unwrap(BuildMlpSyntheticEnsemble(opts));
  const ModelVector x = *p.initial_point;
  const ModelVector pooled = p.GlobalGradient(x);
  // Per-sample gradient spread over the pooled data.
  double spread = 0.0;
  int count = 0;
  for (int i = 0; i < 2; ++i) {
    for (int n = 0; n < opts.samples_per_client; ++n) {
      const int idx[1] = {n};
      spread += (p.client(i).MinibatchGradient(x, idx) - pooled).squaredNorm();
      ++count;
    }
  }
  spread /= count;
  // Each client mean deviates from the pooled mean by about sqrt(spread / (2m)).
  const double tolerance = 4.0 * std::sqrt(spread / (2.0 * opts.samples_per_client));
  for (int i = 0; i < 2; ++i) {
    EXPECT_LE((p.client(i).Gradient(x) - pooled).norm(), tolerance);
  }
}

TEST(MlpTest, LabelMixInterpolatesWithHeterogeneity) {
  MlpEnsembleOptions opts;
  opts.num_clients = 4;
  opts.num_classes = 4;
  opts.samples_per_client = 40;
  for (double h : {0.0, 0.5, 1.0}) {
    opts.heterogeneity = h;
    ProblemInstance p = Unwrap(BuildMlpSyntheticEnsemble(opts));
    for (int i = 0; i < 4; ++i) {
      const std::vector<int> labels = ClientLabels(p.client(i));
      const int own = static_cast<int>(std::count(labels.begin(), labels.end(), i % 4));
      // p_own = (1 - h) / C + h.
      EXPECT_EQ(own, static_cast<int>(std::lround(40 * ((1 - h) / 4 + h))));
    }
  }
}

TEST(MlpTest, ConstantsArePositiveAndTagged) {
  ProblemInstance p = Unwrap(BuildMlpSyntheticEnsemble({}));
  EXPECT_GT(p.constants.lipschitz, 0.0);
  EXPECT_GE(p.constants.sigma_g, 0.0);
  EXPECT_EQ(p.constants.lipschitz_method, "sampled-pairs");
  EXPECT_TRUE(p.f_star.has_value());
  EXPECT_EQ(*p.f_star, 0.0);
}

TEST(MlpTest, SameSeedSameEnsemble) {
  MlpEnsembleOptions opts;
  opts.seed = 99;
  ProblemInstance a = Unwrap(BuildMlpSyntheticEnsemble(opts));
  ProblemInstance b = Unwrap(BuildMlpSyntheticEnsemble(opts));
  const ModelVector x = *a.initial_point;
  EXPECT_EQ(x, *b.initial_point);
  EXPECT_EQ(a.GlobalGradient(x), b.GlobalGradient(x));
}

}  // namespace
}  // namespace fedclip
