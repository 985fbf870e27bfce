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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "fedclip/clipping.h"
#include "fedclip/config.h"
#include "fedclip/diagnostics.h"
#include "fedclip/engine.h"
#include "fedclip/fixedpoint.h"
#include "fedclip/privacy.h"
#include "fedclip/problems.h"
#include "fedclip/rng.h"
#include "fedclip/runner.h"
#include "test_util.h"

namespace fedclip {
namespace {

using testing::Check;
using testing::Unwrap;
namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;

  void Require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ProblemInstance ThreeClientExample() {
  return Unwrap(
      BuildScalarRegressionEnsemble(std::vector<double>{1, 2, 6}, std::vector<double>{4, 1, -1}));
}

// Table 1 for the three-client scalar regression.
Outcome Table1() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Table1Options options;
  std::vector<Table1Cell> cells = Unwrap(ComputeTable1(options));
  const double elapsed = Seconds(start);
  const double expected[] = {0.0, 13.0 / 9.0, 0.5, 2.0 / 3.0};
  double solver_err = 0.0, sim_err = 0.0;
  for (size_t k = 0; k < cells.size(); ++k) {
    solver_err = std::max(solver_err, std::abs(cells[k].solver_x - expected[k]));
    sim_err = std::max(sim_err, std::abs(cells[k].simulation_x - expected[k]));
    if (cells[k].converged_q) {
      double contraction = 0.0;
      for (double a : {1.0, 2.0, 6.0}) {
        contraction = std::max(contraction, std::abs(1 - cells[k].simulation_eta_l * a * a));
      }
      o.Require(std::pow(contraction, cells[k].simulation_local_steps) <= 1e-12,
                "converged-Q cell uses too few local steps");
    }
  }
  o.Require(cells.size() == 4, "expected four cells");
  o.Require(solver_err <= 1e-6, absl::StrCat("solver error ", solver_err));
  o.Require(sim_err <= 1e-3, absl::StrCat("simulation error ", sim_err));
  o.Require(elapsed < 5.0, absl::StrCat("took ", elapsed, " s"));
  if (o.pass) {
    o.detail = absl::StrCat("max solver err ", solver_err, ", max simulation err ", sim_err, ", ",
                            elapsed, " s");
  }
  return o;
}

// Model clipping on b = (-0.5c, -0.5c, kc) stalls at lambda c / (3 - 2 lambda).
Outcome ModelClipCounterexample() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const double c = 1.0, k = 5.0;
  const double x_star = (k - 1) * c / 3;
  const std::vector<double> b = {-0.5 * c, -0.5 * c, k * c};
  ProblemInstance problem = Unwrap(BuildQuadraticEnsemble(b));
  o.Require(std::abs(problem.global_optimum->coeff(0) - x_star) < 1e-12, "wrong optimum");
  int cells = 0, separated = 0;
  double worst_formula = 0.0, worst_sim = 0.0, smallest_gap = kInf;
  for (double eta_l : {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
    for (int64_t q : {1, 2, 3, 5, 10, 20}) {
      const double lambda = Unwrap(ModelClipLambda(eta_l, q));
      if (!(lambda > 0.0 && lambda < 1.0)) continue;
      ++cells;
      const double closed = lambda * c / (3 - 2 * lambda);
      OneRoundMap map = Unwrap(OneRoundMap::ModelClip(b, lambda, c));
      const double solved = Unwrap(SolveFixedPoint(map, ModelVector::Constant(1, x_star)))
                                .x[0];
      worst_formula = std::max(worst_formula, std::abs(solved - closed));
      const double gap = std::abs(solved - x_star);
      smallest_gap = std::min(smallest_gap, gap);
      // The gap 4/3 - lambda / (3 - 2 lambda) exceeds 1 exactly when lambda < 0.6.
      if (lambda < 0.6) {
        o.Require(gap > 1.0, absl::StrCat("gap ", gap, " at lambda ", lambda));
        ++separated;
      } else {
        o.Require(gap > 0.0, absl::StrCat("no gap at lambda ", lambda));
      }

      RunConfig run;
      run.rounds = 400;
      run.local_steps = q;
      run.clients_per_round = 3;
      run.participation = Participation::kFull;
      run.eta_l = eta_l;
      run.policy.mode = ClipMode::kModel;
      run.policy.threshold = c;
      run.x0 = ModelVector::Constant(1, x_star);
      const double simulated = Unwrap(RunExperiment(problem, run)).final_x[0];
      worst_sim = std::max(worst_sim, std::abs(simulated - closed));
    }
  }
  const double elapsed = Seconds(start);
  o.Require(worst_formula <= 1e-8, absl::StrCat("fixed point off by ", worst_formula));
  o.Require(worst_sim <= 1e-4, absl::StrCat("simulation off by ", worst_sim));
  o.Require(elapsed < 10.0, absl::StrCat("took ", elapsed, " s"));
  if (o.pass) {
    o.detail = absl::StrCat(cells, " (eta_l, Q) cells, ", separated,
                            " with lambda < 0.6 separated by > 1; formula err ", worst_formula,
                            ", simulation err ", worst_sim, ", min gap ", smallest_gap, ", ",
                            elapsed, " s");
  }
  return o;
}

struct ConsistentEnsemble {
  ProblemInstance problem;
  ModelVector x_star;
  double eta_l = 0.0;
};

// Random linear regression whose client gradients at x_star sum to zero, with
// residuals scaled so that eta_l = 1 / max_i ||grad f_i(x_star)|| also keeps
// eta_l * lambda_max(A_i^T A_i) <= 1.
ConsistentEnsemble MakeConsistentEnsemble(uint64_t seed) {
  RngStream s(seed, {StreamDomain::kTest, 7, 0, 0});
  const int n = 2 + static_cast<int>(s.UniformInt(4));
  const int d = 1 + static_cast<int>(s.UniformInt(3));
  const int m = d + 2;
  std::vector<Eigen::MatrixXd> a(n, Eigen::MatrixXd(m, d));
  for (auto& ai : a) {
    for (int r = 0; r < m; ++r) {
      for (int k = 0; k < d; ++k) ai(r, k) = s.Normal();
    }
  }
  ModelVector x_star(d);
  for (int k = 0; k < d; ++k) x_star[k] = s.Normal();
  Eigen::MatrixXd stacked(d, n * m);
  Eigen::VectorXd r(n * m);
  for (int i = 0; i < n; ++i) {
    stacked.middleCols(i * m, m) = a[i].transpose();
    for (int k = 0; k < m; ++k) r[i * m + k] = s.Normal();
  }
  // Project onto the null space of the stacked A_i^T.
  r -= stacked.transpose() * (stacked * stacked.transpose()).ldlt().solve(stacked * r);
  double max_grad = 0.0, max_eig = 0.0;
  for (int i = 0; i < n; ++i) {
    max_grad = std::max(max_grad, (a[i].transpose() * r.segment(i * m, m)).norm());
    max_eig = std::max(max_eig,
                       Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a[i].transpose() * a[i])
                           .eigenvalues()
                           .maxCoeff());
  }
  const double scale = std::max(1.0, max_eig / max_grad);
  r *= scale;
  max_grad *= scale;
  std::vector<Eigen::VectorXd> b(n);
  for (int i = 0; i < n; ++i) b[i] = a[i] * x_star - r.segment(i * m, m);
  return {Unwrap(BuildLinearRegressionEnsemble(a, b)), x_star, 1.0 / max_grad};
}

Outcome DifferenceClipRecipe() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  int clipped_runs = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    ConsistentEnsemble e = MakeConsistentEnsemble(seed);
    const ModelVector sum_grad = e.problem.SumGradient(e.x_star);
    o.Require(sum_grad.norm() < 1e-9, "ensemble is not consistent");
    RunConfig run;
    run.rounds = 20000;
    run.local_steps = 1;
    run.clients_per_round = e.problem.num_clients();
    run.participation = Participation::kFull;
    run.eta_l = e.eta_l;
    run.policy.mode = ClipMode::kDifference;
    run.policy.threshold = 1.0;
    run.x0 = e.x_star + ModelVector::Constant(e.x_star.size(), 5.0);
    ExperimentTrace trace = Unwrap(RunExperiment(e.problem, run));
    bool clipped = false;
    for (const ClientReport& r : trace.rounds.front().clients) clipped |= r.clip_factor < 1.0;
    clipped_runs += clipped;
    const double err = (trace.final_x - e.x_star).norm();
    worst = std::max(worst, err);
  }
  const double elapsed = Seconds(start);
  o.Require(worst <= 1e-8, absl::StrCat("distance to optimum ", worst));
  o.Require(elapsed < 30.0, absl::StrCat("took ", elapsed, " s"));
  if (o.pass) {
    o.detail = absl::StrCat("20 ensembles, max ||x - x*|| ", worst, ", ", clipped_runs,
                            " clipped in round 0, ", elapsed, " s");
  }
  return o;
}

ProblemInstance RandomQuadraticEnsemble(RngStream& s, int n, int d) {
  std::vector<Eigen::MatrixXd> a;
  std::vector<Eigen::VectorXd> b;
  for (int i = 0; i < n; ++i) {
    const int m = d + static_cast<int>(s.UniformInt(3));
    Eigen::MatrixXd ai(m, d);
    for (int r = 0; r < m; ++r) {
      for (int k = 0; k < d; ++k) ai(r, k) = s.Normal() / std::sqrt(m);
    }
    Eigen::VectorXd bi(m);
    for (int r = 0; r < m; ++r) bi[r] = 2.0 * s.Normal();
    a.push_back(ai);
    b.push_back(bi);
  }
  return Unwrap(BuildLinearRegressionEnsemble(a, b));
}

Outcome LambdaMapEquivalence() {
  Outcome o;
  RngStream s(4, {StreamDomain::kTest, 4, 0, 0});
  double worst = 0.0;
  int binding = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(s.UniformInt(5));
    const int d = 1 + static_cast<int>(s.UniformInt(3));
    ProblemInstance p = RandomQuadraticEnsemble(s, n, d);
    const double eta_l = (0.05 + 0.9 * s.Uniform()) / p.constants.lipschitz;
    const int64_t q = 1 + static_cast<int64_t>(s.UniformInt(20));
    const double c = 0.05 + 2.0 * s.Uniform();
    RunConfig run;
    run.rounds = 1;
    run.local_steps = q;
    run.clients_per_round = n;
    run.participation = Participation::kFull;
    run.eta_l = eta_l;
    run.policy.mode = ClipMode::kDifference;
    run.policy.threshold = c;
    ModelVector x(d);
    for (int k = 0; k < d; ++k) x[k] = 3.0 * s.Normal();
    run.x0 = x;
    const NoiseSpec none{0.0, d, true};
    auto [next, record] = Unwrap(RunRound(p, run, none, InitialState(p, run)));
    for (const ClientReport& r : record.clients) binding += r.clip_factor < 1.0;
    const ModelVector closed = Unwrap(DifferenceClipMap(x, p, eta_l, q, c));
    worst = std::max(worst, (closed - next.x).norm());
  }
  o.Require(worst <= 1e-10, absl::StrCat("max difference ", worst));
  if (o.pass) {
    o.detail = absl::StrCat("100 ensembles, max difference ", worst, ", ", binding,
                            " binding client clips");
  }
  return o;
}

Outcome HuberIdentity() {
  Outcome o;
  RngStream s(5, {StreamDomain::kTest, 5, 0, 0});
  const double h = 1e-6;
  double worst = 0.0;
  int points = 0, linear_branch = 0;
  while (points < 100) {
    const double lambda = 0.05 + s.Uniform();
    const double a = (s.Uniform() < 0.5 ? -1 : 1) * (0.3 + 2.0 * s.Uniform());
    const double b = 2.0 * s.Normal();
    const double c = 0.1 + s.Uniform();
    const double x = 3.0 * s.Normal();
    const double raw = lambda * a * (a * x - b);
    // Skip points near the kink between branches or near a zero slope.
    if (std::abs(std::abs(raw) - c) < 1e-3 || std::abs(raw) < 1e-2) continue;
    const double exact = std::clamp(raw, -c, c);
    const double fd = (Unwrap(HuberizedLoss(lambda, a, b, c, x + h)) -
                       Unwrap(HuberizedLoss(lambda, a, b, c, x - h))) /
                      (2 * h);
    worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    linear_branch += std::abs(raw) > c;
    ++points;
  }
  o.Require(worst <= 1e-6, absl::StrCat("max relative error ", worst));
  if (o.pass) {
    o.detail = absl::StrCat("100 points (", linear_branch, " on the linear branch), max rel err ",
                            worst);
  }
  return o;
}

Outcome BoundValidity() {
  Outcome o;
  RngStream s(6, {StreamDomain::kTest, 6, 0, 0});
  double tightest = 0.0;
  for (int cell = 0; cell < 20; ++cell) {
    const int n = 2 + static_cast<int>(s.UniformInt(5));
    ProblemInstance p;
    if (cell % 2 == 0) {
      std::vector<double> b(n);
      for (double& v : b) v = 3.0 * s.Normal();
      p = Unwrap(BuildQuadraticEnsemble(b));
    } else {
      p = RandomQuadraticEnsemble(s, n, 1 + static_cast<int>(s.UniformInt(3)));
    }
    RunConfig run;
    run.rounds = 20 + static_cast<int>(s.UniformInt(200));
    run.local_steps = 1 + static_cast<int64_t>(s.UniformInt(8));
    run.clients_per_round = 1 + static_cast<int>(s.UniformInt(n));
    run.eta_g = 0.5 + s.Uniform();
    run.seed = static_cast<uint64_t>(cell);
    const double q = static_cast<double>(run.local_steps);
    const double l = p.constants.lipschitz;
    const int pp = run.clients_per_round;
    double product = pp / (48 * q);
    if (pp > 1) product = std::min(product, pp / (6 * q * l * (pp - 1)));
    run.eta_l = (0.2 + 0.8 * s.Uniform()) *
                std::min(1.0 / (std::sqrt(60.0) * q * l), product / run.eta_g);
    ModelVector x0(p.dimension());
    for (int k = 0; k < x0.size(); ++k) x0[k] = 4.0 * s.Normal();
    run.x0 = x0;
    ExperimentTrace trace = Unwrap(RunExperiment(p, run));
    BoundBreakdown bound =
        Unwrap(ConvergenceBound(Unwrap(MakeBoundInputs(trace, p, run, std::nullopt))));
    const double measured = Unwrap(MeasuredStationarity(trace));
    o.Require(bound.regime.all(), absl::StrCat("cell ", cell, " is outside the regime"));
    o.Require(measured <= bound.total,
              absl::StrCat("cell ", cell, ": measured ", measured, " > bound ", bound.total));
    tightest = std::max(tightest, measured / bound.total);
  }
  if (o.pass) o.detail = absl::StrCat("20 cells, max measured/bound ratio ", tightest);
  return o;
}

Outcome BiasDegeneracies() {
  Outcome o;
  auto probed = [](int rounds, int64_t q, int p, double eta_l, double c) {
    RunConfig run;
    run.rounds = rounds;
    run.local_steps = q;
    run.clients_per_round = p;
    run.eta_l = eta_l;
    run.policy.mode = ClipMode::kDifference;
    run.policy.threshold = c;
    run.probes.all_clients = true;
    run.probes.replays = 8;
    return run;
  };
  auto max_over = [](const BiasReport& r, double RoundBias::*a, double RoundBias::*b) {
    double m = 0.0;
    for (const RoundBias& x : r.rounds) m = std::max({m, x.*a, x.*b});
    return m;
  };

  // Exact gradients: realized and expected factors coincide.
  {
    ProblemInstance p = ThreeClientExample();
    RunConfig run = probed(50, 4, 2, 0.005, 0.02);
    BiasReport r = Unwrap(ClipBiasTerms(Unwrap(RunExperiment(p, run)), p, run));
    o.Require(r.gamma1 < 1.0, "clipping never bound in the exact-gradient run");
    o.Require(max_over(r, &RoundBias::mean_abs_alpha_gap, &RoundBias::mean_sq_alpha_gap) == 0.0,
              "nonzero |alpha - alpha_tilde| with exact gradients");
  }
  // Identical clients: expected factors agree with their mean.
  {
    ProblemInstance p = Unwrap(BuildQuadraticEnsemble(std::vector<double>(5, 2.0)));
    RunConfig run = probed(50, 3, 3, 0.1, 0.1);
    run.x0 = ModelVector::Constant(1, -6.0);
    BiasReport r = Unwrap(ClipBiasTerms(Unwrap(RunExperiment(p, run)), p, run));
    o.Require(r.gamma1 < 1.0, "clipping never bound in the identical-client run");
    o.Require(max_over(r, &RoundBias::mean_abs_cross_gap, &RoundBias::mean_sq_cross_gap) == 0.0,
              "nonzero |alpha_tilde - alpha_bar| with identical clients");
  }
  // c >= eta_l Q G: nothing clips, with or without gradient noise.
  for (double sigma_l : {0.0, 0.2}) {
    ProblemInstance p = ThreeClientExample();
    p.constants.gradient_bound = 200.0;
    RunConfig run = probed(40, 3, 3, 0.004, 0.0);
    run.policy.threshold = run.eta_l * 3 * p.constants.gradient_bound;
    run.oracle = {sigma_l > 0 ? NoiseMode::kGaussian : NoiseMode::kDeterministic, sigma_l, 1};
    run.x0 = ModelVector::Constant(1, 1.0);
    ExperimentTrace trace = Unwrap(RunExperiment(p, run));
    BiasReport r = Unwrap(ClipBiasTerms(trace, p, run));
    o.Require(trace.oracle_violations == 0, "gradient bound violated");
    o.Require(r.gamma1 == 1.0 && r.gamma2 == 1.0, "gamma below 1 with inactive clipping");
    o.Require(r.avg_abs_alpha_gap == 0.0 && r.avg_abs_cross_gap == 0.0 &&
                  r.avg_sq_alpha_gap == 0.0 && r.avg_sq_cross_gap == 0.0,
              "nonzero bias terms with inactive clipping");
  }
  if (o.pass) o.detail = "exact-gradient, identical-client and inactive-clip runs";
  return o;
}

Outcome NoiseCalibration() {
  Outcome o;
  PrivacyConfig base;
  base.enabled = true;
  base.epsilon = 1.5;
  base.delta = 1e-5;
  base.v = 2.0;
  auto sigma2 = [](const PrivacyConfig& cfg, double c, int p, int n, int t) {
    return Unwrap(CalibrateNoise(cfg, c, p, n, t)).sigma2;
  };
  // Large-federation setting against long-double arithmetic.
  const long double hand = 2.0L * 1.0L * 80 * 100 * std::log(1e5L) /
                           (1920.0L * 1920.0L * 1.5L * 1.5L);
  const double got = sigma2(base, 1.0, 80, 1920, 100);
  const double rel = static_cast<double>(std::abs((got - hand) / hand));
  o.Require(rel <= 1e-12, absl::StrCat("relative error ", rel));

  // Monotone in each argument.
  for (double c : {0.5, 1.0, 2.0}) {
    for (int p : {10, 40}) {
      for (int t : {50, 100}) {
        const double s0 = sigma2(base, c, p, 1920, t);
        o.Require(sigma2(base, 2 * c, p, 1920, t) > s0, "not increasing in c");
        o.Require(sigma2(base, c, 2 * p, 1920, t) > s0, "not increasing in P");
        o.Require(sigma2(base, c, p, 1920, 2 * t) > s0, "not increasing in T");
        o.Require(sigma2(base, c, p, 3840, t) < s0, "not decreasing in N");
        PrivacyConfig e = base;
        e.epsilon *= 2;
        o.Require(std::abs(sigma2(e, c, p, 1920, t) - s0 / 4) <= 1e-15 * s0,
                  "doubling epsilon does not quarter sigma^2");
        e = base;
        e.delta = 1e-7;
        o.Require(sigma2(e, c, p, 1920, t) > s0, "not increasing as delta shrinks");
        e = base;
        e.v = 3.0;
        o.Require(sigma2(e, c, p, 1920, t) > s0, "not increasing in v");
      }
    }
  }

  // Empirical per-coordinate variance of 1e5 draws.
  NoiseSpec spec = Unwrap(CalibrateNoise(base, 1.0, 80, 1920, 100, 4));
  RngStream stream(11, {StreamDomain::kPrivacyNoise, 0, 0, 0});
  const int draws = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sum_sq = Eigen::VectorXd::Zero(4);
  for (int k = 0; k < draws; ++k) {
    const ModelVector z = DrawNoise(spec, stream);
    sum += z;
    sum_sq += z.cwiseProduct(z);
  }
  double worst = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double mean = sum[j] / draws;
    const double var = sum_sq[j] / draws - mean * mean;
    worst = std::max(worst, std::abs(var - spec.sigma2) / spec.sigma2);
  }
  o.Require(worst <= 0.05, absl::StrCat("empirical variance off by ", worst));
  if (o.pass) {
    o.detail = absl::StrCat("sigma^2 = ", got, " (rel err ", rel,
                            "), empirical variance within ", 100 * worst, "%");
  }
  return o;
}

Outcome SamplingIdentity() {
  Outcome o;
  RngStream s(8, {StreamDomain::kTest, 8, 0, 0});
  ProblemInstance p = RandomQuadraticEnsemble(s, 6, 2);
  RunConfig run;
  run.rounds = 1;
  run.local_steps = 3;
  run.clients_per_round = 3;
  run.eta_l = 0.5 / p.constants.lipschitz;
  run.x0 = ModelVector::Constant(2, 1.0);
  const NoiseSpec none{0.0, 2, true};
  RunConfig full = run;
  full.clients_per_round = 6;
  full.participation = Participation::kFull;
  const ModelVector target =
      Unwrap(RunRound(p, full, none, InitialState(p, full))).second.mean_update;
  const int draws = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2), sum_sq = Eigen::VectorXd::Zero(2);
  for (int k = 0; k < draws; ++k) {
    run.seed = static_cast<uint64_t>(k);
    const ModelVector m = Unwrap(RunRound(p, run, none, InitialState(p, run))).second.mean_update;
    sum += m;
    sum_sq += m.cwiseProduct(m);
  }
  double worst_z = 0.0;
  for (int j = 0; j < 2; ++j) {
    const double mean = sum[j] / draws;
    const double se = std::sqrt((sum_sq[j] / draws - mean * mean) / draws);
    worst_z = std::max(worst_z, std::abs(mean - target[j]) / se);
  }
  o.Require(worst_z <= 4.0, absl::StrCat("|z| = ", worst_z));
  if (o.pass) o.detail = absl::StrCat("1e4 resamplings, max |z| ", worst_z);
  return o;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome Determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "fedclip_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig c = Unwrap(LoadConfigFile(
      (fs::path(FEDCLIP_SOURCE_DIR) / "configs" / "dp.json").string()));
  c.replicate_seeds = {3};
  c.run.rounds = 50;
  c.run.probes.all_clients = true;
  std::vector<std::string> outputs;
  for (auto [name, threads] : {std::pair{"a", 1}, {"b", 1}, {"c", 8}}) {
    c.output_dir = (root / name).string();
    c.run.threads = threads;
    Check(ExecuteConfig(c));
    outputs.push_back(ReadFile(root / name / "replicate_3" / "rounds.jsonl"));
  }
  fs::remove_all(root);
  o.Require(!outputs[0].empty(), "empty rounds.jsonl");
  o.Require(outputs[0] == outputs[1], "reruns differ");
  o.Require(outputs[0] == outputs[2], "1 vs 8 threads differ");
  if (o.pass) {
    o.detail = absl::StrCat("rounds.jsonl identical (", outputs[0].size(),
                            " bytes) across reruns and 1 vs 8 threads");
  }
  return o;
}

Outcome HeterogeneityDiagnostic() {
  Outcome o;
  const int checked[] = {2, 8, 16};
  int wins = 0;
  std::vector<std::string> per_seed;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<std::vector<RoundDistribution>> dist;
    for (double h : {0.0, 1.0}) {
      ExperimentConfig c = Unwrap(LoadConfigFile(
          (fs::path(FEDCLIP_SOURCE_DIR) / "configs" / (h == 0.0 ? "mlp_iid.json"
                                                                 : "mlp_noniid.json"))
              .string()));
      c.problem.mlp.seed = seed;
      ProblemInstance p = Unwrap(BuildProblem(c.problem));
      dist.push_back(UpdateDistribution(Unwrap(RunExperiment(p, MakeRunConfig(c, seed)))));
    }
    bool larger = true;
    for (int t : checked) {
      larger = larger && dist[1][t].variance_magnitude > dist[0][t].variance_magnitude;
    }
    wins += larger;
    per_seed.push_back(absl::StrCat(dist[1][8].variance_magnitude / dist[0][8].variance_magnitude));
  }
  o.Require(wins >= 9, absl::StrCat("Non-IID variance larger in ", wins, "/10 seeds"));
  if (o.pass) {
    o.detail = absl::StrCat("Non-IID variance larger at rounds 2, 8, 16 in ", wins,
                            "/10 seeds; round-8 ratios ", absl::StrJoin(per_seed, " "));
  }
  return o;
}

}  // namespace
}  // namespace fedclip

int main() {
  using fedclip::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"table1_fixed_points", fedclip::Table1},
      {"model_clip_counterexample", fedclip::ModelClipCounterexample},
      {"difference_clip_recipe", fedclip::DifferenceClipRecipe},
      {"lambda_map_equivalence", fedclip::LambdaMapEquivalence},
      {"huber_gradient_identity", fedclip::HuberIdentity},
      {"bound_validity", fedclip::BoundValidity},
      {"bias_degeneracies", fedclip::BiasDegeneracies},
      {"noise_calibration", fedclip::NoiseCalibration},
      {"sampling_identity", fedclip::SamplingIdentity},
      {"determinism", fedclip::Determinism},
      {"heterogeneity_diagnostic", fedclip::HeterogeneityDiagnostic},
  };
  int failures = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    Outcome outcome;
    try {
      outcome = criteria[k].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    failures += !outcome.pass;
    std::printf("%s %2zu %s: %s\n", outcome.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
