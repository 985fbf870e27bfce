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
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedclip {
namespace {

// Vertex enumeration is exact for affine gradient gaps; beyond this dimension
// the box is sampled instead.
constexpr int kMaxEnumeratedDimension = 12;
constexpr int kSampledBoxPoints = 4096;

bool SameHessians(const ProblemInstance& problem) {
  const Eigen::MatrixXd first = *problem.clients.front()->hessian();
  const double scale = std::max(1.0, first.cwiseAbs().maxCoeff());
  for (const auto& client : problem.clients) {
    if ((*client->hessian() - first).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      return false;
    }
  }
  return true;
}

double MaxGradientGap(const ProblemInstance& problem, const ModelVector& x) {
  const ModelVector mean = problem.GlobalGradient(x);
  double worst = 0.0;
  for (const auto& client : problem.clients) {
    worst = std::max(worst, (client->Gradient(x) - mean).norm());
  }
  return worst;
}

absl::Status FillQuadraticConstants(ProblemInstance& problem) {
  const int d = problem.dimension();
  Eigen::MatrixXd gram_sum = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  double lipschitz = 0.0;
  for (const auto& client : problem.clients) {
    const auto& quad = static_cast<const QuadraticObjective&>(*client);
    const Eigen::MatrixXd gram = *quad.hessian();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                       Eigen::EigenvaluesOnly);
    lipschitz = std::max(lipschitz, eig.eigenvalues().maxCoeff());
    gram_sum += gram;
    rhs += quad.a().transpose() * quad.b();
  }
  if (!(lipschitz > 0.0)) {
    return absl::InvalidArgumentError(
        "all client Hessians vanish; Lipschitz constant must be positive");
  }
  problem.constants.lipschitz = lipschitz;
  problem.constants.lipschitz_method = "max-eigenvalue";

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> total(gram_sum);
  const double min_eig = total.eigenvalues().minCoeff();
  if (min_eig > 1e-12 * total.eigenvalues().maxCoeff()) {
    problem.global_optimum = ModelVector(gram_sum.ldlt().solve(rhs));
    problem.f_star = problem.GlobalLoss(*problem.global_optimum);
  }

  if (SameHessians(problem)) {
    problem.constants.sigma_g = MaxGradientGap(problem, ModelVector::Zero(d));
    problem.constants.sigma_g_method = "closed-form";
    return absl::OkStatus();
  }
  const ModelVector center =
      problem.global_optimum.value_or(ModelVector::Zero(d));
  return RecomputeSigmaGOverBox(problem, center,
                                2.0 * std::max(1.0, center.norm()));
}

}  // namespace

std::string ObjectiveKindName(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kScalarQuadratic:
      return "scalar-quadratic";
    case ObjectiveKind::kLinearRegression:
      return "linear-regression";
    case ObjectiveKind::kMlpSynthetic:
      return "mlp-synthetic";
  }
  return "unknown";
}

ModelVector ClientObjective::MinibatchGradient(
    const ModelVector& x, std::span<const int> /*samples*/) const {
  return Gradient(x);
}

QuadraticObjective::QuadraticObjective(ObjectiveKind kind, Eigen::MatrixXd a,
                                       Eigen::VectorXd b)
    : kind_(kind), a_(std::move(a)), b_(std::move(b)) {
  gram_ = a_.transpose() * a_;
  if (kind_ == ObjectiveKind::kScalarQuadratic && a_.size() == 1 &&
      a_(0, 0) == 1.0) {
    minimizer_ = b_;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_,
                                                     Eigen::EigenvaluesOnly);
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (max_eig > 0.0 && eig.eigenvalues().minCoeff() > 1e-12 * max_eig) {
    minimizer_ = ModelVector(gram_.ldlt().solve(a_.transpose() * b_));
  }
}

double QuadraticObjective::Loss(const ModelVector& x) const {
  return 0.5 * (a_ * x - b_).squaredNorm();
}

ModelVector QuadraticObjective::Gradient(const ModelVector& x) const {
  return a_.transpose() * (a_ * x - b_);
}

ModelVector QuadraticObjective::MinibatchGradient(
    const ModelVector& x, std::span<const int> samples) const {
  ModelVector grad = ModelVector::Zero(dimension());
  for (int row : samples) {
    grad += a_.row(row).transpose() * (a_.row(row).dot(x) - b_(row));
  }
  return grad * (static_cast<double>(a_.rows()) / samples.size());
}

int ProblemInstance::dimension() const {
  return clients.empty() ? 0 : clients.front()->dimension();
}

double ProblemInstance::GlobalLoss(const ModelVector& x) const {
  double total = 0.0;
  for (const auto& client : clients) total += client->Loss(x);
  return total / num_clients();
}

ModelVector ProblemInstance::GlobalGradient(const ModelVector& x) const {
  return SumGradient(x) / num_clients();
}

ModelVector ProblemInstance::SumGradient(const ModelVector& x) const {
  ModelVector total = ModelVector::Zero(dimension());
  for (const auto& client : clients) total += client->Gradient(x);
  return total;
}

absl::StatusOr<ProblemInstance> BuildQuadraticEnsemble(
    std::span<const double> b_values) {
  if (b_values.empty()) {
    return absl::InvalidArgumentError("quadratic ensemble needs at least one b");
  }
  ProblemInstance problem;
  double sum = 0.0;
  for (double b : b_values) {
    problem.clients.push_back(std::make_shared<QuadraticObjective>(
        ObjectiveKind::kScalarQuadratic, Eigen::MatrixXd::Ones(1, 1),
        Eigen::VectorXd::Constant(1, b)));
    sum += b;
  }
  const double optimum = sum / b_values.size();
  problem.global_optimum = ModelVector::Constant(1, optimum);
  problem.f_star = problem.GlobalLoss(*problem.global_optimum);
  problem.constants.lipschitz = 1.0;
  problem.constants.lipschitz_method = "max-eigenvalue";
  double sigma_g = 0.0;
  for (double b : b_values) sigma_g = std::max(sigma_g, std::abs(b - optimum));
  problem.constants.sigma_g = sigma_g;
  problem.constants.sigma_g_method = "closed-form";
  return problem;
}

absl::StatusOr<ProblemInstance> BuildLinearRegressionEnsemble(
    std::span<const Eigen::MatrixXd> a_list,
    std::span<const Eigen::VectorXd> b_list) {
  if (a_list.empty()) {
    return absl::InvalidArgumentError("ensemble needs at least one client");
  }
  if (a_list.size() != b_list.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("got ", a_list.size(), " design matrices but ",
                     b_list.size(), " target vectors"));
  }
  const Eigen::Index d = a_list.front().cols();
  if (d < 1) return absl::InvalidArgumentError("dimension must be >= 1");
  ProblemInstance problem;
  for (size_t i = 0; i < a_list.size(); ++i) {
    if (a_list[i].cols() != d) {
      return absl::InvalidArgumentError(
          absl::StrCat("client ", i, " has ", a_list[i].cols(),
                       " columns, expected ", d));
    }
    if (a_list[i].rows() != b_list[i].size() || a_list[i].rows() < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("client ", i, " has ", a_list[i].rows(), " rows but ",
                       b_list[i].size(), " targets"));
    }
    problem.clients.push_back(std::make_shared<QuadraticObjective>(
        ObjectiveKind::kLinearRegression, a_list[i], b_list[i]));
  }
  if (absl::Status s = FillQuadraticConstants(problem); !s.ok()) return s;
  return problem;
}

absl::StatusOr<ProblemInstance> BuildScalarRegressionEnsemble(
    std::span<const double> slopes, std::span<const double> offsets) {
  if (slopes.size() != offsets.size()) {
    return absl::InvalidArgumentError("slopes and offsets differ in length");
  }
  std::vector<Eigen::MatrixXd> a_list;
  std::vector<Eigen::VectorXd> b_list;
  for (size_t i = 0; i < slopes.size(); ++i) {
    a_list.push_back(Eigen::MatrixXd::Constant(1, 1, slopes[i]));
    b_list.push_back(Eigen::VectorXd::Constant(1, offsets[i]));
  }
  return BuildLinearRegressionEnsemble(a_list, b_list);
}

absl::Status RecomputeSigmaGOverBox(ProblemInstance& problem,
                                    const ModelVector& center, double radius) {
  for (const auto& client : problem.clients) {
    if (!client->hessian().has_value()) {
      return absl::InvalidArgumentError(
          "box sigma_g requires quadratic clients");
    }
  }
  const int d = problem.dimension();
  if (center.size() != d || !(radius > 0.0)) {
    return absl::InvalidArgumentError("bad box for sigma_g");
  }
  double worst = 0.0;
  if (d <= kMaxEnumeratedDimension) {
    for (uint32_t mask = 0; mask < (1u << d); ++mask) {
      ModelVector vertex = center;
      for (int k = 0; k < d; ++k) vertex(k) += (mask >> k & 1u) ? radius : -radius;
      worst = std::max(worst, MaxGradientGap(problem, vertex));
    }
    problem.constants.sigma_g_method = absl::StrCat("box-vertices(r=", radius, ")");
  } else {
    RngStream stream(0, {StreamDomain::kProblemData, 0, 0, 1});
    for (int p = 0; p < kSampledBoxPoints; ++p) {
      ModelVector point = center;
      for (int k = 0; k < d; ++k) point(k) += radius * (2.0 * stream.Uniform() - 1.0);
      worst = std::max(worst, MaxGradientGap(problem, point));
    }
    problem.constants.sigma_g_method = absl::StrCat("box-sampled(r=", radius, ")");
  }
  problem.constants.sigma_g = worst;
  return absl::OkStatus();
}

std::string NoiseModeName(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kDeterministic:
      return "deterministic";
    case NoiseMode::kGaussian:
      return "gaussian";
    case NoiseMode::kMinibatch:
      return "minibatch";
  }
  return "unknown";
}

GradientOracle::GradientOracle(const ClientObjective& objective,
                               OracleOptions options, RngStream stream,
                               double gradient_bound)
    : objective_(&objective),
      options_(options),
      stream_(stream),
      gradient_bound_(gradient_bound) {}

bool GradientOracle::deterministic() const {
  switch (options_.mode) {
    case NoiseMode::kDeterministic:
      return true;
    case NoiseMode::kGaussian:
      return options_.sigma_l == 0.0;
    case NoiseMode::kMinibatch:
      return false;
  }
  return true;
}

ModelVector GradientOracle::Sample(const ModelVector& x) {
  ModelVector g;
  switch (options_.mode) {
    case NoiseMode::kDeterministic:
      g = objective_->Gradient(x);
      break;
    case NoiseMode::kGaussian: {
      g = objective_->Gradient(x);
      if (options_.sigma_l > 0.0) {
        // Per-coordinate variance sigma_l^2 / d so E||noise||^2 = sigma_l^2.
        const double scale = options_.sigma_l / std::sqrt(g.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) += scale * stream_.Normal();
      }
      break;
    }
    case NoiseMode::kMinibatch: {
      const int n = objective_->num_samples();
      std::vector<int> batch(std::max(1, options_.batch_size));
      for (int& idx : batch) idx = static_cast<int>(stream_.UniformInt(n));
      g = objective_->MinibatchGradient(x, batch);
      break;
    }
  }
  if (g.norm() > gradient_bound_) ++violations_;
  return g;
}

}  // namespace fedclip
