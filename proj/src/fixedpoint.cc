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

#include "fedclip/fixedpoint.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedclip/clipping.h"
#include "fedclip/engine.h"

namespace fedclip {
namespace {

constexpr int kBracketExpansions = 64;
constexpr int kBisectionSteps = 400;

// (1 - (1 - eta mu)^Q) / mu for one eigenvalue mu > 0.
double SpectralWeight(double mu, double eta_l, int64_t local_steps) {
  if (local_steps == kUntilConverged) return 1.0 / mu;
  const double base = 1.0 - eta_l * mu;
  const double q = static_cast<double>(local_steps);
  if (base > 0.0) return -std::expm1(q * std::log1p(-eta_l * mu)) / mu;
  return (1.0 - std::pow(base, q)) / mu;
}

absl::Status RequireQuadratic(const ProblemInstance& problem) {
  if (problem.num_clients() < 1) return absl::InvalidArgumentError("empty ensemble");
  for (const auto& client : problem.clients) {
    if (!client->hessian().has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("closed-form maps need quadratic clients, got ",
                       ObjectiveKindName(client->kind())));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<FixedPointResult> Bisect(const MapFunction& map, double x0, double tol,
                                        int64_t iterations_so_far) {
  auto residual = [&](double x) {
    return map(ModelVector::Constant(1, x))(0) - x;
  };
  double h = std::max(1.0, std::abs(x0));
  double lo = x0 - h, hi = x0 + h;
  double r_lo = residual(lo), r_hi = residual(hi);
  // Past the point where neighbouring doubles are farther apart than tol, a
  // zero residual only reflects rounding, so the bracket stops growing there.
  auto resolvable = [tol](double width) {
    return std::nextafter(width, std::numeric_limits<double>::infinity()) - width <= tol;
  };
  for (int e = 0; e < kBracketExpansions && r_lo * r_hi > 0.0 &&
                  resolvable(std::abs(x0) + 2.0 * h);
       ++e) {
    h *= 2.0;
    lo = x0 - h;
    hi = x0 + h;
    r_lo = residual(lo);
    r_hi = residual(hi);
  }
  if (r_lo * r_hi > 0.0) {
    return absl::ResourceExhaustedError("bisection fallback found no sign change");
  }
  FixedPointResult result;
  result.used_bisection = true;
  result.iterations = iterations_so_far;
  for (int k = 0; k < kBisectionSteps; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double r_mid = residual(mid);
    ++result.iterations;
    if (std::abs(r_mid) <= tol) {
      result.x = ModelVector::Constant(1, mid);
      result.residual = std::abs(r_mid);
      return result;
    }
    if ((r_mid > 0.0) == (r_lo > 0.0)) {
      lo = mid;
      r_lo = r_mid;
    } else {
      hi = mid;
    }
  }
  const double mid = 0.5 * (lo + hi);
  return absl::ResourceExhaustedError(absl::StrCat(
      "bisection did not reach tolerance; last residual ", std::abs(residual(mid))));
}

}  // namespace

absl::StatusOr<double> ModelClipLambda(double eta_l, int64_t local_steps) {
  if (!(eta_l > 0.0 && eta_l < 1.0)) {
    return absl::InvalidArgumentError("model-clip lambda needs eta_l in (0, 1)");
  }
  if (local_steps < 1) return absl::InvalidArgumentError("model-clip lambda needs finite Q >= 1");
  return std::pow(1.0 - eta_l, static_cast<double>(local_steps));
}

double ModelClipMap(double x, std::span<const double> b, double lambda, double c) {
  double total = 0.0;
  for (double bi : b) {
    total += Clip(ModelVector::Constant(1, lambda * x + (1.0 - lambda) * bi), c)(0);
  }
  return total / static_cast<double>(b.size());
}

absl::StatusOr<Eigen::MatrixXd> LambdaFromGram(const Eigen::MatrixXd& gram, double eta_l,
                                               int64_t local_steps) {
  if (local_steps < 1 && local_steps != kUntilConverged) {
    return absl::InvalidArgumentError("local_steps must be >= 1 or kUntilConverged");
  }
  if (!(eta_l > 0.0)) return absl::InvalidArgumentError("eta_l must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& mu = eig.eigenvalues();
  const double max_mu = mu.maxCoeff();
  if (!(mu.minCoeff() > 1e-12 * std::max(1.0, max_mu))) {
    return absl::FailedPreconditionError("A^T A is singular");
  }
  if (!(eta_l < 2.0 / max_mu)) {
    return absl::InvalidArgumentError(
        absl::StrCat("eta_l = ", eta_l, " must be below 2 / lambda_max = ", 2.0 / max_mu));
  }
  Eigen::VectorXd weights(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    weights(k) = SpectralWeight(mu(k), eta_l, local_steps);
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return Eigen::MatrixXd(v * weights.asDiagonal() * v.transpose());
}

absl::StatusOr<Eigen::MatrixXd> LambdaMapMatrix(const Eigen::MatrixXd& a, double eta_l,
                                                int64_t local_steps) {
  return LambdaFromGram(a.transpose() * a, eta_l, local_steps);
}

absl::StatusOr<ModelVector> DifferenceClipMap(const ModelVector& x,
                                              const ProblemInstance& problem, double eta_l,
                                              int64_t local_steps, double c) {
  auto map = OneRoundMap::DifferenceClip(problem, eta_l, local_steps, c);
  if (!map.ok()) return map.status();
  if (x.size() != map->dimension()) {
    return absl::InvalidArgumentError("x does not match the ensemble dimension");
  }
  return (*map)(x);
}

std::string MapKindName(MapKind kind) {
  switch (kind) {
    case MapKind::kModelClip:
      return "model-clip";
    case MapKind::kDifferenceClip:
      return "difference-clip";
    case MapKind::kGradientClip:
      return "gradient-clip";
    case MapKind::kLocalMinClip:
      return "local-min-clip";
  }
  return "unknown";
}

absl::StatusOr<OneRoundMap> OneRoundMap::ModelClip(std::vector<double> b, double lambda,
                                                   double c) {
  if (b.empty()) return absl::InvalidArgumentError("model-clip map needs clients");
  if (!(lambda > 0.0 && lambda < 1.0)) {
    return absl::InvalidArgumentError("lambda must lie in (0, 1)");
  }
  if (!(c > 0.0)) return absl::InvalidArgumentError("threshold must be positive");
  OneRoundMap map(MapKind::kModelClip, c, 1);
  map.lambda_ = lambda;
  map.offsets_ = std::move(b);
  return map;
}

absl::StatusOr<OneRoundMap> OneRoundMap::DifferenceClip(const ProblemInstance& problem,
                                                        double eta_l, int64_t local_steps,
                                                        double c) {
  if (absl::Status s = RequireQuadratic(problem); !s.ok()) return s;
  if (!(c > 0.0)) return absl::InvalidArgumentError("threshold must be positive");
  OneRoundMap map(MapKind::kDifferenceClip, c, problem.dimension());
  for (const auto& client : problem.clients) {
    auto lambda = LambdaFromGram(*client->hessian(), eta_l, local_steps);
    if (!lambda.ok()) return lambda.status();
    map.preconditioners_.push_back(*std::move(lambda));
  }
  map.problem_ = problem;
  return map;
}

absl::StatusOr<OneRoundMap> OneRoundMap::GradientClip(const ProblemInstance& problem,
                                                      double step, double c) {
  if (problem.num_clients() < 1) return absl::InvalidArgumentError("empty ensemble");
  if (!(step > 0.0)) return absl::InvalidArgumentError("step must be positive");
  if (!(c > 0.0)) return absl::InvalidArgumentError("threshold must be positive");
  OneRoundMap map(MapKind::kGradientClip, c, problem.dimension());
  map.step_ = step;
  map.problem_ = problem;
  return map;
}

absl::StatusOr<OneRoundMap> OneRoundMap::LocalMinClip(const ProblemInstance& problem, double c) {
  if (problem.num_clients() < 1) return absl::InvalidArgumentError("empty ensemble");
  if (!(c > 0.0)) return absl::InvalidArgumentError("threshold must be positive");
  OneRoundMap map(MapKind::kLocalMinClip, c, problem.dimension());
  for (int i = 0; i < problem.num_clients(); ++i) {
    auto minimizer = problem.client(i).local_minimizer();
    if (!minimizer.has_value()) {
      return absl::FailedPreconditionError(
          absl::StrCat("client ", i, " has no unique local minimizer"));
    }
    map.minimizers_.push_back(*std::move(minimizer));
  }
  return map;
}

ModelVector OneRoundMap::operator()(const ModelVector& x) const {
  switch (kind_) {
    case MapKind::kModelClip:
      return ModelVector::Constant(1, ModelClipMap(x(0), offsets_, lambda_, threshold_));
    case MapKind::kDifferenceClip: {
      ModelVector total = ModelVector::Zero(dimension_);
      for (int i = 0; i < problem_.num_clients(); ++i) {
        total += Clip(preconditioners_[i] * problem_.client(i).Gradient(x), threshold_);
      }
      return x - total / problem_.num_clients();
    }
    case MapKind::kGradientClip: {
      ModelVector total = ModelVector::Zero(dimension_);
      for (int i = 0; i < problem_.num_clients(); ++i) {
        total += Clip(problem_.client(i).Gradient(x), threshold_);
      }
      return x - step_ * total / problem_.num_clients();
    }
    case MapKind::kLocalMinClip: {
      ModelVector total = ModelVector::Zero(dimension_);
      for (const ModelVector& minimizer : minimizers_) total += Clip(x - minimizer, threshold_);
      return x - total / static_cast<double>(minimizers_.size());
    }
  }
  return x;
}

absl::StatusOr<FixedPointResult> SolveFixedPoint(const MapFunction& map,
                                                 const ModelVector& x_init,
                                                 const FixedPointOptions& options) {
  if (!(options.tol > 0.0)) return absl::InvalidArgumentError("tol must be positive");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    return absl::InvalidArgumentError("damping must lie in (0, 1]");
  }
  ModelVector x = x_init;
  double best = std::numeric_limits<double>::infinity();
  int64_t last_improvement = 0;
  double residual = std::numeric_limits<double>::infinity();
  int64_t it = 0;
  for (; it < options.max_iter; ++it) {
    const ModelVector image = map(x);
    residual = (image - x).norm();
    if (!std::isfinite(residual)) break;
    if (residual <= options.tol) {
      return FixedPointResult{x, residual, it, false};
    }
    if (residual < best * (1.0 - 1e-12)) {
      best = residual;
      last_improvement = it;
    } else if (it - last_improvement >= options.stall_window) {
      break;
    }
    x = (1.0 - options.damping) * x + options.damping * image;
  }
  if (x.size() == 1) {
    const double start = std::isfinite(x(0)) ? x(0) : x_init(0);
    return Bisect(map, start, options.tol, it);
  }
  return absl::ResourceExhaustedError(absl::StrCat(
      "fixed-point iteration did not converge after ", it, " iterations; last residual ",
      residual));
}

absl::StatusOr<double> HuberizedLoss(double lambda, double a, double b, double c, double x) {
  if (a == 0.0) return absl::InvalidArgumentError("Huberized loss needs a != 0");
  if (!(lambda > 0.0)) return absl::InvalidArgumentError("Huberized loss needs Lambda > 0");
  if (!(c > 0.0)) return absl::InvalidArgumentError("Huberized loss needs c > 0");
  const double residual = a * x - b;
  if (std::abs(lambda * a * residual) <= c) return lambda * 0.5 * residual * residual;
  return c * std::abs(residual) / std::abs(a) - c * c / (2.0 * lambda * a * a);
}

}  // namespace fedclip
