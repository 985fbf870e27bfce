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

// Closed-form one-round maps of clipped FedAvg on quadratic ensembles, and a
// fixed-point solver for their stationary points.
//
// On f_i(x) = 1/2 ||A_i x - b_i||^2, Q local GD steps from x move client i by
// exactly -Lambda_i grad f_i(x) with
//
//   Lambda_i = (I - (I - eta_l A_i^T A_i)^Q) (A_i^T A_i)^{-1},
//
// so one round of difference-clipped FedAvg (eta_g = 1, all clients) is
// x+ = x - (1/N) sum_i clip(Lambda_i grad f_i(x), c). For the scalar clients
// 1/2 (x - b_i)^2 this collapses to lambda = (1 - eta_l)^Q, and model
// clipping gives x+ = (1/N) sum_i clip(lambda x + (1 - lambda) b_i, c).

#ifndef FEDCLIP_FIXEDPOINT_H_
#define FEDCLIP_FIXEDPOINT_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "fedclip/problems.h"

namespace fedclip {

// (1 - eta_l)^Q. Requires eta_l in (0, 1) and Q >= 1.
absl::StatusOr<double> ModelClipLambda(double eta_l, int64_t local_steps);

// (1/N) sum_i clip(lambda x + (1 - lambda) b_i, c) for scalar x.
double ModelClipMap(double x, std::span<const double> b, double lambda, double c);

// Lambda for design matrix A. `local_steps` may be kUntilConverged, giving the
// limit (A^T A)^{-1}. Fails when A^T A is singular or eta_l >= 2 / lambda_max.
absl::StatusOr<Eigen::MatrixXd> LambdaMapMatrix(const Eigen::MatrixXd& a, double eta_l,
                                                int64_t local_steps);

// Same, from the Gram matrix A^T A directly.
absl::StatusOr<Eigen::MatrixXd> LambdaFromGram(const Eigen::MatrixXd& gram, double eta_l,
                                               int64_t local_steps);

// x - (1/N) sum_i clip(Lambda_i grad f_i(x), c) over a quadratic ensemble.
absl::StatusOr<ModelVector> DifferenceClipMap(const ModelVector& x,
                                              const ProblemInstance& problem, double eta_l,
                                              int64_t local_steps, double c);

enum class MapKind {
  kModelClip,       // scalar clients 1/2 (x - b_i)^2, clip on the local model
  kDifferenceClip,  // clip on Lambda_i grad f_i(x)
  kGradientClip,    // x - step * mean clip(grad f_i(x), c); the Q = 1 reading
  kLocalMinClip,    // x - mean clip(x - x_i*, c); the Q = infinity reading
};

std::string MapKindName(MapKind kind);

// A one-round map with its per-client operators precomputed.
class OneRoundMap {
 public:
  static absl::StatusOr<OneRoundMap> ModelClip(std::vector<double> b, double lambda, double c);
  static absl::StatusOr<OneRoundMap> DifferenceClip(const ProblemInstance& problem, double eta_l,
                                                    int64_t local_steps, double c);
  static absl::StatusOr<OneRoundMap> GradientClip(const ProblemInstance& problem, double step,
                                                  double c);
  static absl::StatusOr<OneRoundMap> LocalMinClip(const ProblemInstance& problem, double c);

  MapKind kind() const { return kind_; }
  double threshold() const { return threshold_; }
  int dimension() const { return dimension_; }

  ModelVector operator()(const ModelVector& x) const;

 private:
  OneRoundMap(MapKind kind, double threshold, int dimension)
      : kind_(kind), threshold_(threshold), dimension_(dimension) {}

  MapKind kind_;
  double threshold_;
  int dimension_;
  double lambda_ = 0.0;
  double step_ = 1.0;
  std::vector<double> offsets_;
  std::vector<Eigen::MatrixXd> preconditioners_;
  std::vector<ModelVector> minimizers_;
  ProblemInstance problem_;
};

struct FixedPointOptions {
  double tol = 1e-10;
  int64_t max_iter = 1'000'000;
  double damping = 0.5;
  // Iterations without residual improvement before the scalar fallback.
  int64_t stall_window = 10'000;
};

struct FixedPointResult {
  ModelVector x;
  double residual = 0.0;  // ||map(x) - x||
  int64_t iterations = 0;
  bool used_bisection = false;
};

using MapFunction = std::function<ModelVector(const ModelVector&)>;

// Damped iteration x <- (1 - beta) x + beta map(x) until ||map(x) - x|| <= tol.
// One-dimensional maps fall back to bisection on map(x) - x if the iteration
// stalls. Fails with RESOURCE_EXHAUSTED, quoting the last residual, otherwise.
absl::StatusOr<FixedPointResult> SolveFixedPoint(const MapFunction& map,
                                                 const ModelVector& x_init,
                                                 const FixedPointOptions& options = {});

// Huberized surrogate of Lambda f(x) for the scalar client f(x) = 1/2 (a x - b)^2:
//
//   Lambda f(x)                                   if |Lambda a (a x - b)| <= c
//   c |a x - b| / |a| - c^2 / (2 Lambda a^2)      otherwise,
//
// whose derivative is clip(Lambda f'(x), c). Requires a != 0 and Lambda > 0.
absl::StatusOr<double> HuberizedLoss(double lambda, double a, double b, double c, double x);

}  // namespace fedclip

#endif  // FEDCLIP_FIXEDPOINT_H_
