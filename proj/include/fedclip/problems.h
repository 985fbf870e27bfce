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

#ifndef FEDCLIP_PROBLEMS_H_
#define FEDCLIP_PROBLEMS_H_

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "fedclip/rng.h"

namespace fedclip {

// Dense model iterate.
using ModelVector = Eigen::VectorXd;

enum class ObjectiveKind { kScalarQuadratic, kLinearRegression, kMlpSynthetic };

std::string ObjectiveKindName(ObjectiveKind kind);

// One client's local objective f_i. Implementations are immutable after
// construction and may be shared across threads.
class ClientObjective {
 public:
  virtual ~ClientObjective() = default;

  virtual ObjectiveKind kind() const = 0;
  virtual int dimension() const = 0;
  virtual double Loss(const ModelVector& x) const = 0;
  virtual ModelVector Gradient(const ModelVector& x) const = 0;

  // Number of data points a minibatch draws from.
  virtual int num_samples() const { return 1; }
  // Unbiased estimate of Gradient(x) from the listed sample indices.
  virtual ModelVector MinibatchGradient(const ModelVector& x,
                                        std::span<const int> samples) const;

  virtual std::optional<ModelVector> local_minimizer() const {
    return std::nullopt;
  }
  // Constant Hessian of quadratic objectives; empty otherwise.
  virtual std::optional<Eigen::MatrixXd> hessian() const {
    return std::nullopt;
  }
};

// f(x) = 1/2 ||A x - b||^2. Covers both the scalar quadratic 1/2 (x - b)^2
// (A = 1) and the linear-regression client.
class QuadraticObjective final : public ClientObjective {
 public:
  QuadraticObjective(ObjectiveKind kind, Eigen::MatrixXd a, Eigen::VectorXd b);

  ObjectiveKind kind() const override { return kind_; }
  int dimension() const override { return static_cast<int>(a_.cols()); }
  double Loss(const ModelVector& x) const override;
  ModelVector Gradient(const ModelVector& x) const override;
  int num_samples() const override { return static_cast<int>(a_.rows()); }
  ModelVector MinibatchGradient(const ModelVector& x,
                                std::span<const int> samples) const override;
  std::optional<ModelVector> local_minimizer() const override {
    return minimizer_;
  }
  std::optional<Eigen::MatrixXd> hessian() const override { return gram_; }

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }

 private:
  ObjectiveKind kind_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd gram_;
  std::optional<ModelVector> minimizer_;
};

// Analytic constants of a federation, each tagged with how it was obtained.
struct ProblemConstants {
  double lipschitz = 0.0;                                   // L
  std::string lipschitz_method;
  double gradient_bound = std::numeric_limits<double>::infinity();  // G
  double sigma_l = 0.0;
  double sigma_g = 0.0;
  std::string sigma_g_method;
};

// A federation of N client objectives. The global objective is the average
// f(x) = (1/N) sum_i f_i(x).
struct ProblemInstance {
  std::vector<std::shared_ptr<const ClientObjective>> clients;
  ProblemConstants constants;
  std::optional<double> f_star;
  std::optional<ModelVector> global_optimum;
  // Suggested starting point when the run config does not give one.
  std::optional<ModelVector> initial_point;

  int num_clients() const { return static_cast<int>(clients.size()); }
  int dimension() const;
  const ClientObjective& client(int i) const { return *clients[i]; }

  double GlobalLoss(const ModelVector& x) const;
  ModelVector GlobalGradient(const ModelVector& x) const;
  // sum_i grad f_i(x), the convention used for the unnormalized ensembles.
  ModelVector SumGradient(const ModelVector& x) const;
};

// Clients 1/2 (x - b_i)^2 in one dimension.
absl::StatusOr<ProblemInstance> BuildQuadraticEnsemble(
    std::span<const double> b_values);

// Clients 1/2 ||A_i x - b_i||^2. L is the largest eigenvalue of A_i^T A_i over
// clients; sigma_g is exact when all A_i^T A_i agree and otherwise the maximum
// over the vertices of a box around the optimum (exact on that box because the
// gradient gap is affine in x).
absl::StatusOr<ProblemInstance> BuildLinearRegressionEnsemble(
    std::span<const Eigen::MatrixXd> a_list,
    std::span<const Eigen::VectorXd> b_list);

// Scalar clients 1/2 (a_i x - b_i)^2.
absl::StatusOr<ProblemInstance> BuildScalarRegressionEnsemble(
    std::span<const double> slopes, std::span<const double> offsets);

// Recomputes sigma_g for a quadratic ensemble as the maximum gradient gap over
// the box [center - radius, center + radius]^d.
absl::Status RecomputeSigmaGOverBox(ProblemInstance& problem,
                                    const ModelVector& center, double radius);

struct MlpEnsembleOptions {
  int hidden_width = 8;
  int num_clients = 10;
  int samples_per_client = 50;
  // 0 gives identical label distributions, 1 gives single-class clients.
  double heterogeneity = 0.0;
  uint64_t seed = 0;
  int num_classes = 4;
  int input_dim = 2;
  // Distance scale between Gaussian class centers.
  double class_separation = 2.0;

  friend bool operator==(const MlpEnsembleOptions&, const MlpEnsembleOptions&) = default;
};

// One-hidden-layer softplus classifiers trained with softmax cross-entropy on
// per-client Gaussian-mixture data.
absl::StatusOr<ProblemInstance> BuildMlpSyntheticEnsemble(
    const MlpEnsembleOptions& options);

// Class labels held by an MLP client; empty for other kinds.
std::vector<int> ClientLabels(const ClientObjective& objective);

enum class NoiseMode { kDeterministic, kGaussian, kMinibatch };

std::string NoiseModeName(NoiseMode mode);

struct OracleOptions {
  NoiseMode mode = NoiseMode::kDeterministic;
  // Total second moment of the additive noise in kGaussian mode.
  double sigma_l = 0.0;
  int batch_size = 1;

  friend bool operator==(const OracleOptions&, const OracleOptions&) = default;
};

// Stochastic gradient oracle for one client. Owns its random stream; one
// oracle per (client, worker). Gradients exceeding the declared bound G are
// returned unchanged and counted as violations.
class GradientOracle {
 public:
  GradientOracle(const ClientObjective& objective, OracleOptions options,
                 RngStream stream,
                 double gradient_bound = std::numeric_limits<double>::infinity());

  ModelVector Sample(const ModelVector& x);

  bool deterministic() const;
  int64_t violations() const { return violations_; }
  const ClientObjective& objective() const { return *objective_; }

 private:
  const ClientObjective* objective_;
  OracleOptions options_;
  RngStream stream_;
  double gradient_bound_;
  int64_t violations_ = 0;
};

}  // namespace fedclip

#endif  // FEDCLIP_PROBLEMS_H_
