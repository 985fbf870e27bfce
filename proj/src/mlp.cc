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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedclip/problems.h"

namespace fedclip {
namespace {

constexpr int kLipschitzPairs = 200;
constexpr int kSigmaGPoints = 32;
constexpr double kProbeSpread = 0.5;

double Softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Parameter layout inside the flat vector: W1 (H x D, row-major), b1 (H),
// W2 (C x H, row-major), b2 (C).
struct MlpShape {
  int input_dim;
  int hidden;
  int classes;

  int size() const { return hidden * input_dim + hidden + classes * hidden + classes; }
  int w1() const { return 0; }
  int b1() const { return hidden * input_dim; }
  int w2() const { return b1() + hidden; }
  int b2() const { return w2() + classes * hidden; }
};

class MlpObjective final : public ClientObjective {
 public:
  MlpObjective(MlpShape shape, Eigen::MatrixXd features, std::vector<int> labels)
      : shape_(shape), features_(std::move(features)), labels_(std::move(labels)) {}

  ObjectiveKind kind() const override { return ObjectiveKind::kMlpSynthetic; }
  int dimension() const override { return shape_.size(); }
  int num_samples() const override { return static_cast<int>(labels_.size()); }

  double Loss(const ModelVector& x) const override {
    double total = 0.0;
    for (int n = 0; n < num_samples(); ++n) total += Accumulate(x, n, nullptr);
    return total / num_samples();
  }

  ModelVector Gradient(const ModelVector& x) const override {
    ModelVector grad = ModelVector::Zero(dimension());
    for (int n = 0; n < num_samples(); ++n) Accumulate(x, n, &grad);
    return grad / num_samples();
  }

  ModelVector MinibatchGradient(const ModelVector& x,
                                std::span<const int> samples) const override {
    ModelVector grad = ModelVector::Zero(dimension());
    for (int n : samples) Accumulate(x, n, &grad);
    return grad / static_cast<double>(samples.size());
  }

  const std::vector<int>& labels() const { return labels_; }

 private:
  // Cross-entropy of sample n; adds its gradient into `grad` when given.
  double Accumulate(const ModelVector& x, int n, ModelVector* grad) const {
    const int d = shape_.input_dim, h = shape_.hidden, c = shape_.classes;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        w1(x.data() + shape_.w1(), h, d);
    Eigen::Map<const Eigen::VectorXd> b1(x.data() + shape_.b1(), h);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        w2(x.data() + shape_.w2(), c, h);
    Eigen::Map<const Eigen::VectorXd> b2(x.data() + shape_.b2(), c);

    const Eigen::VectorXd input = features_.row(n).transpose();
    const Eigen::VectorXd pre = w1 * input + b1;
    const Eigen::VectorXd hidden = pre.unaryExpr(&Softplus);
    Eigen::VectorXd logits = w2 * hidden + b2;
    const double shift = logits.maxCoeff();
    Eigen::VectorXd probs = (logits.array() - shift).exp();
    const double partition = probs.sum();
    probs /= partition;
    const int label = labels_[n];
    const double loss = -(logits(label) - shift - std::log(partition));
    if (grad == nullptr) return loss;

    Eigen::VectorXd dlogits = probs;
    dlogits(label) -= 1.0;
    Eigen::VectorXd dpre = (w2.transpose() * dlogits).cwiseProduct(pre.unaryExpr(&Sigmoid));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        gw1(grad->data() + shape_.w1(), h, d);
    Eigen::Map<Eigen::VectorXd> gb1(grad->data() + shape_.b1(), h);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        gw2(grad->data() + shape_.w2(), c, h);
    Eigen::Map<Eigen::VectorXd> gb2(grad->data() + shape_.b2(), c);
    gw1 += dpre * input.transpose();
    gb1 += dpre;
    gw2 += dlogits * hidden.transpose();
    gb2 += dlogits;
    return loss;
  }

  MlpShape shape_;
  Eigen::MatrixXd features_;
  std::vector<int> labels_;
};

// Splits `total` samples across classes in proportion to `weights` using the
// largest-remainder rule, so counts always sum to `total`.
std::vector<int> AllocateCounts(int total, const std::vector<double>& weights) {
  const int c = static_cast<int>(weights.size());
  std::vector<int> counts(c);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int k = 0; k < c; ++k) {
    const double exact = total * weights[k];
    counts[k] = static_cast<int>(std::floor(exact + 1e-9));
    assigned += counts[k];
    remainders.emplace_back(-(exact - counts[k]), k);
  }
  std::sort(remainders.begin(), remainders.end());
  for (int r = 0; assigned < total; ++r, ++assigned) ++counts[remainders[r % c].second];
  return counts;
}

}  // namespace

std::vector<int> ClientLabels(const ClientObjective& objective) {
  if (const auto* mlp = dynamic_cast<const MlpObjective*>(&objective)) {
    return mlp->labels();
  }
  return {};
}

absl::StatusOr<ProblemInstance> BuildMlpSyntheticEnsemble(
    const MlpEnsembleOptions& options) {
  if (options.hidden_width < 1) {
    return absl::InvalidArgumentError("hidden_width must be >= 1");
  }
  if (options.num_clients < 1 || options.samples_per_client < 1 ||
      options.num_classes < 2 || options.input_dim < 1) {
    return absl::InvalidArgumentError(
        "MLP ensemble needs >= 1 client, >= 1 sample, >= 2 classes, input_dim >= 1");
  }
  if (!(options.heterogeneity >= 0.0 && options.heterogeneity <= 1.0)) {
    return absl::InvalidArgumentError("heterogeneity must lie in [0, 1]");
  }
  const MlpShape shape{options.input_dim, options.hidden_width, options.num_classes};
  const int c = options.num_classes;

  RngStream center_stream(options.seed, {StreamDomain::kProblemData, 0, 0, 0});
  Eigen::MatrixXd centers(c, options.input_dim);
  for (int k = 0; k < c; ++k) {
    for (int j = 0; j < options.input_dim; ++j) {
      centers(k, j) = options.class_separation * center_stream.Normal();
    }
  }

  ProblemInstance problem;
  for (int i = 0; i < options.num_clients; ++i) {
    std::vector<double> weights(c, (1.0 - options.heterogeneity) / c);
    weights[i % c] += options.heterogeneity;
    const std::vector<int> counts = AllocateCounts(options.samples_per_client, weights);

    RngStream data_stream(options.seed,
                          {StreamDomain::kProblemData, 0, static_cast<uint32_t>(i + 1), 0});
    Eigen::MatrixXd features(options.samples_per_client, options.input_dim);
    std::vector<int> labels;
    labels.reserve(options.samples_per_client);
    for (int k = 0; k < c; ++k) {
      for (int s = 0; s < counts[k]; ++s) {
        const int row = static_cast<int>(labels.size());
        for (int j = 0; j < options.input_dim; ++j) {
          features(row, j) = centers(k, j) + data_stream.Normal();
        }
        labels.push_back(k);
      }
    }
    problem.clients.push_back(
        std::make_shared<MlpObjective>(shape, std::move(features), std::move(labels)));
  }

  RngStream init_stream(options.seed, {StreamDomain::kInitialPoint, 0, 0, 0});
  ModelVector init = ModelVector::Zero(shape.size());
  for (int k = shape.w1(); k < shape.b1(); ++k) {
    init(k) = init_stream.Normal() / std::sqrt(static_cast<double>(options.input_dim));
  }
  for (int k = shape.w2(); k < shape.b2(); ++k) {
    init(k) = init_stream.Normal() / std::sqrt(static_cast<double>(options.hidden_width));
  }
  problem.initial_point = init;
  // Cross-entropy is nonnegative, so 0 is a valid lower bound f*.
  problem.f_star = 0.0;

  RngStream probe_stream(options.seed, {StreamDomain::kProblemData, 1, 0, 0});
  auto perturbed = [&](const ModelVector& base, double spread) {
    ModelVector p = base;
    for (Eigen::Index k = 0; k < p.size(); ++k) p(k) += spread * probe_stream.Normal();
    return p;
  };
  double lipschitz = 0.0;
  for (int pair = 0; pair < kLipschitzPairs; ++pair) {
    const ModelVector x = perturbed(init, kProbeSpread);
    const ModelVector y = perturbed(x, pair % 2 == 0 ? 1e-3 : kProbeSpread);
    const double dist = (x - y).norm();
    for (const auto& client : problem.clients) {
      lipschitz = std::max(lipschitz, (client->Gradient(x) - client->Gradient(y)).norm() / dist);
    }
  }
  problem.constants.lipschitz = lipschitz;
  problem.constants.lipschitz_method = "sampled-pairs";

  double sigma_g = 0.0;
  for (int p = 0; p < kSigmaGPoints; ++p) {
    const ModelVector x = perturbed(init, kProbeSpread);
    const ModelVector mean = problem.GlobalGradient(x);
    for (const auto& client : problem.clients) {
      sigma_g = std::max(sigma_g, (client->Gradient(x) - mean).norm());
    }
  }
  problem.constants.sigma_g = sigma_g;
  problem.constants.sigma_g_method = absl::StrCat("sampled-points(n=", kSigmaGPoints, ")");
  return problem;
}

}  // namespace fedclip
