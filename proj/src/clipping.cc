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

#include "fedclip/clipping.h"

#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedclip {

std::string ClipModeName(ClipMode mode) {
  switch (mode) {
    case ClipMode::kNone:
      return "none";
    case ClipMode::kModel:
      return "model";
    case ClipMode::kDifference:
      return "difference";
  }
  return "unknown";
}

double ClippingPolicy::effective_threshold() const {
  if (mode == ClipMode::kNone || !threshold.has_value()) {
    return std::numeric_limits<double>::infinity();
  }
  return *threshold;
}

absl::Status ValidatePolicy(const ClippingPolicy& policy) {
  if (policy.mode == ClipMode::kNone) return absl::OkStatus();
  if (policy.threshold.has_value() && policy.auto_rho.has_value()) {
    return absl::InvalidArgumentError("give either a threshold or auto_rho, not both");
  }
  if (!policy.threshold.has_value() && !policy.auto_rho.has_value()) {
    return absl::InvalidArgumentError(
        absl::StrCat(ClipModeName(policy.mode), " clipping needs a threshold or auto_rho"));
  }
  if (policy.threshold.has_value() && !(*policy.threshold > 0.0)) {
    return absl::InvalidArgumentError("clipping threshold must be positive");
  }
  if (policy.auto_rho.has_value() &&
      !(*policy.auto_rho > 0.0 && std::isfinite(*policy.auto_rho))) {
    return absl::InvalidArgumentError("auto_rho must be positive and finite");
  }
  return absl::OkStatus();
}

double ClipFactor(const ModelVector& v, double c) {
  assert(c > 0.0);
  const double norm = v.norm();
  if (norm <= c) return 1.0;
  return c / norm;
}

ModelVector Clip(const ModelVector& v, double c) {
  double factor = ClipFactor(v, c);
  if (factor == 1.0) return v;
  // Rounding can leave the scaled norm an ulp above c; step the factor down so
  // that clipping the result again is a no-op.
  ModelVector out = v * factor;
  while (out.norm() > c) {
    factor = std::nextafter(factor, 0.0);
    out = v * factor;
  }
  return out;
}

absl::StatusOr<PolicyOutput> ApplyPolicy(const ClippingPolicy& policy,
                                         const ModelVector& x_local_final,
                                         const ModelVector& x_round_start) {
  if (x_local_final.size() != x_round_start.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("local model has dimension ", x_local_final.size(),
                     ", round start has ", x_round_start.size()));
  }
  if (!policy.resolved()) {
    return absl::FailedPreconditionError(
        "clipping threshold is still 'auto'; resolve it before applying the policy");
  }
  switch (policy.mode) {
    case ClipMode::kNone:
      return PolicyOutput{x_local_final - x_round_start, 1.0};
    case ClipMode::kModel: {
      const double factor = ClipFactor(x_local_final, *policy.threshold);
      return PolicyOutput{Clip(x_local_final, *policy.threshold), factor};
    }
    case ClipMode::kDifference: {
      const ModelVector delta = x_local_final - x_round_start;
      const double factor = ClipFactor(delta, *policy.threshold);
      return PolicyOutput{Clip(delta, *policy.threshold), factor};
    }
  }
  return absl::InternalError("unknown clip mode");
}

absl::StatusOr<double> ResolveAutoThreshold(std::span<const double> recorded_norms,
                                            double rho) {
  if (recorded_norms.empty()) {
    return absl::InvalidArgumentError("no recorded update norms to resolve 'auto' threshold");
  }
  if (!(rho > 0.0)) return absl::InvalidArgumentError("rho must be positive");
  const double mean = std::accumulate(recorded_norms.begin(), recorded_norms.end(), 0.0) /
                      recorded_norms.size();
  return rho * mean;
}

ClippingPolicy WithThreshold(ClippingPolicy policy, double threshold) {
  policy.threshold = threshold;
  policy.auto_rho.reset();
  return policy;
}

double RealizedClipFactor(const ModelVector& grad_sum, double eta_l, double c) {
  const double norm = eta_l * grad_sum.norm();
  if (norm <= c) return 1.0;
  return c / norm;
}

ModelVector MeanGradientSum(std::span<const ModelVector> replays) {
  assert(!replays.empty());
  ModelVector mean = replays.front();
  for (size_t r = 1; r < replays.size(); ++r) mean += replays[r];
  if (replays.size() > 1) mean /= static_cast<double>(replays.size());
  return mean;
}

ClipFactors ComputeClipFactors(std::span<const ModelVector> grad_sums,
                               std::span<const ModelVector> expected_grad_sums,
                               double eta_l, double c) {
  assert(grad_sums.size() == expected_grad_sums.size());
  ClipFactors factors;
  factors.alpha.reserve(grad_sums.size());
  factors.alpha_tilde.reserve(grad_sums.size());
  for (size_t i = 0; i < grad_sums.size(); ++i) {
    factors.alpha.push_back(RealizedClipFactor(grad_sums[i], eta_l, c));
    factors.alpha_tilde.push_back(RealizedClipFactor(expected_grad_sums[i], eta_l, c));
  }
  if (grad_sums.empty()) {
    factors.alpha_bar = 1.0;
    return factors;
  }
  // Averaging offsets from the first factor keeps the mean of equal factors
  // exact.
  const double first = factors.alpha_tilde.front();
  double offset = 0.0;
  for (double a : factors.alpha_tilde) offset += a - first;
  factors.alpha_bar = first + offset / grad_sums.size();
  return factors;
}

}  // namespace fedclip
