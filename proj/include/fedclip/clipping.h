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

#ifndef FEDCLIP_CLIPPING_H_
#define FEDCLIP_CLIPPING_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedclip/problems.h"

namespace fedclip {

enum class ClipMode { kNone, kModel, kDifference };

std::string ClipModeName(ClipMode mode);

// How client transmissions are clipped. A policy is resolved once it carries
// a concrete threshold; `auto_rho` asks for c = rho * (mean update norm of an
// unclipped pilot run). An infinite threshold is allowed and never clips.
struct ClippingPolicy {
  ClipMode mode = ClipMode::kNone;
  std::optional<double> threshold;
  std::optional<double> auto_rho;

  friend bool operator==(const ClippingPolicy&, const ClippingPolicy&) = default;

  bool resolved() const { return mode == ClipMode::kNone || threshold.has_value(); }
  // Threshold in effect; +inf for mode kNone.
  double effective_threshold() const;
};

absl::Status ValidatePolicy(const ClippingPolicy& policy);

// c / max(c, ||v||), with ties and the zero vector giving exactly 1.
// Requires c > 0.
double ClipFactor(const ModelVector& v, double c);

// v * min(1, c / ||v||). Returns v unchanged when ||v|| <= c.
ModelVector Clip(const ModelVector& v, double c);

struct PolicyOutput {
  // The clipped model (kModel) or clipped difference (kDifference, kNone).
  ModelVector transmitted;
  double factor = 1.0;
};

// Client-side transform of one local phase. Fails on an unresolved threshold
// or mismatched dimensions.
absl::StatusOr<PolicyOutput> ApplyPolicy(const ClippingPolicy& policy,
                                         const ModelVector& x_local_final,
                                         const ModelVector& x_round_start);

// rho * mean(recorded_norms).
absl::StatusOr<double> ResolveAutoThreshold(std::span<const double> recorded_norms,
                                            double rho);

// Returns a copy of `policy` with its threshold set to `threshold`.
ClippingPolicy WithThreshold(ClippingPolicy policy, double threshold);

// Per-round clipping factors over all N clients.
struct ClipFactors {
  std::vector<double> alpha;        // realized, from the sampled gradient sums
  std::vector<double> alpha_tilde;  // from the expected gradient sums
  double alpha_bar = 1.0;           // mean of alpha_tilde over all clients
};

// alpha_i = c / max(c, eta_l * ||grad_sum_i||).
double RealizedClipFactor(const ModelVector& grad_sum, double eta_l, double c);

// Averages replayed gradient sums before taking the norm. A single entry is
// treated as the exact expectation.
ModelVector MeanGradientSum(std::span<const ModelVector> replays);

ClipFactors ComputeClipFactors(std::span<const ModelVector> grad_sums,
                               std::span<const ModelVector> expected_grad_sums,
                               double eta_l, double c);

}  // namespace fedclip

#endif  // FEDCLIP_CLIPPING_H_
