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

// Post-processing of experiment traces: clipping-bias decomposition, the
// DP-FedAvg convergence bound and its private variant, the client-drift
// check, and update magnitude/angle distributions.
//
// The bound being evaluated is
//
//   (1/T) sum_t E[abar^t ||grad f(x^t)||^2]
//     <= 4 (f(x^0) - f*) / (eta_g eta_l Q T)
//      + (25/2) eta_l^2 L Q (sigma_l^2 + 6 Q sigma_g^2) gamma_1(T)
//      + 6 eta_g eta_l L sigma_l^2 gamma_2(T) / P
//      + 2 eta_g L d sigma^2 / (eta_l P Q)
//      + 4 G^2 (1/T) sum_t (1/N) sum_i (|a_i - at_i| + |at_i - abar|)
//      + 6 eta_g eta_l L Q G^2 (1/T) sum_t (1/P) sum_i (|a_i - at_i|^2 + |at_i - abar|^2)
//
// valid when eta_g eta_l <= min{P / (48 Q), P / (6 Q L (P - 1))} and
// eta_l <= 1 / (sqrt(60) Q L).

#ifndef FEDCLIP_DIAGNOSTICS_H_
#define FEDCLIP_DIAGNOSTICS_H_

#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedclip/engine.h"
#include "fedclip/problems.h"

namespace fedclip {

// Angle between two vectors in degrees; empty when either is zero.
std::optional<double> AngleDegrees(const ModelVector& a, const ModelVector& b);

struct RoundBias {
  int t = 0;
  double mean_abs_alpha_gap = 0.0;  // (1/N) sum_i |alpha_i - alpha_tilde_i|
  double mean_abs_cross_gap = 0.0;  // (1/N) sum_i |alpha_tilde_i - alpha_bar|
  double mean_sq_alpha_gap = 0.0;
  double mean_sq_cross_gap = 0.0;
  double alpha_bar = 1.0;
};

struct BiasReport {
  std::vector<RoundBias> rounds;
  double gamma1 = 1.0;  // (1/T) sum_t alpha_bar^t
  double gamma2 = 1.0;  // (1/T) sum_t (alpha_bar^t)^2
  // Averages over rounds of the per-round terms above.
  double avg_abs_alpha_gap = 0.0;
  double avg_abs_cross_gap = 0.0;
  double avg_sq_alpha_gap = 0.0;
  double avg_sq_cross_gap = 0.0;
  // False when the oracle saw gradients above the declared G.
  bool certified = true;
};

// Needs a trace recorded with probes.all_clients. FAILED_PRECONDITION when
// gradient sums are missing.
absl::StatusOr<BiasReport> ClipBiasTerms(const ExperimentTrace& trace,
                                         const ProblemInstance& problem,
                                         const RunConfig& config);

struct BoundInputs {
  double initial_gap = 0.0;  // f(x^0) - f*
  double lipschitz = 1.0;
  double sigma_l = 0.0;
  double sigma_g = 0.0;
  double gradient_bound = 0.0;  // G
  int dimension = 1;
  double eta_l = 0.0;
  double eta_g = 0.0;
  double local_steps = 1.0;  // Q; +inf for run-to-convergence
  int rounds = 1;
  int clients_per_round = 1;
  int num_clients = 1;
  double sigma2 = 0.0;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double avg_abs_alpha_gap = 0.0;
  double avg_abs_cross_gap = 0.0;
  double avg_sq_alpha_gap = 0.0;
  double avg_sq_cross_gap = 0.0;
  bool gradient_bound_violated = false;
};

struct StepsizeRegime {
  bool product_vs_sampling = false;    // eta_g eta_l <= P / (48 Q)
  bool product_vs_smoothness = false;  // eta_g eta_l <= P / (6 Q L (P - 1))
  bool local_step = false;             // eta_l <= 1 / (sqrt(60) Q L)
  bool all() const { return product_vs_sampling && product_vs_smoothness && local_step; }
};

StepsizeRegime CheckStepsizeRegime(double eta_g, double eta_l, double local_steps,
                                   double lipschitz, int clients_per_round);

struct BoundBreakdown {
  double initial_gap = 0.0;
  double client_drift = 0.0;
  double sampling_variance = 0.0;
  double privacy_noise = 0.0;
  double clip_bias_first_order = 0.0;
  double clip_bias_second_order = 0.0;
  double total = 0.0;
  StepsizeRegime regime;
  // Regime satisfied and no G violations.
  bool certified = false;
};

// INVALID_ARGUMENT on nonpositive eta_g, eta_l, Q, T or P.
absl::StatusOr<BoundBreakdown> ConvergenceBound(const BoundInputs& inputs);

// Collects bound inputs from a finished run. `bias` may be empty only when
// clipping never activates (mode none or infinite c).
absl::StatusOr<BoundInputs> MakeBoundInputs(const ExperimentTrace& trace,
                                            const ProblemInstance& problem,
                                            const RunConfig& config,
                                            const std::optional<BiasReport>& bias);

// sigma_l as seen by the bound: the configured Gaussian level, 0 for exact
// gradients, or a Monte Carlo estimate at the trace iterates for minibatches.
double EffectiveSigmaL(const ExperimentTrace& trace, const ProblemInstance& problem,
                       const RunConfig& config);

// (1/T) sum_t alpha_bar^t ||grad f(x^t)||^2 over the recorded rounds.
absl::StatusOr<double> MeasuredStationarity(const ExperimentTrace& trace);

struct PrivateBoundInputs {
  double eta_g = 1.0;
  double eta_l = 0.01;
  double local_steps = 1.0;
  int rounds = 1;
  int clients_per_round = 1;
  int dimension = 1;
  int num_clients = 1;
  double epsilon = 1.0;
  double delta = 1e-5;
  // Per-step threshold: c = eta_l Q c_prime.
  double c_prime = 1.0;
  double gradient_bound = 1.0;
  double lipschitz = 1.0;
  double initial_gap = 1.0;
  double sigma_l = 0.0;
  double sigma_g = 0.0;
  double v = 2.0;
};

// Convergence bound under privacy with clipping inactive (c' >= G): the
// standard terms at gamma_1 = gamma_2 = 1 plus the privacy term with sigma^2
// substituted, 2 v eta_g eta_l Q L d c'^2 T ln(1/delta) / (N^2 eps^2).
struct PrivateBound {
  double initial_gap = 0.0;
  double client_drift = 0.0;
  double sampling_variance = 0.0;
  double privacy_noise = 0.0;
  double total = 0.0;
  double sigma2 = 0.0;
  // sqrt(d) / (N epsilon), the best achievable rate up to logs.
  double reference_rate = 0.0;
  bool clipping_inactive = false;
};

PrivateBound PrivateConvergenceBound(const PrivateBoundInputs& inputs);

struct DriftEntry {
  int t = 0;
  int q = 0;
  double lhs = 0.0;  // (1/N) sum_i ||x^t - x_i^{t,q}||^2
  double lhs_stderr = 0.0;
  double rhs = 0.0;  // 5 Q eta_l^2 (sigma_l^2 + 6 Q sigma_g^2) + 30 Q^2 eta_l^2 ||grad f(x^t)||^2
  bool pass = false;
};

struct DriftReport {
  std::vector<DriftEntry> entries;
  bool all_pass = true;
  bool monte_carlo = false;
  // Entries pass when lhs - z * stderr <= rhs.
  double z = 3.0;
};

// Needs probes.all_clients and probes.record_drift.
absl::StatusOr<DriftReport> DriftCheck(const ExperimentTrace& trace,
                                       const ProblemInstance& problem,
                                       const RunConfig& config);

struct UpdatePoint {
  int client = 0;
  double magnitude = 0.0;
  std::optional<double> angle_deg;
};

struct RoundDistribution {
  int t = 0;
  std::vector<UpdatePoint> points;
  double mean_magnitude = 0.0;
  double variance_magnitude = 0.0;  // population variance over sampled slots
  double global_magnitude = 0.0;    // ||mean transmitted update||
  std::optional<double> global_angle_deg;
};

std::vector<RoundDistribution> UpdateDistribution(const ExperimentTrace& trace);

}  // namespace fedclip

#endif  // FEDCLIP_DIAGNOSTICS_H_
