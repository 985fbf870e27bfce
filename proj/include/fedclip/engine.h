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

// FedAvg round engine. One parameterized loop covers plain FedAvg (no
// clipping, no noise), clipping-enabled FedAvg (difference clipping) and
// DP-FedAvg (difference clipping plus per-client Gaussian noise):
//
//   for each sampled client i:   x_i <- Q local SGD steps from x^t
//                                d_i <- clip(x_i - x^t, c) + z_i
//   x^{t+1} = x^t + eta_g * mean_i d_i
//
// Model clipping transmits clip(x_i, c) + z_i instead and the server forms
// the difference against x^t.

#ifndef FEDCLIP_ENGINE_H_
#define FEDCLIP_ENGINE_H_

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "fedclip/clipping.h"
#include "fedclip/privacy.h"
#include "fedclip/problems.h"
#include "fedclip/rng.h"

namespace fedclip {

// Local-step count meaning "run local GD until the iterate stops moving".
inline constexpr int64_t kUntilConverged = -1;
inline constexpr double kDivergenceNorm = 1e12;
inline constexpr double kLocalConvergenceStep = 1e-12;
inline constexpr int64_t kMaxLocalSteps = 1'000'000;

enum class Participation {
  // P i.i.d. uniform draws from the N clients; duplicates allowed.
  kWithReplacement,
  // Every client exactly once per round; requires P == N.
  kFull,
};

// Extra per-round work evaluated for diagnostics only; it never changes the
// trajectory.
struct ProbeOptions {
  // Run every client's local phase each round (not just the sampled ones).
  bool all_clients = false;
  // Replays averaged to estimate the expected gradient sum when the oracle is
  // stochastic.
  int replays = 32;
  // Record (1/N) sum_i ||x^t - x_i^{t,q}||^2 for every local step q.
  bool record_drift = false;

  friend bool operator==(const ProbeOptions&, const ProbeOptions&) = default;
};

struct RunConfig {
  int rounds = 1;                  // T
  int64_t local_steps = 1;         // Q, or kUntilConverged
  int clients_per_round = 1;       // P
  double eta_l = 0.1;
  double eta_g = 1.0;
  ClippingPolicy policy;
  PrivacyConfig privacy;
  uint64_t seed = 0;
  std::optional<ModelVector> x0;
  Participation participation = Participation::kWithReplacement;
  OracleOptions oracle;
  ProbeOptions probes;
  int threads = 1;
};

absl::Status ValidateRunConfig(const RunConfig& config, const ProblemInstance& problem);

struct LocalUpdateResult {
  ModelVector x_final;
  // Sum of the sampled gradients; x_final - x_start = -eta_l * grad_sum.
  ModelVector grad_sum;
  int64_t steps = 0;
  // ||x_start - x^q||^2 for q = 0..Q-1 when requested.
  std::vector<double> drift_sq;
};

// Local SGD x^{q+1} = x^q - eta_l g^q. Fails with OUT_OF_RANGE when an iterate
// norm exceeds kDivergenceNorm.
absl::StatusOr<LocalUpdateResult> LocalUpdate(GradientOracle& oracle,
                                              const ModelVector& x_start,
                                              int64_t local_steps, double eta_l,
                                              bool record_drift = false);

// P i.i.d. uniform client ids in [0, N).
std::vector<int> SampleClients(int num_clients, int clients_per_round, RngStream& stream);

struct ClientReport {
  int client = 0;
  int duplicate = 0;        // how many earlier slots this round picked the same client
  double delta_norm = 0.0;  // ||x_i^{t,Q} - x^t|| before clipping
  double clip_factor = 1.0;
  // Angle in degrees to the previous round's mean transmitted update; empty in
  // round 0 or when either vector is zero.
  std::optional<double> angle_deg;
};

struct ClientProbe {
  std::vector<ModelVector> grad_sum;           // realized, one per client
  std::vector<ModelVector> expected_grad_sum;  // exact or replay average
  bool exact_expectation = true;
  std::vector<double> drift_mean;    // per local step q
  std::vector<double> drift_stderr;  // zero for deterministic oracles
};

struct RoundRecord {
  int t = 0;
  ModelVector x;  // x^t, the round-start model
  std::vector<int> sampled;
  std::vector<ClientReport> clients;  // one per sampled slot, in slot order
  ModelVector mean_update;            // mean transmitted difference, before eta_g
  double global_loss = 0.0;           // f(x^t)
  double global_grad_norm = 0.0;      // ||grad f(x^t)||
  std::optional<double> alpha_bar;    // needs probes
  std::optional<ClientProbe> probe;
  int64_t oracle_violations = 0;
};

struct EngineState {
  int t = 0;
  ModelVector x;
  std::optional<ModelVector> previous_update;
};

EngineState InitialState(const ProblemInstance& problem, const RunConfig& config);

// One round. `config.policy` must be resolved and `noise` calibrated.
absl::StatusOr<std::pair<EngineState, RoundRecord>> RunRound(const ProblemInstance& problem,
                                                             const RunConfig& config,
                                                             const NoiseSpec& noise,
                                                             const EngineState& state);

struct ExperimentTrace {
  std::vector<RoundRecord> rounds;
  ClippingPolicy policy;  // resolved
  // Mean pre-clip update norm of the unclipped pilot run ("auto" thresholds).
  std::optional<double> pilot_mean_norm;
  NoiseSpec noise;
  ModelVector final_x;
  int64_t oracle_violations = 0;
};

// Runs T rounds. An "auto" threshold triggers a pilot run with clipping and
// noise disabled; its mean update norm fixes c and the main run restarts
// from x^0.
absl::StatusOr<ExperimentTrace> RunExperiment(const ProblemInstance& problem,
                                              const RunConfig& config);

}  // namespace fedclip

#endif  // FEDCLIP_ENGINE_H_
