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

#include "fedclip/engine.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedclip/diagnostics.h"
#include "parallel.h"

namespace fedclip {
namespace {

bool PositiveFinite(double v) { return v > 0.0 && std::isfinite(v); }

GradientOracle MakeOracle(const ProblemInstance& problem, const RunConfig& config,
                          int client, StreamKey key) {
  return GradientOracle(problem.client(client), config.oracle, RngStream(config.seed, key),
                        problem.constants.gradient_bound);
}

absl::Status Diverged(int round, const absl::Status& cause) {
  return absl::OutOfRangeError(absl::StrCat("diverged at round ", round, ": ", cause.message()));
}

// Evaluates every client's local phase from x^t for diagnostics.
absl::StatusOr<ClientProbe> ProbeClients(const ProblemInstance& problem, const RunConfig& config,
                                         const EngineState& state, int64_t& violations) {
  const int n = problem.num_clients();
  const bool drift = config.probes.record_drift;
  const uint32_t round = static_cast<uint32_t>(state.t);
  ClientProbe probe;
  probe.grad_sum.resize(n);
  probe.expected_grad_sum.resize(n);

  std::vector<absl::Status> status(n);
  std::vector<int64_t> client_violations(n, 0);
  std::vector<std::vector<double>> realized_drift(n);
  // replay_drift[i][r][q]
  std::vector<std::vector<std::vector<double>>> replay_drift(n);
  bool exact = true;

  internal::ParallelFor(n, config.threads, [&](int i) {
    const uint32_t id = static_cast<uint32_t>(i);
    GradientOracle oracle = MakeOracle(problem, config, i, {StreamDomain::kLocalSgd, round, id, 0});
    auto realized = LocalUpdate(oracle, state.x, config.local_steps, config.eta_l, drift);
    client_violations[i] += oracle.violations();
    if (!realized.ok()) {
      status[i] = realized.status();
      return;
    }
    probe.grad_sum[i] = realized->grad_sum;
    realized_drift[i] = std::move(realized->drift_sq);
    if (oracle.deterministic()) {
      probe.expected_grad_sum[i] = probe.grad_sum[i];
      return;
    }
    std::vector<ModelVector> sums;
    for (int r = 0; r < config.probes.replays; ++r) {
      GradientOracle replay_oracle = MakeOracle(
          problem, config, i, {StreamDomain::kReplay, round, id, static_cast<uint32_t>(r)});
      auto replay = LocalUpdate(replay_oracle, state.x, config.local_steps, config.eta_l, drift);
      if (!replay.ok()) {
        status[i] = replay.status();
        return;
      }
      sums.push_back(std::move(replay->grad_sum));
      replay_drift[i].push_back(std::move(replay->drift_sq));
    }
    probe.expected_grad_sum[i] = MeanGradientSum(sums);
  });

  for (int i = 0; i < n; ++i) {
    if (!status[i].ok()) return status[i];
    violations += client_violations[i];
    if (!replay_drift[i].empty()) exact = false;
  }
  probe.exact_expectation = exact;

  if (drift) {
    const size_t steps = realized_drift.front().size();
    probe.drift_mean.assign(steps, 0.0);
    probe.drift_stderr.assign(steps, 0.0);
    if (exact) {
      for (int i = 0; i < n; ++i) {
        for (size_t q = 0; q < steps; ++q) probe.drift_mean[q] += realized_drift[i][q] / n;
      }
    } else {
      const int replays = config.probes.replays;
      for (size_t q = 0; q < steps; ++q) {
        std::vector<double> per_replay(replays, 0.0);
        for (int r = 0; r < replays; ++r) {
          for (int i = 0; i < n; ++i) per_replay[r] += replay_drift[i][r][q] / n;
        }
        const double mean = std::accumulate(per_replay.begin(), per_replay.end(), 0.0) / replays;
        double var = 0.0;
        for (double v : per_replay) var += (v - mean) * (v - mean);
        var = replays > 1 ? var / (replays - 1) : 0.0;
        probe.drift_mean[q] = mean;
        probe.drift_stderr[q] = std::sqrt(var / replays);
      }
    }
  }
  return probe;
}

}  // namespace

absl::Status ValidateRunConfig(const RunConfig& config, const ProblemInstance& problem) {
  const int n = problem.num_clients();
  if (n < 1 || problem.dimension() < 1) {
    return absl::InvalidArgumentError("problem needs N >= 1 clients and dimension >= 1");
  }
  if (config.rounds < 1) return absl::InvalidArgumentError("rounds must be >= 1");
  if (config.local_steps < 1 && config.local_steps != kUntilConverged) {
    return absl::InvalidArgumentError("local_steps must be >= 1 or 'inf'");
  }
  if (config.clients_per_round < 1 || config.clients_per_round > n) {
    return absl::InvalidArgumentError(
        absl::StrCat("clients_per_round must lie in [1, ", n, "], got ", config.clients_per_round));
  }
  if (config.participation == Participation::kFull && config.clients_per_round != n) {
    return absl::InvalidArgumentError("full participation requires clients_per_round == N");
  }
  if (!PositiveFinite(config.eta_l) || !PositiveFinite(config.eta_g)) {
    return absl::InvalidArgumentError("step sizes eta_l and eta_g must be positive");
  }
  if (config.x0.has_value() && config.x0->size() != problem.dimension()) {
    return absl::InvalidArgumentError(absl::StrCat("x0 has dimension ", config.x0->size(),
                                                   ", problem has ", problem.dimension()));
  }
  if (absl::Status s = ValidatePolicy(config.policy); !s.ok()) return s;
  if (config.privacy.enabled) {
    if (absl::Status s = ValidatePrivacy(config.privacy); !s.ok()) return s;
    if (config.policy.mode == ClipMode::kNone ||
        !std::isfinite(config.policy.threshold.value_or(0.0))) {
      return absl::InvalidArgumentError("privacy needs clipping with a finite threshold");
    }
  }
  if (config.oracle.mode == NoiseMode::kGaussian && !(config.oracle.sigma_l >= 0.0)) {
    return absl::InvalidArgumentError("oracle sigma_l must be nonnegative");
  }
  if (config.oracle.mode == NoiseMode::kMinibatch && config.oracle.batch_size < 1) {
    return absl::InvalidArgumentError("minibatch size must be >= 1");
  }
  if (config.threads < 1) return absl::InvalidArgumentError("threads must be >= 1");
  if (config.probes.replays < 1) return absl::InvalidArgumentError("probe replays must be >= 1");
  if (config.probes.record_drift && config.local_steps == kUntilConverged) {
    return absl::InvalidArgumentError("drift recording needs a finite local step count");
  }
  return absl::OkStatus();
}

absl::StatusOr<LocalUpdateResult> LocalUpdate(GradientOracle& oracle, const ModelVector& x_start,
                                              int64_t local_steps, double eta_l,
                                              bool record_drift) {
  if (local_steps < 1 && local_steps != kUntilConverged) {
    return absl::InvalidArgumentError("local_steps must be >= 1 or kUntilConverged");
  }
  const bool until_converged = local_steps == kUntilConverged;
  const int64_t limit = until_converged ? kMaxLocalSteps : local_steps;
  LocalUpdateResult result;
  result.x_final = x_start;
  result.grad_sum = ModelVector::Zero(x_start.size());
  if (record_drift) result.drift_sq.reserve(static_cast<size_t>(limit));
  for (int64_t q = 0; q < limit; ++q) {
    if (record_drift) result.drift_sq.push_back((x_start - result.x_final).squaredNorm());
    const ModelVector g = oracle.Sample(result.x_final);
    result.grad_sum += g;
    result.x_final -= eta_l * g;
    result.steps = q + 1;
    if (!(result.x_final.norm() <= kDivergenceNorm)) {
      return absl::OutOfRangeError(
          absl::StrCat("local iterate norm exceeded ", kDivergenceNorm, " at step ", q + 1));
    }
    if (until_converged && eta_l * g.norm() <= kLocalConvergenceStep) break;
  }
  return result;
}

std::vector<int> SampleClients(int num_clients, int clients_per_round, RngStream& stream) {
  std::vector<int> ids(clients_per_round);
  for (int& id : ids) id = static_cast<int>(stream.UniformInt(num_clients));
  return ids;
}

EngineState InitialState(const ProblemInstance& problem, const RunConfig& config) {
  EngineState state;
  state.x = config.x0.value_or(
      problem.initial_point.value_or(ModelVector::Zero(problem.dimension())));
  return state;
}

absl::StatusOr<std::pair<EngineState, RoundRecord>> RunRound(const ProblemInstance& problem,
                                                             const RunConfig& config,
                                                             const NoiseSpec& noise,
                                                             const EngineState& state) {
  if (!config.policy.resolved()) {
    return absl::FailedPreconditionError("clipping threshold is unresolved");
  }
  const int n = problem.num_clients();
  const uint32_t round = static_cast<uint32_t>(state.t);

  RoundRecord record;
  record.t = state.t;
  record.x = state.x;
  record.global_loss = problem.GlobalLoss(state.x);
  record.global_grad_norm = problem.GlobalGradient(state.x).norm();

  if (config.participation == Participation::kFull) {
    record.sampled.resize(n);
    std::iota(record.sampled.begin(), record.sampled.end(), 0);
  } else {
    RngStream sampler(config.seed, {StreamDomain::kClientSampling, round, 0, 0});
    record.sampled = SampleClients(n, config.clients_per_round, sampler);
  }
  const int slots = static_cast<int>(record.sampled.size());
  std::vector<int> duplicate(slots, 0);
  for (int k = 0; k < slots; ++k) {
    duplicate[k] = static_cast<int>(
        std::count(record.sampled.begin(), record.sampled.begin() + k, record.sampled[k]));
  }

  std::vector<ModelVector> transmitted(slots);
  std::vector<ModelVector> raw_delta(slots);
  std::vector<double> factors(slots, 1.0);
  std::vector<int64_t> slot_violations(slots, 0);
  std::vector<absl::Status> status(slots);
  internal::ParallelFor(slots, config.threads, [&](int k) {
    const int client = record.sampled[k];
    const StreamKey key{StreamDomain::kLocalSgd, round, static_cast<uint32_t>(client),
                        static_cast<uint32_t>(duplicate[k])};
    GradientOracle oracle = MakeOracle(problem, config, client, key);
    auto local = LocalUpdate(oracle, state.x, config.local_steps, config.eta_l);
    slot_violations[k] = oracle.violations();
    if (!local.ok()) {
      status[k] = local.status();
      return;
    }
    raw_delta[k] = local->x_final - state.x;
    auto out = ApplyPolicy(config.policy, local->x_final, state.x);
    if (!out.ok()) {
      status[k] = out.status();
      return;
    }
    factors[k] = out->factor;
    transmitted[k] = std::move(out->transmitted);
    if (noise.sigma2 > 0.0) {
      RngStream noise_stream(config.seed, {StreamDomain::kPrivacyNoise, round,
                                           static_cast<uint32_t>(client),
                                           static_cast<uint32_t>(duplicate[k])});
      transmitted[k] += DrawNoise(noise, noise_stream);
    }
  });
  for (int k = 0; k < slots; ++k) {
    if (!status[k].ok()) {
      if (absl::IsOutOfRange(status[k])) return Diverged(state.t, status[k]);
      return status[k];
    }
    record.oracle_violations += slot_violations[k];
  }

  // Fixed reduction order: client id, then duplicate index.
  std::vector<int> order(slots);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::pair(record.sampled[a], duplicate[a]) < std::pair(record.sampled[b], duplicate[b]);
  });
  ModelVector sum = ModelVector::Zero(state.x.size());
  for (int k : order) sum += transmitted[k];
  ModelVector mean = sum / static_cast<double>(slots);
  if (config.policy.mode == ClipMode::kModel) mean -= state.x;
  record.mean_update = mean;

  record.clients.resize(slots);
  for (int k = 0; k < slots; ++k) {
    ClientReport& report = record.clients[k];
    report.client = record.sampled[k];
    report.duplicate = duplicate[k];
    report.delta_norm = raw_delta[k].norm();
    report.clip_factor = factors[k];
    if (state.previous_update.has_value()) {
      report.angle_deg = AngleDegrees(raw_delta[k], *state.previous_update);
    }
  }

  if (config.probes.all_clients) {
    int64_t probe_violations = 0;
    auto probe = ProbeClients(problem, config, state, probe_violations);
    if (!probe.ok()) {
      if (absl::IsOutOfRange(probe.status())) return Diverged(state.t, probe.status());
      return probe.status();
    }
    const ClipFactors clip = ComputeClipFactors(probe->grad_sum, probe->expected_grad_sum,
                                                config.eta_l, config.policy.effective_threshold());
    record.alpha_bar = clip.alpha_bar;
    record.probe = std::move(*probe);
    record.oracle_violations += probe_violations;
  }

  EngineState next;
  next.t = state.t + 1;
  next.x = state.x + config.eta_g * mean;
  next.previous_update = mean;
  if (!(next.x.norm() <= kDivergenceNorm)) {
    return Diverged(state.t, absl::OutOfRangeError(
                                 absl::StrCat("global iterate norm exceeded ", kDivergenceNorm)));
  }
  return std::make_pair(std::move(next), std::move(record));
}

absl::StatusOr<ExperimentTrace> RunExperiment(const ProblemInstance& problem,
                                              const RunConfig& config) {
  if (absl::Status s = ValidateRunConfig(config, problem); !s.ok()) return s;
  ExperimentTrace trace;
  trace.policy = config.policy;

  if (!config.policy.resolved()) {
    RunConfig pilot = config;
    pilot.policy = ClippingPolicy{};
    pilot.privacy.enabled = false;
    pilot.probes = ProbeOptions{};
    const NoiseSpec silent{0.0, problem.dimension(), true};
    EngineState state = InitialState(problem, pilot);
    std::vector<double> norms;
    for (int t = 0; t < pilot.rounds; ++t) {
      auto step = RunRound(problem, pilot, silent, state);
      if (!step.ok()) return step.status();
      for (const ClientReport& c : step->second.clients) norms.push_back(c.delta_norm);
      state = std::move(step->first);
    }
    trace.pilot_mean_norm =
        std::accumulate(norms.begin(), norms.end(), 0.0) / static_cast<double>(norms.size());
    auto c = ResolveAutoThreshold(norms, *config.policy.auto_rho);
    if (!c.ok()) return c.status();
    if (!(*c > 0.0)) {
      return absl::FailedPreconditionError("pilot run recorded zero update norms; cannot set c");
    }
    trace.policy = WithThreshold(config.policy, *c);
  }

  RunConfig main = config;
  main.policy = trace.policy;
  if (main.privacy.enabled) {
    auto spec = CalibrateNoise(main.privacy, main.policy.effective_threshold(),
                               main.clients_per_round, problem.num_clients(), main.rounds,
                               problem.dimension());
    if (!spec.ok()) return spec.status();
    trace.noise = *spec;
  } else {
    trace.noise = NoiseSpec{0.0, problem.dimension(), true};
  }

  EngineState state = InitialState(problem, main);
  trace.rounds.reserve(main.rounds);
  for (int t = 0; t < main.rounds; ++t) {
    auto step = RunRound(problem, main, trace.noise, state);
    if (!step.ok()) return step.status();
    trace.oracle_violations += step->second.oracle_violations;
    trace.rounds.push_back(std::move(step->second));
    state = std::move(step->first);
  }
  trace.final_x = state.x;
  return trace;
}

}  // namespace fedclip
