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

#include "fedclip/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedclip/clipping.h"
#include "fedclip/privacy.h"

namespace fedclip {
namespace {

constexpr int kSigmaLRounds = 10;
constexpr int kSigmaLDraws = 64;

// G^2 * bias with an unbounded G and zero bias contributing nothing.
double ScaledByG2(double g, double bias) {
  if (bias == 0.0) return 0.0;
  return g * g * bias;
}

bool ClippingInactive(const ClippingPolicy& policy) {
  return policy.mode == ClipMode::kNone || std::isinf(policy.effective_threshold());
}

}  // namespace

std::optional<double> AngleDegrees(const ModelVector& a, const ModelVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  const double cosine = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

absl::StatusOr<BiasReport> ClipBiasTerms(const ExperimentTrace& trace,
                                         const ProblemInstance& problem,
                                         const RunConfig& config) {
  if (trace.rounds.empty()) return absl::InvalidArgumentError("empty trace");
  const int n = problem.num_clients();
  const double c = trace.policy.effective_threshold();
  BiasReport report;
  report.certified = trace.oracle_violations == 0;
  double sum_bar = 0.0, sum_bar_sq = 0.0;
  for (const RoundRecord& record : trace.rounds) {
    if (!record.probe.has_value() || static_cast<int>(record.probe->grad_sum.size()) != n) {
      return absl::FailedPreconditionError(absl::StrCat(
          "round ", record.t, " has no per-client gradient sums; enable probes.all_clients"));
    }
    const ClipFactors factors = ComputeClipFactors(
        record.probe->grad_sum, record.probe->expected_grad_sum, config.eta_l, c);
    RoundBias bias;
    bias.t = record.t;
    bias.alpha_bar = factors.alpha_bar;
    for (int i = 0; i < n; ++i) {
      const double own = std::abs(factors.alpha[i] - factors.alpha_tilde[i]);
      const double cross = std::abs(factors.alpha_tilde[i] - factors.alpha_bar);
      bias.mean_abs_alpha_gap += own / n;
      bias.mean_abs_cross_gap += cross / n;
      bias.mean_sq_alpha_gap += own * own / n;
      bias.mean_sq_cross_gap += cross * cross / n;
    }
    sum_bar += bias.alpha_bar;
    sum_bar_sq += bias.alpha_bar * bias.alpha_bar;
    report.avg_abs_alpha_gap += bias.mean_abs_alpha_gap;
    report.avg_abs_cross_gap += bias.mean_abs_cross_gap;
    report.avg_sq_alpha_gap += bias.mean_sq_alpha_gap;
    report.avg_sq_cross_gap += bias.mean_sq_cross_gap;
    report.rounds.push_back(bias);
  }
  const double t = static_cast<double>(trace.rounds.size());
  report.gamma1 = sum_bar / t;
  report.gamma2 = sum_bar_sq / t;
  report.avg_abs_alpha_gap /= t;
  report.avg_abs_cross_gap /= t;
  report.avg_sq_alpha_gap /= t;
  report.avg_sq_cross_gap /= t;
  return report;
}

StepsizeRegime CheckStepsizeRegime(double eta_g, double eta_l, double local_steps,
                                   double lipschitz, int clients_per_round) {
  const double product = eta_g * eta_l;
  const double p = clients_per_round;
  StepsizeRegime regime;
  regime.product_vs_sampling = product <= p / (48.0 * local_steps);
  regime.product_vs_smoothness =
      clients_per_round == 1 || product <= p / (6.0 * local_steps * lipschitz * (p - 1.0));
  regime.local_step = eta_l <= 1.0 / (std::sqrt(60.0) * local_steps * lipschitz);
  return regime;
}

absl::StatusOr<BoundBreakdown> ConvergenceBound(const BoundInputs& in) {
  if (!(in.eta_g > 0.0) || !(in.eta_l > 0.0) || !(in.local_steps > 0.0) || in.rounds < 1 ||
      in.clients_per_round < 1 || in.num_clients < 1) {
    return absl::InvalidArgumentError("eta_g, eta_l, Q, T, P and N must be positive");
  }
  const double q = in.local_steps;
  const double p = in.clients_per_round;
  const double l = in.lipschitz;
  BoundBreakdown out;
  out.initial_gap = 4.0 * in.initial_gap / (in.eta_g * in.eta_l * q * in.rounds);
  out.client_drift = 12.5 * in.eta_l * in.eta_l * l * q *
                     (in.sigma_l * in.sigma_l + 6.0 * q * in.sigma_g * in.sigma_g) * in.gamma1;
  out.sampling_variance = 6.0 * in.eta_g * in.eta_l * l * in.sigma_l * in.sigma_l * in.gamma2 / p;
  out.privacy_noise = in.sigma2 == 0.0
                          ? 0.0
                          : 2.0 * in.eta_g * l * in.dimension * in.sigma2 / (in.eta_l * p * q);
  out.clip_bias_first_order =
      4.0 * ScaledByG2(in.gradient_bound, in.avg_abs_alpha_gap + in.avg_abs_cross_gap);
  // (1/P) sum over all N clients = (N/P) times the per-client mean.
  const double second = (in.num_clients / p) * (in.avg_sq_alpha_gap + in.avg_sq_cross_gap);
  out.clip_bias_second_order =
      second == 0.0 ? 0.0
                    : 6.0 * in.eta_g * in.eta_l * l * q * ScaledByG2(in.gradient_bound, second);
  out.total = out.initial_gap + out.client_drift + out.sampling_variance + out.privacy_noise +
              out.clip_bias_first_order + out.clip_bias_second_order;
  out.regime = CheckStepsizeRegime(in.eta_g, in.eta_l, q, l, in.clients_per_round);
  out.certified = out.regime.all() && !in.gradient_bound_violated && std::isfinite(out.total);
  return out;
}

double EffectiveSigmaL(const ExperimentTrace& trace, const ProblemInstance& problem,
                       const RunConfig& config) {
  switch (config.oracle.mode) {
    case NoiseMode::kDeterministic:
      return 0.0;
    case NoiseMode::kGaussian:
      return config.oracle.sigma_l;
    case NoiseMode::kMinibatch:
      break;
  }
  const int rounds = static_cast<int>(trace.rounds.size());
  const int stride = std::max(1, rounds / kSigmaLRounds);
  double worst = 0.0;
  for (int t = 0; t < rounds; t += stride) {
    const ModelVector& x = trace.rounds[t].x;
    for (int i = 0; i < problem.num_clients(); ++i) {
      GradientOracle oracle(problem.client(i), config.oracle,
                            RngStream(config.seed, {StreamDomain::kTest, static_cast<uint32_t>(t),
                                                    static_cast<uint32_t>(i), 0}));
      const ModelVector exact = problem.client(i).Gradient(x);
      double second_moment = 0.0;
      for (int k = 0; k < kSigmaLDraws; ++k) {
        second_moment += (oracle.Sample(x) - exact).squaredNorm() / kSigmaLDraws;
      }
      worst = std::max(worst, second_moment);
    }
  }
  return std::sqrt(worst);
}

absl::StatusOr<BoundInputs> MakeBoundInputs(const ExperimentTrace& trace,
                                            const ProblemInstance& problem,
                                            const RunConfig& config,
                                            const std::optional<BiasReport>& bias) {
  if (trace.rounds.empty()) return absl::InvalidArgumentError("empty trace");
  if (!problem.f_star.has_value()) {
    return absl::FailedPreconditionError("problem has no known lower bound f*");
  }
  BoundInputs in;
  in.initial_gap = problem.GlobalLoss(trace.rounds.front().x) - *problem.f_star;
  in.lipschitz = problem.constants.lipschitz;
  in.sigma_l = EffectiveSigmaL(trace, problem, config);
  in.sigma_g = problem.constants.sigma_g;
  in.gradient_bound = problem.constants.gradient_bound;
  in.dimension = problem.dimension();
  in.eta_l = config.eta_l;
  in.eta_g = config.eta_g;
  in.local_steps = config.local_steps == kUntilConverged
                       ? std::numeric_limits<double>::infinity()
                       : static_cast<double>(config.local_steps);
  in.rounds = static_cast<int>(trace.rounds.size());
  in.clients_per_round = config.clients_per_round;
  in.num_clients = problem.num_clients();
  in.sigma2 = trace.noise.sigma2;
  in.gradient_bound_violated = trace.oracle_violations > 0;
  if (bias.has_value()) {
    in.gamma1 = bias->gamma1;
    in.gamma2 = bias->gamma2;
    in.avg_abs_alpha_gap = bias->avg_abs_alpha_gap;
    in.avg_abs_cross_gap = bias->avg_abs_cross_gap;
    in.avg_sq_alpha_gap = bias->avg_sq_alpha_gap;
    in.avg_sq_cross_gap = bias->avg_sq_cross_gap;
  } else if (!ClippingInactive(trace.policy)) {
    return absl::FailedPreconditionError(
        "clipping bias terms need per-client probes when clipping is active");
  }
  return in;
}

absl::StatusOr<double> MeasuredStationarity(const ExperimentTrace& trace) {
  if (trace.rounds.empty()) return absl::InvalidArgumentError("empty trace");
  const bool inactive = ClippingInactive(trace.policy);
  double total = 0.0;
  for (const RoundRecord& record : trace.rounds) {
    double alpha_bar = 1.0;
    if (record.alpha_bar.has_value()) {
      alpha_bar = *record.alpha_bar;
    } else if (!inactive) {
      return absl::FailedPreconditionError(
          absl::StrCat("round ", record.t, " lacks alpha_bar; enable probes.all_clients"));
    }
    total += alpha_bar * record.global_grad_norm * record.global_grad_norm;
  }
  return total / static_cast<double>(trace.rounds.size());
}

PrivateBound PrivateConvergenceBound(const PrivateBoundInputs& in) {
  const double q = in.local_steps;
  const double p = in.clients_per_round;
  const double l = in.lipschitz;
  const double n = in.num_clients;
  PrivateBound out;
  out.initial_gap = 4.0 * in.initial_gap / (in.eta_g * in.eta_l * q * in.rounds);
  out.client_drift = 12.5 * in.eta_l * in.eta_l * l * q *
                     (in.sigma_l * in.sigma_l + 6.0 * q * in.sigma_g * in.sigma_g);
  out.sampling_variance = 6.0 * in.eta_g * in.eta_l * l * in.sigma_l * in.sigma_l / p;
  const double c = in.eta_l * q * in.c_prime;
  out.sigma2 = in.v * c * c * p * in.rounds * std::log(1.0 / in.delta) /
               (n * n * in.epsilon * in.epsilon);
  out.privacy_noise = 2.0 * in.eta_g * l * in.dimension * out.sigma2 / (in.eta_l * p * q);
  out.total = out.initial_gap + out.client_drift + out.sampling_variance + out.privacy_noise;
  out.reference_rate = std::sqrt(static_cast<double>(in.dimension)) / (n * in.epsilon);
  out.clipping_inactive = in.c_prime >= in.gradient_bound;
  return out;
}

absl::StatusOr<DriftReport> DriftCheck(const ExperimentTrace& trace,
                                       const ProblemInstance& problem,
                                       const RunConfig& config) {
  if (config.local_steps == kUntilConverged) {
    return absl::InvalidArgumentError("drift check needs a finite local step count");
  }
  const double q_total = static_cast<double>(config.local_steps);
  const double sigma_l = EffectiveSigmaL(trace, problem, config);
  const double sigma_g = problem.constants.sigma_g;
  const double eta2 = config.eta_l * config.eta_l;
  DriftReport report;
  for (const RoundRecord& record : trace.rounds) {
    if (!record.probe.has_value() || record.probe->drift_mean.empty()) {
      return absl::FailedPreconditionError(absl::StrCat(
          "round ", record.t, " has no drift record; enable probes.record_drift"));
    }
    if (!record.probe->exact_expectation) report.monte_carlo = true;
    const double grad2 = record.global_grad_norm * record.global_grad_norm;
    const double rhs = 5.0 * q_total * eta2 * (sigma_l * sigma_l + 6.0 * q_total * sigma_g * sigma_g) +
                       30.0 * q_total * q_total * eta2 * grad2;
    for (size_t q = 0; q < record.probe->drift_mean.size(); ++q) {
      DriftEntry entry;
      entry.t = record.t;
      entry.q = static_cast<int>(q);
      entry.lhs = record.probe->drift_mean[q];
      entry.lhs_stderr = record.probe->drift_stderr[q];
      entry.rhs = rhs;
      entry.pass = entry.lhs - report.z * entry.lhs_stderr <= entry.rhs;
      report.all_pass = report.all_pass && entry.pass;
      report.entries.push_back(entry);
    }
  }
  return report;
}

std::vector<RoundDistribution> UpdateDistribution(const ExperimentTrace& trace) {
  std::vector<RoundDistribution> out;
  out.reserve(trace.rounds.size());
  const ModelVector* previous = nullptr;
  for (const RoundRecord& record : trace.rounds) {
    RoundDistribution dist;
    dist.t = record.t;
    for (const ClientReport& c : record.clients) {
      dist.points.push_back({c.client, c.delta_norm, c.angle_deg});
      dist.mean_magnitude += c.delta_norm;
    }
    const double count = std::max<size_t>(1, dist.points.size());
    dist.mean_magnitude /= count;
    for (const UpdatePoint& p : dist.points) {
      dist.variance_magnitude += (p.magnitude - dist.mean_magnitude) *
                                 (p.magnitude - dist.mean_magnitude) / count;
    }
    dist.global_magnitude = record.mean_update.norm();
    if (previous != nullptr) dist.global_angle_deg = AngleDegrees(record.mean_update, *previous);
    previous = &record.mean_update;
    out.push_back(std::move(dist));
  }
  return out;
}

}  // namespace fedclip
