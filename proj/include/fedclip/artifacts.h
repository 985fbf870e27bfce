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

// Text renderings of run outputs. Field names and column orders here are the
// stable artifact schema.

#ifndef FEDCLIP_ARTIFACTS_H_
#define FEDCLIP_ARTIFACTS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "fedclip/diagnostics.h"
#include "fedclip/engine.h"

namespace fedclip {

// Shortest text that parses back to the same double; "inf", "-inf", "nan"
// for non-finite values.
std::string FormatNumber(double value);

// Everything the runner knows about one finished replicate.
struct ReplicateResult {
  uint64_t seed = 0;
  RunConfig config;
  ExperimentTrace trace;
  BiasReport bias;
  BoundInputs bound_inputs;
  BoundBreakdown bound;
  double measured_stationarity = 0.0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  std::optional<DriftReport> drift;
  std::string lipschitz_method;
  std::string sigma_g_method;
};

// One line of rounds.jsonl, without the trailing newline. Keys, in order:
// t, seed, x, sampled, clients (client, duplicate, delta_norm, clip_factor,
// angle_deg), mean_update, global_loss, global_grad_norm, alpha_bar,
// oracle_violations.
std::string RoundRecordJson(const RoundRecord& record, uint64_t seed);

inline constexpr char kSummaryCsvHeader[] =
    "seed,rounds,final_loss,final_grad_norm,measured_stationarity,bound_total,"
    "bound_certified,threshold,pilot_mean_norm,sigma2,gamma1,gamma2,oracle_violations";
std::string SummaryCsvRow(const ReplicateResult& result);

inline constexpr char kBiasCsvHeader[] =
    "t,alpha_bar,mean_abs_alpha_gap,mean_abs_cross_gap,mean_sq_alpha_gap,mean_sq_cross_gap";
std::string BiasCsv(const BiasReport& bias);

std::string BoundJson(const ReplicateResult& result);

inline constexpr char kScatterCsvHeader[] = "kind,client,magnitude,angle_deg";
// One file per round; the last row (kind "global") is the mean update.
std::string ScatterCsv(const RoundDistribution& distribution);

inline constexpr char kDriftCsvHeader[] = "t,q,lhs,lhs_stderr,rhs,pass";
std::string DriftCsv(const DriftReport& drift);

// Writes rounds.jsonl, summary.csv, bias.csv, bound.json, scatter/round_<t>.csv
// and, when recorded, drift.csv into `dir`.
absl::Status WriteReplicateArtifacts(const std::filesystem::path& dir,
                                     const ReplicateResult& result);

// summary.csv with one row per replicate plus "mean" and "std" rows, and a
// bound.json comparing the seed-averaged measurement with each bound.
absl::Status WritePooledArtifacts(const std::filesystem::path& dir,
                                  const std::vector<ReplicateResult>& results);

absl::Status WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace fedclip

#endif  // FEDCLIP_ARTIFACTS_H_
