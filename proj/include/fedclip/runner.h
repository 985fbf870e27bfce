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

// Experiment orchestration behind the fedclip command-line tool.

#ifndef FEDCLIP_RUNNER_H_
#define FEDCLIP_RUNNER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedclip/artifacts.h"
#include "fedclip/config.h"
#include "fedclip/fixedpoint.h"

namespace fedclip {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDivergence = 3;

// INVALID_ARGUMENT -> 2, OUT_OF_RANGE -> 3, anything else -> 1.
int ExitCodeFor(const absl::Status& status);

// Single-line JSON error object: {"error": kind, "code": ..., "message": ...}
// plus "round" for divergence.
std::string ErrorJson(const absl::Status& status);

struct RunOverrides {
  std::optional<std::string> out_dir;
  std::optional<uint64_t> seed;  // replaces the replicate seed list
  std::optional<int> threads;
};

ExperimentConfig ApplyOverrides(ExperimentConfig config, const RunOverrides& overrides);

// Runs one replicate and evaluates its diagnostics. Per-client probes are
// switched on whenever the clipping policy can bind, since the bias terms
// need every client's gradient sums.
absl::StatusOr<ReplicateResult> RunReplicate(const ExperimentConfig& config,
                                             const ProblemInstance& problem, uint64_t seed);

// All replicates. With more than one replicate they run in parallel, one
// worker each; a single replicate uses run.threads within rounds.
absl::StatusOr<std::vector<ReplicateResult>> RunReplicates(const ExperimentConfig& config,
                                                           const ProblemInstance& problem);

// Executes the config's task and writes its artifacts under output_dir:
// replicate_<seed>/ per replicate and the pooled files at the top level, or
// table1.csv and table1_detail.csv.
absl::Status ExecuteConfig(const ExperimentConfig& config);

struct Table1Options {
  double eta_l_one_step = 0.1;
  // Must keep every |1 - eta_l a_i^2| below 1.
  double eta_l_converged = 0.05;
  // Local steps stand in for Q = infinity once the contraction factor to the
  // power Q is at most this.
  double converged_tolerance = 1e-12;
  int rounds = 2000;
  FixedPointOptions solver;
};

struct Table1Cell {
  double c = 0.0;             // +inf or 1
  bool converged_q = false;   // false: Q = 1, true: Q = infinity
  double solver_x = 0.0;
  double solver_residual = 0.0;
  int64_t solver_iterations = 0;
  bool used_bisection = false;
  double simulation_x = 0.0;
  // |map(simulation_x) - simulation_x| under the cell's one-round map.
  double simulation_residual = 0.0;
  int64_t simulation_local_steps = 0;
  double simulation_eta_l = 0.0;
};

// The 2x2 grid over c in {inf, 1} and Q in {1, inf} for the clients
// 1/2 (x - 4)^2, 1/2 (2x - 1)^2, 1/2 (6x + 1)^2, in row-major order
// (c = inf first, Q = 1 first).
absl::StatusOr<std::vector<Table1Cell>> ComputeTable1(const Table1Options& options = {});

// Table-shaped CSV: header "c,Q=1,Q=inf", one row per c, solver values.
std::string Table1Csv(const std::vector<Table1Cell>& cells);
// One row per cell with solver and simulation values and residuals.
std::string Table1DetailCsv(const std::vector<Table1Cell>& cells);

struct CompareRow {
  uint64_t seed = 0;
  int t = 0;
  double loss_a = 0.0;
  double loss_b = 0.0;
  double grad_norm_a = 0.0;
  double grad_norm_b = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};

struct CompareResult {
  std::vector<uint64_t> seeds;
  int rounds = 0;
  std::vector<CompareRow> rows;
  // Deltas are B minus A, at the model after the last round.
  std::vector<double> final_loss_delta;
  std::vector<double> final_grad_norm_delta;
  MeanStd final_loss_delta_stats;
  MeanStd final_grad_norm_delta_stats;
};

// Runs both configs over their replicate seeds and pairs the traces.
// INVALID_ARGUMENT on mismatched T or seed lists.
absl::StatusOr<CompareResult> CompareConfigs(const ExperimentConfig& a,
                                             const ExperimentConfig& b);

inline constexpr char kCompareCsvHeader[] =
    "seed,t,loss_a,loss_b,loss_delta,grad_norm_a,grad_norm_b,grad_norm_delta";
std::string CompareCsv(const CompareResult& result);
std::string CompareSummaryJson(const CompareResult& result);

}  // namespace fedclip

#endif  // FEDCLIP_RUNNER_H_
