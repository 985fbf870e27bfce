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

#include "fedclip/runner.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>
#include <utility>

#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "parallel.h"

namespace fedclip {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

bool PolicyCanBind(const ClippingPolicy& policy) {
  if (policy.mode == ClipMode::kNone) return false;
  return policy.auto_rho.has_value() ||
         (policy.threshold.has_value() && std::isfinite(*policy.threshold));
}

// Bias report of a run whose clipping never binds.
BiasReport InactiveBias(const ExperimentTrace& trace) {
  BiasReport bias;
  bias.certified = trace.oracle_violations == 0;
  for (const RoundRecord& record : trace.rounds) {
    RoundBias round;
    round.t = record.t;
    bias.rounds.push_back(round);
  }
  return bias;
}

MeanStd Stats(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x / static_cast<double>(v.size());
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  return out;
}

}  // namespace

int ExitCodeFor(const absl::Status& status) {
  if (status.ok()) return kExitOk;
  if (absl::IsInvalidArgument(status)) return kExitConfigError;
  if (absl::IsOutOfRange(status)) return kExitDivergence;
  return kExitFailure;
}

std::string ErrorJson(const absl::Status& status) {
  ordered_json j;
  switch (ExitCodeFor(status)) {
    case kExitConfigError:
      j["error"] = "config";
      break;
    case kExitDivergence:
      j["error"] = "divergence";
      break;
    default:
      j["error"] = "internal";
      break;
  }
  j["code"] = absl::StatusCodeToString(status.code());
  j["message"] = std::string(status.message());
  std::smatch match;
  const std::string message(status.message());
  if (absl::IsOutOfRange(status) &&
      std::regex_search(message, match, std::regex("diverged at round ([0-9]+)"))) {
    j["round"] = std::stoi(match[1].str());
  }
  return j.dump();
}

ExperimentConfig ApplyOverrides(ExperimentConfig config, const RunOverrides& overrides) {
  if (overrides.out_dir.has_value()) config.output_dir = *overrides.out_dir;
  if (overrides.seed.has_value()) {
    config.run.seed = *overrides.seed;
    config.replicate_seeds = {*overrides.seed};
  }
  if (overrides.threads.has_value()) config.run.threads = *overrides.threads;
  return config;
}

absl::StatusOr<ReplicateResult> RunReplicate(const ExperimentConfig& config,
                                             const ProblemInstance& problem, uint64_t seed) {
  ReplicateResult result;
  result.seed = seed;
  result.config = MakeRunConfig(config, seed);
  if (PolicyCanBind(result.config.policy)) result.config.probes.all_clients = true;

  auto trace = RunExperiment(problem, result.config);
  if (!trace.ok()) return trace.status();
  result.trace = *std::move(trace);

  if (result.config.probes.all_clients) {
    auto bias = ClipBiasTerms(result.trace, problem, result.config);
    if (!bias.ok()) return bias.status();
    result.bias = *std::move(bias);
  } else {
    result.bias = InactiveBias(result.trace);
  }
  auto inputs = MakeBoundInputs(result.trace, problem, result.config, result.bias);
  if (!inputs.ok()) return inputs.status();
  result.bound_inputs = *inputs;
  auto bound = ConvergenceBound(*inputs);
  if (!bound.ok()) return bound.status();
  result.bound = *bound;
  auto measured = MeasuredStationarity(result.trace);
  if (!measured.ok()) return measured.status();
  result.measured_stationarity = *measured;
  if (result.config.probes.record_drift) {
    auto drift = DriftCheck(result.trace, problem, result.config);
    if (!drift.ok()) return drift.status();
    result.drift = *std::move(drift);
  }
  result.final_loss = problem.GlobalLoss(result.trace.final_x);
  result.final_grad_norm = problem.GlobalGradient(result.trace.final_x).norm();
  result.lipschitz_method = problem.constants.lipschitz_method;
  result.sigma_g_method = problem.constants.sigma_g_method;
  return result;
}

absl::StatusOr<std::vector<ReplicateResult>> RunReplicates(const ExperimentConfig& config,
                                                           const ProblemInstance& problem) {
  const int count = static_cast<int>(config.replicate_seeds.size());
  if (count == 0) return absl::InvalidArgumentError("replicates: no seeds");
  ExperimentConfig inner = config;
  if (count > 1) inner.run.threads = 1;
  std::vector<absl::StatusOr<ReplicateResult>> slots(count, absl::UnknownError("not run"));
  internal::ParallelFor(count, count > 1 ? config.run.threads : 1, [&](int k) {
    slots[k] = RunReplicate(inner, problem, config.replicate_seeds[k]);
  });
  std::vector<ReplicateResult> results;
  results.reserve(count);
  for (auto& slot : slots) {
    if (!slot.ok()) return slot.status();
    results.push_back(*std::move(slot));
  }
  return results;
}

absl::Status ExecuteConfig(const ExperimentConfig& config) {
  const std::filesystem::path out(config.output_dir);
  if (config.task == TaskKind::kTable1) {
    auto cells = ComputeTable1();
    if (!cells.ok()) return cells.status();
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) return absl::InternalError(absl::StrCat("cannot create ", out.string()));
    if (absl::Status s = WriteTextFile(out / "table1.csv", Table1Csv(*cells)); !s.ok()) return s;
    return WriteTextFile(out / "table1_detail.csv", Table1DetailCsv(*cells));
  }

  auto problem = BuildProblem(config.problem);
  if (!problem.ok()) return problem.status();
  // Surface config errors before any work starts.
  for (uint64_t seed : config.replicate_seeds) {
    if (absl::Status s = ValidateRunConfig(MakeRunConfig(config, seed), *problem); !s.ok()) {
      return s;
    }
  }
  auto results = RunReplicates(config, *problem);
  if (!results.ok()) return results.status();
  for (const ReplicateResult& r : *results) {
    if (absl::Status s = WriteReplicateArtifacts(out / absl::StrCat("replicate_", r.seed), r);
        !s.ok()) {
      return s;
    }
  }
  if (absl::Status s = WritePooledArtifacts(out, *results); !s.ok()) return s;
  return WriteTextFile(out / "config.json", SerializeConfig(config));
}

absl::StatusOr<std::vector<Table1Cell>> ComputeTable1(const Table1Options& options) {
  const std::vector<double> slopes = {1.0, 2.0, 6.0};
  const std::vector<double> offsets = {4.0, 1.0, -1.0};
  auto problem = BuildScalarRegressionEnsemble(slopes, offsets);
  if (!problem.ok()) return problem.status();

  // Local steps after which every client's contraction factor has decayed
  // below the tolerance.
  double rho = 0.0;
  for (double a : slopes) {
    rho = std::max(rho, std::abs(1.0 - options.eta_l_converged * a * a));
  }
  if (!(rho < 1.0)) {
    return absl::InvalidArgumentError("eta_l_converged does not contract every client");
  }
  const int64_t converged_steps = std::max<int64_t>(
      1, static_cast<int64_t>(std::ceil(std::log(options.converged_tolerance) / std::log(rho))));

  std::vector<Table1Cell> cells;
  const ModelVector x_init = ModelVector::Constant(1, 1.0);
  for (double c : {kInf, 1.0}) {
    for (bool converged : {false, true}) {
      Table1Cell cell;
      cell.c = c;
      cell.converged_q = converged;
      auto map = converged ? OneRoundMap::LocalMinClip(*problem, c)
                           : OneRoundMap::GradientClip(*problem, options.eta_l_one_step, c);
      if (!map.ok()) return map.status();
      auto solved = SolveFixedPoint(*map, x_init, options.solver);
      if (!solved.ok()) return solved.status();
      cell.solver_x = solved->x[0];
      cell.solver_residual = solved->residual;
      cell.solver_iterations = solved->iterations;
      cell.used_bisection = solved->used_bisection;

      // Difference clipping at c * eta_l after one step clips the gradient at
      // c; after local convergence it clips x - x_i* at c.
      RunConfig run;
      run.rounds = options.rounds;
      run.clients_per_round = problem->num_clients();
      run.participation = Participation::kFull;
      run.eta_g = 1.0;
      run.eta_l = converged ? options.eta_l_converged : options.eta_l_one_step;
      run.local_steps = converged ? converged_steps : 1;
      run.policy.mode = ClipMode::kDifference;
      run.policy.threshold = converged ? c : c * run.eta_l;
      run.x0 = x_init;
      auto trace = RunExperiment(*problem, run);
      if (!trace.ok()) return trace.status();
      cell.simulation_x = trace->final_x[0];
      cell.simulation_residual = ((*map)(trace->final_x) - trace->final_x).norm();
      cell.simulation_local_steps = run.local_steps;
      cell.simulation_eta_l = run.eta_l;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string Table1Csv(const std::vector<Table1Cell>& cells) {
  std::string out = "c,Q=1,Q=inf\n";
  for (size_t k = 0; k + 1 < cells.size(); k += 2) {
    absl::StrAppend(&out, FormatNumber(cells[k].c), ",", FormatNumber(cells[k].solver_x), ",",
                    FormatNumber(cells[k + 1].solver_x), "\n");
  }
  return out;
}

std::string Table1DetailCsv(const std::vector<Table1Cell>& cells) {
  std::string out =
      "c,Q,solver_x,solver_residual,solver_iterations,used_bisection,simulation_x,"
      "simulation_residual,simulation_local_steps,simulation_eta_l\n";
  for (const Table1Cell& cell : cells) {
    absl::StrAppend(&out, FormatNumber(cell.c), ",", cell.converged_q ? "inf" : "1", ",",
                    FormatNumber(cell.solver_x), ",", FormatNumber(cell.solver_residual), ",",
                    cell.solver_iterations, ",", cell.used_bisection ? "true" : "false", ",",
                    FormatNumber(cell.simulation_x), ",", FormatNumber(cell.simulation_residual),
                    ",", cell.simulation_local_steps, ",", FormatNumber(cell.simulation_eta_l),
                    "\n");
  }
  return out;
}

absl::StatusOr<CompareResult> CompareConfigs(const ExperimentConfig& a,
                                             const ExperimentConfig& b) {
  if (a.run.rounds != b.run.rounds) {
    return absl::InvalidArgumentError(
        absl::StrCat("compare: rounds differ (", a.run.rounds, " vs ", b.run.rounds, ")"));
  }
  if (a.replicate_seeds != b.replicate_seeds) {
    return absl::InvalidArgumentError("compare: replicate seed lists differ");
  }
  auto problem_a = BuildProblem(a.problem);
  if (!problem_a.ok()) return problem_a.status();
  auto problem_b = BuildProblem(b.problem);
  if (!problem_b.ok()) return problem_b.status();
  auto runs_a = RunReplicates(a, *problem_a);
  if (!runs_a.ok()) return runs_a.status();
  auto runs_b = RunReplicates(b, *problem_b);
  if (!runs_b.ok()) return runs_b.status();

  CompareResult result;
  result.seeds = a.replicate_seeds;
  result.rounds = a.run.rounds;
  for (size_t k = 0; k < runs_a->size(); ++k) {
    const ReplicateResult& ra = (*runs_a)[k];
    const ReplicateResult& rb = (*runs_b)[k];
    for (int t = 0; t < result.rounds; ++t) {
      const RoundRecord& x = ra.trace.rounds[t];
      const RoundRecord& y = rb.trace.rounds[t];
      result.rows.push_back({ra.seed, t, x.global_loss, y.global_loss, x.global_grad_norm,
                             y.global_grad_norm});
    }
    result.final_loss_delta.push_back(rb.final_loss - ra.final_loss);
    result.final_grad_norm_delta.push_back(rb.final_grad_norm - ra.final_grad_norm);
  }
  result.final_loss_delta_stats = Stats(result.final_loss_delta);
  result.final_grad_norm_delta_stats = Stats(result.final_grad_norm_delta);
  return result;
}

std::string CompareCsv(const CompareResult& result) {
  std::string out = absl::StrCat(kCompareCsvHeader, "\n");
  for (const CompareRow& r : result.rows) {
    absl::StrAppend(&out, r.seed, ",", r.t, ",", FormatNumber(r.loss_a), ",",
                    FormatNumber(r.loss_b), ",", FormatNumber(r.loss_b - r.loss_a), ",",
                    FormatNumber(r.grad_norm_a), ",", FormatNumber(r.grad_norm_b), ",",
                    FormatNumber(r.grad_norm_b - r.grad_norm_a), "\n");
  }
  return out;
}

std::string CompareSummaryJson(const CompareResult& result) {
  ordered_json j;
  j["seeds"] = result.seeds;
  j["rounds"] = result.rounds;
  j["final_loss_delta"] = result.final_loss_delta;
  j["final_grad_norm_delta"] = result.final_grad_norm_delta;
  j["final_loss_delta_mean"] = result.final_loss_delta_stats.mean;
  j["final_loss_delta_std"] = result.final_loss_delta_stats.std;
  j["final_grad_norm_delta_mean"] = result.final_grad_norm_delta_stats.mean;
  j["final_grad_norm_delta_std"] = result.final_grad_norm_delta_stats.std;
  return j.dump(2) + "\n";
}

}  // namespace fedclip
