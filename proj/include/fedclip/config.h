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

// Declarative experiment configuration. The on-disk form is a JSON object:
//
//   {
//     "task": "simulate" | "table1",
//     "problem": {"kind": "quadratic", "b": [4, 0.5, -0.1667], ...},
//     "run": {"rounds": 100, "local_steps": 4 | "inf", "clients_per_round": 3,
//             "eta_l": 0.05, "eta_g": 1, "seed": 7, ...},
//     "clipping": {"mode": "difference", "threshold": 1 | "inf", "auto_rho": 0.5},
//     "privacy": {"enabled": false, "epsilon": 1, "delta": 1e-5, "u": 1, "v": 2},
//     "output_dir": "out",
//     "replicates": {"count": 2, "seeds": [7, 8]}
//   }
//
// Unknown keys are rejected at every level. The full schema is in README.md.

#ifndef FEDCLIP_CONFIG_H_
#define FEDCLIP_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedclip/clipping.h"
#include "fedclip/engine.h"
#include "fedclip/privacy.h"
#include "fedclip/problems.h"

namespace fedclip {

enum class ProblemKind { kQuadratic, kScalarRegression, kLinearRegression, kMlp };

std::string ProblemKindName(ProblemKind kind);

struct LinearClientSpec {
  std::vector<std::vector<double>> a;  // row-major design matrix
  std::vector<double> b;

  friend bool operator==(const LinearClientSpec&, const LinearClientSpec&) = default;
};

struct SigmaGBox {
  std::vector<double> center;
  double radius = 1.0;

  friend bool operator==(const SigmaGBox&, const SigmaGBox&) = default;
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kQuadratic;
  std::vector<double> b;                  // kQuadratic: client minimizers
  std::vector<double> slopes;             // kScalarRegression
  std::vector<double> offsets;            // kScalarRegression
  std::vector<LinearClientSpec> clients;  // kLinearRegression
  MlpEnsembleOptions mlp;                 // kMlp
  // Declared gradient bound G; unbounded when absent.
  std::optional<double> gradient_bound;
  // Quadratic kinds: box over which sigma_g is maximized.
  std::optional<SigmaGBox> sigma_g_box;

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

struct RunSpec {
  int rounds = 1;
  int64_t local_steps = 1;  // kUntilConverged for "inf"
  int clients_per_round = 1;
  double eta_l = 0.1;
  double eta_g = 1.0;
  Participation participation = Participation::kWithReplacement;
  uint64_t seed = 0;
  std::optional<std::vector<double>> x0;
  OracleOptions oracle;
  ProbeOptions probes;
  int threads = 1;

  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

enum class TaskKind { kSimulate, kTable1 };

struct ExperimentConfig {
  TaskKind task = TaskKind::kSimulate;
  ProblemSpec problem;
  RunSpec run;
  ClippingPolicy clipping;
  PrivacyConfig privacy;
  std::string output_dir = "out";
  // One run seed per replicate. Defaults to {run.seed}.
  std::vector<uint64_t> replicate_seeds;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// INVALID_ARGUMENT naming the offending key path on any schema violation.
absl::StatusOr<ExperimentConfig> ParseConfig(const std::string& text);

absl::StatusOr<ExperimentConfig> LoadConfigFile(const std::string& path);

// Canonical JSON with every field present; ParseConfig inverts it exactly.
std::string SerializeConfig(const ExperimentConfig& config);

absl::StatusOr<ProblemInstance> BuildProblem(const ProblemSpec& spec);

// Engine configuration of one replicate.
RunConfig MakeRunConfig(const ExperimentConfig& config, uint64_t seed);

}  // namespace fedclip

#endif  // FEDCLIP_CONFIG_H_
