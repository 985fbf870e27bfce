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

// fedclip: run clipped FedAvg experiments from a JSON config.
//
//   fedclip run --config exp.json [--out DIR] [--seed-override S] [--threads K]
//   fedclip table1 [--out DIR]
//   fedclip compare A.json B.json [--out DIR] [--threads K]

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedclip/config.h"
#include "fedclip/runner.h"

namespace {

int Fail(const absl::Status& status) {
  std::cerr << fedclip::ErrorJson(status) << std::endl;
  return fedclip::ExitCodeFor(status);
}

absl::StatusOr<fedclip::ExperimentConfig> Load(const std::string& path,
                                               const fedclip::RunOverrides& overrides) {
  auto config = fedclip::LoadConfigFile(path);
  if (!config.ok()) return config.status();
  return fedclip::ApplyOverrides(*std::move(config), overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clipped and differentially private FedAvg simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed_override = 0;
  int threads = 0;

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  CLI::Option* seed_opt =
      run->add_option("--seed-override", seed_override, "Run a single replicate with this seed");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));

  CLI::App* table1 = app.add_subcommand("table1", "Stationary points of the 3-client example");
  table1->add_option("--out", out_dir, "Output directory")->default_val("out/table1");

  std::string compare_a, compare_b;
  CLI::App* compare = app.add_subcommand("compare", "Paired deltas between two configs");
  compare->add_option("a", compare_a, "Baseline config")->required();
  compare->add_option("b", compare_b, "Compared config")->required();
  compare->add_option("--out", out_dir, "Output directory")->default_val("out/compare");
  compare->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(absl::InvalidArgumentError(e.what()));
  }

  fedclip::RunOverrides overrides;
  if (threads > 0) overrides.threads = threads;

  if (*run) {
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    if (seed_opt->count() > 0) overrides.seed = seed_override;
    auto config = Load(config_path, overrides);
    if (!config.ok()) return Fail(config.status());
    if (absl::Status s = fedclip::ExecuteConfig(*config); !s.ok()) return Fail(s);
    std::cout << "wrote " << config->output_dir << std::endl;
    return fedclip::kExitOk;
  }

  if (*table1) {
    fedclip::ExperimentConfig config;
    config.task = fedclip::TaskKind::kTable1;
    config.output_dir = out_dir;
    if (absl::Status s = fedclip::ExecuteConfig(config); !s.ok()) return Fail(s);
    std::cout << "wrote " << (std::filesystem::path(out_dir) / "table1.csv").string() << std::endl;
    return fedclip::kExitOk;
  }

  auto a = Load(compare_a, overrides);
  if (!a.ok()) return Fail(a.status());
  auto b = Load(compare_b, overrides);
  if (!b.ok()) return Fail(b.status());
  auto result = fedclip::CompareConfigs(*a, *b);
  if (!result.ok()) return Fail(result.status());
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);
  if (absl::Status s = fedclip::WriteTextFile(out / "compare.csv", fedclip::CompareCsv(*result));
      !s.ok()) {
    return Fail(s);
  }
  if (absl::Status s = fedclip::WriteTextFile(out / "compare_summary.json",
                                              fedclip::CompareSummaryJson(*result));
      !s.ok()) {
    return Fail(s);
  }
  std::cout << "final loss delta " << result->final_loss_delta_stats.mean << " +/- "
            << result->final_loss_delta_stats.std << std::endl;
  return fedclip::kExitOk;
}
