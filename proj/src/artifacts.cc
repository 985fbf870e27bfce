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

#include "fedclip/artifacts.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "fedclip/privacy.h"
#include "json.hpp"

namespace fedclip {
namespace {

using ordered_json = nlohmann::ordered_json;

// JSON has no infinities; they are spelled as strings.
ordered_json Num(double v) {
  if (std::isfinite(v)) return ordered_json(v);
  return ordered_json(FormatNumber(v));
}

ordered_json Vector(const ModelVector& v) {
  ordered_json out = ordered_json::array();
  for (int k = 0; k < v.size(); ++k) out.push_back(Num(v[k]));
  return out;
}

ordered_json Optional(const std::optional<double>& v) {
  return v.has_value() ? Num(*v) : ordered_json(nullptr);
}

std::string OptionalCell(const std::optional<double>& v) {
  return v.has_value() ? FormatNumber(*v) : "";
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double StdDev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string FormatNumber(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) return "nan";
  return std::string(buffer, end);
}

std::string RoundRecordJson(const RoundRecord& record, uint64_t seed) {
  ordered_json j;
  j["t"] = record.t;
  j["seed"] = seed;
  j["x"] = Vector(record.x);
  j["sampled"] = record.sampled;
  ordered_json clients = ordered_json::array();
  for (const ClientReport& c : record.clients) {
    ordered_json entry;
    entry["client"] = c.client;
    entry["duplicate"] = c.duplicate;
    entry["delta_norm"] = Num(c.delta_norm);
    entry["clip_factor"] = Num(c.clip_factor);
    entry["angle_deg"] = Optional(c.angle_deg);
    clients.push_back(std::move(entry));
  }
  j["clients"] = std::move(clients);
  j["mean_update"] = Vector(record.mean_update);
  j["global_loss"] = Num(record.global_loss);
  j["global_grad_norm"] = Num(record.global_grad_norm);
  j["alpha_bar"] = Optional(record.alpha_bar);
  j["oracle_violations"] = record.oracle_violations;
  return j.dump();
}

std::string SummaryCsvRow(const ReplicateResult& r) {
  return absl::StrJoin(
      {absl::StrCat(r.seed), absl::StrCat(r.trace.rounds.size()), FormatNumber(r.final_loss),
       FormatNumber(r.final_grad_norm), FormatNumber(r.measured_stationarity),
       FormatNumber(r.bound.total), std::string(r.bound.certified ? "true" : "false"),
       FormatNumber(r.trace.policy.effective_threshold()), OptionalCell(r.trace.pilot_mean_norm),
       FormatNumber(r.trace.noise.sigma2), FormatNumber(r.bias.gamma1),
       FormatNumber(r.bias.gamma2), absl::StrCat(r.trace.oracle_violations)},
      ",");
}

std::string BiasCsv(const BiasReport& bias) {
  std::string out = absl::StrCat(kBiasCsvHeader, "\n");
  for (const RoundBias& b : bias.rounds) {
    absl::StrAppend(&out, b.t, ",", FormatNumber(b.alpha_bar), ",",
                    FormatNumber(b.mean_abs_alpha_gap), ",", FormatNumber(b.mean_abs_cross_gap),
                    ",", FormatNumber(b.mean_sq_alpha_gap), ",",
                    FormatNumber(b.mean_sq_cross_gap), "\n");
  }
  return out;
}

std::string BoundJson(const ReplicateResult& r) {
  const BoundInputs& in = r.bound_inputs;
  const BoundBreakdown& b = r.bound;
  ordered_json j;
  j["seed"] = r.seed;
  j["disclaimer"] = kCalibrationDisclaimer;
  ordered_json inputs;
  inputs["initial_gap"] = Num(in.initial_gap);
  inputs["lipschitz"] = Num(in.lipschitz);
  inputs["lipschitz_method"] = r.lipschitz_method;
  inputs["sigma_l"] = Num(in.sigma_l);
  inputs["sigma_g"] = Num(in.sigma_g);
  inputs["sigma_g_method"] = r.sigma_g_method;
  inputs["gradient_bound"] = Num(in.gradient_bound);
  inputs["gradient_bound_violated"] = in.gradient_bound_violated;
  inputs["dimension"] = in.dimension;
  inputs["eta_l"] = Num(in.eta_l);
  inputs["eta_g"] = Num(in.eta_g);
  inputs["local_steps"] = Num(in.local_steps);
  inputs["rounds"] = in.rounds;
  inputs["clients_per_round"] = in.clients_per_round;
  inputs["num_clients"] = in.num_clients;
  inputs["sigma2"] = Num(in.sigma2);
  inputs["gamma1"] = Num(in.gamma1);
  inputs["gamma2"] = Num(in.gamma2);
  inputs["avg_abs_alpha_gap"] = Num(in.avg_abs_alpha_gap);
  inputs["avg_abs_cross_gap"] = Num(in.avg_abs_cross_gap);
  inputs["avg_sq_alpha_gap"] = Num(in.avg_sq_alpha_gap);
  inputs["avg_sq_cross_gap"] = Num(in.avg_sq_cross_gap);
  j["inputs"] = std::move(inputs);
  j["terms"] = {{"initial_gap", Num(b.initial_gap)},
                {"client_drift", Num(b.client_drift)},
                {"sampling_variance", Num(b.sampling_variance)},
                {"privacy_noise", Num(b.privacy_noise)},
                {"clip_bias_first_order", Num(b.clip_bias_first_order)},
                {"clip_bias_second_order", Num(b.clip_bias_second_order)}};
  j["total"] = Num(b.total);
  j["regime"] = {{"product_vs_sampling", b.regime.product_vs_sampling},
                 {"product_vs_smoothness", b.regime.product_vs_smoothness},
                 {"local_step", b.regime.local_step}};
  j["certified"] = b.certified;
  j["measured_stationarity"] = Num(r.measured_stationarity);
  j["bound_holds"] = r.measured_stationarity <= b.total;
  j["noise"] = {{"privacy_enabled", r.config.privacy.enabled},
                {"sigma2", Num(r.trace.noise.sigma2)},
                {"in_regime", r.trace.noise.in_regime},
                {"epsilon", Num(r.config.privacy.epsilon)},
                {"delta", Num(r.config.privacy.delta)},
                {"u", Num(r.config.privacy.u)},
                {"v", Num(r.config.privacy.v)}};
  j["clipping"] = {{"mode", ClipModeName(r.trace.policy.mode)},
                   {"threshold", Num(r.trace.policy.effective_threshold())},
                   {"pilot_mean_norm", Optional(r.trace.pilot_mean_norm)}};
  return j.dump(2) + "\n";
}

std::string ScatterCsv(const RoundDistribution& d) {
  std::string out = absl::StrCat(kScatterCsvHeader, "\n");
  for (const UpdatePoint& p : d.points) {
    absl::StrAppend(&out, "client,", p.client, ",", FormatNumber(p.magnitude), ",",
                    OptionalCell(p.angle_deg), "\n");
  }
  absl::StrAppend(&out, "global,,", FormatNumber(d.global_magnitude), ",",
                  OptionalCell(d.global_angle_deg), "\n");
  return out;
}

std::string DriftCsv(const DriftReport& drift) {
  std::string out = absl::StrCat(kDriftCsvHeader, "\n");
  for (const DriftEntry& e : drift.entries) {
    absl::StrAppend(&out, e.t, ",", e.q, ",", FormatNumber(e.lhs), ",",
                    FormatNumber(e.lhs_stderr), ",", FormatNumber(e.rhs), ",",
                    e.pass ? "true" : "false", "\n");
  }
  return out;
}

absl::Status WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::InternalError(absl::StrCat("cannot open ", path.string()));
  out << text;
  out.close();
  if (!out) return absl::InternalError(absl::StrCat("failed writing ", path.string()));
  return absl::OkStatus();
}

absl::Status WriteReplicateArtifacts(const std::filesystem::path& dir,
                                     const ReplicateResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "scatter", ec);
  if (ec) return absl::InternalError(absl::StrCat("cannot create ", dir.string()));

  std::string rounds;
  for (const RoundRecord& record : result.trace.rounds) {
    absl::StrAppend(&rounds, RoundRecordJson(record, result.seed), "\n");
  }
  if (absl::Status s = WriteTextFile(dir / "rounds.jsonl", rounds); !s.ok()) return s;
  if (absl::Status s = WriteTextFile(dir / "summary.csv", absl::StrCat(kSummaryCsvHeader, "\n",
                                                                       SummaryCsvRow(result), "\n"));
      !s.ok()) {
    return s;
  }
  if (absl::Status s = WriteTextFile(dir / "bias.csv", BiasCsv(result.bias)); !s.ok()) return s;
  if (absl::Status s = WriteTextFile(dir / "bound.json", BoundJson(result)); !s.ok()) return s;
  for (const RoundDistribution& d : UpdateDistribution(result.trace)) {
    if (absl::Status s = WriteTextFile(dir / "scatter" / absl::StrCat("round_", d.t, ".csv"),
                                       ScatterCsv(d));
        !s.ok()) {
      return s;
    }
  }
  if (result.drift.has_value()) {
    if (absl::Status s = WriteTextFile(dir / "drift.csv", DriftCsv(*result.drift)); !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

absl::Status WritePooledArtifacts(const std::filesystem::path& dir,
                                  const std::vector<ReplicateResult>& results) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return absl::InternalError(absl::StrCat("cannot create ", dir.string()));

  std::string summary = absl::StrCat("replicate,", kSummaryCsvHeader, "\n");
  std::vector<double> final_loss, final_grad, measured, totals;
  for (size_t k = 0; k < results.size(); ++k) {
    absl::StrAppend(&summary, k, ",", SummaryCsvRow(results[k]), "\n");
    final_loss.push_back(results[k].final_loss);
    final_grad.push_back(results[k].final_grad_norm);
    measured.push_back(results[k].measured_stationarity);
    totals.push_back(results[k].bound.total);
  }
  // Aggregate rows fill only the columns where a mean is meaningful.
  auto aggregate = [&](const char* name, double (*stat)(const std::vector<double>&)) {
    absl::StrAppend(&summary, name, ",,,", FormatNumber(stat(final_loss)), ",",
                    FormatNumber(stat(final_grad)), ",", FormatNumber(stat(measured)), ",",
                    FormatNumber(stat(totals)), ",,,,,,,\n");
  };
  aggregate("mean", &Mean);
  aggregate("std", &StdDev);
  if (absl::Status s = WriteTextFile(dir / "summary.csv", summary); !s.ok()) return s;

  ordered_json j;
  j["disclaimer"] = kCalibrationDisclaimer;
  ordered_json seeds = ordered_json::array();
  ordered_json per_seed_total = ordered_json::array();
  ordered_json per_seed_measured = ordered_json::array();
  bool certified = true;
  double min_total = std::numeric_limits<double>::infinity();
  for (const ReplicateResult& r : results) {
    seeds.push_back(r.seed);
    per_seed_total.push_back(Num(r.bound.total));
    per_seed_measured.push_back(Num(r.measured_stationarity));
    certified = certified && r.bound.certified;
    min_total = std::min(min_total, r.bound.total);
  }
  j["seeds"] = std::move(seeds);
  j["measured_stationarity"] = std::move(per_seed_measured);
  j["bound_total"] = std::move(per_seed_total);
  j["measured_stationarity_mean"] = Num(Mean(measured));
  j["measured_stationarity_std"] = Num(StdDev(measured));
  j["bound_holds_on_average"] = Mean(measured) <= min_total;
  j["certified"] = certified;
  return WriteTextFile(dir / "bound.json", j.dump(2) + "\n");
}

}  // namespace fedclip
