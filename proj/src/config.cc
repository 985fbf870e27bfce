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

#include "fedclip/config.h"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/string_view.h"
#include "json.hpp"

namespace fedclip {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string Join(const std::string& path, absl::string_view key) {
  return path.empty() ? std::string(key) : absl::StrCat(path, ".", key);
}

// Schema reader that keeps the first error and hands back defaults after it,
// so parsing code reads straight through.
class Reader {
 public:
  bool ok() const { return status_.ok(); }
  absl::Status status() const { return status_; }

  void Fail(const std::string& path, absl::string_view message) {
    if (ok()) status_ = absl::InvalidArgumentError(absl::StrCat(path, ": ", message));
  }

  // True when `j` is an object whose keys all appear in `allowed`.
  bool Object(const json& j, const std::string& path,
              std::initializer_list<absl::string_view> allowed) {
    if (!ok()) return false;
    if (!j.is_object()) {
      Fail(path.empty() ? "<root>" : path, "expected an object");
      return false;
    }
    for (const auto& item : j.items()) {
      bool known = false;
      for (absl::string_view a : allowed) known = known || item.key() == a;
      if (!known) {
        Fail(Join(path, item.key()), "unknown key");
        return false;
      }
    }
    return true;
  }

  const json* Find(const json& obj, const std::string& path, const char* key, bool required) {
    if (!ok()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) Fail(Join(path, key), "missing required key");
      return nullptr;
    }
    return &*it;
  }

  double Number(const json& obj, const std::string& path, const char* key, double fallback,
                bool required = false) {
    const json* v = Find(obj, path, key, required);
    if (v == nullptr) return fallback;
    if (!v->is_number()) {
      Fail(Join(path, key), "expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  // A number or the string "inf".
  double NumberOrInf(const json& obj, const std::string& path, const char* key,
                     double fallback, bool required = false) {
    const json* v = Find(obj, path, key, required);
    if (v == nullptr) return fallback;
    if (v->is_string() && v->get<std::string>() == "inf") return kInf;
    if (!v->is_number()) {
      Fail(Join(path, key), "expected a number or \"inf\"");
      return fallback;
    }
    return v->get<double>();
  }

  int64_t Integer(const json& obj, const std::string& path, const char* key, int64_t fallback,
                  bool required = false, int64_t lo = std::numeric_limits<int>::min(),
                  int64_t hi = std::numeric_limits<int>::max()) {
    const json* v = Find(obj, path, key, required);
    if (v == nullptr) return fallback;
    return AsInteger(*v, Join(path, key), fallback, lo, hi);
  }

  int64_t AsInteger(const json& v, const std::string& path, int64_t fallback, int64_t lo,
                    int64_t hi) {
    if (!v.is_number_integer()) {
      Fail(path, "expected an integer");
      return fallback;
    }
    if (v.is_number_unsigned() && v.get<uint64_t>() > static_cast<uint64_t>(hi)) {
      Fail(path, "integer out of range");
      return fallback;
    }
    const int64_t value = v.get<int64_t>();
    if (value < lo || value > hi) {
      Fail(path, absl::StrCat("must lie in [", lo, ", ", hi, "]"));
      return fallback;
    }
    return value;
  }

  uint64_t AsSeed(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0)) {
      Fail(path, "expected a non-negative integer seed");
      return 0;
    }
    return v.get<uint64_t>();
  }

  uint64_t Seed(const json& obj, const std::string& path, const char* key, uint64_t fallback) {
    const json* v = Find(obj, path, key, false);
    return v == nullptr ? fallback : AsSeed(*v, Join(path, key));
  }

  bool Bool(const json& obj, const std::string& path, const char* key, bool fallback) {
    const json* v = Find(obj, path, key, false);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) {
      Fail(Join(path, key), "expected true or false");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string String(const json& obj, const std::string& path, const char* key,
                     std::string fallback, bool required = false) {
    const json* v = Find(obj, path, key, required);
    if (v == nullptr) return fallback;
    if (!v->is_string()) {
      Fail(Join(path, key), "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  std::vector<double> NumberArray(const json& v, const std::string& path) {
    std::vector<double> out;
    if (!ok()) return out;
    if (!v.is_array()) {
      Fail(path, "expected an array of numbers");
      return out;
    }
    for (size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) {
        Fail(absl::StrCat(path, "[", k, "]"), "expected a number");
        return {};
      }
      out.push_back(v[k].get<double>());
    }
    return out;
  }

  std::vector<double> NumberArray(const json& obj, const std::string& path, const char* key,
                                  bool required) {
    const json* v = Find(obj, path, key, required);
    return v == nullptr ? std::vector<double>{} : NumberArray(*v, Join(path, key));
  }

 private:
  absl::Status status_;
};

// Name tables shared by parse and serialize.
template <typename E>
struct NamedValue {
  const char* name;
  E value;
};

constexpr NamedValue<ProblemKind> kProblemKinds[] = {
    {"quadratic", ProblemKind::kQuadratic},
    {"scalar_regression", ProblemKind::kScalarRegression},
    {"linear_regression", ProblemKind::kLinearRegression},
    {"mlp", ProblemKind::kMlp},
};
constexpr NamedValue<ClipMode> kClipModes[] = {
    {"none", ClipMode::kNone}, {"model", ClipMode::kModel}, {"difference", ClipMode::kDifference}};
constexpr NamedValue<NoiseMode> kNoiseModes[] = {{"deterministic", NoiseMode::kDeterministic},
                                                 {"gaussian", NoiseMode::kGaussian},
                                                 {"minibatch", NoiseMode::kMinibatch}};
constexpr NamedValue<Participation> kParticipations[] = {
    {"with_replacement", Participation::kWithReplacement}, {"full", Participation::kFull}};
constexpr NamedValue<TaskKind> kTasks[] = {{"simulate", TaskKind::kSimulate},
                                           {"table1", TaskKind::kTable1}};

template <typename E, size_t K>
const char* NameOf(const NamedValue<E> (&table)[K], E value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  return "?";
}

template <typename E, size_t K>
E Enum(Reader& r, const json& obj, const std::string& path, const char* key,
       const NamedValue<E> (&table)[K], E fallback, bool required = false) {
  const std::string name = r.String(obj, path, key, "", required);
  if (!r.ok() || name.empty()) return fallback;
  for (const auto& entry : table) {
    if (name == entry.name) return entry.value;
  }
  std::vector<std::string> names;
  for (const auto& entry : table) names.push_back(absl::StrCat("\"", entry.name, "\""));
  r.Fail(Join(path, key), absl::StrCat("expected one of ", absl::StrJoin(names, ", ")));
  return fallback;
}

void ParseProblem(Reader& r, const json& j, ProblemSpec& p) {
  const std::string path = "problem";
  if (!r.Object(j, path, {"kind", "b", "slopes", "offsets", "clients", "hidden_width",
                          "num_clients", "samples_per_client", "heterogeneity", "seed",
                          "num_classes", "input_dim", "class_separation", "gradient_bound",
                          "sigma_g_box"})) {
    return;
  }
  p.kind = Enum(r, j, path, "kind", kProblemKinds, ProblemKind::kQuadratic, true);
  if (!r.ok()) return;

  // Keys that belong to a different kind are rejected as unknown.
  auto only = [&](std::initializer_list<absl::string_view> allowed) {
    r.Object(j, path, allowed);
  };
  switch (p.kind) {
    case ProblemKind::kQuadratic:
      only({"kind", "b", "gradient_bound", "sigma_g_box"});
      p.b = r.NumberArray(j, path, "b", true);
      if (r.ok() && p.b.empty()) r.Fail("problem.b", "needs at least one client");
      break;
    case ProblemKind::kScalarRegression:
      only({"kind", "slopes", "offsets", "gradient_bound", "sigma_g_box"});
      p.slopes = r.NumberArray(j, path, "slopes", true);
      p.offsets = r.NumberArray(j, path, "offsets", true);
      if (r.ok() && p.slopes.size() != p.offsets.size()) {
        r.Fail("problem.offsets", "must have the same length as problem.slopes");
      }
      break;
    case ProblemKind::kLinearRegression: {
      only({"kind", "clients", "gradient_bound", "sigma_g_box"});
      const json* clients = r.Find(j, path, "clients", true);
      if (clients == nullptr) break;
      if (!clients->is_array() || clients->empty()) {
        r.Fail("problem.clients", "expected a non-empty array");
        break;
      }
      for (size_t i = 0; i < clients->size() && r.ok(); ++i) {
        const std::string cpath = absl::StrCat("problem.clients[", i, "]");
        const json& c = (*clients)[i];
        if (!r.Object(c, cpath, {"a", "b"})) break;
        LinearClientSpec spec;
        const json* a = r.Find(c, cpath, "a", true);
        if (a != nullptr) {
          if (!a->is_array() || a->empty()) {
            r.Fail(cpath + ".a", "expected a non-empty array of rows");
            break;
          }
          for (size_t k = 0; k < a->size(); ++k) {
            spec.a.push_back(r.NumberArray((*a)[k], absl::StrCat(cpath, ".a[", k, "]")));
            if (r.ok() && spec.a.back().size() != spec.a.front().size()) {
              r.Fail(absl::StrCat(cpath, ".a[", k, "]"), "ragged row");
            }
          }
        }
        spec.b = r.NumberArray(c, cpath, "b", true);
        if (r.ok() && spec.b.size() != spec.a.size()) {
          r.Fail(cpath + ".b", "length must equal the number of rows of a");
        }
        p.clients.push_back(std::move(spec));
      }
      break;
    }
    case ProblemKind::kMlp:
      only({"kind", "hidden_width", "num_clients", "samples_per_client", "heterogeneity", "seed",
            "num_classes", "input_dim", "class_separation", "gradient_bound"});
      p.mlp.hidden_width =
          static_cast<int>(r.Integer(j, path, "hidden_width", p.mlp.hidden_width, false, 1));
      p.mlp.num_clients =
          static_cast<int>(r.Integer(j, path, "num_clients", p.mlp.num_clients, false, 1));
      p.mlp.samples_per_client = static_cast<int>(
          r.Integer(j, path, "samples_per_client", p.mlp.samples_per_client, false, 1));
      p.mlp.heterogeneity = r.Number(j, path, "heterogeneity", p.mlp.heterogeneity);
      if (r.ok() && !(p.mlp.heterogeneity >= 0.0 && p.mlp.heterogeneity <= 1.0)) {
        r.Fail("problem.heterogeneity", "must lie in [0, 1]");
      }
      p.mlp.seed = r.Seed(j, path, "seed", p.mlp.seed);
      p.mlp.num_classes =
          static_cast<int>(r.Integer(j, path, "num_classes", p.mlp.num_classes, false, 2));
      p.mlp.input_dim =
          static_cast<int>(r.Integer(j, path, "input_dim", p.mlp.input_dim, false, 1));
      p.mlp.class_separation = r.Number(j, path, "class_separation", p.mlp.class_separation);
      break;
  }
  if (j.contains("gradient_bound")) {
    p.gradient_bound = r.NumberOrInf(j, path, "gradient_bound", kInf);
    if (r.ok() && !(*p.gradient_bound > 0.0)) r.Fail("problem.gradient_bound", "must be positive");
  }
  if (const json* box = r.Find(j, path, "sigma_g_box", false); box != nullptr) {
    const std::string bpath = "problem.sigma_g_box";
    if (!r.Object(*box, bpath, {"center", "radius"})) return;
    SigmaGBox b;
    b.center = r.NumberArray(*box, bpath, "center", true);
    b.radius = r.Number(*box, bpath, "radius", 1.0, true);
    if (r.ok() && !(b.radius > 0.0 && std::isfinite(b.radius))) {
      r.Fail(bpath + ".radius", "must be positive and finite");
    }
    p.sigma_g_box = std::move(b);
  }
}

void ParseRun(Reader& r, const json& j, RunSpec& run) {
  const std::string path = "run";
  if (!r.Object(j, path, {"rounds", "local_steps", "clients_per_round", "eta_l", "eta_g",
                          "participation", "seed", "x0", "oracle", "probes", "threads"})) {
    return;
  }
  run.rounds = static_cast<int>(r.Integer(j, path, "rounds", run.rounds, true, 1));
  if (const json* q = r.Find(j, path, "local_steps", true); q != nullptr) {
    if (q->is_string() && q->get<std::string>() == "inf") {
      run.local_steps = kUntilConverged;
    } else {
      run.local_steps = r.AsInteger(*q, "run.local_steps", 1, 1, kMaxLocalSteps);
    }
  }
  run.clients_per_round =
      static_cast<int>(r.Integer(j, path, "clients_per_round", run.clients_per_round, true, 1));
  run.eta_l = r.Number(j, path, "eta_l", run.eta_l, true);
  run.eta_g = r.Number(j, path, "eta_g", run.eta_g, true);
  run.participation = Enum(r, j, path, "participation", kParticipations, run.participation);
  run.seed = r.Seed(j, path, "seed", run.seed);
  if (j.contains("x0")) run.x0 = r.NumberArray(j, path, "x0", true);
  run.threads = static_cast<int>(r.Integer(j, path, "threads", run.threads, false, 1, 1024));

  if (const json* o = r.Find(j, path, "oracle", false); o != nullptr) {
    const std::string opath = "run.oracle";
    if (r.Object(*o, opath, {"mode", "sigma_l", "batch_size"})) {
      run.oracle.mode = Enum(r, *o, opath, "mode", kNoiseModes, run.oracle.mode);
      run.oracle.sigma_l = r.Number(*o, opath, "sigma_l", run.oracle.sigma_l);
      if (r.ok() && !(run.oracle.sigma_l >= 0.0)) r.Fail(opath + ".sigma_l", "must be >= 0");
      run.oracle.batch_size =
          static_cast<int>(r.Integer(*o, opath, "batch_size", run.oracle.batch_size, false, 1));
    }
  }
  if (const json* p = r.Find(j, path, "probes", false); p != nullptr) {
    const std::string ppath = "run.probes";
    if (r.Object(*p, ppath, {"all_clients", "replays", "record_drift"})) {
      run.probes.all_clients = r.Bool(*p, ppath, "all_clients", run.probes.all_clients);
      run.probes.replays =
          static_cast<int>(r.Integer(*p, ppath, "replays", run.probes.replays, false, 1));
      run.probes.record_drift = r.Bool(*p, ppath, "record_drift", run.probes.record_drift);
    }
  }
}

void ParseClipping(Reader& r, const json& j, ClippingPolicy& policy) {
  const std::string path = "clipping";
  if (!r.Object(j, path, {"mode", "threshold", "auto_rho"})) return;
  policy.mode = Enum(r, j, path, "mode", kClipModes, ClipMode::kNone, true);
  if (j.contains("threshold")) policy.threshold = r.NumberOrInf(j, path, "threshold", kInf);
  if (j.contains("auto_rho")) policy.auto_rho = r.Number(j, path, "auto_rho", 0.0);
  if (r.ok()) {
    if (absl::Status s = ValidatePolicy(policy); !s.ok()) r.Fail(path, s.message());
  }
}

void ParsePrivacy(Reader& r, const json& j, PrivacyConfig& privacy) {
  const std::string path = "privacy";
  if (!r.Object(j, path, {"enabled", "epsilon", "delta", "u", "v"})) return;
  privacy.enabled = r.Bool(j, path, "enabled", privacy.enabled);
  privacy.epsilon = r.Number(j, path, "epsilon", privacy.epsilon);
  privacy.delta = r.Number(j, path, "delta", privacy.delta);
  privacy.u = r.Number(j, path, "u", privacy.u);
  privacy.v = r.Number(j, path, "v", privacy.v);
  if (r.ok()) {
    if (absl::Status s = ValidatePrivacy(privacy); !s.ok()) r.Fail(path, s.message());
  }
}

void ParseReplicates(Reader& r, const json& j, uint64_t run_seed, std::vector<uint64_t>& seeds) {
  const std::string path = "replicates";
  if (!r.Object(j, path, {"count", "seeds"})) return;
  const bool has_count = j.contains("count");
  const int64_t count = r.Integer(j, path, "count", 1, false, 1);
  if (const json* s = r.Find(j, path, "seeds", false); s != nullptr) {
    if (!s->is_array() || s->empty()) {
      r.Fail("replicates.seeds", "expected a non-empty array");
      return;
    }
    for (size_t k = 0; k < s->size(); ++k) {
      seeds.push_back(r.AsSeed((*s)[k], absl::StrCat("replicates.seeds[", k, "]")));
    }
    if (r.ok() && has_count && static_cast<size_t>(count) != seeds.size()) {
      r.Fail("replicates.count", "does not match the length of replicates.seeds");
    }
  } else {
    for (int64_t k = 0; k < count; ++k) seeds.push_back(run_seed + static_cast<uint64_t>(k));
  }
}

ordered_json InfOr(double v) {
  return std::isinf(v) ? ordered_json("inf") : ordered_json(v);
}

}  // namespace

std::string ProblemKindName(ProblemKind kind) { return NameOf(kProblemKinds, kind); }

absl::StatusOr<ExperimentConfig> ParseConfig(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return absl::InvalidArgumentError("config is not valid JSON");

  Reader r;
  ExperimentConfig config;
  if (!r.Object(j, "", {"task", "problem", "run", "clipping", "privacy", "output_dir",
                        "replicates"})) {
    return r.status();
  }
  config.task = Enum(r, j, "", "task", kTasks, TaskKind::kSimulate);
  const bool simulate = config.task == TaskKind::kSimulate;
  if (const json* p = r.Find(j, "", "problem", simulate); p != nullptr) {
    ParseProblem(r, *p, config.problem);
  }
  if (const json* run = r.Find(j, "", "run", simulate); run != nullptr) {
    ParseRun(r, *run, config.run);
  }
  if (const json* c = r.Find(j, "", "clipping", false); c != nullptr) {
    ParseClipping(r, *c, config.clipping);
  }
  if (const json* p = r.Find(j, "", "privacy", false); p != nullptr) {
    ParsePrivacy(r, *p, config.privacy);
  }
  config.output_dir = r.String(j, "", "output_dir", config.output_dir);
  if (r.ok() && config.output_dir.empty()) r.Fail("output_dir", "must not be empty");
  if (const json* rep = r.Find(j, "", "replicates", false); rep != nullptr) {
    ParseReplicates(r, *rep, config.run.seed, config.replicate_seeds);
  } else {
    config.replicate_seeds = {config.run.seed};
  }
  if (!r.ok()) return r.status();
  return config;
}

absl::StatusOr<ExperimentConfig> LoadConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::InvalidArgumentError(absl::StrCat("cannot read config file ", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfig(buffer.str());
}

namespace {

ordered_json SerializeProblem(const ProblemSpec& p) {
  ordered_json problem;
  problem["kind"] = ProblemKindName(p.kind);
  switch (p.kind) {
    case ProblemKind::kQuadratic:
      problem["b"] = p.b;
      break;
    case ProblemKind::kScalarRegression:
      problem["slopes"] = p.slopes;
      problem["offsets"] = p.offsets;
      break;
    case ProblemKind::kLinearRegression: {
      ordered_json clients = ordered_json::array();
      for (const LinearClientSpec& c : p.clients) {
        ordered_json entry;
        entry["a"] = c.a;
        entry["b"] = c.b;
        clients.push_back(std::move(entry));
      }
      problem["clients"] = std::move(clients);
      break;
    }
    case ProblemKind::kMlp:
      problem["hidden_width"] = p.mlp.hidden_width;
      problem["num_clients"] = p.mlp.num_clients;
      problem["samples_per_client"] = p.mlp.samples_per_client;
      problem["heterogeneity"] = p.mlp.heterogeneity;
      problem["seed"] = p.mlp.seed;
      problem["num_classes"] = p.mlp.num_classes;
      problem["input_dim"] = p.mlp.input_dim;
      problem["class_separation"] = p.mlp.class_separation;
      break;
  }
  if (p.gradient_bound.has_value()) problem["gradient_bound"] = InfOr(*p.gradient_bound);
  if (p.sigma_g_box.has_value()) {
    problem["sigma_g_box"] = {{"center", p.sigma_g_box->center},
                              {"radius", p.sigma_g_box->radius}};
  }
  return problem;
}

ordered_json SerializeRun(const RunSpec& r) {
  ordered_json run;
  run["rounds"] = r.rounds;
  run["local_steps"] =
      r.local_steps == kUntilConverged ? ordered_json("inf") : ordered_json(r.local_steps);
  run["clients_per_round"] = r.clients_per_round;
  run["eta_l"] = r.eta_l;
  run["eta_g"] = r.eta_g;
  run["participation"] = NameOf(kParticipations, r.participation);
  run["seed"] = r.seed;
  if (r.x0.has_value()) run["x0"] = *r.x0;
  run["oracle"] = {{"mode", NameOf(kNoiseModes, r.oracle.mode)},
                   {"sigma_l", r.oracle.sigma_l},
                   {"batch_size", r.oracle.batch_size}};
  run["probes"] = {{"all_clients", r.probes.all_clients},
                   {"replays", r.probes.replays},
                   {"record_drift", r.probes.record_drift}};
  run["threads"] = r.threads;
  return run;
}

void SerializeRest(const ExperimentConfig& config, ordered_json& root) {
  ordered_json clipping;
  clipping["mode"] = NameOf(kClipModes, config.clipping.mode);
  if (config.clipping.threshold.has_value()) {
    clipping["threshold"] = InfOr(*config.clipping.threshold);
  }
  if (config.clipping.auto_rho.has_value()) clipping["auto_rho"] = *config.clipping.auto_rho;
  root["clipping"] = std::move(clipping);

  root["privacy"] = {{"enabled", config.privacy.enabled},
                     {"epsilon", config.privacy.epsilon},
                     {"delta", config.privacy.delta},
                     {"u", config.privacy.u},
                     {"v", config.privacy.v}};
  root["output_dir"] = config.output_dir;
  root["replicates"] = {{"count", config.replicate_seeds.size()},
                        {"seeds", config.replicate_seeds}};
}

}  // namespace

std::string SerializeConfig(const ExperimentConfig& config) {
  ordered_json root;
  root["task"] = NameOf(kTasks, config.task);
  // The table task ignores problem and run, and a default problem would not
  // parse back.
  if (config.task == TaskKind::kSimulate) {
    root["problem"] = SerializeProblem(config.problem);
    root["run"] = SerializeRun(config.run);
  }
  SerializeRest(config, root);
  return root.dump(2) + "\n";
}

absl::StatusOr<ProblemInstance> BuildProblem(const ProblemSpec& spec) {
  absl::StatusOr<ProblemInstance> problem;
  switch (spec.kind) {
    case ProblemKind::kQuadratic:
      problem = BuildQuadraticEnsemble(spec.b);
      break;
    case ProblemKind::kScalarRegression:
      problem = BuildScalarRegressionEnsemble(spec.slopes, spec.offsets);
      break;
    case ProblemKind::kLinearRegression: {
      std::vector<Eigen::MatrixXd> a_list;
      std::vector<Eigen::VectorXd> b_list;
      for (const LinearClientSpec& c : spec.clients) {
        const int rows = static_cast<int>(c.a.size());
        const int cols = rows == 0 ? 0 : static_cast<int>(c.a.front().size());
        Eigen::MatrixXd a(rows, cols);
        for (int i = 0; i < rows; ++i) {
          for (int k = 0; k < cols; ++k) a(i, k) = c.a[i][k];
        }
        a_list.push_back(std::move(a));
        b_list.push_back(Eigen::Map<const Eigen::VectorXd>(c.b.data(),
                                                           static_cast<int>(c.b.size())));
      }
      problem = BuildLinearRegressionEnsemble(a_list, b_list);
      break;
    }
    case ProblemKind::kMlp:
      problem = BuildMlpSyntheticEnsemble(spec.mlp);
      break;
  }
  if (!problem.ok()) return problem.status();
  if (spec.gradient_bound.has_value()) problem->constants.gradient_bound = *spec.gradient_bound;
  if (spec.sigma_g_box.has_value()) {
    if (spec.kind == ProblemKind::kMlp) {
      return absl::InvalidArgumentError("problem.sigma_g_box applies to quadratic kinds only");
    }
    const auto& center = spec.sigma_g_box->center;
    absl::Status s = RecomputeSigmaGOverBox(
        *problem, Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<int>(center.size())),
        spec.sigma_g_box->radius);
    if (!s.ok()) return s;
  }
  return problem;
}

RunConfig MakeRunConfig(const ExperimentConfig& config, uint64_t seed) {
  const RunSpec& r = config.run;
  RunConfig out;
  out.rounds = r.rounds;
  out.local_steps = r.local_steps;
  out.clients_per_round = r.clients_per_round;
  out.eta_l = r.eta_l;
  out.eta_g = r.eta_g;
  out.policy = config.clipping;
  out.privacy = config.privacy;
  out.seed = seed;
  if (r.x0.has_value()) {
    out.x0 = Eigen::Map<const Eigen::VectorXd>(r.x0->data(), static_cast<int>(r.x0->size()));
  }
  out.participation = r.participation;
  out.oracle = r.oracle;
  out.probes = r.probes;
  out.threads = r.threads;
  return out;
}

}  // namespace fedclip
