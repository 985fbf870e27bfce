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

#ifndef FEDCLIP_PRIVACY_H_
#define FEDCLIP_PRIVACY_H_

#include "absl/status/statusor.h"
#include "fedclip/problems.h"
#include "fedclip/rng.h"

namespace fedclip {

// Emitted alongside every calibrated noise level.
inline constexpr char kCalibrationDisclaimer[] =
    "calibration constants u, v are user-supplied; no formal privacy accounting "
    "is performed";

// Client-level Gaussian mechanism parameters. u bounds the admissible epsilon
// (epsilon <= u q^2 T with q = P / N); v scales the noise variance.
struct PrivacyConfig {
  bool enabled = false;
  double epsilon = 1.0;
  double delta = 1e-5;
  double u = 1.0;
  double v = 2.0;

  friend bool operator==(const PrivacyConfig&, const PrivacyConfig&) = default;
};

absl::Status ValidatePrivacy(const PrivacyConfig& config);

// Per-client, per-round noise. sigma2 is the per-coordinate variance.
struct NoiseSpec {
  double sigma2 = 0.0;
  int dimension = 0;
  // epsilon <= u (P/N)^2 T; only meaningful when privacy is enabled.
  bool in_regime = true;
};

// sigma^2 = v c^2 P T ln(1/delta) / (N^2 epsilon^2).
absl::StatusOr<NoiseSpec> CalibrateNoise(const PrivacyConfig& config, double c,
                                         int clients_per_round, int num_clients,
                                         int rounds, int dimension = 1);

// I.i.d. N(0, sigma2) coordinates.
ModelVector DrawNoise(const NoiseSpec& spec, RngStream& stream);

// 2 eta_g L d sigma^2 / (eta_l P Q).
double NoiseTermInBound(const NoiseSpec& spec, double eta_g, double eta_l,
                        int clients_per_round, double local_steps,
                        double lipschitz, int dimension);

}  // namespace fedclip

#endif  // FEDCLIP_PRIVACY_H_
