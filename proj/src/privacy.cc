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

#include "fedclip/privacy.h"

#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedclip {

absl::Status ValidatePrivacy(const PrivacyConfig& config) {
  if (!(config.epsilon > 0.0)) {
    return absl::InvalidArgumentError("privacy epsilon must be positive");
  }
  if (!(config.delta > 0.0 && config.delta < 1.0)) {
    return absl::InvalidArgumentError("privacy delta must lie within (0, 1)");
  }
  if (!(config.u > 0.0) || !(config.v > 0.0)) {
    return absl::InvalidArgumentError("calibration constants u and v must be positive");
  }
  return absl::OkStatus();
}

absl::StatusOr<NoiseSpec> CalibrateNoise(const PrivacyConfig& config, double c,
                                         int clients_per_round, int num_clients,
                                         int rounds, int dimension) {
  if (absl::Status s = ValidatePrivacy(config); !s.ok()) return s;
  if (!(c >= 0.0) || !std::isfinite(c)) {
    return absl::InvalidArgumentError(
        absl::StrCat("noise calibration needs a finite clipping threshold, got ", c));
  }
  if (clients_per_round < 1 || num_clients < 1 || rounds < 1) {
    return absl::InvalidArgumentError("P, N and T must be positive");
  }
  const double p = clients_per_round;
  const double n = num_clients;
  NoiseSpec spec;
  spec.dimension = dimension;
  spec.sigma2 = config.v * c * c * p * rounds * std::log(1.0 / config.delta) /
                (n * n * config.epsilon * config.epsilon);
  const double q = p / n;
  spec.in_regime = config.epsilon <= config.u * q * q * rounds;
  return spec;
}

ModelVector DrawNoise(const NoiseSpec& spec, RngStream& stream) {
  ModelVector z = ModelVector::Zero(spec.dimension);
  if (spec.sigma2 == 0.0) return z;
  const double sigma = std::sqrt(spec.sigma2);
  for (int k = 0; k < spec.dimension; ++k) z(k) = sigma * stream.Normal();
  return z;
}

double NoiseTermInBound(const NoiseSpec& spec, double eta_g, double eta_l,
                        int clients_per_round, double local_steps,
                        double lipschitz, int dimension) {
  return 2.0 * eta_g * lipschitz * dimension * spec.sigma2 /
         (eta_l * clients_per_round * local_steps);
}

}  // namespace fedclip
