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

#ifndef FEDCLIP_RNG_H_
#define FEDCLIP_RNG_H_

#include <array>
#include <cstdint>
#include <limits>
#include <optional>

namespace fedclip {

// Philox4x32-10 block function. Maps a 128-bit counter and a 64-bit key to
// 128 pseudo-random bits; distinct (counter, key) pairs give independent
// blocks, so any stream can be addressed directly without sequential state.
std::array<uint32_t, 4> Philox4x32(std::array<uint32_t, 4> counter,
                                   std::array<uint32_t, 2> key);

// Purpose tag of a random stream. Streams with different domains never share
// counter space.
enum class StreamDomain : uint32_t {
  kClientSampling = 1,
  kLocalSgd = 2,
  kPrivacyNoise = 3,
  kReplay = 4,
  kProblemData = 5,
  kInitialPoint = 6,
  kTest = 255,
};

// Coordinates of a stream. `index` distinguishes duplicate selections of the
// same client in a round, or replay number; it must fit in 24 bits.
struct StreamKey {
  StreamDomain domain = StreamDomain::kTest;
  uint32_t round = 0;
  uint32_t client = 0;
  uint32_t index = 0;
};

// Counter-based random stream. Two streams built from the same seed and key
// produce the same sequence regardless of construction order or thread, which
// is what makes parallel rounds bit-reproducible.
//
// Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = uint32_t;

  RngStream(uint64_t seed, StreamKey key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  uint64_t NextU64();
  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  // Standard normal via Box-Muller; draws are consumed in pairs.
  double Normal();
  // Uniform integer in [0, n). Requires n > 0.
  uint64_t UniformInt(uint64_t n);

 private:
  void Refill();

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> counter_;
  std::array<uint32_t, 4> block_{};
  int used_ = 4;
  std::optional<double> spare_normal_;
};

}  // namespace fedclip

#endif  // FEDCLIP_RNG_H_
