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

#include "fedclip/rng.h"

#include <cassert>
#include <cmath>
#include <numbers>

namespace fedclip {
namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;
constexpr int kPhiloxRounds = 10;

inline void MulHiLo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t product = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(product >> 32);
  lo = static_cast<uint32_t>(product);
}

inline std::array<uint32_t, 4> PhiloxRound(const std::array<uint32_t, 4>& ctr,
                                           const std::array<uint32_t, 2>& key) {
  uint32_t hi0, lo0, hi1, lo1;
  MulHiLo(kPhiloxM0, ctr[0], hi0, lo0);
  MulHiLo(kPhiloxM1, ctr[2], hi1, lo1);
  return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<uint32_t, 4> Philox4x32(std::array<uint32_t, 4> counter,
                                   std::array<uint32_t, 2> key) {
  counter = PhiloxRound(counter, key);
  for (int r = 1; r < kPhiloxRounds; ++r) {
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
    counter = PhiloxRound(counter, key);
  }
  return counter;
}

RngStream::RngStream(uint64_t seed, StreamKey key)
    : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
      counter_{0, key.round, key.client,
               (static_cast<uint32_t>(key.domain) << 24) |
                   (key.index & 0x00FFFFFFu)} {
  assert(key.index < (1u << 24));
}

void RngStream::Refill() {
  block_ = Philox4x32(counter_, key_);
  ++counter_[0];
  used_ = 0;
}

RngStream::result_type RngStream::operator()() {
  if (used_ == 4) Refill();
  return block_[used_++];
}

uint64_t RngStream::NextU64() {
  const uint64_t hi = (*this)();
  const uint64_t lo = (*this)();
  return (hi << 32) | lo;
}

double RngStream::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double RngStream::Normal() {
  if (spare_normal_.has_value()) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  // u1 in (0, 1] keeps the logarithm finite.
  const double u1 = 1.0 - Uniform();
  const double u2 = Uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

uint64_t RngStream::UniformInt(uint64_t n) {
  assert(n > 0);
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % n;
  uint64_t draw = NextU64();
  while (draw >= limit) draw = NextU64();
  return draw % n;
}

}  // namespace fedclip
