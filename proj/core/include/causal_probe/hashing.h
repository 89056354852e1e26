// Copyright 2026 The Causal Probe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAUSAL_PROBE_HASHING_H_
#define CAUSAL_PROBE_HASHING_H_

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

namespace causal_probe {

// 64-bit FNV-1a. Used for provenance hashes, store checksums and the
// surface-hash mechanism; not a cryptographic hash.
std::uint64_t Fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

// Lowercase, zero-padded 16-digit hex rendering.
std::string HexDigest(std::uint64_t value);

// Hash of a whole file's bytes. Throws Error when the file cannot be read.
std::uint64_t HashFile(const std::string& path);

std::uint64_t SplitMix64(std::uint64_t x);

// Seed for an independent random stream keyed by (master seed, labels).
// Streams derived this way do not depend on iteration or thread order.
std::uint64_t DeriveStreamSeed(std::uint64_t master_seed,
                               std::string_view label_a,
                               std::string_view label_b);

// Deterministic 64-bit engine with a portable bounded draw.
//
// std::uniform_int_distribution is implementation-defined, so datasets built
// with it would differ across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t Next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return SplitMix64(state_);
  }

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t Below(std::uint64_t bound);

  // Uniform double in [0, 1).
  double Uniform() { return (Next() >> 11) * 0x1.0p-53; }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return Next(); }

 private:
  std::uint64_t state_;
};

}  // namespace causal_probe

#endif  // CAUSAL_PROBE_HASHING_H_
