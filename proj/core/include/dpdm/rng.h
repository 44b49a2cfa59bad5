// Copyright 2026 The dpdm Authors
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

#ifndef DPDM_RNG_H_
#define DPDM_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dpdm {

// Mixes one 64-bit word into a hash state (splitmix64 finalizer).
inline std::uint64_t mix64(std::uint64_t state, std::uint64_t word) {
  std::uint64_t z = state + word + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
  // FNV-1a, 64 bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic random stream. All draws are implemented on top of the
/// mt19937_64 word sequence with our own distribution transforms, so the same
/// seed yields the same values on every platform and standard library.
///
/// Streams are derived from a (seed, name) key rather than from engine state,
/// so forking a stream never perturbs the parent's future draws.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key), engine_(key) {}

  /// Named top-level stream, e.g. Rng::stream(seed, "dp-noise").
  static Rng stream(std::uint64_t seed, std::string_view name) {
    return Rng(mix64(seed, hash_name(name)));
  }

  /// Child stream keyed by up to two indices (step, example, ...).
  Rng fork(std::uint64_t a, std::uint64_t b = 0) const {
    return Rng(mix64(mix64(key_, a), b));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the inclusive range [lo, hi].
  long uniform_int(long lo, long hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return lo + static_cast<long>(engine_());  // full 64-bit span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return lo + static_cast<long>(r % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one spare cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpdm

#endif  // DPDM_RNG_H_
