/*
 * Copyright 2026 The detxplain Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DETXPLAIN_RANDOM_HPP_
#define DETXPLAIN_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace detxplain {

// Derives an independent sub-seed from a master seed, a stage label and an
// index: splitmix64(master ^ fnv1a64(stage) ^ (index * golden ratio)).
// Every seeded stage (scene, masks, LIME sampling, ...) draws its seed this
// way so any stage can be reproduced on its own.
std::uint64_t SplitSeed(std::uint64_t master, std::string_view stage,
                        std::uint64_t index = 0);

// mt19937_64 with portable conversions; the standard distributions are
// implementation-defined and would break cross-platform determinism.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  bool Bernoulli(double p) { return Uniform() < p; }
  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n) {
    return static_cast<std::uint64_t>(Uniform() * static_cast<double>(n));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detxplain

#endif  // DETXPLAIN_RANDOM_HPP_
