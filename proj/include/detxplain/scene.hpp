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

#ifndef DETXPLAIN_SCENE_HPP_
#define DETXPLAIN_SCENE_HPP_

#include <cstdint>
#include <vector>

#include "detxplain/imaging.hpp"

namespace detxplain {

// Synthetic ultrasound-like scene standing in for real nodule data.
struct SyntheticScene {
  Image image;
  std::vector<BBox> ground_truth;
  std::uint64_t seed = 0;
};

// Speckle background (multiplicative uniform noise smoothed by a 3x3 box
// filter) with n_nodules bright elliptical nodules, each with a diffuse edge
// and a dark halo. Nodules never overlap. Requires height, width >= 64 and
// n_nodules in [0, 3]; throws kData if placement fails after bounded retries.
SyntheticScene GenerateScene(int height, int width, int n_nodules,
                             std::uint64_t seed);

}  // namespace detxplain

#endif  // DETXPLAIN_SCENE_HPP_
