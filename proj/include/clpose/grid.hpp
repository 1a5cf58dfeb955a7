/* Copyright 2026 clpose contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "clpose/error.hpp"

namespace clpose {

// Square image, row-major, x = column index, y = row index.
// Centered coordinates are (x - side/2, y - side/2).
struct Image {
  int side = 0;
  std::vector<double> v;

  Image() = default;
  explicit Image(int side_) : side(side_), v(static_cast<size_t>(side_) * side_, 0.0) {}

  double& at(int x, int y) { return v[static_cast<size_t>(y) * side + x]; }
  double at(int x, int y) const { return v[static_cast<size_t>(y) * side + x]; }
  size_t size() const { return v.size(); }
};

// Cubic voxel grid, index order (z, y, x) slowest to fastest.
struct Volume {
  int side = 0;
  double voxel_size = 1.0;
  std::vector<double> v;

  Volume() = default;
  explicit Volume(int side_) : side(side_), v(static_cast<size_t>(side_) * side_ * side_, 0.0) {}

  double& at(int x, int y, int z)
  {
    return v[(static_cast<size_t>(z) * side + y) * side + x];
  }
  double at(int x, int y, int z) const
  {
    return v[(static_cast<size_t>(z) * side + y) * side + x];
  }
  size_t size() const { return v.size(); }
};

inline void validate_volume(const Volume& vol)
{
  if (vol.side < 8) throw input_error("simdata", "volume side must be >= 8");
  if (vol.v.size() != static_cast<size_t>(vol.side) * vol.side * vol.side)
    throw input_error("simdata", "volume buffer size does not match side^3");
  for (double x : vol.v)
    if (!std::isfinite(x)) throw input_error("simdata", "volume contains non-finite values");
}

}  // namespace clpose
