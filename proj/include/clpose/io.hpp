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

#include <string>
#include <utility>
#include <vector>

#include "clpose/grid.hpp"
#include "clpose/polarfft.hpp"
#include "clpose/simdata.hpp"

namespace clpose {

// Binary formats: a 64-byte header (4-byte magic, little-endian uint32
// fields, zero padding) followed by little-endian float32 samples.
//   CPV1  volume, side^3 samples (z, y, x order)
//   CPS1  projection stack, count images of side^2 samples each
//   CPP1  polar stack debug dump, complex64 samples (not a stable format)
// Stacks carry a text sidecar at <path>.meta with ground truth and
// provenance (key: value lines).

void save_volume(const std::string& path, const Volume& vol);
Volume load_volume(const std::string& path);

void save_stack(const std::string& path, const ProjectionStack& stack);
ProjectionStack load_stack(const std::string& path);

void save_polar(const std::string& path, const PolarStack& pol);
PolarStack load_polar(const std::string& path);

// Full-precision text artifacts (one line per image) so that a write/read
// round trip is lossless.
void save_rotations(const std::string& path, const std::vector<Rotation>& rots);
std::vector<Rotation> load_rotations(const std::string& path);
void save_shifts(const std::string& path, const std::vector<Eigen::Vector2d>& shifts);
std::vector<Eigen::Vector2d> load_shifts(const std::string& path);

// "key: value" lines; '#' starts a comment; duplicate keys preserved in order.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
KeyValues parse_kv_text(const std::string& text);
KeyValues parse_kv_file(const std::string& path);
std::string format_double(double v);  // shortest round-trip decimal

}  // namespace clpose
