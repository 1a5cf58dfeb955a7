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

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "clpose/grid.hpp"
#include "clpose/rotation.hpp"

namespace clpose {

// One isotropic Gaussian blob. The center lives in normalized volume
// coordinates with the origin at the volume center, valid range
// [-0.5, 0.5]^3; sigma is a fraction of the cube side.
struct GaussianBlob {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double sigma = 0.1;
  double amplitude = 1.0;
};

struct GaussianBlobPhantom {
  std::vector<GaussianBlob> blobs;
};

// Blob layout with no point-group or mirror symmetry, kept well inside the
// central half of the frame so in-plane shifts up to side/8 never wrap
// signal around the periodic boundary.
GaussianBlobPhantom default_phantom();

struct ProjectionStack {
  int n = 0;
  int side = 0;
  std::vector<Image> images;
  std::vector<Rotation> true_rotations;        // empty or size n
  std::vector<Eigen::Vector2d> true_shifts;    // empty or size n, pixels
  double snr = 0.0;                            // 0 = noiseless
  uint64_t seed = 0;
};

Volume make_phantom(const GaussianBlobPhantom& spec, int side);

// Line integral of the volume along the viewing direction d, sampled on the
// image grid spanned by (q, y). Ray-driven trilinear interpolation with a
// 0.5 voxel step; zero outside the volume support.
Image project(const Volume& vol, const Rotation& rot);

std::vector<Image> project_stack(const Volume& vol, const std::vector<Rotation>& rots);

// Periodic Fourier-domain translation. The output satisfies
// out(x, y) = in(x + dx, y + dy); subpixel shifts allowed.
Image apply_shift(const Image& img, double dx, double dy);

// Additive white Gaussian noise with variance var(signal pixels)/snr, where
// the signal variance is taken over every pixel of the clean stack.
ProjectionStack add_noise(const ProjectionStack& stack, double snr, uint64_t seed);

// i.i.d. Haar-uniform rotations.
std::vector<Rotation> random_rotations(int n, uint64_t seed);

// Raised-cosine circular support mask. radius_frac and taper_frac are
// fractions of the half-side; the window is 1 inside radius-taper, 0 outside
// the radius. Suppresses the pure-noise area outside the particle before
// common-line detection.
Image apply_circular_mask(const Image& img, double radius_frac, double taper_frac);
ProjectionStack masked_stack(const ProjectionStack& stack, double radius_frac, double taper_frac);

// Convenience: project a phantom at given rotations, apply per-image shifts,
// then add noise (snr <= 0 disables noise). Records ground truth in the stack.
ProjectionStack simulate_stack(const GaussianBlobPhantom& phantom, int side,
                               const std::vector<Rotation>& rots,
                               const std::vector<Eigen::Vector2d>& shifts, double snr,
                               uint64_t seed);

namespace ref {
// Serial reference kernels used by tests and the benchmark.
Volume make_phantom(const GaussianBlobPhantom& spec, int side);
std::vector<Image> project_stack(const Volume& vol, const std::vector<Rotation>& rots);
}  // namespace ref

}  // namespace clpose
