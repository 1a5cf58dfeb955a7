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
#include <array>
#include <optional>
#include <vector>

#include "clpose/grid.hpp"
#include "clpose/rotation.hpp"
#include "clpose/simdata.hpp"

namespace clpose {

// Common lines determine poses only up to a global rotation and a global
// reflection; estimates are aligned to the truth over both chirality
// branches before any error is reported.
struct AlignmentResult {
  Eigen::Matrix3d G = Eigen::Matrix3d::Identity();
  bool reflected = false;
  std::vector<double> per_image_err_deg;
  std::vector<Rotation> aligned;
};

struct MetricReport {
  double theta_mae = 0.0;        // radians, dihedral angles over pairs
  double phi_mae = 0.0;          // radians, in-plane axis angles over pairs
  double inplane_err_deg = 0.0;  // mean residual in-plane rotation
  double normal_err_deg = 0.0;   // mean angle between viewing directions
  std::array<double, 3> euler_mse{0.0, 0.0, 0.0};  // ZYZ, wrapped differences
  std::optional<double> shift_rms_px;              // observable subspace
};

struct FscCurve {
  std::vector<double> shell_freq;  // cycles/voxel
  std::vector<double> corr;
  std::vector<uint8_t> empty_shell;
};

// Orthogonal Procrustes fit of a single global rotation, solved for both the
// identity and the mirrored (conjugation by diag(1,1,-1)) branch; the branch
// with the smaller total error wins.
AlignmentResult align_global(const std::vector<Rotation>& est, const std::vector<Rotation>& truth);

// Error metrics between aligned estimates and the truth. Shift errors, when
// shift vectors are given, are measured in the observable subspace: the
// component along a consistent global 3D translation is unobservable from
// common-line offsets and is projected out using the true rotations.
MetricReport metrics(const std::vector<Rotation>& aligned_est, const std::vector<Rotation>& truth,
                     const std::vector<Eigen::Vector2d>* est_shifts = nullptr,
                     const std::vector<Eigen::Vector2d>* true_shifts = nullptr);

// Fourier Shell Correlation over spherical shells one frequency voxel wide.
FscCurve fsc(const Volume& v1, const Volume& v2, int n_shells);

// Central-section insertion with nearest-neighbor gridding and per-voxel
// count compensation. Shift-corrected slices, order-invariant accumulation.
Volume gridding_reconstruct(const ProjectionStack& stack, const std::vector<Rotation>& poses,
                            const std::vector<Eigen::Vector2d>& shifts);

// Orthonormal basis (2K x 3) of the unobservable global-translation modes of
// the shift system for the given poses.
Eigen::MatrixXd translation_null_basis(const std::vector<Rotation>& rots);

}  // namespace clpose
