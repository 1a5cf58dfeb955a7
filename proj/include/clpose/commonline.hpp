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
#include <vector>

#include "clpose/polarfft.hpp"
#include "clpose/rotation.hpp"

namespace clpose {

// Detected common line per ordered pair. cl(i,j) is the 1-based ray index of
// the common line as seen in image i (conjugate half addressed by indices
// above n_theta); C(i,j) = pi*(cl(i,j)-1)/n_theta is its grid angle. The pair
// (cl(i,j), cl(j,i)) jointly maximizes one correlation score, stored
// symmetrically in ncc.
struct CommonLineTable {
  int n = 0;
  int n_theta = 0;
  Eigen::MatrixXi cl;
  Eigen::MatrixXd C;
  Eigen::MatrixXd ncc;
  Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> degenerate;

  bool pair_degenerate(int i, int j) const { return degenerate(i, j) != 0; }
};

// Voted dihedral angles and confidence weights, both symmetric, zero diagonal.
struct DihedralTable {
  int n = 0;
  int T = 0;
  double sigma = 0.0;  // pi/T
  Eigen::MatrixXd theta;
  Eigen::MatrixXd W;
};

// Normalized cross-correlation search over all ray pairs
// (l1 in [1, n_theta], l2 in [1, 2*n_theta]). Rays are mean-removed and
// scaled to unit norm over the frequency grid; the score is the real part of
// the complex inner product.
CommonLineTable detect_common_lines(const PolarStack& pol);

// Magnitude-only variant: correlates |ray| profiles, which are invariant to
// in-plane shifts, at the cost of losing the half-circle orientation pairing
// (cl(j,i) is reported in [1, n_theta]; the caller must resolve the flip).
// Bootstraps shift refinement when shifts are too large for the complex NCC.
CommonLineTable detect_common_lines_magnitude(const PolarStack& pol);

// Ground-truth common lines from known rotations:
// u = (d_i x d_j)/||d_i x d_j||, C_ij = atan2(u . y_i, u . q_i), quantized to
// the nearest ray. Near-parallel viewing directions are flagged degenerate.
CommonLineTable oracle_common_lines(const std::vector<Rotation>& rots, int n_theta);

// Gaussian-kernel voting over third images with sigma = pi/T, histogram
// argmax on a grid of resolution pi/(4T) over [0, pi]. The peak height is the
// confidence weight; pairs with no feasible third image get weight 0 and the
// uninformative placeholder theta = pi/2.
DihedralTable vote_dihedrals(const CommonLineTable& cl, int T);

// Ray-index distance between the detections of pair (i, j) in two tables,
// invariant to the joint half-circle orientation flip.
int ray_pair_distance(const CommonLineTable& a, const CommonLineTable& b, int i, int j);

namespace ref {
// Naive per-ray-pair correlation loop; serial. Reference for the
// matrix-product detection kernel.
CommonLineTable detect_common_lines(const PolarStack& pol);
}  // namespace ref

}  // namespace clpose
