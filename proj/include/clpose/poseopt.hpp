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
#include <utility>
#include <vector>

#include "clpose/commonline.hpp"
#include "clpose/rng.hpp"
#include "clpose/rotation.hpp"

namespace clpose {

// Row i of D is the unit viewing direction d_i, row i of Q the unit in-plane
// x-axis q_i, with d_i orthogonal to q_i.
struct PoseSet {
  Eigen::MatrixXd D;
  Eigen::MatrixXd Q;

  int n() const { return static_cast<int>(D.rows()); }
  // Largest violation of the unit-norm and orthogonality constraints.
  double max_violation() const;
};

// Pairwise tables driving the objective. A and B hold the entrywise products
// cos(C_ij)cos(C_ji) and sin(C_ij)sin(C_ji), so that
// cos(Phi_ij) = A_ij + B_ij * (d_i . d_j).
struct ObjectiveInputs {
  Eigen::MatrixXd cosTheta;
  Eigen::MatrixXd W;
  Eigen::MatrixXd C;  // common-line angles, C(i,j) as seen in image i
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  int n() const { return static_cast<int>(W.rows()); }
  static ObjectiveInputs from_tables(const DihedralTable& dih, const CommonLineTable& cl);
};

enum class Loss {
  l1,  // robust entrywise absolute residuals
  l2,  // squared residuals (ablation)
};

struct OptimizerConfig {
  double alpha = 0.0;     // D step size; 0 -> 1/n
  double beta = 0.0;      // Q step size; 0 -> 1/n
  int k_max = 2000;
  double tol = 1e-7;      // stop when best J improves less than this over 50 iters
  uint64_t seed = 1;
  int restarts = 4;       // random restarts in the initialization stages
  Loss loss = Loss::l1;
};

struct OptTrace {
  std::vector<double> objective;
  std::vector<double> max_violation;
  std::vector<double> step_alpha;
  std::vector<uint8_t> accepted;  // iterate improved the best objective
  size_t rerandomized_rows = 0;
};

// J(D, Q) = sum_{i != j} W_ij l(D D^T - cos Theta)_ij
//         + sum_{i != j} W_ij l(Q Q^T - Z)_ij,   Z = A + B o (D D^T).
double objective(const PoseSet& pose, const ObjectiveInputs& in, Loss loss = Loss::l1);

// Subgradients of J with respect to D and Q (valid gradients away from the
// kinks of the l1 loss).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> objective_gradients(const PoseSet& pose,
                                                                const ObjectiveInputs& in,
                                                                Loss loss = Loss::l1);

// Stage-1 initialization: projected subgradient descent on the first
// objective term with per-row renormalization, from seeded random unit rows.
Eigen::MatrixXd init_viewing_dirs(const ObjectiveInputs& in, const OptimizerConfig& cfg);

// Stage-2 initialization: cos(Phi) is fixed from D0, then the second term is
// minimized over Q by the same projected subgradient scheme.
Eigen::MatrixXd init_inplane(const ObjectiveInputs& in, const Eigen::MatrixXd& D0,
                             const OptimizerConfig& cfg);

// Orthonormal alignment min_{R in SO(3)} || diag(D R Q^T) ||_2^2 solved by a
// 15-degree Euler grid plus Nelder-Mead refinement; the reflection branch is
// evaluated but never returned. Returns (R, attained value).
std::pair<Eigen::Matrix3d, double> align_inplane_to_dirs(const Eigen::MatrixXd& D,
                                                         const Eigen::MatrixXd& Q);

// v projected to the unit sphere orthogonally to `fixed`. Degenerate rows
// (v parallel to fixed) are redrawn from the rng stream and counted.
Eigen::Vector3d project_against(const Eigen::Vector3d& v, const Eigen::Vector3d& fixed, Rng& rng,
                                size_t* rerandomized = nullptr);

// Alternating projected subgradient descent (D-step then Q-step per
// iteration) with best-iterate tracking and step decay on plateaus.
std::pair<PoseSet, OptTrace> coordinate_descent(const PoseSet& start, const ObjectiveInputs& in,
                                                const OptimizerConfig& cfg);

// R_i = [q_i | d_i x q_i | d_i]. Rejects constraint violations beyond 1e-6.
std::vector<Rotation> assemble_rotations(const PoseSet& pose);

// Weighted inconsistency of the common-line directions implied by the pose:
// sum W_ij (1 - u_i . u_j) over pairs, where u_i is the detected line of
// pair (i,j) expressed in the lab frame through image i's axes. Zero iff the
// pose reproduces every detected line with consistent orientation. Unlike J,
// this sees the relative handedness of the D and Q point sets.
double commonline_consistency(const PoseSet& pose, const ObjectiveInputs& in);

// Full estimation pipeline: init D, init Q, alignment, coordinate descent.
// The Gram objective cannot distinguish the two relative orientation
// branches of the D and Q embeddings, so both alignment branches are run
// through the descent and the common-line consistency score picks one.
std::pair<PoseSet, OptTrace> estimate_poses(const ObjectiveInputs& in, const OptimizerConfig& cfg);

}  // namespace clpose
