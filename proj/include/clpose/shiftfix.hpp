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
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "clpose/commonline.hpp"
#include "clpose/polarfft.hpp"

namespace clpose {

// Linear system relating per-projection shifts to measured 1D ray offsets.
// Row for pair (k1, k2) holds [cos a, sin a, -cos b, -sin b] at columns
// (2*k1, 2*k1+1, 2*k2, 2*k2+1) (0-based; pair k occupies the (2k-1, 2k)
// columns in 1-based terms), where a and b are the full-circle grid angles of
// the detected common line, and the right-hand side is the ray offset s*.
// The unknown vector is (dx_1, dy_1, ..., dx_K, dy_K) in pixels.
struct ShiftSystem {
  int K = 0;
  std::vector<std::pair<int, int>> row_pairs;           // 0-based (k1 < k2)
  std::vector<std::pair<double, double>> row_angles;    // (alpha, beta)
  Eigen::MatrixXd A;                                    // M x 2K, 4 nonzeros per row
  Eigen::VectorXd b;

  int rows() const { return static_cast<int>(b.size()); }
};

struct ShiftEstimate {
  Eigen::VectorXd x;       // 2K
  double residual = 0.0;   // ||A x - b||_2
  int round = 0;
};

struct ShiftRefineConfig {
  double epsilon = 0.05;   // stop when ||x_t - x_{t-1}||_inf < epsilon (pixels)
  int max_rounds = 10;
  double s_range = 0.0;    // 0 -> side/8 pixels
  double s_step = 0.25;    // pixels
  double ncc_min = -1.0;   // drop rows whose detection score is below this
  // Large shifts decorrelate the complex ray correlation before any
  // correction is known; when enabled and the initial estimate is zero, the
  // first round detects lines on shift-invariant magnitude profiles and
  // resolves each pair's orientation by the offset-scan score.
  bool bootstrap = true;
};

// Best offset and its correlation score.
std::pair<double, double> estimate_ray_shift_scored(std::span<const std::complex<double>> ray1,
                                                    std::span<const std::complex<double>> ray2,
                                                    const std::vector<double>& freq, double s_range,
                                                    double s_step);

struct ShiftRefineRound {
  int round = 0;
  double residual = 0.0;
  double step_norm = 0.0;      // ||x_t - x_{t-1}||_inf
  double cl_agreement = 1.0;   // fraction of pairs within +-1 ray of previous round
};

struct ShiftRefineResult {
  ShiftEstimate estimate;      // best-residual round
  bool converged = false;
  std::vector<ShiftRefineRound> history;
};

// Grid search over s in [-s_range, s_range] of the normalized correlation
// between ray1 modulated by exp(-2i pi s f) and ray2, with one parabolic
// refinement step around the best grid point.
double estimate_ray_shift(std::span<const std::complex<double>> ray1,
                          std::span<const std::complex<double>> ray2,
                          const std::vector<double>& freq, double s_range, double s_step);

// One row per non-degenerate unordered pair; angles from the common lines
// detected on the corrected stack, rays extracted from the original stack.
ShiftSystem build_system(const PolarStack& pol_original, const PolarStack& pol_corrected,
                         const CommonLineTable& cl, double s_range, double s_step,
                         double ncc_min = -1.0);

// Minimum-norm least-squares solution; the unobservable global-translation
// modes of the rank-deficient system are zeroed.
ShiftEstimate solve_shifts(const ShiftSystem& sys);

// Alternate phase correction with the current estimates, common-line
// re-detection, system assembly and solve, until the estimate or the
// residual stops moving. Returns the best-residual round.
ShiftRefineResult refine_shifts(const PolarStack& pol, const Eigen::VectorXd& x0,
                                const ShiftRefineConfig& cfg);

inline std::vector<Eigen::Vector2d> shifts_from_vector(const Eigen::VectorXd& x)
{
  std::vector<Eigen::Vector2d> out(static_cast<size_t>(x.size() / 2));
  for (size_t k = 0; k < out.size(); ++k) out[k] = {x[2 * k], x[2 * k + 1]};
  return out;
}

inline Eigen::VectorXd shifts_to_vector(const std::vector<Eigen::Vector2d>& s)
{
  Eigen::VectorXd x(2 * s.size());
  for (size_t k = 0; k < s.size(); ++k) {
    x[2 * k] = s[k].x();
    x[2 * k + 1] = s[k].y();
  }
  return x;
}

namespace ref {
// Serial per-pair offset estimation; reference for the parallel assembly.
std::vector<double> pair_offsets(const PolarStack& pol_original, const CommonLineTable& cl,
                                 const std::vector<std::pair<int, int>>& pairs, double s_range,
                                 double s_step);
}  // namespace ref

}  // namespace clpose
