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
#include <cmath>

#include "clpose/error.hpp"

namespace clpose {

// Orientation of one projection. Columns of the matrix are the lab-frame
// coordinates of the image x-axis (q), the image y-axis (y = d x q), and
// the viewing direction (d). A pixel (u, v) of the projection at depth t
// sits at u*q + v*y + t*d in the lab frame.
struct Rotation {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

  Eigen::Vector3d q() const { return m.col(0); }
  Eigen::Vector3d yaxis() const { return m.col(1); }
  Eigen::Vector3d d() const { return m.col(2); }

  static Rotation identity() { return Rotation{}; }

  static Rotation from_matrix(const Eigen::Matrix3d& r, double tol = 1e-12)
  {
    Rotation out{r};
    out.validate(tol);
    return out;
  }

  void validate(double tol = 1e-12) const
  {
    const Eigen::Matrix3d err = m.transpose() * m - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > tol)
      throw input_error("rotation", "matrix columns are not orthonormal");
    if (std::abs(m.determinant() - 1.0) > tol)
      throw input_error("rotation", "matrix determinant is not +1");
    if ((m.col(0).cross(m.col(1)) - m.col(2)).cwiseAbs().maxCoeff() > 1e-9)
      throw input_error("rotation", "third column is not col0 x col1");
  }
};

// Geodesic angle (radians) between two rotations.
inline double rotation_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b)
{
  const double c = ((a.transpose() * b).trace() - 1.0) * 0.5;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

// ZYZ Euler angles (alpha, beta, gamma) with R = Rz(alpha) Ry(beta) Rz(gamma).
inline std::array<double, 3> euler_zyz(const Eigen::Matrix3d& r)
{
  const double sb = std::hypot(r(0, 2), r(1, 2));
  if (sb < 1e-12) {
    // Gimbal-locked: fold the whole in-plane angle into alpha.
    const double alpha = std::atan2(r(1, 0), r(0, 0));
    const double beta = (r(2, 2) > 0.0) ? 0.0 : M_PI;
    return {r(2, 2) > 0.0 ? alpha : -alpha, beta, 0.0};
  }
  return {std::atan2(r(1, 2), r(0, 2)), std::atan2(sb, r(2, 2)), std::atan2(r(2, 1), -r(2, 0))};
}

// Wrap an angle difference into (-pi, pi].
inline double wrap_angle(double a)
{
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

}  // namespace clpose
