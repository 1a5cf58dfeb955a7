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
#include <vector>

#include "clpose/simdata.hpp"

namespace clpose {

// Polar-grid Fourier transforms of a projection stack. Ray l (0-based) has
// grid angle theta_l = pi*l/n_theta, measured from the image x-axis, and
// samples the continuous 2D transform along direction (cos theta, sin theta)
// at the frequencies in freq (cycles/pixel). The second half-circle is not
// stored: for real images the ray at theta+pi is the complex conjugate.
struct PolarStack {
  int n = 0;
  int n_theta = 0;
  int n_r = 0;
  int src_side = 0;
  double rmax = 0.0;
  double fmin = 0.0;
  bool corrected = false;
  std::vector<double> freq;                  // n_r, strictly increasing, no DC
  std::vector<std::complex<double>> rays;    // [(k*n_theta + l)*n_r + j]

  std::complex<double>* ray(int k, int l)
  {
    return rays.data() + (static_cast<size_t>(k) * n_theta + l) * n_r;
  }
  const std::complex<double>* ray(int k, int l) const
  {
    return rays.data() + (static_cast<size_t>(k) * n_theta + l) * n_r;
  }
  double theta(int l) const { return M_PI * l / n_theta; }
};

struct PolarConfig {
  int n_theta = 180;
  int n_r = 0;        // 0 -> side/2
  double rmax = 0.35; // cycles/pixel
  double fmin = 0.0;  // 0 -> 2/side
};

PolarStack polar_transform(const ProjectionStack& stack, const PolarConfig& cfg = {});

// Applies the per-ray phase factor exp(-2i pi f (dx cos theta + dy sin theta))
// for each projection's shift estimate. Undoes apply_shift(img, dx, dy) on
// the polar samples. The input stack is left untouched.
PolarStack phase_correct(const PolarStack& pol, const std::vector<Eigen::Vector2d>& shifts);

// Ray index c is 1-based in [1, 2*n_theta]; indices above n_theta address the
// conjugated theta+pi ray.
std::vector<std::complex<double>> extract_ray(const PolarStack& pol, int k, int c);

// Full-circle grid angle of 1-based ray index c (adds pi on the conjugate half).
inline double ray_angle(const PolarStack& pol, int c) { return M_PI * (c - 1) / pol.n_theta; }

namespace ref {
// Direct evaluation of the polar sums with one complex exponential per
// sample; serial. Reference for the phase-recurrence kernel.
PolarStack polar_transform(const ProjectionStack& stack, const PolarConfig& cfg = {});
}  // namespace ref

}  // namespace clpose
