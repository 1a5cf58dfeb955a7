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

#include "clpose/polarfft.hpp"

#include <cmath>

#include "clpose/error.hpp"

namespace clpose {

namespace {

PolarStack make_skeleton(const ProjectionStack& stack, const PolarConfig& cfg)
{
  if (stack.n < 1) throw input_error("polarfft", "empty projection stack");
  const int side = stack.side;
  for (const auto& img : stack.images)
    if (img.side != side || img.v.size() != static_cast<size_t>(side) * side)
      throw input_error("polarfft", "non-square or mismatched image in stack");

  PolarStack pol;
  pol.n = stack.n;
  pol.n_theta = cfg.n_theta;
  pol.n_r = cfg.n_r > 0 ? cfg.n_r : side / 2;
  pol.src_side = side;
  pol.rmax = cfg.rmax;
  pol.fmin = cfg.fmin > 0.0 ? cfg.fmin : 2.0 / side;

  if (pol.n_theta < 36 || pol.n_theta % 2 != 0)
    throw input_error("polarfft", "n_theta must be even and >= 36");
  if (pol.n_r < 2 || pol.n_r < side / 2)
    throw input_error("polarfft", "n_r must be >= max(2, side/2)");
  if (!(pol.rmax > pol.fmin) || pol.rmax > 0.5)
    throw input_error("polarfft", "need fmin < rmax <= 0.5");

  pol.freq.resize(pol.n_r);
  const double df = (pol.rmax - pol.fmin) / (pol.n_r - 1);
  for (int j = 0; j < pol.n_r; ++j) pol.freq[j] = pol.fmin + df * j;
  pol.rays.assign(static_cast<size_t>(pol.n) * pol.n_theta * pol.n_r, {0.0, 0.0});
  return pol;
}

}  // namespace

PolarStack polar_transform(const ProjectionStack& stack, const PolarConfig& cfg)
{
  PolarStack pol = make_skeleton(stack, cfg);
  const int side = stack.side;
  const int c = side / 2;
  const double df = pol.freq.size() > 1 ? pol.freq[1] - pol.freq[0] : 0.0;

#pragma omp parallel
  {
    std::vector<std::complex<double>> z(static_cast<size_t>(side) * side);
    std::vector<std::complex<double>> w(static_cast<size_t>(side) * side);
#pragma omp for schedule(dynamic) collapse(2)
    for (int k = 0; k < pol.n; ++k) {
      for (int l = 0; l < pol.n_theta; ++l) {
        const Image& img = stack.images[k];
        const double ct = std::cos(pol.theta(l));
        const double st = std::sin(pol.theta(l));
        // u = x*cos + y*sin per pixel; successive frequencies differ by a
        // constant phase step, so one exponential pair per pixel suffices.
        for (int py = 0; py < side; ++py) {
          for (int px = 0; px < side; ++px) {
            const double u = (px - c) * ct + (py - c) * st;
            const size_t idx = static_cast<size_t>(py) * side + px;
            z[idx] = std::polar(1.0, -2.0 * M_PI * pol.freq[0] * u);
            w[idx] = std::polar(1.0, -2.0 * M_PI * df * u);
          }
        }
        std::complex<double>* out = pol.ray(k, l);
        for (int j = 0; j < pol.n_r; ++j) {
          std::complex<double> acc(0.0, 0.0);
          const double* pix = img.v.data();
          for (size_t idx = 0; idx < z.size(); ++idx) {
            acc += pix[idx] * z[idx];
            z[idx] *= w[idx];
          }
          out[j] = acc;
        }
      }
    }
  }
  return pol;
}

PolarStack phase_correct(const PolarStack& pol, const std::vector<Eigen::Vector2d>& shifts)
{
  if (static_cast<int>(shifts.size()) != pol.n)
    throw input_error("polarfft", "shift list length does not match stack");
  for (const auto& s : shifts)
    if (!s.allFinite()) throw input_error("polarfft", "non-finite shift");

  PolarStack out = pol;
  out.corrected = true;
#pragma omp parallel for schedule(static) collapse(2)
  for (int k = 0; k < pol.n; ++k) {
    for (int l = 0; l < pol.n_theta; ++l) {
      const double proj = shifts[k].x() * std::cos(pol.theta(l)) + shifts[k].y() * std::sin(pol.theta(l));
      std::complex<double>* ray = out.ray(k, l);
      for (int j = 0; j < pol.n_r; ++j)
        ray[j] *= std::polar(1.0, -2.0 * M_PI * pol.freq[j] * proj);
    }
  }
  return out;
}

std::vector<std::complex<double>> extract_ray(const PolarStack& pol, int k, int c)
{
  if (k < 0 || k >= pol.n) throw input_error("polarfft", "projection index out of range");
  if (c < 1 || c > 2 * pol.n_theta) throw input_error("polarfft", "ray index out of range");
  std::vector<std::complex<double>> out(pol.n_r);
  if (c <= pol.n_theta) {
    const std::complex<double>* r = pol.ray(k, c - 1);
    for (int j = 0; j < pol.n_r; ++j) out[j] = r[j];
  } else {
    const std::complex<double>* r = pol.ray(k, c - 1 - pol.n_theta);
    for (int j = 0; j < pol.n_r; ++j) out[j] = std::conj(r[j]);
  }
  return out;
}

namespace ref {

PolarStack polar_transform(const ProjectionStack& stack, const PolarConfig& cfg)
{
  PolarStack pol = make_skeleton(stack, cfg);
  const int side = stack.side;
  const int c = side / 2;
  for (int k = 0; k < pol.n; ++k) {
    const Image& img = stack.images[k];
    for (int l = 0; l < pol.n_theta; ++l) {
      const double ct = std::cos(pol.theta(l));
      const double st = std::sin(pol.theta(l));
      std::complex<double>* out = pol.ray(k, l);
      for (int j = 0; j < pol.n_r; ++j) {
        std::complex<double> acc(0.0, 0.0);
        for (int py = 0; py < side; ++py)
          for (int px = 0; px < side; ++px) {
            const double u = (px - c) * ct + (py - c) * st;
            acc += img.at(px, py) * std::polar(1.0, -2.0 * M_PI * pol.freq[j] * u);
          }
        out[j] = acc;
      }
    }
  }
  return pol;
}

}  // namespace ref

}  // namespace clpose
