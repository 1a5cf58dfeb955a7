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

#include "clpose/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "clpose/fft.hpp"
#include "clpose/rng.hpp"

namespace clpose {

namespace {

void check_phantom(const GaussianBlobPhantom& spec, int side)
{
  if (side < 8) throw input_error("simdata", "phantom side must be >= 8");
  if (spec.blobs.empty()) throw input_error("simdata", "phantom needs at least one blob");
  for (const auto& b : spec.blobs) {
    if (b.center.cwiseAbs().maxCoeff() > 0.5)
      throw input_error("simdata", "blob center outside the unit cube");
    if (!(b.sigma > 0.0)) throw input_error("simdata", "blob sigma must be positive");
    if (b.sigma * side < 1.5) throw input_error("simdata", "blob sigma must be >= 1.5 voxels");
  }
}

double blob_sum(const GaussianBlobPhantom& spec, int side, double x, double y, double z)
{
  double acc = 0.0;
  for (const auto& b : spec.blobs) {
    const double sv = b.sigma * side;
    const double dx = x - b.center.x() * side;
    const double dy = y - b.center.y() * side;
    const double dz = z - b.center.z() * side;
    acc += b.amplitude * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * sv * sv));
  }
  return acc;
}

Volume phantom_impl(const GaussianBlobPhantom& spec, int side, bool parallel)
{
  check_phantom(spec, side);
  Volume vol(side);
  const double c = side / 2;
#pragma omp parallel for schedule(static) if (parallel)
  for (int z = 0; z < side; ++z)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) vol.at(x, y, z) = blob_sum(spec, side, x - c, y - c, z - c);
  return vol;
}

inline double trilinear(const Volume& vol, double x, double y, double z)
{
  const int side = vol.side;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int z0 = static_cast<int>(std::floor(z));
  if (x0 < 0 || y0 < 0 || z0 < 0 || x0 >= side - 1 || y0 >= side - 1 || z0 >= side - 1) return 0.0;
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  const double* base = vol.v.data();
  const size_t s = static_cast<size_t>(side);
  const size_t i000 = (static_cast<size_t>(z0) * s + y0) * s + x0;
  const double v000 = base[i000], v100 = base[i000 + 1];
  const double v010 = base[i000 + s], v110 = base[i000 + s + 1];
  const double v001 = base[i000 + s * s], v101 = base[i000 + s * s + 1];
  const double v011 = base[i000 + s * s + s], v111 = base[i000 + s * s + s + 1];
  const double c00 = v000 + (v100 - v000) * fx;
  const double c10 = v010 + (v110 - v010) * fx;
  const double c01 = v001 + (v101 - v001) * fx;
  const double c11 = v011 + (v111 - v011) * fx;
  const double c0 = c00 + (c10 - c00) * fy;
  const double c1 = c01 + (c11 - c01) * fy;
  return c0 + (c1 - c0) * fz;
}

Image project_one(const Volume& vol, const Rotation& rot)
{
  const int side = vol.side;
  const double c = side / 2;
  const Eigen::Vector3d q = rot.q();
  const Eigen::Vector3d ya = rot.yaxis();
  const Eigen::Vector3d d = rot.d();
  const double step = 0.5;
  // t samples on a fixed half-integer grid so axis-aligned rays pass exactly
  // through voxel planes.
  const int tmax = side;  // |t| <= side covers any ray through the cube
  Image img(side);
  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      const double u = px - c;
      const double v = py - c;
      const Eigen::Vector3d origin = u * q + v * ya;
      // Slab test against the open cube in centered coordinates.
      double tlo = -static_cast<double>(tmax), thi = static_cast<double>(tmax);
      bool empty = false;
      for (int a = 0; a < 3 && !empty; ++a) {
        const double o = origin[a], dir = d[a];
        const double lo = -c, hi = side - 1.0 - c;
        if (std::abs(dir) < 1e-12) {
          if (o < lo || o > hi) empty = true;
        } else {
          double t0 = (lo - o) / dir, t1 = (hi - o) / dir;
          if (t0 > t1) std::swap(t0, t1);
          tlo = std::max(tlo, t0);
          thi = std::min(thi, t1);
          if (tlo > thi) empty = true;
        }
      }
      if (empty) continue;
      const int k0 = static_cast<int>(std::floor(tlo / step));
      const int k1 = static_cast<int>(std::ceil(thi / step));
      double acc = 0.0;
      for (int k = k0; k <= k1; ++k) {
        const double t = k * step;
        acc += trilinear(vol, origin.x() + t * d.x() + c, origin.y() + t * d.y() + c,
                         origin.z() + t * d.z() + c);
      }
      img.at(px, py) = acc * step;
    }
  }
  return img;
}

}  // namespace

GaussianBlobPhantom default_phantom()
{
  GaussianBlobPhantom p;
  p.blobs = {
    {{0.05, -0.12, 0.08}, 0.075, 1.00},
    {{-0.14, 0.03, -0.05}, 0.060, 0.85},
    {{0.10, 0.14, -0.11}, 0.050, 0.90},
    {{-0.04, -0.06, 0.13}, 0.042, 0.70},
    {{0.17, 0.02, 0.03}, 0.036, 0.65},
    {{-0.09, -0.16, -0.08}, 0.032, 0.60},
    {{0.02, 0.09, 0.17}, 0.032, 0.55},
    {{-0.17, 0.11, 0.05}, 0.034, 0.50},
    {{0.08, -0.02, -0.16}, 0.038, 0.75},
  };
  return p;
}

Volume make_phantom(const GaussianBlobPhantom& spec, int side)
{
  return phantom_impl(spec, side, true);
}

Image project(const Volume& vol, const Rotation& rot)
{
  validate_volume(vol);
  rot.validate(1e-9);
  return project_one(vol, rot);
}

std::vector<Image> project_stack(const Volume& vol, const std::vector<Rotation>& rots)
{
  validate_volume(vol);
  for (const auto& r : rots) r.validate(1e-9);
  std::vector<Image> out(rots.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(rots.size()); ++i) out[i] = project_one(vol, rots[i]);
  return out;
}

Image apply_shift(const Image& img, double dx, double dy)
{
  const int side = img.side;
  if (std::abs(dx) > side / 8.0 || std::abs(dy) > side / 8.0)
    throw input_error("simdata", "shift exceeds side/8 pixels");
  std::vector<std::complex<double>> buf(img.v.begin(), img.v.end());
  fft2(buf, side, false);
  for (int ky = 0; ky < side; ++ky) {
    const double fy = signed_freq(ky, side);
    for (int kx = 0; kx < side; ++kx) {
      const double fx = signed_freq(kx, side);
      const double phase = 2.0 * M_PI * (fx * dx + fy * dy) / side;
      buf[static_cast<size_t>(ky) * side + kx] *= std::complex<double>(std::cos(phase), std::sin(phase));
    }
  }
  fft2(buf, side, true);
  Image out(side);
  const double norm = 1.0 / (static_cast<double>(side) * side);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = buf[i].real() * norm;
  return out;
}

ProjectionStack add_noise(const ProjectionStack& stack, double snr, uint64_t seed)
{
  if (!(snr > 0.0)) throw input_error("simdata", "snr must be positive");
  if (stack.n == 0) throw input_error("simdata", "empty stack");
  double mean = 0.0;
  size_t count = 0;
  for (const auto& img : stack.images)
    for (double x : img.v) {
      mean += x;
      ++count;
    }
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (const auto& img : stack.images)
    for (double x : img.v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(count);
  const double sigma = std::sqrt(var / snr);

  ProjectionStack out = stack;
  out.snr = snr;
  out.seed = seed;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < stack.n; ++k) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(k)));
    for (double& x : out.images[k].v) x += sigma * rng.normal();
  }
  return out;
}

std::vector<Rotation> random_rotations(int n, uint64_t seed)
{
  if (n < 1) throw input_error("simdata", "need n >= 1 rotations");
  Rng rng(seed);
  std::vector<Rotation> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double w, x, y, z, nrm;
    do {
      w = rng.normal();
      x = rng.normal();
      y = rng.normal();
      z = rng.normal();
      nrm = std::sqrt(w * w + x * x + y * y + z * z);
    } while (nrm < 1e-12);
    w /= nrm;
    x /= nrm;
    y /= nrm;
    z /= nrm;
    Eigen::Matrix3d m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    // Renormalize columns against rounding drift so the strict Rotation
    // invariants hold.
    Eigen::Vector3d c0 = m.col(0).normalized();
    Eigen::Vector3d c1 = (m.col(1) - c0 * c0.dot(m.col(1))).normalized();
    Eigen::Matrix3d r;
    r.col(0) = c0;
    r.col(1) = c1;
    r.col(2) = c0.cross(c1);
    out.push_back(Rotation{r});
  }
  return out;
}

Image apply_circular_mask(const Image& img, double radius_frac, double taper_frac)
{
  const int side = img.side;
  if (!(radius_frac > 0.0) || radius_frac > 1.0 || taper_frac < 0.0 || taper_frac >= radius_frac)
    throw input_error("simdata", "mask needs 0 < taper < radius <= 1 (fractions of half-side)");
  const double c = side / 2;
  const double r0 = radius_frac * side / 2.0;
  const double tw = taper_frac * side / 2.0;
  Image out(side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double r = std::hypot(x - c, y - c);
      double w = 0.0;
      if (r <= r0 - tw) w = 1.0;
      else if (r < r0) w = 0.5 * (1.0 + std::cos(M_PI * (r - (r0 - tw)) / tw));
      out.at(x, y) = img.at(x, y) * w;
    }
  return out;
}

ProjectionStack masked_stack(const ProjectionStack& stack, double radius_frac, double taper_frac)
{
  ProjectionStack out = stack;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < stack.n; ++k)
    out.images[k] = apply_circular_mask(stack.images[k], radius_frac, taper_frac);
  return out;
}

ProjectionStack simulate_stack(const GaussianBlobPhantom& phantom, int side,
                               const std::vector<Rotation>& rots,
                               const std::vector<Eigen::Vector2d>& shifts, double snr,
                               uint64_t seed)
{
  if (!shifts.empty() && shifts.size() != rots.size())
    throw input_error("simdata", "shift list length does not match rotations");
  const Volume vol = make_phantom(phantom, side);
  ProjectionStack stack;
  stack.n = static_cast<int>(rots.size());
  stack.side = side;
  stack.images = project_stack(vol, rots);
  stack.true_rotations = rots;
  stack.true_shifts = shifts;
  stack.seed = seed;
  if (!shifts.empty()) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < stack.n; ++k)
      stack.images[k] = apply_shift(stack.images[k], shifts[k].x(), shifts[k].y());
  }
  if (snr > 0.0) {
    stack = add_noise(stack, snr, derive_seed(seed, 0x6e6f6973));
  }
  return stack;
}

namespace ref {

Volume make_phantom(const GaussianBlobPhantom& spec, int side)
{
  return phantom_impl(spec, side, false);
}

std::vector<Image> project_stack(const Volume& vol, const std::vector<Rotation>& rots)
{
  std::vector<Image> out(rots.size());
  for (size_t i = 0; i < rots.size(); ++i) out[i] = project_one(vol, rots[i]);
  return out;
}

}  // namespace ref

}  // namespace clpose
