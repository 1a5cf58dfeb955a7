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

#include "clpose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>

#include "clpose/error.hpp"
#include "clpose/fft.hpp"

namespace clpose {

namespace {

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m)
{
  Eigen::Vector3d c0 = m.col(0).normalized();
  Eigen::Vector3d c1 = (m.col(1) - c0 * c0.dot(m.col(1))).normalized();
  Eigen::Matrix3d r;
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c0.cross(c1);
  return r;
}

// argmax_{G in SO(3)} tr(G^T M).
Eigen::Matrix3d procrustes(const Eigen::Matrix3d& m)
{
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d s(1.0, 1.0, (u * v.transpose()).determinant() > 0 ? 1.0 : -1.0);
  return u * s.asDiagonal() * v.transpose();
}

double clamped_acos(double c) { return std::acos(std::clamp(c, -1.0, 1.0)); }

// Rotate v by the minimal rotation taking `from` onto `to`.
Eigen::Vector3d rotate_between(const Eigen::Vector3d& v, const Eigen::Vector3d& from,
                               const Eigen::Vector3d& to)
{
  const Eigen::Vector3d axis = from.cross(to);
  const double s = axis.norm();
  if (s < 1e-14) return from.dot(to) > 0 ? v : -v;
  const Eigen::Vector3d a = axis / s;
  const double ang = std::atan2(s, from.dot(to));
  // Rodrigues formula.
  return v * std::cos(ang) + a.cross(v) * std::sin(ang) + a * a.dot(v) * (1.0 - std::cos(ang));
}

}  // namespace

AlignmentResult align_global(const std::vector<Rotation>& est, const std::vector<Rotation>& truth)
{
  const size_t n = est.size();
  if (n != truth.size() || n < 2) throw input_error("eval", "need two equally long rotation lists");

  const Eigen::Matrix3d mirror = Eigen::Vector3d(1, 1, -1).asDiagonal();
  AlignmentResult best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int branch = 0; branch < 2; ++branch) {
    std::vector<Eigen::Matrix3d> cand(n);
    for (size_t i = 0; i < n; ++i)
      cand[i] = branch == 0 ? est[i].m : Eigen::Matrix3d(mirror * est[i].m * mirror);
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < n; ++i) m += truth[i].m * cand[i].transpose();
    const Eigen::Matrix3d g = procrustes(m);
    double err = 0.0;
    for (size_t i = 0; i < n; ++i) err += (g * cand[i] - truth[i].m).squaredNorm();
    if (err < best_err) {
      best_err = err;
      best.G = g;
      best.reflected = branch == 1;
      best.aligned.clear();
      best.aligned.reserve(n);
      best.per_image_err_deg.assign(n, 0.0);
      for (size_t i = 0; i < n; ++i) {
        const Eigen::Matrix3d a = orthonormalize(g * cand[i]);
        best.aligned.push_back(Rotation{a});
        best.per_image_err_deg[i] = rotation_angle(a, truth[i].m) * 180.0 / M_PI;
      }
    }
  }
  return best;
}

MetricReport metrics(const std::vector<Rotation>& aligned_est, const std::vector<Rotation>& truth,
                     const std::vector<Eigen::Vector2d>* est_shifts,
                     const std::vector<Eigen::Vector2d>* true_shifts)
{
  const size_t n = aligned_est.size();
  if (n != truth.size() || n < 2) throw input_error("eval", "need two equally long rotation lists");

  MetricReport rep;
  size_t pairs = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const double te = clamped_acos(aligned_est[i].d().dot(aligned_est[j].d()));
      const double tt = clamped_acos(truth[i].d().dot(truth[j].d()));
      rep.theta_mae += std::abs(te - tt);
      const double pe = clamped_acos(aligned_est[i].q().dot(aligned_est[j].q()));
      const double pt = clamped_acos(truth[i].q().dot(truth[j].q()));
      rep.phi_mae += std::abs(pe - pt);
      ++pairs;
    }
  rep.theta_mae /= static_cast<double>(pairs);
  rep.phi_mae /= static_cast<double>(pairs);

  for (size_t i = 0; i < n; ++i) {
    rep.normal_err_deg += clamped_acos(aligned_est[i].d().dot(truth[i].d())) * 180.0 / M_PI;
    // Residual in-plane rotation after the viewing directions are matched.
    const Eigen::Vector3d q = rotate_between(aligned_est[i].q(), aligned_est[i].d(), truth[i].d());
    const double ang = std::atan2(q.cross(truth[i].q()).dot(truth[i].d()), q.dot(truth[i].q()));
    rep.inplane_err_deg += std::abs(ang) * 180.0 / M_PI;
    const auto ee = euler_zyz(aligned_est[i].m);
    const auto et = euler_zyz(truth[i].m);
    for (int a = 0; a < 3; ++a) {
      const double d = wrap_angle(ee[a] - et[a]);
      rep.euler_mse[a] += d * d;
    }
  }
  rep.normal_err_deg /= static_cast<double>(n);
  rep.inplane_err_deg /= static_cast<double>(n);
  for (int a = 0; a < 3; ++a) rep.euler_mse[a] /= static_cast<double>(n);

  if (est_shifts && true_shifts) {
    if (est_shifts->size() != n || true_shifts->size() != n)
      throw input_error("eval", "shift list lengths disagree");
    Eigen::VectorXd err(2 * n);
    for (size_t k = 0; k < n; ++k) {
      err[2 * k] = (*est_shifts)[k].x() - (*true_shifts)[k].x();
      err[2 * k + 1] = (*est_shifts)[k].y() - (*true_shifts)[k].y();
    }
    const Eigen::MatrixXd basis = translation_null_basis(truth);
    err -= basis * (basis.transpose() * err);
    rep.shift_rms_px = err.norm() / std::sqrt(static_cast<double>(2 * n));
  }
  return rep;
}

Eigen::MatrixXd translation_null_basis(const std::vector<Rotation>& rots)
{
  const int n = static_cast<int>(rots.size());
  Eigen::MatrixXd basis(2 * n, 3);
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < 3; ++a) {
      basis(2 * k, a) = rots[k].q()[a];
      basis(2 * k + 1, a) = rots[k].yaxis()[a];
    }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  return qr.householderQ() * Eigen::MatrixXd::Identity(2 * n, 3);
}

FscCurve fsc(const Volume& v1, const Volume& v2, int n_shells)
{
  if (v1.side != v2.side) throw input_error("eval", "volumes differ in side");
  if (n_shells < 1) throw input_error("eval", "need at least one shell");
  const int side = v1.side;

  std::vector<std::complex<double>> f1(v1.v.begin(), v1.v.end());
  std::vector<std::complex<double>> f2(v2.v.begin(), v2.v.end());
  fft3(f1, side, false);
  fft3(f2, side, false);

  // Per-z partials accumulated in a fixed order for thread-count-independent
  // results.
  std::vector<double> num_z(static_cast<size_t>(side) * n_shells, 0.0);
  std::vector<double> d1_z(static_cast<size_t>(side) * n_shells, 0.0);
  std::vector<double> d2_z(static_cast<size_t>(side) * n_shells, 0.0);
#pragma omp parallel for schedule(static)
  for (int kz = 0; kz < side; ++kz) {
    const double fz = signed_freq(kz, side);
    double* num = num_z.data() + static_cast<size_t>(kz) * n_shells;
    double* d1 = d1_z.data() + static_cast<size_t>(kz) * n_shells;
    double* d2 = d2_z.data() + static_cast<size_t>(kz) * n_shells;
    for (int ky = 0; ky < side; ++ky) {
      const double fy = signed_freq(ky, side);
      for (int kx = 0; kx < side; ++kx) {
        const double fx = signed_freq(kx, side);
        const int shell = static_cast<int>(std::lround(std::sqrt(fx * fx + fy * fy + fz * fz)));
        if (shell >= n_shells) continue;
        const size_t idx = (static_cast<size_t>(kz) * side + ky) * side + kx;
        const std::complex<double> a = f1[idx], b = f2[idx];
        num[shell] += a.real() * b.real() + a.imag() * b.imag();
        d1[shell] += a.real() * a.real() + a.imag() * a.imag();
        d2[shell] += b.real() * b.real() + b.imag() * b.imag();
      }
    }
  }

  FscCurve curve;
  curve.shell_freq.resize(n_shells);
  curve.corr.assign(n_shells, 0.0);
  curve.empty_shell.assign(n_shells, 0);
  for (int s = 0; s < n_shells; ++s) {
    double num = 0.0, d1 = 0.0, d2 = 0.0;
    for (int kz = 0; kz < side; ++kz) {
      num += num_z[static_cast<size_t>(kz) * n_shells + s];
      d1 += d1_z[static_cast<size_t>(kz) * n_shells + s];
      d2 += d2_z[static_cast<size_t>(kz) * n_shells + s];
    }
    curve.shell_freq[s] = static_cast<double>(s) / side;
    if (d1 <= 0.0 || d2 <= 0.0) {
      curve.empty_shell[s] = 1;
      curve.corr[s] = 0.0;
    } else {
      curve.corr[s] = num / std::sqrt(d1 * d2);
    }
  }
  return curve;
}

Volume gridding_reconstruct(const ProjectionStack& stack, const std::vector<Rotation>& poses,
                            const std::vector<Eigen::Vector2d>& shifts)
{
  const int n = stack.n;
  if (n < 10) throw input_error("eval", "need at least 10 projections to reconstruct");
  if (static_cast<int>(poses.size()) != n) throw input_error("eval", "pose list length mismatch");
  if (!shifts.empty() && static_cast<int>(shifts.size()) != n)
    throw input_error("eval", "shift list length mismatch");
  const int side = stack.side;
  const double radius = side / 2.0 - 1.0;
  const double center = side / 2;

  struct Contribution {
    int64_t voxel;
    double re, im;
  };
  const size_t per_image = static_cast<size_t>(side) * side;
  std::vector<Contribution> contrib(static_cast<size_t>(n) * per_image);

#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < n; ++k) {
    std::vector<std::complex<double>> buf(stack.images[k].v.begin(), stack.images[k].v.end());
    fft2(buf, side, false);
    const Eigen::Vector3d q = poses[k].q();
    const Eigen::Vector3d ya = poses[k].yaxis();
    const double dx = shifts.empty() ? 0.0 : shifts[k].x();
    const double dy = shifts.empty() ? 0.0 : shifts[k].y();
    Contribution* out = contrib.data() + static_cast<size_t>(k) * per_image;
    for (int ky = 0; ky < side; ++ky) {
      const double sy = signed_freq(ky, side);
      for (int kx = 0; kx < side; ++kx) {
        const double sx = signed_freq(kx, side);
        Contribution c{-1, 0.0, 0.0};
        const Eigen::Vector3d g = sx * q + sy * ya;
        if (g.norm() <= radius) {
          const long vx = std::lround(g.x());
          const long vy = std::lround(g.y());
          const long vz = std::lround(g.z());
          const long wx = ((vx % side) + side) % side;
          const long wy = ((vy % side) + side) % side;
          const long wz = ((vz % side) + side) % side;
          // Undo the in-plane shift and move the phase origin to the image
          // center before insertion.
          const double phase = 2.0 * M_PI * (sx * (center - dx) + sy * (center - dy)) / side;
          const std::complex<double> v =
            buf[static_cast<size_t>(ky) * side + kx] *
            std::complex<double>(std::cos(phase), std::sin(phase));
          c.voxel = (static_cast<int64_t>(wz) * side + wy) * side + wx;
          c.re = v.real();
          c.im = v.imag();
        }
        out[static_cast<size_t>(ky) * side + kx] = c;
      }
    }
  }

  // Sort by voxel and value: the accumulation order is then a function of
  // the contribution multiset only, so permuting projections cannot change
  // the result.
  std::sort(contrib.begin(), contrib.end(), [](const Contribution& a, const Contribution& b) {
    if (a.voxel != b.voxel) return a.voxel < b.voxel;
    if (a.re != b.re) return a.re < b.re;
    return a.im < b.im;
  });

  std::vector<std::complex<double>> grid(static_cast<size_t>(side) * side * side, {0.0, 0.0});
  std::vector<int32_t> count(grid.size(), 0);
  for (const auto& c : contrib) {
    if (c.voxel < 0) continue;
    grid[static_cast<size_t>(c.voxel)] += std::complex<double>(c.re, c.im);
    ++count[static_cast<size_t>(c.voxel)];
  }
  for (size_t i = 0; i < grid.size(); ++i)
    if (count[i] > 0) grid[i] /= static_cast<double>(count[i]);

  // Conjugate centering phase so the inverse transform lands the volume
  // center on voxel (c, c, c).
  for (int kz = 0; kz < side; ++kz) {
    const double fz = signed_freq(kz, side);
    for (int ky = 0; ky < side; ++ky) {
      const double fy = signed_freq(ky, side);
      for (int kx = 0; kx < side; ++kx) {
        const double fx = signed_freq(kx, side);
        const double ph = -2.0 * M_PI * center * (fx + fy + fz) / side;
        grid[(static_cast<size_t>(kz) * side + ky) * side + kx] *=
          std::complex<double>(std::cos(ph), std::sin(ph));
      }
    }
  }

  fft3(grid, side, true);
  Volume vol(side);
  const double norm = 1.0 / (static_cast<double>(side) * side * side);
  for (size_t i = 0; i < vol.v.size(); ++i) vol.v[i] = grid[i].real() * norm;
  return vol;
}

}  // namespace clpose
