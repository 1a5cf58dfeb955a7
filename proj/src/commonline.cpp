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

#include "clpose/commonline.hpp"

#include <cmath>
#include <complex>

#include "clpose/error.hpp"

namespace clpose {

namespace {

using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

CommonLineTable make_table(int n, int n_theta)
{
  CommonLineTable t;
  t.n = n;
  t.n_theta = n_theta;
  t.cl = Eigen::MatrixXi::Zero(n, n);
  t.C = Eigen::MatrixXd::Zero(n, n);
  t.ncc = Eigen::MatrixXd::Zero(n, n);
  t.degenerate = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  return t;
}

// Mean-removed, unit-norm rays of one projection, one row per ray angle.
// Returns false when the image is degenerate (a ray with no energy).
bool normalized_rays(const PolarStack& pol, int k, ComplexMatrix& out)
{
  out.resize(pol.n_theta, pol.n_r);
  bool ok = true;
  for (int l = 0; l < pol.n_theta; ++l) {
    const std::complex<double>* r = pol.ray(k, l);
    std::complex<double> mean(0.0, 0.0);
    for (int j = 0; j < pol.n_r; ++j) mean += r[j];
    mean /= static_cast<double>(pol.n_r);
    double norm2 = 0.0;
    for (int j = 0; j < pol.n_r; ++j) {
      const std::complex<double> v = r[j] - mean;
      out(l, j) = v;
      norm2 += std::norm(v);
    }
    if (norm2 < 1e-28) {
      ok = false;
      for (int j = 0; j < pol.n_r; ++j) out(l, j) = {0.0, 0.0};
    } else {
      const double inv = 1.0 / std::sqrt(norm2);
      for (int j = 0; j < pol.n_r; ++j) out(l, j) *= inv;
    }
  }
  return ok;
}

void store_pair(CommonLineTable& t, int i, int j, int l1, int l2, double score)
{
  const double dtheta = M_PI / t.n_theta;
  t.cl(i, j) = l1 + 1;
  t.cl(j, i) = l2 + 1;
  t.C(i, j) = dtheta * l1;
  t.C(j, i) = dtheta * l2;
  const double s = std::clamp(score, -1.0, 1.0);
  t.ncc(i, j) = s;
  t.ncc(j, i) = s;
}

}  // namespace

CommonLineTable detect_common_lines(const PolarStack& pol)
{
  if (pol.n < 3) throw input_error("commonline", "need at least 3 projections");
  const int n = pol.n;
  const int nt = pol.n_theta;

  std::vector<ComplexMatrix> rays(n);
  std::vector<uint8_t> image_ok(n, 1);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) image_ok[k] = normalized_rays(pol, k, rays[k]) ? 1 : 0;

  CommonLineTable table = make_table(n, nt);

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < static_cast<long>(pairs.size()); ++p) {
    const auto [i, j] = pairs[p];
    if (!image_ok[i] || !image_ok[j]) {
      store_pair(table, i, j, 0, 0, 0.0);
      table.degenerate(i, j) = table.degenerate(j, i) = 1;
      continue;
    }
    // Scores against the stored half (conjugated inner product) and against
    // the theta+pi half (plain product).
    const Eigen::MatrixXd direct = (rays[i] * rays[j].adjoint()).real();
    const Eigen::MatrixXd flipped = (rays[i] * rays[j].transpose()).real();
    int l1 = 0, l2 = 0;
    double best = -2.0;
    for (int a = 0; a < nt; ++a) {
      for (int b = 0; b < nt; ++b)
        if (direct(a, b) > best) {
          best = direct(a, b);
          l1 = a;
          l2 = b;
        }
      for (int b = 0; b < nt; ++b)
        if (flipped(a, b) > best) {
          best = flipped(a, b);
          l1 = a;
          l2 = b + nt;
        }
    }
    store_pair(table, i, j, l1, l2, best);
  }
  return table;
}

CommonLineTable detect_common_lines_magnitude(const PolarStack& pol)
{
  if (pol.n < 3) throw input_error("commonline", "need at least 3 projections");
  const int n = pol.n;
  const int nt = pol.n_theta;

  // Mean-removed unit-norm magnitude profiles, one row per ray.
  std::vector<Eigen::MatrixXd> rays(n);
  std::vector<uint8_t> image_ok(n, 1);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    Eigen::MatrixXd& m = rays[k];
    m.resize(nt, pol.n_r);
    bool ok = true;
    for (int l = 0; l < nt; ++l) {
      const std::complex<double>* r = pol.ray(k, l);
      double mean = 0.0;
      for (int j = 0; j < pol.n_r; ++j) mean += std::abs(r[j]);
      mean /= pol.n_r;
      double norm2 = 0.0;
      for (int j = 0; j < pol.n_r; ++j) {
        m(l, j) = std::abs(r[j]) - mean;
        norm2 += m(l, j) * m(l, j);
      }
      if (norm2 < 1e-28) ok = false;
      else m.row(l) /= std::sqrt(norm2);
    }
    image_ok[k] = ok ? 1 : 0;
  }

  CommonLineTable table = make_table(n, nt);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < static_cast<long>(pairs.size()); ++p) {
    const auto [i, j] = pairs[p];
    if (!image_ok[i] || !image_ok[j]) {
      store_pair(table, i, j, 0, 0, 0.0);
      table.degenerate(i, j) = table.degenerate(j, i) = 1;
      continue;
    }
    const Eigen::MatrixXd scores = rays[i] * rays[j].transpose();
    int l1 = 0, l2 = 0;
    double best = -2.0;
    for (int a = 0; a < nt; ++a)
      for (int b = 0; b < nt; ++b)
        if (scores(a, b) > best) {
          best = scores(a, b);
          l1 = a;
          l2 = b;
        }
    store_pair(table, i, j, l1, l2, best);
  }
  return table;
}

CommonLineTable oracle_common_lines(const std::vector<Rotation>& rots, int n_theta)
{
  const int n = static_cast<int>(rots.size());
  if (n < 2) throw input_error("commonline", "need at least 2 rotations");
  CommonLineTable table = make_table(n, n_theta);
  const int full = 2 * n_theta;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector3d di = rots[i].d(), dj = rots[j].d();
      if (std::abs(di.dot(dj)) >= 1.0 - 1e-9) {
        store_pair(table, i, j, 0, 0, 0.0);
        table.degenerate(i, j) = table.degenerate(j, i) = 1;
        continue;
      }
      const Eigen::Vector3d u = di.cross(dj).normalized();
      double c1 = std::atan2(u.dot(rots[i].yaxis()), u.dot(rots[i].q()));
      double c2 = std::atan2(u.dot(rots[j].yaxis()), u.dot(rots[j].q()));
      if (c1 < 0.0) c1 += 2.0 * M_PI;
      if (c2 < 0.0) c2 += 2.0 * M_PI;
      const double dtheta = M_PI / n_theta;
      int l1 = static_cast<int>(std::lround(c1 / dtheta)) % full;
      int l2 = static_cast<int>(std::lround(c2 / dtheta)) % full;
      // Match the detection convention: the line's orientation is chosen so
      // its index in image i lands on the stored half-circle.
      if (l1 >= n_theta) {
        l1 -= n_theta;
        l2 = (l2 + n_theta) % full;
      }
      store_pair(table, i, j, l1, l2, 1.0);
    }
  }
  return table;
}

DihedralTable vote_dihedrals(const CommonLineTable& cl, int T)
{
  if (cl.n < 3) throw input_error("commonline", "need at least 3 projections to vote");
  if (T < 18) throw input_error("commonline", "histogram resolution T must be >= 18");
  const int n = cl.n;

  DihedralTable d;
  d.n = n;
  d.T = T;
  d.sigma = M_PI / T;
  d.theta = Eigen::MatrixXd::Zero(n, n);
  d.W = Eigen::MatrixXd::Zero(n, n);

  const int grid_size = 4 * T + 1;
  const double dt = M_PI / (4 * T);
  const double kernel_scale = 1.0 / ((n - 2) * d.sigma * std::sqrt(2.0 * M_PI));

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

#pragma omp parallel
  {
    std::vector<double> votes;
#pragma omp for schedule(dynamic)
    for (long p = 0; p < static_cast<long>(pairs.size()); ++p) {
      const auto [i, j] = pairs[p];
      votes.clear();
      if (!cl.pair_degenerate(i, j)) {
        for (int k = 0; k < n; ++k) {
          if (k == i || k == j) continue;
          if (cl.pair_degenerate(i, k) || cl.pair_degenerate(j, k)) continue;
          // Signed in-plane angles between detected rays. Signed sines keep
          // the estimate invariant to each line's half-circle orientation.
          const double gi = cl.C(i, k) - cl.C(i, j);
          const double gj = cl.C(j, k) - cl.C(j, i);
          const double gk = cl.C(k, j) - cl.C(k, i);
          const double den = std::sin(gi) * std::sin(gj);
          if (std::abs(den) < 1e-6) continue;
          const double ratio = (std::cos(gk) - std::cos(gi) * std::cos(gj)) / den;
          if (std::abs(ratio) > 1.0) continue;
          votes.push_back(std::acos(ratio));
        }
      }
      double best_t = M_PI / 2.0;
      double best_w = 0.0;
      if (!votes.empty()) {
        const double inv2s2 = 1.0 / (2.0 * d.sigma * d.sigma);
        for (int m = 0; m < grid_size; ++m) {
          const double t = m * dt;
          double h = 0.0;
          for (double v : votes) h += std::exp(-(v - t) * (v - t) * inv2s2);
          h *= kernel_scale;
          if (h > best_w) {
            best_w = h;
            best_t = t;
          }
        }
      }
      d.theta(i, j) = d.theta(j, i) = best_t;
      d.W(i, j) = d.W(j, i) = best_w;
    }
  }
  return d;
}

int ray_pair_distance(const CommonLineTable& a, const CommonLineTable& b, int i, int j)
{
  const int full = 2 * a.n_theta;
  auto circ = [full](int x, int y) {
    int diff = std::abs(x - y) % full;
    return std::min(diff, full - diff);
  };
  const int a1 = a.cl(i, j) - 1, a2 = a.cl(j, i) - 1;
  const int b1 = b.cl(i, j) - 1, b2 = b.cl(j, i) - 1;
  int best = full;
  for (int flip : {0, a.n_theta}) {
    const int d1 = circ(a1, (b1 + flip) % full);
    const int d2 = circ(a2, (b2 + flip) % full);
    best = std::min(best, std::max(d1, d2));
  }
  return best;
}

namespace ref {

CommonLineTable detect_common_lines(const PolarStack& pol)
{
  if (pol.n < 3) throw input_error("commonline", "need at least 3 projections");
  const int n = pol.n;
  const int nt = pol.n_theta;

  std::vector<ComplexMatrix> rays(n);
  std::vector<uint8_t> image_ok(n, 1);
  for (int k = 0; k < n; ++k) image_ok[k] = normalized_rays(pol, k, rays[k]) ? 1 : 0;

  CommonLineTable table = make_table(n, nt);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!image_ok[i] || !image_ok[j]) {
        store_pair(table, i, j, 0, 0, 0.0);
        table.degenerate(i, j) = table.degenerate(j, i) = 1;
        continue;
      }
      int l1 = 0, l2 = 0;
      double best = -2.0;
      for (int a = 0; a < nt; ++a) {
        for (int b = 0; b < 2 * nt; ++b) {
          std::complex<double> acc(0.0, 0.0);
          for (int f = 0; f < pol.n_r; ++f) {
            const std::complex<double> rb =
              b < nt ? rays[j](b, f) : std::conj(rays[j](b - nt, f));
            acc += rays[i](a, f) * std::conj(rb);
          }
          if (acc.real() > best) {
            best = acc.real();
            l1 = a;
            l2 = b;
          }
        }
      }
      store_pair(table, i, j, l1, l2, best);
    }
  }
  return table;
}

}  // namespace ref

}  // namespace clpose
