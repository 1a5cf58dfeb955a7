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

#include "clpose/shiftfix.hpp"

#include <cmath>
#include <algorithm>
#include <limits>

#include "clpose/error.hpp"

namespace clpose {

namespace {

double correlation_at(const std::vector<std::complex<double>>& g, const std::vector<double>& freq,
                      double s)
{
  double acc = 0.0;
  for (size_t j = 0; j < g.size(); ++j) {
    const double phase = -2.0 * M_PI * s * freq[j];
    acc += g[j].real() * std::cos(phase) - g[j].imag() * std::sin(phase);
  }
  return acc;
}

}  // namespace

std::pair<double, double> estimate_ray_shift_scored(std::span<const std::complex<double>> ray1,
                                                    std::span<const std::complex<double>> ray2,
                                                    const std::vector<double>& freq, double s_range,
                                                    double s_step)
{
  if (ray1.size() != ray2.size() || ray1.size() != freq.size())
    throw input_error("shiftfix", "ray lengths disagree");
  if (!(s_range >= 1.0)) throw input_error("shiftfix", "s_range must be >= 1 pixel");
  if (!(s_step > 0.0)) throw input_error("shiftfix", "s_step must be positive");

  double n1 = 0.0, n2 = 0.0;
  for (size_t j = 0; j < ray1.size(); ++j) {
    n1 += std::norm(ray1[j]);
    n2 += std::norm(ray2[j]);
  }
  if (n1 < 1e-28 || n2 < 1e-28) throw numerical_error("shiftfix", "zero-norm ray");
  const double inv = 1.0 / std::sqrt(n1 * n2);

  // score(s) = Re sum_j ray1_j e^{-2i pi s f_j} conj(ray2_j) / (|ray1||ray2|)
  std::vector<std::complex<double>> g(ray1.size());
  for (size_t j = 0; j < ray1.size(); ++j) g[j] = ray1[j] * std::conj(ray2[j]) * inv;

  const int half = static_cast<int>(std::floor(s_range / s_step));
  int best_i = -half;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(2 * half + 1);
  for (int i = -half; i <= half; ++i) {
    const double sc = correlation_at(g, freq, i * s_step);
    scores[i + half] = sc;
    if (sc > best_score) {
      best_score = sc;
      best_i = i;
    }
  }
  double s_star = best_i * s_step;
  // One parabolic sub-step through the grid neighbors.
  if (best_i > -half && best_i < half) {
    const double ym = scores[best_i + half - 1];
    const double y0 = scores[best_i + half];
    const double yp = scores[best_i + half + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (std::abs(denom) > 1e-300) {
      const double delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
      s_star += delta * s_step;
    }
  }
  return {s_star, best_score};
}

double estimate_ray_shift(std::span<const std::complex<double>> ray1,
                          std::span<const std::complex<double>> ray2,
                          const std::vector<double>& freq, double s_range, double s_step)
{
  return estimate_ray_shift_scored(ray1, ray2, freq, s_range, s_step).first;
}

ShiftSystem build_system(const PolarStack& pol_original, const PolarStack& pol_corrected,
                         const CommonLineTable& cl, double s_range, double s_step, double ncc_min)
{
  if (pol_original.corrected)
    throw input_error("shiftfix", "rays must come from the uncorrected stack");
  if (pol_original.n != cl.n || pol_corrected.n != cl.n)
    throw input_error("shiftfix", "table and stack sizes disagree");
  if (pol_original.n_theta != cl.n_theta)
    throw input_error("shiftfix", "angular grids disagree");

  const int K = pol_original.n;
  std::vector<std::pair<int, int>> pairs;
  for (int k1 = 0; k1 < K; ++k1)
    for (int k2 = k1 + 1; k2 < K; ++k2) {
      if (cl.pair_degenerate(k1, k2)) continue;
      if (cl.ncc(k1, k2) < ncc_min) continue;
      pairs.emplace_back(k1, k2);
    }

  std::vector<double> offsets(pairs.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < static_cast<long>(pairs.size()); ++p) {
    const auto [k1, k2] = pairs[p];
    const auto r1 = extract_ray(pol_original, k1, cl.cl(k1, k2));
    const auto r2 = extract_ray(pol_original, k2, cl.cl(k2, k1));
    offsets[p] = estimate_ray_shift(r1, r2, pol_original.freq, s_range, s_step);
  }

  ShiftSystem sys;
  sys.K = K;
  sys.row_pairs = pairs;
  sys.A = Eigen::MatrixXd::Zero(static_cast<int>(pairs.size()), 2 * K);
  sys.b = Eigen::VectorXd::Zero(static_cast<int>(pairs.size()));
  sys.row_angles.resize(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [k1, k2] = pairs[p];
    const double alpha = ray_angle(pol_original, cl.cl(k1, k2));
    const double beta = ray_angle(pol_original, cl.cl(k2, k1));
    sys.row_angles[p] = {alpha, beta};
    const int r = static_cast<int>(p);
    sys.A(r, 2 * k1) = std::cos(alpha);
    sys.A(r, 2 * k1 + 1) = std::sin(alpha);
    sys.A(r, 2 * k2) = -std::cos(beta);
    sys.A(r, 2 * k2 + 1) = -std::sin(beta);
    sys.b(r) = offsets[p];
  }
  return sys;
}

ShiftEstimate solve_shifts(const ShiftSystem& sys)
{
  if (sys.rows() < 1) throw input_error("shiftfix", "empty shift system");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  // The consistent global-translation modes of the molecule are unobservable.
  // After ray quantization they are near-null rather than exactly null, but
  // they sit two orders of magnitude below the rest of the spectrum, so a 5%
  // relative cutoff zeroes them instead of letting them wander.
  svd.setThreshold(5e-2);
  ShiftEstimate est;
  est.x = svd.solve(sys.b);
  est.residual = (sys.A * est.x - sys.b).norm();
  return est;
}

ShiftRefineResult refine_shifts(const PolarStack& pol, const Eigen::VectorXd& x0,
                                const ShiftRefineConfig& cfg)
{
  if (pol.corrected) throw input_error("shiftfix", "refinement expects the uncorrected stack");
  const int K = pol.n;
  Eigen::VectorXd x = x0.size() == 0 ? Eigen::VectorXd::Zero(2 * K) : x0;
  if (x.size() != 2 * K) throw input_error("shiftfix", "initial shift vector has wrong length");
  if (!x.allFinite()) throw input_error("shiftfix", "initial shifts must be finite");
  const double s_range = cfg.s_range > 0.0 ? cfg.s_range : pol.src_side / 8.0;

  ShiftRefineResult out;
  CommonLineTable prev_cl;
  double best_residual = std::numeric_limits<double>::infinity();
  int rounds_since_best = 0;

  // Warm start: with large uncorrected shifts the complex correlation
  // decorrelates and round 1 cannot find usable lines. Detect once on
  // shift-invariant magnitude profiles, resolving each pair's half-circle
  // orientation by the better offset-scan score, and seed x with that solve.
  // The warm-start round is recorded as round 0 and never returned as best.
  if (cfg.bootstrap && x.isZero()) {
    CommonLineTable cl = detect_common_lines_magnitude(pol);
    const int nt = pol.n_theta;
    for (int i = 0; i < K; ++i)
      for (int j = i + 1; j < K; ++j) {
        if (cl.pair_degenerate(i, j)) continue;
        const auto r1 = extract_ray(pol, i, cl.cl(i, j));
        const auto r2a = extract_ray(pol, j, cl.cl(j, i));
        const auto r2b = extract_ray(pol, j, cl.cl(j, i) + nt);
        const auto a = estimate_ray_shift_scored(r1, r2a, pol.freq, s_range, cfg.s_step);
        const auto b = estimate_ray_shift_scored(r1, r2b, pol.freq, s_range, cfg.s_step);
        if (b.second > a.second) {
          cl.cl(j, i) += nt;
          cl.C(j, i) = M_PI * (cl.cl(j, i) - 1) / nt;
        }
        cl.ncc(i, j) = cl.ncc(j, i) = std::clamp(std::max(a.second, b.second), -1.0, 1.0);
      }
    const ShiftSystem sys = build_system(pol, pol, cl, s_range, cfg.s_step, cfg.ncc_min);
    const ShiftEstimate est = solve_shifts(sys);
    ShiftRefineRound round;
    round.round = 0;
    round.residual = est.residual;
    round.step_norm = est.x.lpNorm<Eigen::Infinity>();
    out.history.push_back(round);
    x = est.x;
    prev_cl = cl;
  }

  for (int t = 1; t <= cfg.max_rounds; ++t) {
    const PolarStack corrected = phase_correct(pol, shifts_from_vector(x));
    const CommonLineTable cl = detect_common_lines(corrected);
    const ShiftSystem sys = build_system(pol, corrected, cl, s_range, cfg.s_step, cfg.ncc_min);
    const ShiftEstimate est = solve_shifts(sys);

    ShiftRefineRound round;
    round.round = t;
    round.residual = est.residual;
    round.step_norm = (est.x - x).lpNorm<Eigen::Infinity>();
    if (prev_cl.n == K) {
      int agree = 0, total = 0;
      for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j) {
          if (cl.pair_degenerate(i, j) || prev_cl.pair_degenerate(i, j)) continue;
          ++total;
          if (ray_pair_distance(cl, prev_cl, i, j) <= 1) ++agree;
        }
      round.cl_agreement = total > 0 ? static_cast<double>(agree) / total : 1.0;
    }
    out.history.push_back(round);

    if (est.residual < best_residual * (1.0 - 1e-2)) {
      rounds_since_best = 0;
    } else {
      ++rounds_since_best;
    }
    if (est.residual < best_residual) {
      best_residual = est.residual;
      out.estimate = est;
      out.estimate.round = t;
    }

    const bool step_small = round.step_norm < cfg.epsilon;
    // Residual convergence: the best residual has stopped improving. At the
    // fixed point the re-detected lines chatter between near-tied rays, so
    // the residual plateaus rather than settling to one value.
    const bool residual_plateau = t >= 3 && rounds_since_best >= 2;
    x = est.x;
    prev_cl = cl;
    if (step_small || residual_plateau) {
      out.converged = true;
      break;
    }
  }
  return out;
}

namespace ref {

std::vector<double> pair_offsets(const PolarStack& pol_original, const CommonLineTable& cl,
                                 const std::vector<std::pair<int, int>>& pairs, double s_range,
                                 double s_step)
{
  std::vector<double> offsets(pairs.size(), 0.0);
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [k1, k2] = pairs[p];
    const auto r1 = extract_ray(pol_original, k1, cl.cl(k1, k2));
    const auto r2 = extract_ray(pol_original, k2, cl.cl(k2, k1));
    offsets[p] = estimate_ray_shift(r1, r2, pol_original.freq, s_range, s_step);
  }
  return offsets;
}

}  // namespace ref

}  // namespace clpose
