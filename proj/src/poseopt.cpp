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

#include "clpose/poseopt.hpp"

#include <cmath>
#include <array>
#include <limits>
#include <functional>

#include "clpose/error.hpp"

namespace clpose {

namespace {

Eigen::MatrixXd zero_diag(Eigen::MatrixXd m)
{
  m.diagonal().setZero();
  return m;
}

// W-weighted derivative factor of the entrywise loss, diagonal excluded.
Eigen::MatrixXd loss_derivative(const Eigen::MatrixXd& residual, const Eigen::MatrixXd& w, Loss loss)
{
  if (loss == Loss::l1)
    return zero_diag((w.array() * residual.array().sign()).matrix());
  return zero_diag((2.0 * w.array() * residual.array()).matrix());
}

double loss_value(const Eigen::MatrixXd& residual, const Eigen::MatrixXd& w, Loss loss)
{
  Eigen::ArrayXXd r = residual.array();
  r.matrix().diagonal().setZero();
  if (loss == Loss::l1) return (w.array() * r.abs()).sum();
  return (w.array() * r.square()).sum();
}

Eigen::MatrixXd random_unit_rows(int n, Rng& rng)
{
  Eigen::MatrixXd m(n, 3);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d v;
    double nrm = 0.0;
    do {
      v = {rng.normal(), rng.normal(), rng.normal()};
      nrm = v.norm();
    } while (nrm < 1e-12);
    m.row(i) = (v / nrm).transpose();
  }
  return m;
}

void normalize_rows(Eigen::MatrixXd& m)
{
  for (int i = 0; i < m.rows(); ++i) m.row(i) /= m.row(i).norm();
}

// Projected subgradient descent of a single Gram-fit term
// sum W_ij l(X X^T - target)_ij over unit rows, with best-iterate tracking
// and step halving after 200 non-improving iterations.
Eigen::MatrixXd pgd_unit_rows(const Eigen::MatrixXd& start, const Eigen::MatrixXd& target,
                              const Eigen::MatrixXd& w, const OptimizerConfig& cfg)
{
  const int n = static_cast<int>(start.rows());
  double alpha = cfg.alpha > 0.0 ? cfg.alpha : 1.0 / n;
  Eigen::MatrixXd x = start;
  Eigen::MatrixXd best = x;
  double best_j = loss_value(x * x.transpose() - target, w, cfg.loss);
  int non_improving = 0;
  for (int k = 0; k < cfg.k_max; ++k) {
    const Eigen::MatrixXd residual = x * x.transpose() - target;
    const Eigen::MatrixXd grad = 2.0 * loss_derivative(residual, w, cfg.loss) * x;
    if (!grad.allFinite()) throw numerical_error("poseopt", "non-finite gradient in initialization");
    x -= alpha * grad;
    normalize_rows(x);
    const double j = loss_value(x * x.transpose() - target, w, cfg.loss);
    if (j < best_j) {
      best_j = j;
      best = x;
      non_improving = 0;
    } else if (++non_improving >= 200) {
      alpha *= 0.5;
      x = best;
      non_improving = 0;
    }
  }
  return best;
}

Eigen::Matrix3d euler_to_matrix(double a, double b, double g)
{
  return (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(g, Eigen::Vector3d::UnitZ()))
    .toRotationMatrix();
}

// Nelder-Mead on a 3-parameter function; small and deterministic.
std::array<double, 3> nelder_mead(const std::function<double(const std::array<double, 3>&)>& f,
                                  std::array<double, 3> start, double scale, int iters)
{
  constexpr int dim = 3;
  std::array<std::array<double, 3>, 4> pts;
  std::array<double, 4> vals;
  pts[0] = start;
  for (int i = 1; i <= dim; ++i) {
    pts[i] = start;
    pts[i][i - 1] += scale;
  }
  for (int i = 0; i <= dim; ++i) vals[i] = f(pts[i]);

  auto order = [&]() {
    for (int i = 0; i <= dim; ++i)
      for (int j = i + 1; j <= dim; ++j)
        if (vals[j] < vals[i]) {
          std::swap(vals[i], vals[j]);
          std::swap(pts[i], pts[j]);
        }
  };
  for (int it = 0; it < iters; ++it) {
    order();
    std::array<double, 3> centroid{0, 0, 0};
    for (int i = 0; i < dim; ++i)
      for (int a = 0; a < 3; ++a) centroid[a] += pts[i][a] / dim;
    auto blend = [&](double t) {
      std::array<double, 3> p;
      for (int a = 0; a < 3; ++a) p[a] = centroid[a] + t * (pts[dim][a] - centroid[a]);
      return p;
    };
    const auto refl = blend(-1.0);
    const double fr = f(refl);
    if (fr < vals[0]) {
      const auto exp_p = blend(-2.0);
      const double fe = f(exp_p);
      if (fe < fr) {
        pts[dim] = exp_p;
        vals[dim] = fe;
      } else {
        pts[dim] = refl;
        vals[dim] = fr;
      }
    } else if (fr < vals[dim - 1]) {
      pts[dim] = refl;
      vals[dim] = fr;
    } else {
      const auto con = blend(0.5);
      const double fc = f(con);
      if (fc < vals[dim]) {
        pts[dim] = con;
        vals[dim] = fc;
      } else {
        for (int i = 1; i <= dim; ++i) {
          for (int a = 0; a < 3; ++a) pts[i][a] = pts[0][a] + 0.5 * (pts[i][a] - pts[0][a]);
          vals[i] = f(pts[i]);
        }
      }
    }
  }
  order();
  return pts[0];
}

}  // namespace

double PoseSet::max_violation() const
{
  double v = 0.0;
  for (int i = 0; i < n(); ++i) {
    v = std::max(v, std::abs(D.row(i).norm() - 1.0));
    v = std::max(v, std::abs(Q.row(i).norm() - 1.0));
    v = std::max(v, std::abs(D.row(i).dot(Q.row(i))));
  }
  return v;
}

ObjectiveInputs ObjectiveInputs::from_tables(const DihedralTable& dih, const CommonLineTable& cl)
{
  const int n = dih.n;
  if (cl.n != n) throw input_error("poseopt", "table sizes disagree");
  ObjectiveInputs in;
  in.cosTheta = zero_diag(dih.theta.array().cos().matrix());
  in.W = zero_diag(dih.W);
  in.C = cl.C;
  in.A = Eigen::MatrixXd::Zero(n, n);
  in.B = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      in.A(i, j) = std::cos(cl.C(i, j)) * std::cos(cl.C(j, i));
      in.B(i, j) = std::sin(cl.C(i, j)) * std::sin(cl.C(j, i));
    }
  return in;
}

double objective(const PoseSet& pose, const ObjectiveInputs& in, Loss loss)
{
  const Eigen::MatrixXd gd = pose.D * pose.D.transpose();
  const Eigen::MatrixXd z = in.A + (in.B.array() * gd.array()).matrix();
  const Eigen::MatrixXd gq = pose.Q * pose.Q.transpose();
  return loss_value(gd - in.cosTheta, in.W, loss) + loss_value(gq - z, in.W, loss);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> objective_gradients(const PoseSet& pose,
                                                                const ObjectiveInputs& in,
                                                                Loss loss)
{
  const Eigen::MatrixXd gd = pose.D * pose.D.transpose();
  const Eigen::MatrixXd z = in.A + (in.B.array() * gd.array()).matrix();
  const Eigen::MatrixXd gq = pose.Q * pose.Q.transpose();
  const Eigen::MatrixXd pd = loss_derivative(gd - in.cosTheta, in.W, loss);
  const Eigen::MatrixXd pq = loss_derivative(gq - z, in.W, loss);
  Eigen::MatrixXd grad_d =
    2.0 * pd * pose.D - 2.0 * (in.B.array() * pq.array()).matrix() * pose.D;
  Eigen::MatrixXd grad_q = 2.0 * pq * pose.Q;
  return {std::move(grad_d), std::move(grad_q)};
}

namespace {

void check_config(const OptimizerConfig& cfg)
{
  if (cfg.k_max < 1) throw input_error("poseopt", "k_max must be >= 1");
  if (cfg.alpha < 0.0 || cfg.beta < 0.0) throw input_error("poseopt", "step sizes must be positive");
  if (!(cfg.tol >= 0.0)) throw input_error("poseopt", "tol must be nonnegative");
}

}  // namespace

Eigen::MatrixXd init_viewing_dirs(const ObjectiveInputs& in, const OptimizerConfig& cfg)
{
  check_config(cfg);
  const int n = in.n();
  if (n < 3) throw input_error("poseopt", "need at least 3 projections");
  Rng rng(cfg.seed);
  Eigen::MatrixXd best;
  double best_j = std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, cfg.restarts);
  for (int r = 0; r < restarts; ++r) {
    Rng stream = rng.split(r);
    Eigen::MatrixXd d0 = random_unit_rows(n, stream);
    Eigen::MatrixXd d = pgd_unit_rows(d0, in.cosTheta, in.W, cfg);
    const double j = loss_value(d * d.transpose() - in.cosTheta, in.W, cfg.loss);
    if (j < best_j) {
      best_j = j;
      best = d;
    }
  }
  return best;
}

Eigen::MatrixXd init_inplane(const ObjectiveInputs& in, const Eigen::MatrixXd& D0,
                             const OptimizerConfig& cfg)
{
  const int n = in.n();
  const Eigen::MatrixXd cos_phi =
    in.A + (in.B.array() * (D0 * D0.transpose()).array()).matrix();
  Rng rng(cfg.seed ^ 0x5a5a5a5aull);
  Eigen::MatrixXd best;
  double best_j = std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, cfg.restarts);
  for (int r = 0; r < restarts; ++r) {
    Rng stream = rng.split(r);
    Eigen::MatrixXd q0 = random_unit_rows(n, stream);
    Eigen::MatrixXd q = pgd_unit_rows(q0, cos_phi, in.W, cfg);
    const double j = loss_value(q * q.transpose() - cos_phi, in.W, cfg.loss);
    if (j < best_j) {
      best_j = j;
      best = q;
    }
  }
  return best;
}

namespace {

// Grid + Nelder-Mead minimizer of ||diag(D R Q^T)||^2 over one orthogonal
// branch: rotations, or rotations composed with a fixed mirror.
std::pair<Eigen::Matrix3d, double> align_branch(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Q,
                                                bool reflect)
{
  const Eigen::Matrix3d mirror = Eigen::Vector3d(1, 1, -1).asDiagonal();
  auto branch_matrix = [&](const std::array<double, 3>& e) {
    Eigen::Matrix3d r = euler_to_matrix(e[0], e[1], e[2]);
    return reflect ? Eigen::Matrix3d(r * mirror) : r;
  };
  auto value_euler = [&](const std::array<double, 3>& e) {
    return (D * branch_matrix(e) * Q.transpose()).diagonal().squaredNorm();
  };

  const double step = 15.0 * M_PI / 180.0;
  std::array<double, 3> best_e{0, 0, 0};
  double best_v = std::numeric_limits<double>::infinity();
  for (int ia = 0; ia < 24; ++ia)
    for (int ib = 0; ib <= 12; ++ib)
      for (int ig = 0; ig < 24; ++ig) {
        const std::array<double, 3> e{ia * step, ib * step, ig * step};
        const double v = value_euler(e);
        if (v < best_v) {
          best_v = v;
          best_e = e;
        }
      }
  best_e = nelder_mead(value_euler, best_e, step * 0.5, 200);
  const Eigen::Matrix3d r = branch_matrix(best_e);
  return {r, value_euler(best_e)};
}

}  // namespace

std::pair<Eigen::Matrix3d, double> align_inplane_to_dirs(const Eigen::MatrixXd& D,
                                                         const Eigen::MatrixXd& Q)
{
  // Reflection branch: checked so its minimum is known, never returned.
  const auto reflected = align_branch(D, Q, true);
  (void)reflected;
  return align_branch(D, Q, false);
}

Eigen::Vector3d project_against(const Eigen::Vector3d& v, const Eigen::Vector3d& fixed, Rng& rng,
                                size_t* rerandomized)
{
  Eigen::Vector3d out = v - v.dot(fixed) * fixed;
  double nrm = out.norm();
  while (nrm < 1e-9) {
    if (rerandomized) ++(*rerandomized);
    Eigen::Vector3d draw{rng.normal(), rng.normal(), rng.normal()};
    out = draw - draw.dot(fixed) * fixed;
    nrm = out.norm();
  }
  return out / nrm;
}

std::pair<PoseSet, OptTrace> coordinate_descent(const PoseSet& start, const ObjectiveInputs& in,
                                                const OptimizerConfig& cfg)
{
  check_config(cfg);
  const int n = start.n();
  if (in.n() != n) throw input_error("poseopt", "pose and table sizes disagree");
  double alpha = cfg.alpha > 0.0 ? cfg.alpha : 1.0 / n;
  double beta = cfg.beta > 0.0 ? cfg.beta : 1.0 / n;

  Rng rng(cfg.seed ^ 0xc0de);
  OptTrace trace;
  PoseSet pose = start;
  // Make the start feasible (the alignment stage only reduces |d.q|).
  for (int i = 0; i < n; ++i) {
    pose.D.row(i) /= pose.D.row(i).norm();
    pose.Q.row(i) =
      project_against(pose.Q.row(i), pose.D.row(i), rng, &trace.rerandomized_rows).transpose();
  }

  PoseSet best = pose;
  double best_j = objective(pose, in, cfg.loss);
  std::vector<double> best_history{best_j};
  int non_improving = 0;
  int since_decay = 0;

  for (int k = 0; k < cfg.k_max; ++k) {
    // D-step.
    {
      const Eigen::MatrixXd gd = pose.D * pose.D.transpose();
      const Eigen::MatrixXd z = in.A + (in.B.array() * gd.array()).matrix();
      const Eigen::MatrixXd pd = loss_derivative(gd - in.cosTheta, in.W, cfg.loss);
      const Eigen::MatrixXd pq =
        loss_derivative(pose.Q * pose.Q.transpose() - z, in.W, cfg.loss);
      const Eigen::MatrixXd grad_d =
        2.0 * pd * pose.D - 2.0 * (in.B.array() * pq.array()).matrix() * pose.D;
      if (!grad_d.allFinite()) throw numerical_error("poseopt", "non-finite D gradient");
      pose.D -= alpha * grad_d;
      for (int i = 0; i < n; ++i)
        pose.D.row(i) =
          project_against(pose.D.row(i), pose.Q.row(i), rng, &trace.rerandomized_rows).transpose();
    }
    // Q-step with Z recomputed from the updated D.
    {
      const Eigen::MatrixXd gd = pose.D * pose.D.transpose();
      const Eigen::MatrixXd z = in.A + (in.B.array() * gd.array()).matrix();
      const Eigen::MatrixXd pq =
        loss_derivative(pose.Q * pose.Q.transpose() - z, in.W, cfg.loss);
      const Eigen::MatrixXd grad_q = 2.0 * pq * pose.Q;
      if (!grad_q.allFinite()) throw numerical_error("poseopt", "non-finite Q gradient");
      pose.Q -= beta * grad_q;
      for (int i = 0; i < n; ++i)
        pose.Q.row(i) =
          project_against(pose.Q.row(i), pose.D.row(i), rng, &trace.rerandomized_rows).transpose();
    }

    const double j = objective(pose, in, cfg.loss);
    if (!std::isfinite(j)) throw numerical_error("poseopt", "objective diverged");
    const bool improved = j < best_j;
    if (improved) {
      best_j = j;
      best = pose;
      non_improving = 0;
    }
    ++since_decay;
    if (!improved && ++non_improving >= 200) {
      // Halve the steps and resume from the best iterate: the subgradient
      // walk at an unproductive step size drifts far from the incumbent.
      alpha *= 0.5;
      beta *= 0.5;
      pose = best;
      non_improving = 0;
      since_decay = 0;
    }
    trace.objective.push_back(j);
    trace.max_violation.push_back(pose.max_violation());
    trace.step_alpha.push_back(alpha);
    trace.accepted.push_back(improved ? 1 : 0);
    best_history.push_back(best_j);

    // The plateau stop must not race the decay schedule: it is evaluated only
    // once the current step size has had a full decay period to prove itself.
    const size_t h = best_history.size();
    if (since_decay >= 250 && h > 50 && best_history[h - 51] - best_j < cfg.tol) break;
  }
  return {best, trace};
}

std::vector<Rotation> assemble_rotations(const PoseSet& pose)
{
  if (pose.max_violation() > 1e-6)
    throw input_error("poseopt", "pose constraints violated beyond 1e-6");
  std::vector<Rotation> out;
  out.reserve(pose.n());
  for (int i = 0; i < pose.n(); ++i) {
    const Eigen::Vector3d d = pose.D.row(i).normalized();
    Eigen::Vector3d q = pose.Q.row(i).transpose();
    q = (q - q.dot(d) * d).normalized();
    Eigen::Matrix3d m;
    m.col(0) = q;
    m.col(1) = d.cross(q);
    m.col(2) = d;
    out.push_back(Rotation{m});
  }
  return out;
}

double commonline_consistency(const PoseSet& pose, const ObjectiveInputs& in)
{
  const int n = pose.n();
  double score = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d di = pose.D.row(i), qi = pose.Q.row(i);
    const Eigen::Vector3d yi = di.cross(qi);
    for (int j = i + 1; j < n; ++j) {
      if (in.W(i, j) <= 0.0) continue;
      const Eigen::Vector3d dj = pose.D.row(j), qj = pose.Q.row(j);
      const Eigen::Vector3d yj = dj.cross(qj);
      const Eigen::Vector3d ui = std::cos(in.C(i, j)) * qi + std::sin(in.C(i, j)) * yi;
      const Eigen::Vector3d uj = std::cos(in.C(j, i)) * qj + std::sin(in.C(j, i)) * yj;
      score += in.W(i, j) * (1.0 - ui.dot(uj));
    }
  }
  return score;
}

std::pair<PoseSet, OptTrace> estimate_poses(const ObjectiveInputs& in, const OptimizerConfig& cfg)
{
  const Eigen::MatrixXd d0 = init_viewing_dirs(in, cfg);
  const Eigen::MatrixXd q0 = init_inplane(in, d0, cfg);

  // Gram fits determine each embedding only up to an orthogonal transform,
  // but the detected lines are reproducible only when D carries a proper
  // transform of the truth and Q sits in the proper relative orientation.
  // Try both parities of each and let the line-direction consistency score
  // pick the start; the objective itself cannot see the difference.
  const Eigen::Matrix3d mirror = Eigen::Vector3d(1, 1, -1).asDiagonal();
  PoseSet best_start;
  double best_score = std::numeric_limits<double>::infinity();
  for (bool flip_d : {false, true}) {
    const Eigen::MatrixXd db = flip_d ? Eigen::MatrixXd(d0 * mirror) : d0;
    for (bool reflect : {false, true}) {
      const auto [r, value] = align_branch(db, q0, reflect);
      (void)value;
      PoseSet start{db, q0 * r.transpose()};
      const double score = commonline_consistency(start, in);
      if (score < best_score) {
        best_score = score;
        best_start = std::move(start);
      }
    }
  }
  return coordinate_descent(best_start, in, cfg);
}

}  // namespace clpose
