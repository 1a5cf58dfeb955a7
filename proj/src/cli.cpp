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

#include "clpose/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "clpose/commonline.hpp"
#include "clpose/error.hpp"
#include "clpose/eval.hpp"
#include "clpose/io.hpp"
#include "clpose/polarfft.hpp"
#include "clpose/poseopt.hpp"
#include "clpose/rng.hpp"
#include "clpose/shiftfix.hpp"

namespace clpose {

namespace {

namespace fs = std::filesystem;

int parse_int(const std::string& v, const std::string& key)
{
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("bad integer '" + v + "' for key '" + key + "'");
  }
}

double parse_dbl(const std::string& v, const std::string& key)
{
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("bad number '" + v + "' for key '" + key + "'");
  }
}

struct Paths {
  fs::path out;
  fs::path config() const { return out / "config.txt"; }
  fs::path phantom() const { return out / "phantom.cpv"; }
  fs::path stack() const { return out / "stack.cps"; }
  fs::path shifts_est() const { return out / "shifts_est.txt"; }
  fs::path shift_trace() const { return out / "shift_trace.csv"; }
  fs::path poses_est() const { return out / "poses_est.txt"; }
  fs::path pose_trace() const { return out / "pose_trace.csv"; }
  fs::path commonlines() const { return out / "commonlines.csv"; }
  fs::path polar_dump() const { return out / "polar.cpb"; }
  fs::path metrics_csv() const { return out / "metrics.csv"; }
  fs::path metrics_txt() const { return out / "metrics.txt"; }
  fs::path recon() const { return out / "recon.cpv"; }
  fs::path fsc_csv() const { return out / "fsc.csv"; }
};

struct StageOptions {
  bool trace = false;
  bool shift_trace = false;
  bool dump_commonlines = false;
  bool dump_polar = false;
  std::string stack_path;   // optional override
  std::string shifts_path;  // optional override
  std::string poses_path;   // optional override
};

void prepare_out(const PipelineConfig& cfg, const Paths& paths)
{
  fs::create_directories(paths.out);
  std::ofstream f(paths.config());
  if (!f) throw input_error("cli", "cannot write " + paths.config().string());
  f << cfg.serialize();
}

PolarConfig polar_config(const PipelineConfig& cfg)
{
  PolarConfig pc;
  pc.n_theta = cfg.n_theta;
  pc.n_r = cfg.n_r;
  pc.rmax = cfg.rmax;
  pc.fmin = cfg.fmin;
  return pc;
}

void run_simulate(const PipelineConfig& cfg, const Paths& paths)
{
  const auto rots = random_rotations(cfg.n, derive_seed(cfg.seed, 1));
  std::vector<Eigen::Vector2d> shifts;
  if (cfg.shift_max > 0.0) {
    Rng rng(derive_seed(cfg.seed, 2));
    shifts.resize(cfg.n);
    for (auto& s : shifts)
      s = {rng.uniform(-cfg.shift_max, cfg.shift_max), rng.uniform(-cfg.shift_max, cfg.shift_max)};
  }
  const GaussianBlobPhantom phantom = cfg.make_phantom_spec();
  const ProjectionStack stack =
    simulate_stack(phantom, cfg.side, rots, shifts, cfg.snr, derive_seed(cfg.seed, 3));
  save_volume(paths.phantom().string(), make_phantom(phantom, cfg.side));
  save_stack(paths.stack().string(), stack);
}

std::string stack_input(const StageOptions& opt, const Paths& paths)
{
  return opt.stack_path.empty() ? paths.stack().string() : opt.stack_path;
}

void run_shifts(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opt)
{
  const ProjectionStack stack = load_stack(stack_input(opt, paths));
  const PolarStack pol = polar_transform(stack, polar_config(cfg));
  if (opt.dump_polar) save_polar(paths.polar_dump().string(), pol);

  ShiftRefineConfig rc;
  rc.epsilon = cfg.epsilon;
  rc.max_rounds = cfg.max_rounds;
  rc.s_range = cfg.s_range;
  rc.s_step = cfg.s_step;
  rc.ncc_min = cfg.ncc_min;
  const ShiftRefineResult res = refine_shifts(pol, Eigen::VectorXd(), rc);
  save_shifts(paths.shifts_est().string(), shifts_from_vector(res.estimate.x));
  if (opt.shift_trace) {
    std::ofstream f(paths.shift_trace());
    f << "round,residual,step_inf,cl_agreement\n";
    for (const auto& r : res.history)
      f << r.round << "," << format_double(r.residual) << "," << format_double(r.step_norm) << ","
        << format_double(r.cl_agreement) << "\n";
  }
}

void run_poses(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opt)
{
  ProjectionStack stack = load_stack(stack_input(opt, paths));

  // Re-center in image space with the estimated shifts, then mask the
  // pure-noise area outside the particle support before the transform.
  std::string shifts_file = opt.shifts_path;
  if (shifts_file.empty() && fs::exists(paths.shifts_est())) shifts_file = paths.shifts_est().string();
  if (!shifts_file.empty()) {
    auto shifts = load_shifts(shifts_file);
    if (static_cast<int>(shifts.size()) != stack.n)
      throw input_error("cli", "shift estimate count differs from the stack");
    // True shifts are bounded by side/8; clip runaway estimates to the
    // physically valid range instead of rejecting the whole stack.
    const double cap = stack.side / 8.0;
    for (auto& s : shifts) s = s.cwiseMax(-cap).cwiseMin(cap);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < stack.n; ++k)
      stack.images[k] = apply_shift(stack.images[k], -shifts[k].x(), -shifts[k].y());
  }
  if (cfg.mask) stack = masked_stack(stack, cfg.mask_radius, cfg.mask_taper);

  const PolarStack pol = polar_transform(stack, polar_config(cfg));
  const CommonLineTable cl = detect_common_lines(pol);
  const DihedralTable dih = vote_dihedrals(cl, cfg.T);
  if (opt.dump_commonlines) {
    std::ofstream f(paths.commonlines());
    f << "i,j,c_ij,c_ji,ncc,theta_ij,w_ij\n";
    for (int i = 0; i < cl.n; ++i)
      for (int j = i + 1; j < cl.n; ++j)
        f << i << "," << j << "," << cl.cl(i, j) << "," << cl.cl(j, i) << ","
          << format_double(cl.ncc(i, j)) << "," << format_double(dih.theta(i, j)) << ","
          << format_double(dih.W(i, j)) << "\n";
  }

  const ObjectiveInputs inputs = ObjectiveInputs::from_tables(dih, cl);
  OptimizerConfig oc;
  oc.alpha = cfg.alpha;
  oc.beta = cfg.beta;
  oc.k_max = cfg.k_max;
  oc.tol = cfg.tol;
  oc.restarts = cfg.restarts;
  oc.seed = derive_seed(cfg.seed, 4);
  oc.loss = cfg.loss == "l2" ? Loss::l2 : Loss::l1;
  const auto [pose, trace] = estimate_poses(inputs, oc);
  save_rotations(paths.poses_est().string(), assemble_rotations(pose));
  if (opt.trace) {
    std::ofstream f(paths.pose_trace());
    f << "iter,objective,max_violation,step,accepted\n";
    for (size_t k = 0; k < trace.objective.size(); ++k)
      f << k + 1 << "," << format_double(trace.objective[k]) << ","
        << format_double(trace.max_violation[k]) << "," << format_double(trace.step_alpha[k]) << ","
        << int(trace.accepted[k]) << "\n";
  }
}

void write_metrics(const MetricReport& rep, const AlignmentResult& align, const Paths& paths)
{
  {
    std::ofstream f(paths.metrics_csv());
    f << "metric,value\n";
    f << "theta_mae_rad," << format_double(rep.theta_mae) << "\n";
    f << "phi_mae_rad," << format_double(rep.phi_mae) << "\n";
    f << "inplane_err_deg," << format_double(rep.inplane_err_deg) << "\n";
    f << "normal_err_deg," << format_double(rep.normal_err_deg) << "\n";
    f << "euler_alpha_mse," << format_double(rep.euler_mse[0]) << "\n";
    f << "euler_beta_mse," << format_double(rep.euler_mse[1]) << "\n";
    f << "euler_gamma_mse," << format_double(rep.euler_mse[2]) << "\n";
    if (rep.shift_rms_px) f << "shift_rms_px," << format_double(*rep.shift_rms_px) << "\n";
    f << "reflected," << (align.reflected ? 1 : 0) << "\n";
  }
  std::ofstream f(paths.metrics_txt());
  f << "pose/shift estimation vs ground truth\n";
  f << "  dihedral angle MAE      " << format_double(rep.theta_mae) << " rad\n";
  f << "  in-plane angle MAE      " << format_double(rep.phi_mae) << " rad\n";
  f << "  in-plane rotation error " << format_double(rep.inplane_err_deg) << " deg\n";
  f << "  normal vector error     " << format_double(rep.normal_err_deg) << " deg\n";
  f << "  euler MSE (a, b, g)     " << format_double(rep.euler_mse[0]) << " "
    << format_double(rep.euler_mse[1]) << " " << format_double(rep.euler_mse[2]) << "\n";
  if (rep.shift_rms_px) f << "  shift RMS (observable)  " << format_double(*rep.shift_rms_px) << " px\n";
  f << "  chirality branch        " << (align.reflected ? "mirrored" : "direct") << "\n";
}

void run_evaluate(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opt)
{
  (void)cfg;
  const ProjectionStack stack = load_stack(stack_input(opt, paths));
  if (stack.true_rotations.empty())
    throw input_error("cli", "stack has no ground-truth rotations to evaluate against");
  const std::string poses_file =
    opt.poses_path.empty() ? paths.poses_est().string() : opt.poses_path;
  const auto est = load_rotations(poses_file);
  if (est.size() != stack.true_rotations.size())
    throw input_error("cli", "estimated pose count differs from the stack");

  const AlignmentResult align = align_global(est, stack.true_rotations);
  MetricReport rep;
  std::string shifts_file = opt.shifts_path;
  if (shifts_file.empty() && fs::exists(paths.shifts_est())) shifts_file = paths.shifts_est().string();
  if (!shifts_file.empty() && !stack.true_shifts.empty()) {
    const auto est_shifts = load_shifts(shifts_file);
    rep = metrics(align.aligned, stack.true_rotations, &est_shifts, &stack.true_shifts);
  } else {
    rep = metrics(align.aligned, stack.true_rotations);
  }
  write_metrics(rep, align, paths);
}

void run_fsc_files(const std::string& v1, const std::string& v2, const std::string& out_csv,
                   int shells)
{
  const Volume a = load_volume(v1);
  const Volume b = load_volume(v2);
  const int n_shells = shells > 0 ? shells : a.side / 2;
  const FscCurve curve = fsc(a, b, n_shells);
  std::ofstream f(out_csv);
  if (!f) throw input_error("cli", "cannot write " + out_csv);
  f << "freq_cycles_per_voxel,fsc\n";
  for (size_t s = 0; s < curve.corr.size(); ++s)
    f << format_double(curve.shell_freq[s]) << "," << format_double(curve.corr[s]) << "\n";
}

void run_reconstruct_fsc(const PipelineConfig& cfg, const Paths& paths, const StageOptions& opt)
{
  const ProjectionStack stack = load_stack(stack_input(opt, paths));
  auto poses = load_rotations(paths.poses_est().string());
  // Estimated poses live in an arbitrary global frame (and chirality
  // branch); align them to the ground truth so the sanity volume is
  // comparable with the phantom.
  if (!stack.true_rotations.empty()) poses = align_global(poses, stack.true_rotations).aligned;
  std::vector<Eigen::Vector2d> shifts;
  if (fs::exists(paths.shifts_est())) shifts = load_shifts(paths.shifts_est().string());
  const Volume recon = gridding_reconstruct(stack, poses, shifts);
  save_volume(paths.recon().string(), recon);
  run_fsc_files(paths.phantom().string(), paths.recon().string(), paths.fsc_csv().string(),
                cfg.n_shells > 0 ? cfg.n_shells : cfg.side / 2);
}

}  // namespace

PipelineConfig PipelineConfig::from_text(const std::string& text)
{
  PipelineConfig cfg;
  for (const auto& [key, value] : parse_kv_text(text)) {
    if (key == "n") cfg.n = parse_int(value, key);
    else if (key == "side") cfg.side = parse_int(value, key);
    else if (key == "snr") cfg.snr = parse_dbl(value, key);
    else if (key == "shift_max") cfg.shift_max = parse_dbl(value, key);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "n_theta") cfg.n_theta = parse_int(value, key);
    else if (key == "n_r") cfg.n_r = parse_int(value, key);
    else if (key == "rmax") cfg.rmax = parse_dbl(value, key);
    else if (key == "fmin") cfg.fmin = parse_dbl(value, key);
    else if (key == "T") cfg.T = parse_int(value, key);
    else if (key == "alpha") cfg.alpha = parse_dbl(value, key);
    else if (key == "beta") cfg.beta = parse_dbl(value, key);
    else if (key == "k_max") cfg.k_max = parse_int(value, key);
    else if (key == "tol") cfg.tol = parse_dbl(value, key);
    else if (key == "restarts") cfg.restarts = parse_int(value, key);
    else if (key == "loss") cfg.loss = value;
    else if (key == "s_range") cfg.s_range = parse_dbl(value, key);
    else if (key == "s_step") cfg.s_step = parse_dbl(value, key);
    else if (key == "epsilon") cfg.epsilon = parse_dbl(value, key);
    else if (key == "max_rounds") cfg.max_rounds = parse_int(value, key);
    else if (key == "ncc_min") cfg.ncc_min = parse_dbl(value, key);
    else if (key == "n_shells") cfg.n_shells = parse_int(value, key);
    else if (key == "mask") cfg.mask = parse_int(value, key);
    else if (key == "mask_radius") cfg.mask_radius = parse_dbl(value, key);
    else if (key == "mask_taper") cfg.mask_taper = parse_dbl(value, key);
    else if (key == "do_shifts") cfg.do_shifts = parse_int(value, key);
    else if (key == "do_fsc") cfg.do_fsc = parse_int(value, key);
    else if (key == "threads") cfg.threads = parse_int(value, key);
    else if (key == "phantom") cfg.phantom = value;
    else if (key == "blob") {
      std::istringstream ss(value);
      std::vector<double> b(5);
      for (double& x : b)
        if (!(ss >> x)) throw config_error("blob needs 5 numbers: cx cy cz sigma amplitude");
      cfg.blobs.push_back(b);
    } else {
      throw config_error("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path)
{
  std::ifstream f(path);
  if (!f) throw input_error("cli", "cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

void PipelineConfig::validate() const
{
  if (n < 3) throw config_error("n must be >= 3");
  if (side < 8) throw config_error("side must be >= 8");
  if (k_max < 1) throw config_error("k_max must be >= 1");
  if (T < 18) throw config_error("T must be >= 18");
  if (loss != "l1" && loss != "l2") throw config_error("loss must be 'l1' or 'l2'");
  if (phantom != "default" && phantom != "blobs")
    throw config_error("phantom must be 'default' or 'blobs'");
  if (phantom == "blobs" && blobs.empty()) throw config_error("phantom 'blobs' needs blob: lines");
  if (shift_max < 0.0 || shift_max > side / 8.0)
    throw config_error("shift_max must be in [0, side/8]");
  if (mask && (!(mask_radius > 0.0) || mask_radius > 1.0 || mask_taper < 0.0 ||
               mask_taper >= mask_radius))
    throw config_error("mask needs 0 <= mask_taper < mask_radius <= 1");
  if (n_r != 0 && n_r < side / 2) throw config_error("n_r must be 0 (auto) or >= side/2");
  if (!(rmax > 0.0) || rmax > 0.5) throw config_error("rmax must be in (0, 0.5]");
  if (fmin < 0.0 || (fmin > 0.0 && fmin >= rmax)) throw config_error("fmin must be 0 (auto) or < rmax");
}

std::string PipelineConfig::serialize() const
{
  std::ostringstream f;
  f << "n: " << n << "\n";
  f << "side: " << side << "\n";
  f << "snr: " << format_double(snr) << "\n";
  f << "shift_max: " << format_double(shift_max) << "\n";
  f << "seed: " << seed << "\n";
  f << "n_theta: " << n_theta << "\n";
  f << "n_r: " << n_r << "\n";
  f << "rmax: " << format_double(rmax) << "\n";
  f << "fmin: " << format_double(fmin) << "\n";
  f << "T: " << T << "\n";
  f << "alpha: " << format_double(alpha) << "\n";
  f << "beta: " << format_double(beta) << "\n";
  f << "k_max: " << k_max << "\n";
  f << "tol: " << format_double(tol) << "\n";
  f << "restarts: " << restarts << "\n";
  f << "loss: " << loss << "\n";
  f << "s_range: " << format_double(s_range) << "\n";
  f << "s_step: " << format_double(s_step) << "\n";
  f << "epsilon: " << format_double(epsilon) << "\n";
  f << "max_rounds: " << max_rounds << "\n";
  f << "ncc_min: " << format_double(ncc_min) << "\n";
  f << "n_shells: " << n_shells << "\n";
  f << "mask: " << mask << "\n";
  f << "mask_radius: " << format_double(mask_radius) << "\n";
  f << "mask_taper: " << format_double(mask_taper) << "\n";
  f << "do_shifts: " << do_shifts << "\n";
  f << "do_fsc: " << do_fsc << "\n";
  f << "threads: " << threads << "\n";
  f << "phantom: " << phantom << "\n";
  for (const auto& b : blobs) {
    f << "blob:";
    for (double x : b) f << " " << format_double(x);
    f << "\n";
  }
  return f.str();
}

GaussianBlobPhantom PipelineConfig::make_phantom_spec() const
{
  if (phantom == "default") return default_phantom();
  GaussianBlobPhantom p;
  for (const auto& b : blobs) p.blobs.push_back({{b[0], b[1], b[2]}, b[3], b[4]});
  return p;
}

int cli_run(const std::vector<std::string>& args)
{
  CLI::App app{"common-line pose and shift estimation on synthetic projection stacks"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = 0;
  StageOptions opt;
  app.add_option("--threads", threads, "cap OpenMP worker count");

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config) sub->add_option("--config", config_path, "experiment config file");
    sub->add_option("--out", out_dir, "output directory")->required();
  };

  auto* sim = app.add_subcommand("simulate", "generate phantom and projection stack");
  add_common(sim);
  auto* shifts = app.add_subcommand("shifts", "iterative in-plane shift refinement");
  add_common(shifts);
  shifts->add_option("--stack", opt.stack_path, "input stack (default: <out>/stack.cps)");
  shifts->add_flag("--shift-trace", opt.shift_trace, "write per-round diagnostics CSV");
  shifts->add_flag("--dump-polar", opt.dump_polar, "dump the polar transform (debug)");
  auto* poses = app.add_subcommand("poses", "common lines, voting and pose optimization");
  add_common(poses);
  poses->add_option("--stack", opt.stack_path, "input stack (default: <out>/stack.cps)");
  poses->add_option("--shifts", opt.shifts_path, "shift estimates to correct with");
  poses->add_flag("--trace", opt.trace, "write optimizer trace CSV");
  poses->add_flag("--dump-commonlines", opt.dump_commonlines, "write common-line table CSV");
  auto* evaluate = app.add_subcommand("evaluate", "score estimates against ground truth");
  add_common(evaluate);
  evaluate->add_option("--stack", opt.stack_path, "input stack (default: <out>/stack.cps)");
  evaluate->add_option("--poses", opt.poses_path, "estimated poses (default: <out>/poses_est.txt)");
  evaluate->add_option("--shifts", opt.shifts_path, "estimated shifts");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage");
  add_common(pipeline);
  pipeline->add_flag("--trace", opt.trace, "write optimizer trace CSV");
  pipeline->add_flag("--shift-trace", opt.shift_trace, "write per-round diagnostics CSV");
  pipeline->add_flag("--dump-commonlines", opt.dump_commonlines, "write common-line table CSV");
  pipeline->add_flag("--dump-polar", opt.dump_polar, "dump the polar transform (debug)");
  auto* fsc_cmd = app.add_subcommand("fsc", "Fourier shell correlation of two volumes");
  std::string v1, v2, fsc_out;
  int fsc_shells = 0;
  fsc_cmd->add_option("--v1", v1, "first volume")->required();
  fsc_cmd->add_option("--v2", v2, "second volume")->required();
  fsc_cmd->add_option("--out", fsc_out, "output CSV")->required();
  fsc_cmd->add_option("--shells", fsc_shells, "number of shells (default side/2)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream dummy;
    const int code = app.exit(e, dummy, dummy);
    std::cerr << dummy.str();
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) omp_set_num_threads(threads);

    if (fsc_cmd->parsed()) {
      run_fsc_files(v1, v2, fsc_out, fsc_shells);
      return 0;
    }

    PipelineConfig cfg =
      config_path.empty() ? PipelineConfig{} : PipelineConfig::from_file(config_path);
    if (cfg.threads > 0 && threads == 0) omp_set_num_threads(cfg.threads);
    Paths paths{fs::path(out_dir)};
    prepare_out(cfg, paths);

    if (sim->parsed()) {
      run_simulate(cfg, paths);
    } else if (shifts->parsed()) {
      run_shifts(cfg, paths, opt);
    } else if (poses->parsed()) {
      run_poses(cfg, paths, opt);
    } else if (evaluate->parsed()) {
      run_evaluate(cfg, paths, opt);
    } else if (pipeline->parsed()) {
      run_simulate(cfg, paths);
      if (cfg.do_shifts) run_shifts(cfg, paths, opt);
      run_poses(cfg, paths, opt);
      run_evaluate(cfg, paths, opt);
      if (cfg.do_fsc) run_reconstruct_fsc(cfg, paths, opt);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace clpose
