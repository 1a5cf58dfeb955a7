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

#include <string>
#include <vector>

#include "clpose/simdata.hpp"

namespace clpose {

// One experiment = one plain-text config ("key: value" lines). Unknown keys
// are rejected; the effective config is serialized into every output
// directory for provenance. All randomness derives from the single seed.
struct PipelineConfig {
  int n = 20;
  int side = 64;
  double snr = 0.0;        // <= 0: noiseless
  double shift_max = 0.0;  // uniform per-axis true shifts in [-max, max] px
  uint64_t seed = 1;

  int n_theta = 180;
  int n_r = 0;        // 0 -> side/2
  double rmax = 0.35;
  double fmin = 0.0;  // 0 -> 2/side

  int T = 60;

  double alpha = 0.0;  // 0 -> 1/n
  double beta = 0.0;
  int k_max = 2000;
  double tol = 1e-7;
  int restarts = 4;
  std::string loss = "l1";  // or "l2" (ablation)

  double s_range = 0.0;  // 0 -> side/8
  double s_step = 0.25;
  double epsilon = 0.05;
  int max_rounds = 10;
  double ncc_min = -1.0;

  int n_shells = 0;  // 0 -> side/2
  int mask = 1;             // circular support mask before pose detection
  double mask_radius = 0.75;
  double mask_taper = 0.3;  // fractions of the half-side
  int do_shifts = 1;
  int do_fsc = 1;
  int threads = 0;  // 0: leave the OpenMP default

  std::string phantom = "default";          // or "blobs" with blob: lines
  std::vector<std::vector<double>> blobs;   // cx cy cz sigma amplitude

  static PipelineConfig from_file(const std::string& path);
  static PipelineConfig from_text(const std::string& text);
  std::string serialize() const;
  void validate() const;

  GaussianBlobPhantom make_phantom_spec() const;
};

// Entry point shared by the binary and the tests. Returns the process exit
// code (0 ok, 2 config error, 3 input error, 4 numerical failure).
int cli_run(const std::vector<std::string>& args);

}  // namespace clpose
