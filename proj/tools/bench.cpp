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

// Compares the OpenMP kernels against their serial reference
// implementations on a medium-size problem and reports timings.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "clpose/commonline.hpp"
#include "clpose/polarfft.hpp"
#include "clpose/shiftfix.hpp"
#include "clpose/simdata.hpp"

using namespace clpose;

namespace {

double now_s()
{
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <typename F>
double time_call(F&& f)
{
  const double t0 = now_s();
  f();
  return now_s() - t0;
}

void report(const char* name, double serial_s, double parallel_s)
{
  std::printf("%-22s serial %8.3f s   omp %8.3f s   speedup %5.2fx\n", name, serial_s, parallel_s,
              serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv)
{
  int n = 24;
  int side = 64;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--n") n = std::stoi(argv[i + 1]);
    else if (key == "--side") side = std::stoi(argv[i + 1]);
  }
  std::printf("benchmark: %d projections, side %d, %d threads\n", n, side, omp_get_max_threads());

  const GaussianBlobPhantom phantom = default_phantom();
  Volume vol;
  const double t_phantom_ser = time_call([&] { vol = ref::make_phantom(phantom, side); });
  const double t_phantom_omp = time_call([&] { vol = make_phantom(phantom, side); });
  report("make_phantom", t_phantom_ser, t_phantom_omp);

  const auto rots = random_rotations(n, 7);
  std::vector<Image> imgs;
  const double t_proj_ser = time_call([&] { imgs = ref::project_stack(vol, rots); });
  const double t_proj_omp = time_call([&] { imgs = project_stack(vol, rots); });
  report("project_stack", t_proj_ser, t_proj_omp);

  ProjectionStack stack;
  stack.n = n;
  stack.side = side;
  stack.images = imgs;
  PolarStack pol;
  const double t_polar_ser = time_call([&] { pol = ref::polar_transform(stack); });
  const double t_polar_omp = time_call([&] { pol = polar_transform(stack); });
  report("polar_transform", t_polar_ser, t_polar_omp);

  CommonLineTable cl;
  const double t_cl_ser = time_call([&] { cl = ref::detect_common_lines(pol); });
  const double t_cl_omp = time_call([&] { cl = detect_common_lines(pol); });
  report("detect_common_lines", t_cl_ser, t_cl_omp);

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!cl.pair_degenerate(i, j)) pairs.emplace_back(i, j);
  const double s_range = side / 8.0;
  std::vector<double> offsets;
  const double t_shift_ser =
    time_call([&] { offsets = ref::pair_offsets(pol, cl, pairs, s_range, 0.25); });
  ShiftSystem sys;
  const double t_shift_omp = time_call([&] { sys = build_system(pol, pol, cl, s_range, 0.25); });
  report("ray shift estimation", t_shift_ser, t_shift_omp);

  return 0;
}
