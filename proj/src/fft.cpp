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

#include "clpose/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "clpose/error.hpp"

namespace clpose {

namespace {

std::mutex plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> plan_cache;  // (rank, side, sign)

fftw_plan get_plan(int rank, int side, int sign)
{
  std::lock_guard<std::mutex> lock(plan_mutex);
  const auto key = std::make_tuple(rank, side, sign);
  auto it = plan_cache.find(key);
  if (it != plan_cache.end()) return it->second;

  size_t total = 1;
  for (int i = 0; i < rank; ++i) total *= static_cast<size_t>(side);
  fftw_complex* buf = fftw_alloc_complex(total);
  fftw_plan plan = nullptr;
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  if (rank == 2) {
    plan = fftw_plan_dft_2d(side, side, buf, buf, sign, flags);
  } else {
    plan = fftw_plan_dft_3d(side, side, side, buf, buf, sign, flags);
  }
  fftw_free(buf);
  if (!plan) throw numerical_error("fft", "failed to create FFTW plan");
  plan_cache.emplace(key, plan);
  return plan;
}

void execute(std::vector<std::complex<double>>& data, int rank, int side, bool inverse)
{
  size_t total = 1;
  for (int i = 0; i < rank; ++i) total *= static_cast<size_t>(side);
  if (data.size() != total) throw numerical_error("fft", "buffer size does not match transform size");
  fftw_plan plan = get_plan(rank, side, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  auto* raw = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, raw, raw);
}

}  // namespace

void fft2(std::vector<std::complex<double>>& data, int side, bool inverse)
{
  execute(data, 2, side, inverse);
}

void fft3(std::vector<std::complex<double>>& data, int side, bool inverse)
{
  execute(data, 3, side, inverse);
}

}  // namespace clpose
