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

#include <complex>
#include <vector>

namespace clpose {

// Thin wrappers over FFTW (double precision, FFTW_ESTIMATE plans, so results
// are reproducible run to run). Unnormalized transforms: inverse(forward(x))
// = N * x. Plan creation is serialized internally; execution is thread-safe
// on distinct buffers.
void fft2(std::vector<std::complex<double>>& data, int side, bool inverse);
void fft3(std::vector<std::complex<double>>& data, int side, bool inverse);

// Signed frequency index for DFT bin k of an N-point transform.
inline int signed_freq(int k, int n) { return (k <= n / 2) ? k : k - n; }

}  // namespace clpose
