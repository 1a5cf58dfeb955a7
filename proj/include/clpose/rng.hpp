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

#include <cmath>
#include <cstdint>

namespace clpose {

// Self-contained xoshiro256++ generator with splitmix64 seeding. All
// randomness in the library flows through this class so that results are
// reproducible bit-for-bit across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed)
  {
    uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
    have_cached_ = false;
  }

  // Independent child stream; does not disturb this generator's state.
  Rng split(uint64_t salt) const
  {
    uint64_t x = s_[0] ^ (salt * 0x9e3779b97f4a7c15ull) ^ (s_[2] + salt);
    return Rng(splitmix64(x));
  }

  uint64_t next_u64()
  {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller, one value cached.
  double normal()
  {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  static uint64_t splitmix64(uint64_t& x)
  {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Deterministic per-stage seed derivation from a single root seed.
inline uint64_t derive_seed(uint64_t root, uint64_t stage)
{
  uint64_t x = root ^ (0xa0761d6478bd642full * (stage + 1));
  return Rng::splitmix64(x);
}

}  // namespace clpose
