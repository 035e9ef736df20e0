/* Copyright 2026 The LVW Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "core/rng.hpp"

#include <cmath>
#include <sstream>

#include "core/errors.hpp"

namespace lvw {

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) throw ArgumentError("uniform_int: n must be positive");
  uint64_t bound = static_cast<uint64_t>(n);
  // Rejection sampling over the largest multiple of n to avoid modulo bias.
  uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int64_t>(x % bound);
}

double Rng::normal() {
  // Box-Muller; u clamped away from 0 so log() is finite.
  double u = uniform();
  if (u < 1e-300) u = 1e-300;
  double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

Rng Rng::fork(uint64_t tag) {
  // splitmix64 over (fresh draw, tag) decorrelates derived streams.
  uint64_t z = engine_() + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return Rng(z);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

Rng Rng::deserialize(const std::string& state) {
  Rng r;
  std::istringstream is(state);
  is >> r.engine_;
  if (is.fail()) throw ArgumentError("invalid RNG state string");
  return r;
}

}  // namespace lvw
