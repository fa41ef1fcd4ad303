// Copyright 2026 The ebmvar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EBMVAR_RNG_HPP
#define EBMVAR_RNG_HPP

// Counter-based Philox4x32-10 generator. Every Gaussian draw is a pure
// function of (seed, path, step, block), so ensembles are reproducible under
// any path scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace ebmvar {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void philox_round(Philox4x32Counter& ctr, const Philox4x32Key& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

constexpr Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    detail::philox_round(ctr, key);
  }
  return ctr;
}

// Uniform on the open interval (0, 1) from 52 random bits.
constexpr double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 20) ^ (lo >> 12);
  return (static_cast<double>(bits & ((std::uint64_t{1} << 52) - 1)) + 0.5) * 0x1.0p-52;
}

// Identifies one independent random stream per ensemble path.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t path)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_(static_cast<std::uint32_t>(path)) {}

  // Two independent standard normals for (step, block).
  std::pair<double, double> pair(std::uint64_t step, std::uint32_t block = 0) const {
    const Philox4x32Counter ctr{block, static_cast<std::uint32_t>(step),
                                static_cast<std::uint32_t>(step >> 32), path_};
    const auto out = philox4x32_10(ctr, key_);
    const double u1 = to_open_unit(out[0], out[1]);
    const double u2 = to_open_unit(out[2], out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  // First normal only.
  double normal(std::uint64_t step) const { return pair(step).first; }

  // Fills out[0..n) with standard normals for one step.
  template <typename Out>
  void fill(std::uint64_t step, Out& out, std::size_t n) const {
    for (std::size_t k = 0; k < n; k += 2) {
      const auto [a, b] = pair(step, static_cast<std::uint32_t>(k / 2));
      out[k] = a;
      if (k + 1 < n) out[k + 1] = b;
    }
  }

 private:
  Philox4x32Key key_;
  std::uint32_t path_;
};

}  // namespace ebmvar

#endif  // EBMVAR_RNG_HPP
