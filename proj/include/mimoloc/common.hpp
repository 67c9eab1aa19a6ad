// SPDX-License-Identifier: Apache-2.0
//
// mimoloc: multipath-component localization toolkit for massive MIMO-OFDM CSI
// Copyright (C) 2026 The mimoloc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mimoloc
{

using cdouble = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0; // m/s

/// Raised when an argument violates a documented precondition.
class InvalidInput : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by the geometric solvers for parallel bearings or collinear anchors.
class DegenerateGeometry : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_phase(double x)
{
    double w = std::remainder(x, 2.0 * kPi); // [-pi, pi]
    if (w <= -kPi)
        w += 2.0 * kPi;
    return w;
}

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

inline double db10(double linear) { return 10.0 * std::log10(linear); }
inline double db20(double amplitude) { return 20.0 * std::log10(amplitude); }

// Deterministic 64-bit mixer (splitmix64 finalizer). Per-sample seeds are
// derived as mix_seed(base_seed, sample_index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace mimoloc
