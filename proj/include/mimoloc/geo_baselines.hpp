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

#include "mimoloc/common.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>

namespace mimoloc
{

/// One anchor (a sub-array) with whatever it measured towards the UE, in the 2-D plane.
struct AnchorObservation
{
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    double orientation = 0.0;     // boresight bearing [rad], counter-clockwise from +x
    std::optional<double> aoa;    // counter-clockwise from boresight [rad]
    std::optional<double> range;  // [m]
    std::optional<double> amp_db; // path amplitude [dB]

    double bearing() const { return orientation + aoa.value_or(0.0); }
};

struct PositionFix
{
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    double residual = 0.0; // RMS line distance (triangulation) or range residual (trilateration) [m]
};

/// Least-squares intersection of bearing lines. Throws DegenerateGeometry for (near-)parallel bearings.
PositionFix triangulate_aoa(std::span<const AnchorObservation> observations, double max_condition = 1e6);

/// Difference-of-squares linear solve followed by one Gauss-Newton pass. Throws DegenerateGeometry for collinear anchors.
PositionFix trilaterate(std::span<const AnchorObservation> observations, double max_condition = 1e6);

/// Log-distance path loss: amp_db = reference_db - 10 * exponent * log10(r / reference_distance).
struct PathLossModel
{
    double reference_db = 0.0;
    double reference_distance = 1.0; // [m]
    double exponent = 2.0;
    double min_range = 0.05; // [m], lower clamp
};

struct RangeEstimate
{
    double range = 0.0;
    bool clamped = false; // amplitude implied a range below min_range
};

RangeEstimate amp_to_range(double amp_db, const PathLossModel &model);

/// Least-squares reference level for a fixed exponent from (amplitude, true range) pairs.
PathLossModel fit_path_loss(std::span<const double> amp_db, std::span<const double> ranges, double exponent = 2.0);

} // namespace mimoloc
